# pylint: disable=missing-module-docstring
import math
from typing import Any

import jinja2

VERIFY_TEMPLATE = """\
{% for case in cases -%}
{{ "PASS" if case.passed else "FAIL" }}  {{ case.name }}\
{% if case.detail %}  ({{ case.detail }}){% endif %}
{% endfor -%}
{{ cases | selectattr("passed") | list | length }}/{{ cases | length }} cases passed on {{ device }}
"""

BENCH_TEMPLATE = """\
{% for summary in summaries -%}
{{ summary.subject }} on {{ summary.backend }}, {{ summary.parameter }} \
{{ summary.first_value }}..{{ summary.last_value }}: \
last/first mean {{ summary.ratio | ratio }}, spearman rho {{ summary.spearman_rho | ratio }}, \
real-time {{ summary.realtime_count }}/{{ summary.count }}
{% endfor -%}
{% for backend, pairs in speedups.items() -%}
speedup of {{ backend }} over {{ baseline }}: \
{% for value, speedup in pairs %}{{ value }}: {{ speedup | ratio }}x\
{% if not loop.last %}, {% endif %}{% endfor %}
{% endfor -%}
{% if written %}wrote {{ written }}
{% endif -%}
"""

DEVICES_TEMPLATE = """\
{% for device in devices -%}
{{ "%-12s" | format(device.name) }} {{ "%-12s" | format(device.kind) }} {{ device.detail }}
{% endfor -%}
"""


def format_ratio(value: float) -> str:
    """Ratios and correlations with three significant digits; NaN as "n/a"."""
    if math.isnan(value):
        return "n/a"
    return f"{value:.3g}"


class ReportEnvironment(jinja2.Environment):
    """Jinja2 environment holding the text reports printed by the CLI."""

    def __init__(self, *args, **kwargs):
        extensions: list = kwargs.pop("extensions", [])
        extensions.append("jinja2.ext.loopcontrols")
        kwargs["extensions"] = extensions
        kwargs["loader"] = jinja2.DictLoader(
            {"verify": VERIFY_TEMPLATE, "bench": BENCH_TEMPLATE, "devices": DEVICES_TEMPLATE}
        )
        kwargs.setdefault("keep_trailing_newline", True)
        super().__init__(*args, **kwargs)
        self.filters["ratio"] = format_ratio

    def render(self, name: str, **context: Any) -> str:
        """Render one of the named reports: "verify", "bench" or "devices"."""
        return self.get_template(name).render(**context)
