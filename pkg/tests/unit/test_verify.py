import numpy as np
import pytest

from fdl_auralizer import exceptions
from fdl_auralizer.blocks import Mode
from fdl_auralizer.oracle import simulate_closed_loop
from fdl_auralizer.verify import (
    VerificationCase,
    all_passed,
    grid_points,
    instability_cases,
    long_filter_case,
    oracle_case,
    perfect_cancellation_case,
    run_verification,
    tone_scenario,
)


def test_grid_points__sizes() -> None:
    small, full = grid_points("small"), grid_points("full")
    assert len(small) == 40
    assert len(full) == 216
    assert set(small) <= set(full)
    assert (128, 1280, 4, Mode.ELEMENTWISE, 2) in full
    assert {point[0] for point in small} == {16, 64}


def test_oracle_case__passes_on_reference() -> None:
    cases = oracle_case(16, 55, 4, Mode.BROADCAST, seed=1)
    assert len(cases) == 1
    assert cases[0].passed, cases[0].detail
    assert "n_h=55" in cases[0].name


@pytest.mark.parametrize(
    "n_x,n_h,blocks",
    [
        pytest.param(16, 1, 4, id="single tap"),
        pytest.param(16, 55, 7, id="partial last partition"),
        pytest.param(64, 640, 13, id="ten partitions"),
    ],
)
def test_oracle_case__streams_three_blocks_past_the_filter(
    n_x: int, n_h: int, blocks: int
) -> None:
    (case,) = oracle_case(n_x, n_h, 1, Mode.BROADCAST, seed=0)
    assert case.passed, case.detail
    assert case.detail.endswith(f"over {blocks} blocks")


def test_oracle_case__adds_backend_comparison() -> None:
    cases = oracle_case(16, 17, 4, Mode.ELEMENTWISE, seed=0, device="parallel")
    assert [case.name.split()[0] for case in cases] == ["oracle", "backend"]
    assert all_passed(cases)


def test_long_filter_case__reduced() -> None:
    case = long_filter_case(filter_length=48000, num_blocks=8, block_size=64)
    assert case.passed, case.detail
    assert "K=750" in case.name


def test_long_filter_case__ten_second_filter() -> None:
    case = long_filter_case()
    assert case.passed, case.detail
    assert case.name == "long filter n_h=480000 C_out=2 K=3750"


def test_perfect_cancellation_case() -> None:
    case = perfect_cancellation_case()
    assert case.passed, case.detail


def test_tone_scenario__repeats_every_block() -> None:
    scn = tone_scenario(cancel=False)
    blocks = scn.source.reshape(scn.num_blocks, scn.cfg.block_size)
    np.testing.assert_allclose(blocks[5], blocks[0], rtol=0, atol=1e-9)
    assert not np.any(scn.fc_filters)
    assert np.array_equal(tone_scenario(cancel=True).fc_filters, scn.true_feedback_paths)


def test_instability_cases__reference() -> None:
    cases = instability_cases()
    assert [case.name for case in cases] == [
        "closed loop instability without cancellation",
        "closed loop clean profile with cancellation",
        "loop margin",
    ]
    assert all_passed(cases), [case.detail for case in cases]


def test_instability__energy_grows_by_loop_gain() -> None:
    energy = simulate_closed_loop(tone_scenario(cancel=False)).block_energy("mic")
    # Block n carries sum_{i <= n} 1.2^i times the tone.
    growth = energy[12] / energy[11]
    expected = (sum(1.2**i for i in range(13)) / sum(1.2**i for i in range(12))) ** 2
    assert growth == pytest.approx(expected, rel=1e-4)


def test_run_verification__small_grid() -> None:
    cases = run_verification("small")
    assert len(cases) == 40 + 1 + 3
    failures = [f"{case.name}: {case.detail}" for case in cases if not case.passed]
    assert not failures


def test_run_verification__unknown_device() -> None:
    with pytest.raises(exceptions.BackendUnavailable):
        run_verification("small", device="tpu")


def test_all_passed() -> None:
    assert all_passed([VerificationCase("a", True)])
    assert not all_passed([VerificationCase("a", True), VerificationCase("b", False, "err")])
    with pytest.raises(exceptions.EmptyInput):
        all_passed([])
