from pathlib import Path

import numpy as np
import pytest
import soundfile as sf

from fdl_auralizer import exceptions
from fdl_auralizer.audio_io import (
    FilterFile,
    filter_format,
    process_file,
    read_filters,
    read_signal,
    sidecar_path,
    write_filters,
    write_signal,
)
from fdl_auralizer.oracle import direct_convolve


def test_filter_format() -> None:
    assert filter_format(Path("room.wav")) == "wav_float32"
    assert filter_format(Path("ROOM.WAV")) == "wav_float32"
    assert filter_format(Path("room.f32")) == "raw_f32le_with_sidecar"
    assert sidecar_path(Path("room.f32")) == Path("room.f32.yml")


def test_read_filters__wav(wav_filters_path: Path) -> None:
    filters, header = read_filters(wav_filters_path, 48000)
    assert header == FilterFile("wav_float32", 2, 480, 48000)
    assert filters.shape == (2, 480) and filters.dtype == np.float32
    assert filters.flags.c_contiguous


def test_read_filters__raw(raw_filters_path: Path) -> None:
    filters, header = read_filters(raw_filters_path)
    assert header == FilterFile("raw_f32le_with_sidecar", 4, 128, 48000)
    assert filters.shape == (4, 128)
    assert raw_filters_path.stat().st_size == 4 * 128 * 4


@pytest.mark.parametrize("name", ["filters.wav", "filters.f32"])
def test_write_filters__read_back(name: str, tmp_path: Path, rng: np.random.Generator) -> None:
    data = rng.standard_normal((3, 100)).astype(np.float32)
    path = tmp_path / name
    written = write_filters(path, data, 44100)
    filters, header = read_filters(path)
    assert header == written
    np.testing.assert_array_equal(filters, data)


def test_read_filters__sidecar_length_mismatch(raw_filters_path: Path) -> None:
    sidecar_path(raw_filters_path).write_text(
        "channels: 4\nlength: 127\nsample_rate: 48000\n", encoding="utf-8"
    )
    with pytest.raises(exceptions.CorruptHeader):
        read_filters(raw_filters_path)


@pytest.mark.parametrize(
    "sidecar",
    [
        pytest.param("channels: 4\nlength: 128\n", id="missing key"),
        pytest.param("channels: 4\nlength: 0\nsample_rate: 48000\n", id="zero length"),
        pytest.param("channels: four\nlength: 128\nsample_rate: 48000\n", id="not an integer"),
        pytest.param("- 4\n- 128\n", id="not a mapping"),
        pytest.param("channels: true\nlength: 128\nsample_rate: 48000\n", id="boolean channels"),
        pytest.param("channels: 4\nlength: 128\nsample_rate: yes\n", id="boolean sample rate"),
    ],
)
def test_read_filters__corrupt_sidecar(raw_filters_path: Path, sidecar: str) -> None:
    sidecar_path(raw_filters_path).write_text(sidecar, encoding="utf-8")
    with pytest.raises(exceptions.CorruptHeader):
        read_filters(raw_filters_path)


def test_read_filters__missing_sidecar(raw_filters_path: Path) -> None:
    sidecar_path(raw_filters_path).unlink()
    with pytest.raises(exceptions.UnsupportedFormat):
        read_filters(raw_filters_path)


def test_read_filters__pcm_wav(tmp_path: Path) -> None:
    path = tmp_path / "pcm.wav"
    sf.write(str(path), np.zeros((64, 2)), 48000, format="WAV", subtype="PCM_16")
    with pytest.raises(exceptions.UnsupportedFormat):
        read_filters(path)


def test_read_filters__not_a_wav(tmp_path: Path) -> None:
    path = tmp_path / "broken.wav"
    path.write_bytes(b"definitely not RIFF data")
    with pytest.raises(exceptions.CorruptHeader):
        read_filters(path)


def test_read_filters__sample_rate_mismatch(wav_filters_path: Path) -> None:
    with pytest.raises(exceptions.SampleRateMismatch):
        read_filters(wav_filters_path, 44100)


def test_signal__planar_round_trip(tmp_path: Path, rng: np.random.Generator) -> None:
    path = tmp_path / "signal.wav"
    signal = rng.standard_normal((3, 500)).astype(np.float32)
    write_signal(path, signal, 48000)
    assert sf.info(str(path)).channels == 3
    restored, rate = read_signal(path)
    assert rate == 48000
    np.testing.assert_array_equal(restored, signal)


def test_process_file__impulse_reproduces_filters(
    impulse_wav_path: Path, wav_filters_path: Path, tmp_path: Path
) -> None:
    out_path = tmp_path / "out.wav"
    cfg = process_file(impulse_wav_path, wav_filters_path, out_path)
    assert cfg.output_channels == 2 and cfg.block_size == 128

    output, rate = read_signal(out_path)
    filters, _ = read_filters(wav_filters_path)
    assert rate == 48000
    assert output.shape == (2, 1024)
    np.testing.assert_allclose(output[:, :480], filters, rtol=0, atol=1e-5)
    assert np.abs(output[:, 480:]).max() < 1e-5


@pytest.mark.parametrize(
    "samples,frames",
    [
        pytest.param(48000, 48000, id="whole blocks"),
        pytest.param(48001, 48128, id="partial last block"),
    ],
)
def test_process_file__output_length(
    samples: int, frames: int, raw_filters_path: Path, tmp_path: Path
) -> None:
    in_path, out_path = tmp_path / "in.wav", tmp_path / "out.wav"
    write_signal(in_path, np.zeros(samples), 48000)
    process_file(in_path, raw_filters_path, out_path)
    assert sf.info(str(out_path)).frames == frames
    assert sf.info(str(out_path)).channels == 4


def test_process_file__matches_oracle(
    wav_filters_path: Path, tmp_path: Path, rng: np.random.Generator
) -> None:
    in_path, out_path = tmp_path / "in.wav", tmp_path / "out.wav"
    signal = rng.standard_normal(2000).astype(np.float32)
    write_signal(in_path, signal, 48000)
    process_file(in_path, wav_filters_path, out_path, block_size=64, input_gain=0.5)

    output, _ = read_signal(out_path)
    filters, _ = read_filters(wav_filters_path)
    assert output.shape == (2, 2048)
    for c in range(2):
        expected = direct_convolve(0.5 * signal, filters[c])[:2000]
        assert np.abs(output[c, :2000] - expected).max() < 1e-4


def test_process_file__deterministic_auralization(
    impulse_wav_path: Path, wav_filters_path: Path, tmp_path: Path, rng: np.random.Generator
) -> None:
    fc_path = tmp_path / "fc.wav"
    write_filters(fc_path, 0.1 * rng.standard_normal((2, 200)), 48000)
    first, second = tmp_path / "first.wav", tmp_path / "second.wav"
    process_file(impulse_wav_path, wav_filters_path, first, fc_filters_path=fc_path)
    process_file(impulse_wav_path, wav_filters_path, second, fc_filters_path=fc_path)
    assert first.read_bytes() == second.read_bytes()


def test_process_file__input_errors(
    wav_filters_path: Path, tmp_path: Path, rng: np.random.Generator
) -> None:
    stereo = tmp_path / "stereo.wav"
    write_signal(stereo, rng.standard_normal((2, 100)), 48000)
    with pytest.raises(exceptions.ShapeMismatch):
        process_file(stereo, wav_filters_path, tmp_path / "out.wav")

    slow = tmp_path / "slow.wav"
    write_signal(slow, rng.standard_normal(100), 44100)
    with pytest.raises(exceptions.SampleRateMismatch):
        process_file(slow, wav_filters_path, tmp_path / "out.wav")

    fc_path = tmp_path / "fc.wav"
    write_filters(fc_path, np.zeros((3, 10)), 48000)
    mono = tmp_path / "mono.wav"
    write_signal(mono, rng.standard_normal(100), 48000)
    with pytest.raises(exceptions.ChannelCountMismatch):
        process_file(mono, wav_filters_path, tmp_path / "out.wav", fc_filters_path=fc_path)
