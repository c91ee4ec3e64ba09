import json
import logging

import numpy as np
import pytest

from oarcast.cli import EXIT_CHANNEL, EXIT_INVALID, EXIT_OK, main, report_cbr
from oarcast.codec.oar_codec import read_streams
from oarcast.core.errors import OarcastError
from oarcast.ingest.oar_io import read_oar_jsonl
from oarcast.reconstruct.raster import read_image, write_image
from oarcast.report.report import Report, read_records, write_report
from oarcast.utils.logging import _HANDLER_TAG


SMALL_SCENE = ["--w", "48", "--h", "40", "--gop", "3"]


@pytest.fixture(autouse=True)
def drop_log_handlers():
    yield
    root = logging.getLogger()
    for handler in list(root.handlers):
        if getattr(handler, _HANDLER_TAG, False):
            root.removeHandler(handler)
            handler.close()


def run(capsys, *argv):
    status = main(list(argv))
    return status, capsys.readouterr().out.strip().splitlines()


@pytest.mark.parametrize("flags, expected", [
    (["--bits", "366"], "6.98e-04"),
    (["--bits", "219"], "4.18e-04"),
    (["--kbps", "3.5"], "2.67e-04"),
    (["--kbps", "2.2"], "1.68e-04"),
])
def test_report_cbr(capsys, flags, expected):
    status, out = run(capsys, "report", "--mode", "cbr", *flags)
    assert status == EXIT_OK
    assert out[-1] == expected


def test_report_cbr_block_mode():
    value = report_cbr(366, None, 25.0, "1/3", "4qam", 512, 512, "block")
    assert value == pytest.approx(2304 / 786432)
    with pytest.raises(OarcastError):
        report_cbr(366, 3.5, 25.0, "1/3", "4qam", 512, 512)
    with pytest.raises(OarcastError):
        report_cbr(None, None, 25.0, "1/3", "4qam", 512, 512)


def test_report_needs_one_rate(capsys):
    status, _ = run(capsys, "report", "--mode", "cbr", "--bits", "366", "--kbps", "3.5")
    assert status == EXIT_INVALID


@pytest.mark.parametrize("argv", [[], ["report"], ["report", "--mode", "median"], ["simulate", "--seed", "x"]])
def test_usage_errors_exit_with_one(argv):
    with pytest.raises(SystemExit) as info:
        main(argv)
    assert info.value.code == EXIT_INVALID


def test_synth_writes_frames_and_oar(capsys, tmp_path):
    out = tmp_path / "scene"
    status, lines = run(capsys, "synth", "--seed", "3", "--objects", "2", *SMALL_SCENE,
                        "--gops", "2", "--reconstruct", "--out", str(out))
    assert status == EXIT_OK
    assert (out / "gop001_frame003.png").exists()
    assert read_image(out / "gop000_frame001.png").shape == (40, 48, 3)
    assert np.array_equal(read_image(out / "gop000_recon001.png"), read_image(out / "gop000_frame001.png"))

    gops = read_oar_jsonl(out / "oar.jsonl")
    assert len(gops) == 2
    assert all(g.gop_length == 3 for g in gops)
    assert any("reconstruction PSNR" in line for line in lines)


def test_encode_decode_round_trip(capsys, tmp_path):
    out = tmp_path / "scene"
    run(capsys, "synth", "--seed", "5", "--objects", "3", *SMALL_SCENE, "--out", str(out))

    status, _ = run(capsys, "encode", "--in", str(out / "oar.jsonl"), *SMALL_SCENE,
                    "--out", str(tmp_path / "s.oars"))
    assert status == EXIT_OK
    assert len(read_streams((tmp_path / "s.oars").read_bytes())) == 1

    status, _ = run(capsys, "decode", "--in", str(tmp_path / "s.oars"), "--out", str(tmp_path / "d.jsonl"))
    assert status == EXIT_OK
    (sent,) = read_oar_jsonl(out / "oar.jsonl")
    (back,) = read_oar_jsonl(tmp_path / "d.jsonl")
    assert [f.objects for f in back.frames] == [f.objects for f in sent.frames]
    assert [set(f.relations) for f in back.frames] == [set(f.relations) for f in sent.frames]


def test_extract_from_tracks(capsys, tmp_path):
    tracks = tmp_path / "tracks.jsonl"
    rows = [{"frame": t, "id": 1, "x": 2 * t, "y": 4, "w": 8, "h": 6, "cat": "bus"} for t in range(1, 7)]
    tracks.write_text("\n".join(json.dumps(r) for r in rows) + "\n", encoding="utf-8")

    status, lines = run(capsys, "extract", "--in", str(tracks), *SMALL_SCENE, "--out", str(tmp_path / "oar.jsonl"))
    assert status == EXIT_OK
    assert lines[-1].startswith("2 GoPs of 3 frames")
    gops = read_oar_jsonl(tmp_path / "oar.jsonl")
    assert gops[1].frames[0].attributes[1].x == 8


def test_bad_track_file_exits_with_one(capsys, tmp_path):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"frame": 1}\n', encoding="utf-8")
    status, _ = run(capsys, "extract", "--in", str(bad), "--out", str(tmp_path / "o.jsonl"))
    assert status == EXIT_INVALID


def test_aggregate(capsys, tmp_path):
    runs = []
    for name in ("a", "b"):
        report = Report(name)
        report.add(path="oar", snr_db=1.0, seed=2, trials=5, fer=0.2)
        runs.append(str(write_report(report, tmp_path / f"{name}.csv")))

    status, _ = run(capsys, "report", "--mode", "aggregate", "--runs", *runs,
                    "--out", str(tmp_path / "all.csv"), "--plot", str(tmp_path / "all.png"))
    assert status == EXIT_OK
    assert len(read_records(tmp_path / "all.csv")) == 2
    assert (tmp_path / "all.png").exists()

    status, _ = run(capsys, "report", "--mode", "aggregate", "--runs", *runs)
    assert status == EXIT_INVALID


def test_save_settings(capsys, config_dir):
    status, _ = run(capsys, "report", "--mode", "cbr", "--bits", "88", "--gop", "10", "--save-settings")
    assert status == EXIT_OK
    saved = json.loads((config_dir / "settings.json").read_text())
    assert saved["gop_length"] == 10


@pytest.mark.slow
def test_transmit_bitstreams(capsys, tmp_path):
    out = tmp_path / "scene"
    run(capsys, "synth", "--seed", "1", "--objects", "2", *SMALL_SCENE, "--gops", "2", "--out", str(out))
    run(capsys, "encode", "--in", str(out / "oar.jsonl"), *SMALL_SCENE, "--out", str(tmp_path / "s.oars"))

    status, _ = run(capsys, "transmit", "--in", str(tmp_path / "s.oars"), "--out", str(tmp_path / "r.oars"),
                    "--snr", "10", "--seed", "4", "--trace", str(tmp_path / "rx.f32"))
    assert status == EXIT_OK
    assert read_streams((tmp_path / "r.oars").read_bytes()) == read_streams((tmp_path / "s.oars").read_bytes())
    assert (tmp_path / "rx_001.f32").exists()

    status, _ = run(capsys, "transmit", "--in", str(tmp_path / "s.oars"), "--out", str(tmp_path / "x.oars"),
                    "--snr", "-15", "--seed", "4")
    assert status == EXIT_CHANNEL


@pytest.mark.slow
def test_transmit_image(capsys, tmp_path):
    frame = np.random.default_rng(2).integers(0, 256, (16, 16, 3)).astype(np.uint8)
    write_image(frame, tmp_path / "in.png")
    status, lines = run(capsys, "transmit", "--in", str(tmp_path / "in.png"), "--out", str(tmp_path / "out.png"),
                        "--snr", "20", "--seed", "1", "--codec", "ppm")
    assert status == EXIT_OK
    assert "PSNR inf dB" in lines[-1]
    assert np.array_equal(read_image(tmp_path / "out.png"), frame)


@pytest.mark.slow
def test_simulate_writes_report(capsys, tmp_path):
    status, lines = run(capsys, "simulate", "--seed", "1", "--snr", "10", "--trials", "2", "--objects", "2",
                        *SMALL_SCENE, "--out", str(tmp_path / "sim.csv"), "--plot", str(tmp_path / "sim.png"))
    assert status == EXIT_OK
    (record,) = read_records(tmp_path / "sim.csv")
    assert record["fer"] == 0.0 and record["trials"] == 2
    assert (tmp_path / "sim.json").exists()
    assert lines[-1].startswith("SNR  10.00 dB")


def test_interrupted_simulation_exits_with_one(capsys, monkeypatch, tmp_path):
    def interrupted(self):
        raise KeyboardInterrupt

    monkeypatch.setattr("oarcast.cli.SweepManager.run", interrupted)
    status, _ = run(capsys, "simulate", "--seed", "1", "--snr", "10", "--trials", "1", *SMALL_SCENE,
                    "--out", str(tmp_path / "sim.csv"))
    assert status == EXIT_INVALID
    assert not (tmp_path / "sim.csv").exists()


def test_errors_reach_the_log_file(capsys, tmp_path):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"frame": 1}\n', encoding="utf-8")
    log_file = tmp_path / "logs" / "run.log"
    status, _ = run(capsys, "extract", "--in", str(bad), "--out", str(tmp_path / "o.jsonl"),
                    "--log-file", str(log_file))
    assert status == EXIT_INVALID
    assert " - ERROR - " in log_file.read_text(encoding="utf-8")
