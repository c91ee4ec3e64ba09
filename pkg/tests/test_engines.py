import json
import shlex
import subprocess
import sys

import numpy as np
import pytest

from oarcast.core.discovery import BinaryDiscovery
from oarcast.core.errors import ConfigurationError
from oarcast.core.settings import Settings
from oarcast.engines.builtin import PpmCodec, RawCodec
from oarcast.engines.external_engine import ENV_VAR, CommandSpec, ExternalCommandCodec
from oarcast.engines.registry import create_codec


COPY_SCRIPT = """\
import shutil, sys
if sys.argv[1] == "fail":
    sys.exit(3)
shutil.copyfile(sys.argv[2], sys.argv[3])
"""


@pytest.fixture
def frame():
    return np.random.default_rng(1).integers(0, 256, (8, 10, 3)).astype(np.uint8)


@pytest.fixture
def copy_spec(tmp_path):
    """External codec whose payload is the PNG the encoder is handed."""
    script = tmp_path / "copy_codec.py"
    script.write_text(COPY_SCRIPT, encoding="utf-8")
    run = f"{shlex.quote(sys.executable)} {shlex.quote(str(script))}"
    return {
        "encode": f"{run} enc {{input}} {{output}}",
        "decode": f"{run} dec {{input}} {{output}}",
        "suffix": ".png",
    }


def test_raw_codec_payload(frame):
    codec = RawCodec()
    data = codec.encode(frame)
    assert len(data) == 8 * 10 * 3
    assert np.array_equal(codec.decode(data, 10, 8), frame)
    assert codec.decode(data[:-1], 10, 8) is None


def test_ppm_codec(frame):
    codec = PpmCodec()
    data = codec.encode(frame)
    assert data.startswith(b"P6")
    assert np.array_equal(codec.decode(data, 10, 8), frame)
    assert codec.decode(data, 8, 10) is None
    assert codec.decode(b"garbage", 10, 8) is None


def test_external_codec_round_trip(frame, copy_spec):
    codec = ExternalCommandCodec(CommandSpec.from_json(json.dumps(copy_spec)))
    assert codec.is_available()
    data = codec.encode(frame)
    assert data.startswith(b"\x89PNG")
    assert np.array_equal(codec.decode(data, 10, 8), frame)


def test_external_codec_failure_is_not_raised(frame, copy_spec):
    copy_spec["encode"] = copy_spec["encode"].replace(" enc ", " fail ")
    codec = ExternalCommandCodec(CommandSpec.from_json(json.dumps(copy_spec)))
    assert codec.encode(frame) is None


def test_create_codec_from_environment(monkeypatch, tmp_path, copy_spec):
    monkeypatch.setenv(ENV_VAR, json.dumps(copy_spec))
    assert isinstance(create_codec("external"), ExternalCommandCodec)

    spec_file = tmp_path / "codec.json"
    spec_file.write_text(json.dumps(copy_spec), encoding="utf-8")
    monkeypatch.setenv(ENV_VAR, str(spec_file))
    assert create_codec("External").spec.suffix == ".png"


def test_create_codec_errors(monkeypatch, tmp_path):
    assert create_codec("raw").name == "raw"
    assert create_codec(" PPM ").name == "ppm"
    with pytest.raises(ConfigurationError):
        create_codec("jpeg2000")
    with pytest.raises(ConfigurationError):
        create_codec("ffmpeg-gif")

    monkeypatch.setenv(ENV_VAR, str(tmp_path / "missing.json"))
    with pytest.raises(ConfigurationError):
        create_codec("external")


def test_create_external_without_spec_or_bpg(monkeypatch):
    monkeypatch.setattr("oarcast.core.discovery.shutil.which", lambda name: None)
    discovery = BinaryDiscovery()
    with pytest.raises(ConfigurationError):
        create_codec("external", discovery)


@pytest.mark.parametrize("text", ["not json", '{"encode": "x"}', "[1, 2]"])
def test_command_spec_rejects_bad_json(text):
    with pytest.raises(ConfigurationError):
        CommandSpec.from_json(text)


def test_bpg_spec_quotes_paths():
    spec = CommandSpec.bpg("/opt/my bpg/bpgenc", "bpgdec")
    assert spec.program(spec.encode) == "/opt/my bpg/bpgenc"
    assert spec.suffix == ".bpg"
    with pytest.raises(ConfigurationError):
        spec.program("   ")


def test_discovery_persists_paths(config_dir):
    discovery = BinaryDiscovery()
    discovery.ffmpeg_path = "/usr/bin/ffmpeg"
    discovery.save_paths()
    assert BinaryDiscovery().ffmpeg_path == "/usr/bin/ffmpeg"
    assert (config_dir / "binaries.json").exists()


def test_settings_round_trip(config_dir):
    settings = Settings()
    settings.gop_length = 10
    settings.oar_modulation = "16qam"
    assert settings.save()

    data = json.loads(settings.config_file.read_text())
    data["volume"] = 11
    settings.config_file.write_text(json.dumps(data))

    loaded = Settings()
    assert loaded.load()
    assert loaded.gop_length == 10
    assert loaded.oar_modulation == "16qam"
    assert not hasattr(loaded, "volume")

    loaded.reset()
    assert loaded.gop_length == Settings().gop_length


def test_settings_without_file():
    assert not Settings().load()


def test_cancel_terminates_running_process():
    codec = RawCodec()
    codec.cancel()
    codec.process = subprocess.Popen([sys.executable, "-c", "import time; time.sleep(30)"])
    codec.cancel()
    assert codec.process.returncode is not None
