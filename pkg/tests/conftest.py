import pytest

from oarcast.channel.ldpc import _build_code
from oarcast.core.oar import Attributes, Category, GopStream, OarFrame, make_frame
from oarcast.ingest.relations import identify_relations
from oarcast.ingest.synthetic import MotionProgram, SyntheticSceneSpec, generate_synthetic


@pytest.fixture(scope="session", autouse=True)
def cache_dir(tmp_path_factory):
    # One cache per session; LDPC matrices are built once
    path = tmp_path_factory.mktemp("cache")
    with pytest.MonkeyPatch.context() as mp:
        mp.setenv("OARCAST_CACHE_DIR", str(path))
        yield path


@pytest.fixture(autouse=True)
def config_dir(tmp_path, monkeypatch):
    path = tmp_path / "config"
    monkeypatch.setenv("OARCAST_CONFIG_DIR", str(path))
    monkeypatch.delenv("OARCAST_IMAGE_CODEC", raising=False)
    return path


@pytest.fixture
def cold_cache(tmp_path, monkeypatch):
    """Empty LDPC cache directory with the in-process code cache cleared."""
    path = tmp_path / "cold-cache"
    monkeypatch.setenv("OARCAST_CACHE_DIR", str(path))
    _build_code.cache_clear()
    yield path
    _build_code.cache_clear()


def attrs(x, y, w, h, angle=0.0, category=Category.CAR) -> Attributes:
    return Attributes(x, y, w, h, angle, category)


def frame_of(index: int, boxes: dict) -> OarFrame:
    """Frame with geometric relations from {id: Attributes}."""
    frame = make_frame(index, boxes)
    return frame.with_relations(identify_relations(frame))


@pytest.fixture
def two_cars_gop() -> GopStream:
    """64x48 canvas, T=3: car 1 drives right, car 2 is born in frame 2."""
    frames = [
        frame_of(1, {1: attrs(4, 10, 12, 8, 0.0)}),
        frame_of(2, {1: attrs(6, 10, 12, 8, 0.0), 2: attrs(40, 20, 10, 10, 90.0, Category.BUS)}),
        frame_of(3, {1: attrs(8, 11, 12, 8, 5.625), 2: attrs(40, 22, 10, 10, 90.0, Category.BUS)}),
    ]
    return GopStream(64, 48, 3, tuple(frames))


@pytest.fixture
def synthetic_scene():
    spec = SyntheticSceneSpec(seed=7, object_count=3, width=48, height=40, gop_length=4)
    return generate_synthetic(spec)


@pytest.fixture
def still_scene():
    """Objects that never move: reconstruction equals the renders."""
    programs = (
        MotionProgram(4, 4, 12, 10, 0.0, Category.CAR),
        MotionProgram(24, 20, 14, 12, 90.0, Category.VAN),
    )
    spec = SyntheticSceneSpec(seed=0, width=48, height=40, gop_length=3, programs=programs)
    return generate_synthetic(spec)
