import numpy as np
import pytest

from oarcast.core.errors import ContractViolation, PipelineError
from oarcast.core.oar import BACKGROUND_ID, Category, GopStream, make_frame
from oarcast.graph.layout import frame_layout
from oarcast.graph.weights import GraphModel
from oarcast.ingest.synthetic import SyntheticSceneSpec, generate_synthetic
from oarcast.reconstruct.flow import backward_map, correspondence_mask, flow_from_oar, is_rigid_pair
from oarcast.reconstruct.fusion import fuse, fuse_float
from oarcast.reconstruct.raster import (
    DEFAULT_BACKGROUND, decode_image, encode_image, new_canvas, owner_map, read_image,
    render_frame, to_uint8, write_image
)
from oarcast.reconstruct.synthesis import background_plate, layout_support, synthesize_float
from oarcast.reconstruct.video import reconstruct_gop
from oarcast.reconstruct.warp import sample_bilinear, warp
from oarcast.report.metrics import metric_psnr

from conftest import attrs


def test_to_uint8_rounds_half_up_and_saturates():
    assert to_uint8(np.array([-3.0, 0.5, 1.49, 254.5, 300.0])).tolist() == [0, 1, 1, 255, 255]


def test_render_paints_front_object_last():
    frame = make_frame(1, {1: attrs(0, 0, 6, 6), 2: attrs(3, 3, 6, 6, category=Category.BUS)})
    image = render_frame(frame, 12, 12)
    owners = owner_map(frame, 12, 12)
    assert owners[4, 4] == 2
    assert owners[0, 0] == 1
    assert owners[11, 11] == BACKGROUND_ID
    assert tuple(image[11, 11]) == DEFAULT_BACKGROUND
    assert tuple(image[8, 4]) != DEFAULT_BACKGROUND


def test_image_io(tmp_path):
    frame = np.random.default_rng(0).integers(0, 256, (6, 5, 3)).astype(np.uint8)
    write_image(frame, tmp_path / "f.png")
    write_image(frame, tmp_path / "f.ppm")
    assert np.array_equal(read_image(tmp_path / "f.png"), frame)
    assert np.array_equal(read_image(tmp_path / "f.ppm"), frame)
    assert np.array_equal(decode_image(encode_image(frame)), frame)


def test_backward_map_identity_and_translation():
    a = attrs(4, 4, 6, 6, 30.0)
    dx, dy = backward_map(a, a, slice(4, 10), slice(4, 10))
    assert not dx.any() and not dy.any()

    moved = attrs(7, 2, 6, 6, 30.0)
    dx, dy = backward_map(a, moved, slice(2, 8), slice(7, 13))
    assert np.allclose(dx, -3.0)
    assert np.allclose(dy, 2.0)


def test_backward_map_scaling():
    small = attrs(0, 0, 4, 4)
    large = attrs(0, 0, 8, 8)
    dx, dy = backward_map(small, large, slice(0, 8), slice(0, 8))
    # Pixel center (7.5, 7.5) of the large box maps to (3.75, 3.75)
    assert dx[7, 7] == pytest.approx(3.75 - 7.5)
    assert dy[7, 7] == pytest.approx(3.75 - 7.5)


def test_flow_is_zero_for_births_and_background():
    prev = make_frame(1, {1: attrs(0, 0, 4, 4)})
    curr = make_frame(2, {1: attrs(2, 0, 4, 4), 2: attrs(10, 10, 4, 4)})
    flow = flow_from_oar(prev, curr, 16, 16)
    assert np.allclose(flow[0:4, 2:6, 0], -2.0)
    assert not flow[10:14, 10:14].any()
    assert not flow[15, 0].any()


def test_correspondence_mask_marks_uncovered_and_births():
    prev = make_frame(1, {1: attrs(0, 0, 4, 4)})
    curr = make_frame(2, {1: attrs(2, 0, 4, 4), 2: attrs(10, 10, 4, 4)})
    valid = correspondence_mask(prev, curr, 16, 16)
    assert valid[0, 3]       # object pixel tracked
    assert not valid[0, 0]   # uncovered: was object, now background
    assert not valid[11, 11]  # birth
    assert valid[15, 15]     # untouched background


def test_warp_shifts_and_clamps():
    image = np.arange(16, dtype=np.float64).reshape(4, 4, 1)
    flow = np.zeros((4, 4, 2))
    flow[..., 0] = 1.0
    out = warp(image.astype(np.uint8), flow)
    assert out[0, :, 0].tolist() == [1, 2, 3, 3]
    assert sample_bilinear(image[..., 0], np.array([0.5]), np.array([0.0]))[0] == pytest.approx(2.0)


def test_fusion_is_convex_combination():
    synth = np.full((2, 2, 3), 200.0)
    warped = np.full((2, 2, 3), 100.0)
    mask = np.array([[0.0, 1.0], [0.25, 0.5]])
    out = fuse_float(synth, warped, mask)
    assert out[0, 0, 0] == 100.0 and out[0, 1, 0] == 200.0 and out[1, 0, 0] == 125.0
    assert fuse(synth, warped, mask)[1, 1, 0] == 150


@pytest.mark.parametrize("mask", [np.full((2, 2), 1.5), np.zeros((3, 3)), np.zeros((2, 2, 1))])
def test_fusion_rejects_bad_masks(mask):
    with pytest.raises(ContractViolation):
        fuse_float(np.zeros((2, 2, 3)), np.zeros((2, 2, 3)), mask)


def test_background_plate_removes_objects():
    frame = make_frame(1, {1: attrs(2, 2, 4, 4)})
    reference = render_frame(frame, 10, 10)
    plate = background_plate(reference, frame)
    assert np.array_equal(plate, new_canvas(10, 10))


def test_support_mask_gates_like_the_layout(two_cars_gop):
    model = GraphModel.generate(seed=1, q_angle=8, d_c=4, d_theta=4, d_r=2, feature_dim=3)
    first, second = two_cars_gop.frames[:2]
    reference = render_frame(first, 64, 48)
    plate = background_plate(reference, first)
    layout = frame_layout(second, model, 48, 64, 2)
    gated = synthesize_float(layout, second, reference, plate, first, 2)
    masked = synthesize_float(None, second, reference, plate, first, 2, layout_support(layout, 64, 48, 2))
    assert np.array_equal(gated, masked)


def test_still_scene_reconstructs_exactly(still_scene):
    gop, renders = still_scene
    model = GraphModel.generate(seed=0, q_angle=8, d_c=4, d_theta=4, d_r=2, feature_dim=3)
    frames = reconstruct_gop(gop, renders[0], model)
    assert len(frames) == gop.gop_length
    for got, want in zip(frames, renders):
        assert np.array_equal(got, want)


def test_translating_object_is_tracked():
    frames = tuple(
        make_frame(t, {1: attrs(2 + 2 * (t - 1), 6, 8, 6)}) for t in (1, 2, 3)
    )
    gop = GopStream(32, 24, 3, frames)
    renders = [render_frame(f, 32, 24) for f in frames]
    out = reconstruct_gop(gop, renders[0])
    for got, want in zip(out, renders):
        assert np.array_equal(got, want)


def test_border_clipped_box_is_not_rigid():
    inside = attrs(36, 6, 12, 6)
    clipped = attrs(40, 6, 8, 6)
    assert is_rigid_pair(inside, attrs(30, 8, 12, 6), 48, 24)
    assert not is_rigid_pair(inside, clipped, 48, 24)
    assert is_rigid_pair(attrs(4, 4, 8, 6), attrs(4, 4, 12, 9), 48, 24)

    valid = correspondence_mask(make_frame(1, {1: inside}), make_frame(2, {1: clipped}), 48, 24)
    assert not valid[6:12, 40:48].any()
    assert valid[0, 0]


def test_object_leaving_the_canvas_is_repainted():
    frames = tuple(
        make_frame(t, {1: attrs(36 + 4 * (t - 1), 6, 12 - 4 * (t - 1), 6, 30.0)}) for t in (1, 2, 3)
    )
    gop = GopStream(48, 24, 3, frames)
    renders = [render_frame(f, 48, 24) for f in frames]
    out = reconstruct_gop(gop, renders[0])
    for got, want in zip(out, renders):
        assert np.array_equal(got, want)


@pytest.mark.parametrize("seed", range(10))
def test_rigid_scenes_keep_foreground_quality(seed):
    gop, renders = generate_synthetic(SyntheticSceneSpec(seed=seed, object_count=4, width=128, height=128, gop_length=10))
    out = reconstruct_gop(gop, renders[0])
    for frame, got, want in zip(gop.frames, out, renders):
        boxes = [frame.attributes[oid].clipped_bbox(gop.width, gop.height) for oid in frame.objects]
        assert metric_psnr(got, want, boxes) >= 30.0, f"frame {frame.frame_index}"


def test_reconstruction_needs_reference(two_cars_gop):
    with pytest.raises(PipelineError):
        reconstruct_gop(two_cars_gop, None)
