import numpy as np
import pytest

import oracles
from iris_aging.errors import DegenerateGrid, ImageFormatError, InvalidGeometry
from iris_aging.imaging import (
    BitMask,
    GrayImage,
    SegmentationCircles,
    log_filter,
    log_kernel,
    median_filter_10x10,
    read_image,
    read_mask,
    unwrap_to_polar,
    write_image,
    write_mask,
)


def concentric(pr=20, ir=60, c=64.0):
    return SegmentationCircles((c, c), pr, (c, c), ir)


def test_gray_image_rejects_bad_rasters():
    with pytest.raises(ImageFormatError):
        GrayImage(np.zeros((0, 4)))
    with pytest.raises(ImageFormatError):
        GrayImage(np.full((3, 3), 300.0))
    img = GrayImage(np.zeros((3, 5), dtype=np.uint8))
    assert (img.width, img.height) == (5, 3)
    with pytest.raises(ValueError):
        img.pixels[0, 0] = 1


@pytest.mark.parametrize(
    "pr, ir, offset",
    [(20, 20, 0), (30, 20, 0), (0, 20, 0), (10, 20, 15)],
)
def test_invalid_circles(pr, ir, offset):
    with pytest.raises(InvalidGeometry):
        SegmentationCircles((50 + offset, 50), pr, (50, 50), ir)


def test_polar_of_constant_image():
    img = GrayImage(np.full((128, 128), 100, dtype=np.uint8))
    polar = unwrap_to_polar(img, concentric(), rows=64, cols=512)
    assert polar.texture.shape == (64, 512)
    assert np.all(polar.texture.pixels == 100)
    assert polar.mask.bits.all()


def _distance_image(c=64.0, size=128):
    yy, xx = np.mgrid[0:size, 0:size]
    return GrayImage(np.hypot(xx - c, yy - c))


def test_polar_rows_follow_radius():
    polar = unwrap_to_polar(_distance_image(), concentric(), rows=8, cols=64)
    expected = 20 + (np.arange(8) + 0.5) / 8 * 40
    assert np.all(np.abs(polar.texture.pixels - expected[:, None]) < 0.75)


def test_polar_matches_bruteforce_bilinear():
    rng = np.random.default_rng(3)
    data = rng.uniform(0, 255, (90, 100))
    seg = SegmentationCircles((47.3, 44.1), 11.5, (48.0, 45.0), 35.2)
    polar = unwrap_to_polar(GrayImage(data), seg, rows=6, cols=32)
    for k in range(6):
        for c in range(32):
            th = np.deg2rad(c * 360 / 32)
            s = (k + 0.5) / 6
            x0 = 47.3 + 11.5 * np.cos(th)
            y0 = 44.1 - 11.5 * np.sin(th)
            x1 = 48.0 + 35.2 * np.cos(th)
            y1 = 45.0 - 35.2 * np.sin(th)
            x, y = x0 + s * (x1 - x0), y0 + s * (y1 - y0)
            i, j = int(np.floor(y)), int(np.floor(x))
            fy, fx = y - i, x - j
            want = (
                data[i, j] * (1 - fx) * (1 - fy)
                + data[i, j + 1] * fx * (1 - fy)
                + data[i + 1, j] * (1 - fx) * fy
                + data[i + 1, j + 1] * fx * fy
            )
            assert polar.texture.pixels[k, c] == pytest.approx(want, abs=1e-9)


def test_rotationally_symmetric_rows_are_flat():
    polar = unwrap_to_polar(_distance_image(), concentric(), rows=16, cols=256)
    spread = np.ptp(polar.texture.pixels, axis=1)
    assert np.all(spread < 0.75)


def test_sectors_select_half_the_columns():
    img = GrayImage(np.full((128, 128), 7, dtype=np.uint8))
    polar = unwrap_to_polar(img, concentric(), cols=512, sectors=[(-45, 45), (135, 225)])
    assert polar.cols == 256
    assert not polar.is_full_circle


def test_sector_column_order():
    yy, xx = np.mgrid[0:128, 0:128]
    angle = np.degrees(np.arctan2(-(yy - 64.0), xx - 64.0)) % 360
    polar = unwrap_to_polar(GrayImage(angle / 360 * 255), concentric(), rows=4, cols=64, sectors=[(90, 180)])
    row = polar.texture.pixels[2]
    assert polar.cols == 16
    assert np.all(np.diff(row) > 0)
    assert row[0] == pytest.approx(90 / 360 * 255, abs=1.0)


def test_out_of_bounds_samples_are_masked():
    img = GrayImage(np.full((60, 60), 50, dtype=np.uint8))
    seg = SegmentationCircles((10, 30), 5, (10, 30), 25)
    polar = unwrap_to_polar(img, seg, rows=8, cols=64)
    assert 0 < polar.mask.count < polar.mask.bits.size
    # the left half of the annulus falls outside the raster
    assert not polar.mask.bits[-1, 32]
    assert polar.mask.bits[-1, 0]


def test_input_mask_is_propagated():
    img = GrayImage(np.full((128, 128), 80, dtype=np.uint8))
    bits = np.ones((128, 128), dtype=bool)
    bits[:40] = False  # eyelid over the top of the iris
    polar = unwrap_to_polar(img, concentric(), BitMask(bits), rows=8, cols=64)
    top = 16  # column looking straight up (90 degrees)
    assert not polar.mask.bits[-1, top]
    assert polar.mask.bits[-1, 48]


@pytest.mark.parametrize("rows, cols", [(3, 64), (8, 15)])
def test_degenerate_grid(rows, cols):
    img = GrayImage(np.zeros((128, 128)))
    with pytest.raises(DegenerateGrid):
        unwrap_to_polar(img, concentric(), rows=rows, cols=cols)


def test_median_of_constant_and_impulse():
    const = GrayImage(np.full((15, 17), 42, dtype=np.uint8))
    assert np.all(median_filter_10x10(const).pixels == 42)
    imp = np.zeros((20, 20))
    imp[10, 10] = 255
    assert np.all(median_filter_10x10(GrayImage(imp)).pixels == 0)


@pytest.mark.parametrize("seed", range(5))
def test_median_matches_bruteforce(seed):
    rng = np.random.default_rng(seed)
    data = rng.integers(0, 256, (20, 20)).astype(float)
    got = median_filter_10x10(GrayImage(data), chunk_rows=7).pixels
    np.testing.assert_array_equal(got, oracles.median_10x10(data))


def test_median_small_image_border_clipping():
    data = np.arange(12, dtype=float).reshape(3, 4)
    got = median_filter_10x10(GrayImage(data)).pixels
    # every window covers the whole 3x4 raster: lower median of 0..11 is 5
    assert np.all(got == 5)


def test_log_kernel_shape_and_sum():
    k = log_kernel(1.4)
    assert k.shape == (9, 9)
    assert abs(k.sum()) < 1e-15
    assert np.allclose(k, k.T) and np.allclose(k, k[::-1, ::-1])
    assert log_kernel(1.0).shape == (7, 7)


def test_log_of_constant_is_zero():
    out = log_filter(GrayImage(np.full((16, 16), 200.0)))
    assert np.all(out == 0.0)


def test_log_impulse_response_is_kernel():
    data = np.zeros((21, 21))
    data[10, 10] = 1.0
    out = log_filter(GrayImage(data), 1.4)
    np.testing.assert_allclose(out[6:15, 6:15], log_kernel(1.4), atol=1e-15)
    assert np.max(np.abs(out[:5])) < 1e-15


def test_log_matches_bruteforce_convolution():
    rng = np.random.default_rng(11)
    data = rng.uniform(0, 255, (14, 12))
    got = log_filter(GrayImage(data), 1.4)
    np.testing.assert_allclose(got, oracles.convolve_edge(data, oracles.log_kernel(1.4)), atol=1e-9)


def _step(size=32):
    img = np.full((size, size), 40.0)
    img[:, size // 2 :] = 200.0
    return img


def test_sharp_step_has_stronger_log_response():
    from scipy.ndimage import gaussian_filter

    sharp = _step()
    blurred = gaussian_filter(sharp, 2.0, mode="nearest")
    k = oracles.log_kernel(1.4)
    want_sharp = np.mean(np.abs(oracles.convolve_edge(sharp, k)))
    want_blur = np.mean(np.abs(oracles.convolve_edge(blurred, k)))
    assert want_sharp > want_blur
    got_sharp = np.mean(np.abs(log_filter(GrayImage(sharp))))
    got_blur = np.mean(np.abs(log_filter(GrayImage(blurred))))
    assert got_sharp == pytest.approx(want_sharp, rel=1e-12)
    assert got_blur == pytest.approx(want_blur, rel=1e-12)


def test_log_sum_vanishes_with_flat_border():
    # with edge replication the output sums to zero once the kernel
    # radius worth of border is constant
    rng = np.random.default_rng(5)
    for _ in range(10):
        data = np.full((40, 36), rng.uniform(0, 255))
        data[4:-4, 4:-4] = rng.uniform(0, 255, (32, 28))
        out = log_filter(GrayImage(data))
        assert abs(out.sum()) < 1e-6 * data.size


@pytest.mark.parametrize("flt", ["median", "log"])
def test_filters_translation_equivariant_interior(flt):
    rng = np.random.default_rng(2)
    data = rng.uniform(0, 255, (40, 40))
    shifted = np.roll(data, (1, 1), axis=(0, 1))
    if flt == "median":
        a = median_filter_10x10(GrayImage(data)).pixels
        b = median_filter_10x10(GrayImage(shifted)).pixels
    else:
        a = log_filter(GrayImage(data))
        b = log_filter(GrayImage(shifted))
    np.testing.assert_array_equal(a[10:28, 10:28], b[11:29, 11:29])


def test_operations_are_pure():
    rng = np.random.default_rng(9)
    img = GrayImage(rng.integers(0, 256, (128, 128)).astype(np.uint8))
    seg = concentric()
    a = unwrap_to_polar(img, seg)
    b = unwrap_to_polar(img, seg)
    assert np.array_equal(a.texture.pixels, b.texture.pixels)
    assert np.array_equal(median_filter_10x10(img).pixels, median_filter_10x10(img).pixels)
    assert np.array_equal(log_filter(img), log_filter(img))


@pytest.mark.parametrize("suffix", [".pgm", ".png"])
def test_image_roundtrip(tmp_path, suffix):
    rng = np.random.default_rng(0)
    img = GrayImage(rng.integers(0, 256, (13, 21)).astype(np.uint8))
    path = tmp_path / f"a{suffix}"
    write_image(path, img)
    back = read_image(path)
    assert np.array_equal(back.pixels, img.pixels)
    if suffix == ".pgm":
        assert path.read_bytes().startswith(b"P5")


def test_mask_roundtrip(tmp_path):
    bits = np.zeros((5, 6), dtype=bool)
    bits[1:3, 2:5] = True
    write_mask(tmp_path / "m.pgm", BitMask(bits))
    assert np.array_equal(read_mask(tmp_path / "m.pgm").bits, bits)


def test_color_image_rejected(tmp_path):
    from PIL import Image

    Image.new("RGB", (4, 4)).save(tmp_path / "c.png")
    with pytest.raises(ImageFormatError):
        read_image(tmp_path / "c.png")
