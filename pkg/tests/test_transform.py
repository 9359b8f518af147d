import numpy as np
import pytest
from scipy.fft import dct

from qvrf.errors import ConfigurationError
from qvrf.transform import (BLOCK_SIZES, SCALE_LEVELS, check_image, coefficients,
                            dequantize_scales, dpcm_reconstruct, dpcm_residuals, estimate_scales,
                            forward, inverse, quantize_scales, read_image, synthesize, write_pgm)


@pytest.mark.parametrize("block", BLOCK_SIZES)
def test_forward_inverse_is_lossless(small_image, block):
    lat = forward(small_image, block)
    assert lat.bands.shape[0] == block * block
    assert np.array_equal(inverse(lat), small_image)
    assert np.max(np.abs(synthesize(lat) - small_image)) < 1e-9


def test_band_layout_matches_1d_dct():
    # A single 8x8 block: band (u, v) is the separable orthonormal DCT-II coefficient.
    rng = np.random.default_rng(0)
    img = rng.integers(0, 256, (8, 8)).astype(np.uint8)
    lat = forward(img, 8, step=1.0)
    ref = dct(dct(img.astype(float), norm="ortho", axis=0), norm="ortho", axis=1)
    coeff = coefficients(lat)[:, 0, 0].reshape(8, 8)
    assert np.allclose(coeff, ref, atol=1e-9)


def test_parseval():
    rng = np.random.default_rng(1)
    img = rng.integers(0, 256, (32, 48)).astype(np.uint8)
    lat = forward(img, 8, step=1.0)
    assert np.sum(coefficients(lat) ** 2) == pytest.approx(np.sum(img.astype(float) ** 2))


def test_dpcm_roundtrip():
    rng = np.random.default_rng(4)
    dc = rng.normal(16, 3, (5, 7))
    res = dpcm_residuals(dc, 16.0)
    assert np.allclose(dpcm_reconstruct(res, 16.0), dc)
    assert res[0, 0] == pytest.approx(dc[0, 0] - 16.0)
    assert res[2, 0] == pytest.approx(dc[2, 0] - dc[1, 0])
    assert res[2, 3] == pytest.approx(dc[2, 3] - dc[2, 2])


def test_padding_and_constant_image():
    img = np.full((13, 21), 128, dtype=np.uint8)
    lat = forward(img)
    assert lat.pad == (3, 3) and lat.grid == (2, 3)
    assert np.allclose(lat.bands, 0.0, atol=1e-12)
    assert np.array_equal(inverse(lat), img)


def test_scales():
    lat = forward(np.full((16, 16), 9, dtype=np.uint8))
    s = estimate_scales(lat)
    assert np.all(s[1:] == 0.11)  # AC bands are empty; DC keeps its origin residual
    assert s[0] > 0.11
    idx = quantize_scales([0.11, 0.11 * np.exp(0.25 * 5), 1e30])
    assert idx.tolist() == [0, 5, SCALE_LEVELS - 1]
    assert dequantize_scales(5) == pytest.approx(0.11 * np.exp(1.25))
    with pytest.raises(ConfigurationError):
        dequantize_scales(SCALE_LEVELS)


def test_input_validation():
    with pytest.raises(ConfigurationError):
        check_image(np.zeros((4, 4, 3), dtype=np.uint8))
    with pytest.raises(ConfigurationError):
        check_image(np.zeros((0, 4), dtype=np.uint8))
    with pytest.raises(ConfigurationError):
        check_image(np.full((4, 4), 300))
    with pytest.raises(ConfigurationError):
        forward(np.zeros((8, 8), dtype=np.uint8), block=5)


def test_pgm_roundtrip_and_colour_conversion(tmp_path, small_image):
    write_pgm(tmp_path / "x.pgm", small_image)
    assert np.array_equal(read_image(tmp_path / "x.pgm"), small_image)
    from PIL import Image

    rgb = np.zeros((4, 4, 3), dtype=np.uint8)
    rgb[..., 0] = 200
    Image.fromarray(rgb).save(tmp_path / "c.ppm")
    assert np.all(read_image(tmp_path / "c.ppm") == round(200 * 0.299))
