import time

import numpy as np
import pytest

from qvrf import codec
from qvrf.codec import (HEADER_SIZE, Bitstream, account_bits, analyze, decode_image,
                        decode_latent, encode_image, read_rd_csv, rd_sweep, write_rd_csv)
from qvrf.errors import ConfigurationError, DecodeError
from qvrf.metrics import psnr


@pytest.mark.parametrize("a", [0.25, 1.0, 4.0, 10.0, 32.0])
def test_roundtrip_matches_encoder_reconstruction(small_image, a):
    enc = analyze(small_image, a)
    data = enc.bitstream.to_bytes()
    assert np.array_equal(decode_image(data), enc.reconstruction)
    assert np.array_equal(decode_latent(data).bands, enc.dequantized.bands)


def test_quantization_error_bounded_by_half_bin(small_image):
    for a in (0.5, 3.0):
        enc = analyze(small_image, a)
        assert np.max(np.abs(enc.latent.bands - enc.dequantized.bands)) <= 1 / (2 * a) + 1e-12


def test_closed_loop_dc_keeps_error_bounded(rocket):
    # Open-loop DPCM would accumulate DC error along rows; closed-loop keeps
    # every reconstructed DC within half a bin of the true DC.
    from qvrf.transform import coefficients, forward

    a = 0.5
    enc = analyze(rocket, a)
    true_dc = coefficients(forward(rocket))[0]
    rec_dc = coefficients(enc.dequantized)[0]
    assert np.max(np.abs(true_dc - rec_dc)) <= 1 / (2 * a) + 1e-9


def test_a_travels_as_float32(small_image):
    bs = encode_image(small_image, 1.1)
    assert bs.a == np.float32(1.1)
    assert Bitstream.from_bytes(bs.to_bytes()).a == bs.a


def test_header_layout(small_image):
    data = encode_image(small_image, 2.0).to_bytes()
    assert data[:4] == b"QVRF" and data[4] == 1 and data[5] == 8
    assert (data[6], data[7]) == (-61 % 8, -45 % 8)
    assert int.from_bytes(data[8:12], "big") == 61
    assert int.from_bytes(data[12:16], "big") == 45
    side_len = int.from_bytes(data[20:24], "big")
    assert len(data) == HEADER_SIZE + side_len + len(Bitstream.from_bytes(data).latent)


def test_side_info_independent_of_a(small_image):
    sides = {encode_image(small_image, a).side for a in (0.3, 1.0, 7.0, 30.0)}
    assert len(sides) == 1


def test_rate_and_quality_increase_with_a(rocket):
    lo, hi = encode_image(rocket, 1.0), encode_image(rocket, 8.0)
    assert len(hi) > len(lo)
    assert psnr(rocket, decode_image(hi)) > psnr(rocket, decode_image(lo))


def test_constant_image_is_cheap():
    img = np.full((64, 64), 77, dtype=np.uint8)
    bs = encode_image(img, 1.0)
    # one DC unit is 64/8 = 8 pixel levels at a=1, so the error is under 4 levels
    assert np.max(np.abs(decode_image(bs).astype(int) - img)) <= 4
    assert len(bs) < 100


@pytest.mark.parametrize("shape", [(1, 1), (1, 37), (9, 1), (17, 23)])
def test_odd_shapes(shape):
    rng = np.random.default_rng(sum(shape))
    img = rng.integers(0, 256, shape).astype(np.uint8)
    for block in (4, 8, 16):
        enc = analyze(img, 5.0, block)
        assert np.array_equal(decode_image(enc.bitstream), enc.reconstruction)


def test_invalid_regulator_rejected(small_image):
    with pytest.raises(ConfigurationError):
        encode_image(small_image, 0.1)
    with pytest.raises(ConfigurationError):
        encode_image(small_image, float("nan"))


@pytest.mark.parametrize("mutate", ["truncate", "magic", "version", "block", "pad", "side", "a"])
def test_malformed_streams_raise_decode_error(small_image, mutate):
    data = bytearray(encode_image(small_image, 3.0).to_bytes())
    if mutate == "truncate":
        data = data[:-1]
    elif mutate == "magic":
        data[0] = ord("X")
    elif mutate == "version":
        data[4] = 9
    elif mutate == "block":
        data[5] = 7
    elif mutate == "pad":
        data[6] ^= 1
    elif mutate == "side":
        data[20:24] = (10**6).to_bytes(4, "big")
    elif mutate == "a":
        data[16:20] = np.float32(100.0).tobytes()[::-1]
    with pytest.raises(DecodeError):
        decode_image(bytes(data))


def test_header_too_short():
    with pytest.raises(DecodeError):
        decode_image(b"QVRF")


def test_account_bits_adds_up(small_image):
    bs = encode_image(small_image, 2.0)
    br = account_bits(bs.to_bytes())
    assert br.pixels == 61 * 45
    assert br.total_bpp == pytest.approx(br.latent_bpp + br.side_bpp + br.header_bpp)
    assert br.total_bpp == 8 * len(bs) / br.pixels


def test_estimate_tracks_actual_bits(rocket):
    for a in (1.0, 4.0):
        enc = analyze(rocket, a)
        actual = 8 * len(enc.bitstream.latent)
        assert abs(actual - enc.latent_bits_estimate) < 0.01 * actual + 64


def test_bits_table_lists_every_a(small_image):
    text = codec.bits_table(small_image, [1.0, 2.0, 4.0])
    assert len(text.splitlines()) == 4


def test_sweep_csv_roundtrip(tmp_path, images):
    imgs = [images["camera_512"][:200, :200], images["coffee_600x400"][:180, :190]]
    points = rd_sweep(imgs, [1.0, 2.0], names=["cam", "coffee"])
    assert [p.image for p in points] == ["cam", "cam", "coffee", "coffee", "mean", "mean"]
    mean = points[4]
    assert mean.bpp_total == pytest.approx((points[0].bpp_total + points[2].bpp_total) / 2)
    write_rd_csv(points, tmp_path / "rd.csv")
    back = read_rd_csv(tmp_path / "rd.csv")
    assert back == points


def test_encode_speed(rocket):
    encode_image(rocket, 4.0)  # warm caches and the JIT
    t0 = time.perf_counter()
    encode_image(rocket, 6.0)
    assert time.perf_counter() - t0 < 2.0
