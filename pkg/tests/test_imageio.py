import numpy as np
import pytest
from PIL import Image

from fracdeblur.imageio import (ImageFormatError, UnsupportedFormat, encode_pnm, load_image,
                                parse_pnm, save_image)
from fracdeblur.tensorcore import InvalidArgument


def test_p5_example():
    data = b"P5\n4 2\n255\n" + bytes([0, 51, 102, 153, 204, 255, 1, 2])
    t = parse_pnm(data)
    assert t.shape == (2, 4, 1)
    np.testing.assert_allclose(t[0, :, 0], [0, 0.2, 0.4, 0.6])
    assert t[1, 1, 0] == 1.0 and t[1, 2, 0] == pytest.approx(1 / 255)


def test_header_comments_and_16_bit():
    data = b"P5 # comment\n2 # w\n1\n65535\n" + b"\x00\x01\xff\xff"
    np.testing.assert_allclose(parse_pnm(data)[0, :, 0], [1 / 65535, 1.0])


def test_p6_channels():
    t = parse_pnm(b"P6\n1 1\n255\n" + bytes([255, 0, 51]))
    np.testing.assert_allclose(t[0, 0], [1.0, 0.0, 0.2])


def test_truncated_names_byte_counts():
    with pytest.raises(ImageFormatError, match="expected 8 bytes, found 5"):
        parse_pnm(b"P5\n4 2\n255\n" + bytes(5))


@pytest.mark.parametrize("data, error", [
    (b"", ImageFormatError), (b"XX", ImageFormatError), (b"P2\n1 1\n255\n0", UnsupportedFormat),
    (b"P5\n1 1\n1023\n\0\0", UnsupportedFormat), (b"P5\nab 1\n255\n\0", ImageFormatError),
    (b"P5\n0 1\n255\n", ImageFormatError), (b"P5\n1 1", ImageFormatError),
])
def test_malformed(data, error):
    with pytest.raises(error):
        parse_pnm(data)


def test_errors_are_invalid_argument():
    assert issubclass(ImageFormatError, InvalidArgument)
    assert issubclass(UnsupportedFormat, InvalidArgument)


@pytest.mark.parametrize("bits", [8, 16])
def test_pgm_round_trip(tmp_path, rng, bits):
    levels = 2 ** bits - 1
    t = np.round(rng.random((5, 7, 1)) * levels) / levels
    path = tmp_path / "a.pgm"
    save_image(path, t, bits=bits)
    np.testing.assert_array_equal(load_image(path), t)


def test_ppm_round_trip_and_gray_promotion(tmp_path, rng):
    t = np.round(rng.random((4, 3, 3)) * 255) / 255
    save_image(tmp_path / "c.ppm", t)
    np.testing.assert_array_equal(load_image(tmp_path / "c.ppm"), t)
    save_image(tmp_path / "g.ppm", t[:, :, :1])
    assert load_image(tmp_path / "g.ppm").shape == (4, 3, 3)


@pytest.mark.parametrize("channels", [1, 3])
def test_png_round_trip(tmp_path, rng, channels):
    t = np.round(rng.random((6, 5, channels)) * 255) / 255
    save_image(tmp_path / "x.png", t)
    np.testing.assert_array_equal(load_image(tmp_path / "x.png"), t)


def test_png_rgba_converted(tmp_path):
    Image.new("RGBA", (3, 2), (255, 0, 0, 128)).save(tmp_path / "a.png")
    t = load_image(tmp_path / "a.png")
    assert t.shape == (2, 3, 3)
    np.testing.assert_array_equal(t[0, 0], [1.0, 0.0, 0.0])


def test_save_clips(tmp_path):
    save_image(tmp_path / "c.pgm", np.array([[-0.5, 1.5]]))
    np.testing.assert_array_equal(load_image(tmp_path / "c.pgm")[0, :, 0], [0.0, 1.0])


def test_unsupported_requests(tmp_path):
    with pytest.raises(UnsupportedFormat):
        save_image(tmp_path / "a.bmp", np.zeros((2, 2)))
    with pytest.raises(UnsupportedFormat):
        save_image(tmp_path / "a.pgm", np.zeros((2, 2, 3)))
    with pytest.raises(UnsupportedFormat):
        encode_pnm(np.zeros((2, 2)), bits=12)
    with pytest.raises(UnsupportedFormat):
        load_image(tmp_path / "a.tif")
