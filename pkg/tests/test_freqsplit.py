import numpy as np
import pytest

from fracdeblur.freqsplit import (BUTTERWORTH_ORDER, DEFAULT_UC, DEFAULT_US, KINDS, apply_response,
                                  build_filter, radial_frequency, ringing_score, split_frequencies,
                                  step_image)
from fracdeblur.tensorcore import InvalidArgument

from signals import random_complex


class TestBuild:
    def test_defaults(self):
        assert (DEFAULT_UC, DEFAULT_US, BUTTERWORTH_ORDER) == (10.0, 29.0, 2)

    @pytest.mark.parametrize("kind", KINDS)
    def test_invariants(self, kind):
        bank = build_filter(33, 40, kind, 6.0, 8.0)
        assert np.all((bank.w_low >= 0) & (bank.w_low <= 1))
        assert np.abs(bank.w_low + bank.w_high - 1).max() == 0

    @pytest.mark.parametrize("kind", ["cosine_bell", "butterworth"])
    def test_radially_non_increasing(self, kind):
        bank = build_filter(64, 64, kind, 10.0, 12.0)
        u = radial_frequency(64, 64).ravel()
        order = np.argsort(u, kind="stable")
        w = bank.w_low.ravel()[order]
        assert np.all(np.diff(w) <= 1e-15)

    def test_cosine_bell_piecewise(self):
        u_c, u_s = 10.0, 12.0
        bank = build_filter(64, 64, "cosine_bell", u_c, u_s)
        u = radial_frequency(64, 64)
        ref = np.where(u <= u_c - u_s / 2, 1.0,
                       np.where(u >= u_c + u_s / 2, 0.0,
                                0.5 * (1 + np.cos(np.pi * (u - u_c + u_s / 2) / u_s))))
        assert np.abs(bank.w_low - ref).max() <= 1e-15
        assert bank.w_low[32, 32] == 1.0  # centred DC
        assert bank.w_low[32, 42] == pytest.approx(0.5)  # |u| = u_c

    def test_dc_below_one_when_uc_small(self):
        # default u_c = 10 < u_s / 2 = 14.5, so even DC sits on the transition
        bank = build_filter(64, 64)
        assert bank.w_low[32, 32] < 1.0

    def test_brick_wall(self):
        bank = build_filter(32, 32, "cosine_bell", 5.0, 0.0)
        u = radial_frequency(32, 32)
        np.testing.assert_array_equal(bank.w_low, (u <= 5.0).astype(float))

    def test_butterworth_and_hanning(self):
        u = radial_frequency(32, 32)
        bw = build_filter(32, 32, "butterworth", 6.0, 0.0)
        np.testing.assert_allclose(bw.w_low, 1 / (1 + (u / 6.0) ** 4))
        hn = build_filter(32, 32, "hanning", 6.0, 0.0)
        ref = np.where(u < 12.0, 0.5 * (1 + np.cos(np.pi * u / 12.0)), 0.0)
        np.testing.assert_allclose(hn.w_low, ref, atol=1e-15)

    @pytest.mark.parametrize("args", [(0, 8, "cosine_bell", 1, 1), (8, 8, "cosine_bell", 0, 1),
                                      (8, 8, "cosine_bell", 1, -1), (8, 8, "gabor", 1, 1)])
    def test_errors(self, args):
        with pytest.raises(InvalidArgument):
            build_filter(*args)


class TestSplit:
    @pytest.mark.parametrize("kind", KINDS)
    def test_perfect_reconstruction(self, rng, kind):
        x = rng.random((48, 40))
        lo, hi = split_frequencies(x, build_filter(48, 40, kind, 7.0, 9.0))
        assert np.abs(lo + hi - x).max() <= 1e-9
        z = random_complex(rng, 16, 16)
        lo, hi = split_frequencies(z, build_filter(16, 16, kind, 3.0, 2.0))
        assert np.abs(lo + hi - z).max() <= 1e-9

    def test_constant_image(self):
        x = np.full((32, 32), 0.4)
        lo, hi = split_frequencies(x, build_filter(32, 32, "cosine_bell", 5.0, 4.0))
        assert np.abs(lo - x).max() <= 1e-9 and np.abs(hi).max() <= 1e-9

    def test_all_pass(self, rng):
        x = rng.random((32, 32))
        lo, hi = split_frequencies(x, build_filter(32, 32, "cosine_bell", 100.0, 0.0))
        np.testing.assert_allclose(lo, x, atol=1e-14)
        assert np.abs(hi).max() <= 1e-14

    def test_nyquist_checkerboard(self):
        y, x = np.mgrid[0:32, 0:32]
        board = (-1.0) ** (x + y)
        lo, hi = split_frequencies(board, build_filter(32, 32, "cosine_bell", 4.0, 2.0))
        assert np.sum(hi ** 2) / np.sum(board ** 2) >= 0.99

    def test_contraction(self, rng):
        x = rng.random((32, 32))
        bank = build_filter(32, 32, "butterworth", 5.0, 0.0)
        lo = split_frequencies(x, bank)[0]
        llo = split_frequencies(lo, bank)[0]
        assert np.linalg.norm(llo) <= np.linalg.norm(lo) + 1e-12

    def test_monotone_in_uc(self, rng):
        x = rng.random((32, 32))
        energies = [np.sum(split_frequencies(x, build_filter(32, 32, "cosine_bell", uc, 6.0))[0] ** 2)
                    for uc in (2.0, 4.0, 8.0, 16.0)]
        assert all(a <= b + 1e-12 for a, b in zip(energies, energies[1:]))

    def test_real_output_for_real_input(self, rng):
        lo, hi = split_frequencies(rng.random((8, 8)), build_filter(8, 8))
        assert np.isrealobj(lo) and np.isrealobj(hi)

    def test_apply_response_matches(self, rng):
        x = rng.random((16, 16))
        bank = build_filter(16, 16, "hanning", 4.0, 0.0)
        np.testing.assert_allclose(apply_response(x, bank.w_low).real, split_frequencies(x, bank)[0])

    def test_shape_mismatch(self):
        with pytest.raises(InvalidArgument):
            split_frequencies(np.zeros((8, 8)), build_filter(8, 10))


class TestRinging:
    def test_reference_scores_zero(self):
        step = step_image()
        assert ringing_score(step, step) == 0.0

    def test_frozen_scores_and_order(self):
        # measured on the 128 x 128 centred-square step, u_c = 10, u_s = 29
        step = step_image()

        def score(kind, u_s=DEFAULT_US):
            return ringing_score(split_frequencies(step, build_filter(128, 128, kind, 10.0, u_s))[0], step)

        scores = {"hanning": score("hanning"), "cosine_bell": score("cosine_bell"),
                  "butterworth": score("butterworth"), "brick_wall": score("cosine_bell", 0.0)}
        expected = {"hanning": 9.526, "cosine_bell": 27.56, "butterworth": 77.05, "brick_wall": 280.69}
        for kind, value in expected.items():
            assert scores[kind] == pytest.approx(value, rel=1e-3)
        assert scores["cosine_bell"] < scores["brick_wall"]
        assert scores["cosine_bell"] < scores["butterworth"]
        assert scores["hanning"] < scores["cosine_bell"]

    def test_shape_mismatch(self):
        with pytest.raises(InvalidArgument):
            ringing_score(np.zeros((4, 4)), np.zeros((5, 5)))
