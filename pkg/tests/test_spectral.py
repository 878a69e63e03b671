import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rmtlab.distributions import RngStream, make_entry_law
from rmtlab.ensembles import Field, Spike, SpikeSpec, sample_wigner
from rmtlab.limits import DeformedModel
from rmtlab.spectral import (PoleError, SpectralError, count_outliers, default_delta,
                             eigenvalues_sorted, rescale_fluctuations, resolvent_quadratic,
                             resolvent_solver, resolvent_traces, top_eigenvalues)

GAUSS = make_entry_law("gaussian", 1.0)


class TestEigenvalues:
    def test_diag(self):
        assert np.allclose(eigenvalues_sorted(np.diag([3.0, 1.0, 2.0])), [3, 2, 1])

    def test_swap(self):
        assert np.allclose(eigenvalues_sorted(np.array([[0.0, 1.0], [1.0, 0.0]])), [1, -1])

    def test_all_ones(self):
        assert np.allclose(eigenvalues_sorted(np.ones((3, 3))), [3, 0, 0], atol=1e-12)

    def test_non_finite(self):
        with pytest.raises(SpectralError):
            eigenvalues_sorted(np.array([[np.nan, 0], [0, 1.0]]))

    @settings(max_examples=25, deadline=None)
    @given(st.integers(2, 40), st.integers(0, 2**31), st.booleans())
    def test_trace_invariants(self, n, seed, cplx):
        H = sample_wigner(n, Field.COMPLEX if cplx else Field.REAL, GAUSS, RngStream(seed))
        ev = eigenvalues_sorted(H)
        norm = np.linalg.norm(H)
        assert np.all(np.diff(ev) <= 0)
        assert abs(ev.sum() - np.trace(H).real) <= 1e-8 * n * norm
        assert abs((ev**2).sum() - norm**2) <= 1e-8 * n * norm**2

    @pytest.mark.parametrize("field", [Field.REAL, Field.COMPLEX])
    def test_lanczos_matches_dense(self, field):
        spec = SpikeSpec((Spike(3.0, k=2), Spike(2.0)))
        model = DeformedModel(300, field, GAUSS, spec)
        _, M = model.sample(RngStream(1))
        dense = eigenvalues_sorted(M)[:3]
        assert np.allclose(top_eigenvalues(M, 3), dense, atol=1e-10)

    def test_lanczos_small_falls_back(self):
        H = np.diag(np.arange(10.0))
        assert np.allclose(top_eigenvalues(H, 2), [9, 8])


class TestRescale:
    def test_at_rho(self):
        spec = SpikeSpec((Spike(2.0),))
        rec = rescale_fluctuations([2.5, 1.0], spec, 100)
        assert rec.xi[0] == pytest.approx([0.0])

    def test_hand_value(self):
        rec = rescale_fluctuations([2.6], SpikeSpec((Spike(2.0),)), 100)
        assert rec.xi[0][0] == pytest.approx(4 / 3, rel=1e-12)

    def test_rank_bookkeeping(self):
        spec = SpikeSpec((Spike(3.0), Spike(2.0, k=2)))
        rec = rescale_fluctuations([3.4, 2.6, 2.4, 1.0], spec, 100)
        assert [len(rec.xi[j]) for j in (0, 1)] == [1, 2]
        assert rec.ranks == {0: [1], 1: [2, 3]}
        assert np.allclose(rec.lam[1], [2.6, 2.4])

    def test_no_supercritical(self):
        rec = rescale_fluctuations([1.0], SpikeSpec((Spike(0.5),)), 100)
        assert rec.xi == {} and rec.lam == {}

    def test_too_few(self):
        with pytest.raises(SpectralError):
            rescale_fluctuations([3.0], SpikeSpec((Spike(2.0, k=2),)), 100)


class TestCountOutliers:
    def test_bulk_only(self):
        assert count_outliers(np.linspace(-2, 2, 50), 1.0, 0.1) == (0, 0)

    def test_both_sides(self):
        assert count_outliers([3.0, 2.5, 0.0, -2.2, -2.6], 1.0, 0.3) == (2, 1)

    def test_delta_positive(self):
        with pytest.raises(ValueError):
            count_outliers([0.0], 1.0, 0.0)

    def test_default_delta(self):
        spec = SpikeSpec((Spike(3.0, k=2), Spike(2.0)))
        assert default_delta(spec) == pytest.approx((2.5 - 2) / 4)

    @pytest.mark.slow
    @pytest.mark.parametrize("spikes,expected", [((Spike(2.0),), 1),
                                                 ((Spike(3.0, k=2), Spike(2.0)), 3)])
    def test_monte_carlo_frequency(self, spikes, expected):
        model = DeformedModel(1000, Field.REAL, GAUSS, SpikeSpec(spikes))
        hits = 0
        for r in range(200 if expected == 1 else 30):
            _, M = model.sample(RngStream(9, r))
            hits += count_outliers(top_eigenvalues(M, expected + 1), 1.0, 0.2)[0] == expected
        assert hits / (200 if expected == 1 else 30) >= 0.99


class TestResolvent:
    def test_zero_matrix(self):
        tr = resolvent_traces(np.zeros((2, 2)), 2.0)
        assert (tr.tr1, tr.tr2, tr.diag2) == pytest.approx((0.5, 0.25, 0.25))

    def test_hand_value(self):
        assert resolvent_traces(np.diag([1.0, -1.0]), 3.0).tr1 == pytest.approx(0.375)

    def test_pole(self):
        with pytest.raises(PoleError):
            resolvent_traces(np.diag([1.0, 3.0]), 2.0)
        with pytest.raises(PoleError):
            resolvent_solver(np.diag([1.0, 3.0]), 2.0)

    def test_against_inverse(self):
        # an explicit inverse is fine as an oracle even though the library avoids it
        H = sample_wigner(30, Field.COMPLEX, GAUSS, RngStream(4)) / math.sqrt(30)
        rho = 2.7
        G = np.linalg.inv(rho * np.eye(30) - H)
        tr = resolvent_traces(H, rho)
        assert tr.tr1 == pytest.approx(np.trace(G).real / 30, rel=1e-10)
        assert tr.tr2 == pytest.approx(np.trace(G @ G).real / 30, rel=1e-10)
        assert tr.diag2 == pytest.approx(np.mean(np.abs(np.diag(G)) ** 2), rel=1e-10)
        Y = RngStream(5).gen.standard_normal((2, 30))
        assert np.allclose(resolvent_quadratic(resolvent_solver(H, rho), Y), Y @ G @ Y.T,
                           atol=1e-10)

    def test_finite_difference(self):
        H = sample_wigner(40, Field.REAL, GAUSS, RngStream(6)) / math.sqrt(40)
        rho, h = 2.6, 1e-5
        d = (resolvent_traces(H, rho + h).tr1 - resolvent_traces(H, rho - h).tr1) / (2 * h)
        assert -d == pytest.approx(resolvent_traces(H, rho).tr2, rel=1e-4)

    @pytest.mark.slow
    def test_monte_carlo_trace(self):
        H = sample_wigner(2000, Field.REAL, GAUSS, RngStream(7)) / math.sqrt(2001)
        assert resolvent_traces(H, 2.5).tr1 == pytest.approx(0.5, abs=0.01)
