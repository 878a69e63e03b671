import math

import numpy as np
import pytest
from scipy import stats

from rmtlab.distributions import RngStream, make_entry_law
from rmtlab.ensembles import Field, Spike, SpikeSpec, dct_frame, is_hermitian
from rmtlab.limits import (DeformedModel, DiagConvention, LimitKind, LimitLaw, auto_limit,
                           empirical_V_finite_N, empirical_V_shared_minor, entry_variances,
                           frame_v_matrix, guoe_entry_variances, limit_entry_profile,
                           limit_entry_variances, real_diag_scale, sample_convolution_law,
                           sample_guoe, sample_limit_eigs, sample_limit_V_case_a)
from rmtlab.stats import ks_two_sample
from rmtlab.theory import guoe_tau, h_variance_profile, v_theta

GAUSS = make_entry_law("gaussian", 1.0)
RADEM = make_entry_law("rademacher", 1.0)


class TestConvolution:
    def test_v_zero_is_mu(self):
        x = sample_convolution_law(RADEM, 0.0, RngStream(0), 1000)
        assert set(np.unique(x)) == {-1.0, 1.0}

    def test_gaussian_closed_form(self):
        x = sample_convolution_law(make_entry_law("gaussian", 0.8), 0.5, RngStream(1), 10**5)
        assert stats.kstest(x, stats.norm(0, math.sqrt(0.64 + 0.5)).cdf).statistic < 0.006

    def test_rademacher_bimodal(self):
        x = sample_convolution_law(RADEM, 0.01, RngStream(2), 10**5)
        assert 0.97 <= np.abs(x).mean() <= 1.03

    def test_negative_variance(self):
        with pytest.raises(ValueError):
            sample_convolution_law(RADEM, -0.1, RngStream(0))


class TestGuoe:
    @pytest.mark.parametrize("field,var", [(Field.REAL, 2 * 0.7), (Field.COMPLEX, 0.7)])
    def test_scalar(self, field, var):
        x = sample_guoe(1, 0.7, field, RngStream(3), 10**5)[:, 0, 0]
        assert np.all(np.imag(x) == 0)
        assert stats.kstest(np.real(x), stats.norm(0, math.sqrt(var)).cdf).pvalue > 1e-3

    def test_top_eigenvalue_2x2(self):
        lam1 = sample_limit_eigs(LimitLaw.guoe(2, 1.0, Field.REAL), RngStream(4), 10**5)[:, 0]
        # 2x2 formula on independent draws: a, c ~ N(0, 2), b ~ N(0, 1)
        g = np.random.default_rng(12345)
        a, c, b = g.normal(0, math.sqrt(2), (3, 10**5))
        b = b / math.sqrt(2)
        oracle = (a + c) / 2 + np.sqrt((a - c) ** 2 / 4 + b**2)
        assert abs(lam1.mean() - oracle.mean()) < 0.02
        # (a - c)/2 and b are standard normal, so E lam1 = E Rayleigh = sqrt(pi/2)
        assert abs(lam1.mean() - math.sqrt(math.pi / 2)) < 0.02

    @pytest.mark.parametrize("field", [Field.REAL, Field.COMPLEX])
    def test_entry_variances_and_hermitian(self, field):
        H = sample_guoe(3, 1.5, field, RngStream(5), 10**5)
        assert all(is_hermitian(H[i]) for i in range(5))
        emp = np.mean(np.abs(H) ** 2, axis=0)
        se = np.std(np.abs(H) ** 2, axis=0, ddof=1) / math.sqrt(H.shape[0])
        assert np.all(np.abs(emp - guoe_entry_variances(3, 1.5, field)) < 3.5 * se)
        if field is Field.COMPLEX:
            assert np.mean(H[:, 0, 1].real ** 2) == pytest.approx(0.75, rel=0.02)

    def test_unitary_invariance(self):
        rng = RngStream(6)
        H = sample_guoe(3, 1.0, Field.COMPLEX, rng, 10**5)
        Q, _ = np.linalg.qr(rng.gen.normal(size=(3, 3)) + 1j * rng.gen.normal(size=(3, 3)))
        H2 = sample_guoe(3, 1.0, Field.COMPLEX, RngStream(7), 10**5)
        rotated = np.conj(Q.T) @ H2 @ Q
        e1 = np.linalg.eigvalsh(H)[:, -1]
        e2 = np.linalg.eigvalsh(rotated)[:, -1]
        assert ks_two_sample(e1, e2).p_value > 0.01

    def test_bad_args(self):
        with pytest.raises(ValueError):
            sample_guoe(0, 1.0, Field.REAL, RngStream(0))
        with pytest.raises(ValueError):
            sample_guoe(2, 0.0, Field.REAL, RngStream(0))


class TestCaseA:
    def test_rank_one_complex_matches_convolution(self):
        theta = 2.0
        v = v_theta(theta, 1.0, RADEM.m4, 2)
        a = sample_limit_V_case_a(np.eye(1), RADEM, theta, 1.0, Field.COMPLEX, RngStream(8), 10**5)
        b = sample_convolution_law(RADEM, v, RngStream(9), 10**5)
        assert ks_two_sample(a[:, 0], b).p_value > 0.01

    def test_zero_draws(self):
        V = frame_v_matrix(dct_frame(4)[:, :2], RADEM, 2.0, 1.0, Field.REAL, RngStream(0), 5,
                           wigner=False, gaussian=False)
        assert np.array_equal(V, np.zeros((5, 2, 2)))

    def test_not_orthonormal(self):
        with pytest.raises(ValueError):
            sample_limit_V_case_a([[1.0], [1.0]], RADEM, 2.0, 1.0, Field.REAL, RngStream(0))

    @pytest.mark.parametrize("field", [Field.REAL, Field.COMPLEX])
    def test_entry_variance_formula(self, field):
        # exact E|V_ab|^2 against simulation for a non-trivial complex frame
        U = np.array([[0.6, 0.0], [0.8j, 0.0], [0.0, 1.0]]) if field is Field.COMPLEX \
            else dct_frame(3)[:, :2]
        V = frame_v_matrix(U, RADEM, 2.0, 1.0, field, RngStream(10), 2 * 10**5)
        emp = np.mean(np.abs(V) ** 2, axis=0)
        theory = limit_entry_variances(U, RADEM, 2.0, 1.0, field)
        assert np.allclose(emp, theory, rtol=0.02)

    def test_entry_variances_reduce_to_diagonal_profile(self):
        vpp, vpl = h_variance_profile(2.0, 1.0, 3.0, 4)
        out = entry_variances(np.eye(3), 2.0 + vpp, 1.0 + vpl, Field.REAL)
        assert np.allclose(np.diag(out), 2.0 + vpp) and out[0, 1] == pytest.approx(1.0 + vpl)

    @pytest.mark.slow
    def test_spread_64_is_gaussian(self):
        tau = guoe_tau(2.0, 1.0)
        U = np.full((64, 1), 1 / 8.0)
        x = np.concatenate([sample_limit_V_case_a(U, RADEM, 2.0, 1.0, Field.REAL,
                                                  RngStream(11, i), 5000)[:, 0]
                            for i in range(20)])
        assert stats.kstest(x, stats.norm(0, math.sqrt(2 * tau)).cdf).statistic < 0.02

    @pytest.mark.slow
    def test_case_a_to_case_b_bridge(self):
        tau = guoe_tau(2.0, 1.0)
        ref = stats.norm(0, math.sqrt(2 * tau)).cdf
        d = []
        for K in (4, 16, 64):
            U = np.full((K, 1), 1 / math.sqrt(K))
            x = np.concatenate([sample_limit_V_case_a(U, RADEM, 2.0, 1.0, Field.REAL,
                                                      RngStream(12, 10 * K + i), 5000)[:, 0]
                                for i in range(4)])
            d.append(stats.kstest(x, ref).statistic)
        noise = 2 / math.sqrt(20000)
        assert d[0] + noise >= d[1] and d[1] + noise >= d[2]


class TestDispatch:
    def test_shapes(self):
        rng = RngStream(13)
        assert sample_limit_eigs(LimitLaw.convolution(RADEM, 0.1), rng).shape == (1,)
        e = sample_limit_eigs(LimitLaw.guoe(3, 1.0, Field.REAL), rng)
        assert e.shape == (3,) and np.all(np.diff(e) <= 0)
        U = dct_frame(3)[:, :2]
        e = sample_limit_eigs(LimitLaw.frame_v(U, RADEM, 2.0, 1.0, Field.REAL), rng, 7)
        assert e.shape == (7, 2) and np.all(np.diff(e, axis=1) <= 0)

    def test_real_diag_scale(self):
        assert real_diag_scale(Field.REAL, DiagConvention.THEOREM_TWO_ONE) == math.sqrt(2)
        assert real_diag_scale(Field.REAL, DiagConvention.THEOREM_ONE) == 1.0
        assert real_diag_scale(Field.COMPLEX, DiagConvention.THEOREM_TWO_ONE) == 1.0

    def test_auto_limit(self):
        spec = SpikeSpec((Spike(3.0), Spike(2.5, k=2, geometry="spread", K=4),
                          Spike(2.0, geometry="spread", K_exponent=0.3)))
        m = DeformedModel(500, Field.REAL, RADEM, spec)
        lim0 = auto_limit(m, 0)
        assert lim0.kind is LimitKind.CONVOLUTION and lim0.law.sigma == pytest.approx(math.sqrt(2))
        assert auto_limit(m, 0, DiagConvention.THEOREM_ONE).law.sigma == 1.0
        assert auto_limit(m, 1).kind is LimitKind.FRAME_V
        lim2 = auto_limit(m, 2)
        assert lim2.kind is LimitKind.GUOE and lim2.tau == pytest.approx(guoe_tau(2.0, 1.0))

    def test_profile_of_convolution(self):
        lim = LimitLaw.convolution(RADEM.scaled(math.sqrt(2)), 0.25)
        assert limit_entry_profile(lim)[0, 0] == pytest.approx(2.25)


class TestFiniteV:
    def test_hermitian_and_shape(self):
        U = np.array([[0.6, 0.0], [0.8, 0.0], [0.0, 1.0]])
        spec = SpikeSpec((Spike(2.0, k=2, geometry="explicit", frame=U),))
        m = DeformedModel(200, Field.COMPLEX, RADEM, spec)
        V = empirical_V_finite_N(m, 0, RngStream(14))
        assert V.shape == (2, 2) and is_hermitian(V)
        Vs = empirical_V_shared_minor(m, 0, RngStream(15), 3)
        assert len(Vs) == 3 and all(is_hermitian(v) for v in Vs)

    def test_subcritical_target(self):
        m = DeformedModel(100, Field.REAL, RADEM, SpikeSpec((Spike(2.0), Spike(0.5))))
        with pytest.raises(ValueError):
            empirical_V_finite_N(m, 1, RngStream(0))

    @pytest.mark.slow
    def test_rank_one_variance(self):
        # V -> W_11 + H_11 with variance sigma^2 + v_theta = 4/3 (complex Gaussian, theta = 2)
        m = DeformedModel(1500, Field.COMPLEX, GAUSS, SpikeSpec((Spike(2.0),)))
        V = np.concatenate([empirical_V_shared_minor(m, 0, RngStream(16, r), 10)
                            for r in range(200)]).ravel()
        assert np.var(V.real, ddof=1) == pytest.approx(4 / 3, rel=0.15)

    @pytest.mark.slow
    def test_shared_minor_agrees_with_direct(self):
        m = DeformedModel(300, Field.REAL, RADEM, SpikeSpec((Spike(2.0),)))
        direct = np.array([empirical_V_finite_N(m, 0, RngStream(17, r))[0, 0] for r in range(1500)])
        shared = np.concatenate([empirical_V_shared_minor(m, 0, RngStream(18, r), 5)
                                 for r in range(300)]).ravel()
        assert ks_two_sample(direct, shared).p_value > 0.01
