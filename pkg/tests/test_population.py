"""Population objectives, minimizers, and the collapse analysis."""

import math

import numpy as np
import pytest

from mismix import (
    FitSpec,
    K2Model,
    MeanConfig,
    MixtureModel,
    collapse_report,
    fit_hard_assignment,
    fit_quasi_mle,
    geometry,
    ha_target_k2,
    hard_assignment_target,
    hessian_at_origin,
    make_regular_simplex,
    normalized_mse,
    perm_distance,
    population_kmeans_risk,
    population_nll,
    quasi_mle,
    rtau_remainder,
    trace_to_csv,
)

_SYM = MeanConfig(np.array([[1.0], [-1.0]]))
_C_STAR = 1.1666309411753726  # folded-normal center for ||mu|| = sigma = 1
_PHI_TRUTH = 0.6667381176492548  # Phi at the true means, same model (= 3 - 2c)


def _truth(sigma=1.0):
    return MixtureModel(_SYM, sigma)


# ---------------------------------------------------------------------------
# FitSpec
# ---------------------------------------------------------------------------


def test_fit_spec_validation():
    with pytest.raises(ValueError):
        FitSpec(tau=0.0)
    with pytest.raises(ValueError):
        FitSpec(tau=1.0, mc_samples=100)
    with pytest.raises(ValueError):
        FitSpec(tau=1.0, quadrature_nodes=5)
    with pytest.raises(ValueError):
        FitSpec(tau=1.0, optimizer="newton")
    with pytest.raises(ValueError):
        FitSpec(tau=1.0, tol=-1.0)
    spec = FitSpec.from_rho(0.5, 2.0)
    assert spec.tau == 1.0 and spec.rho(2.0) == 0.5


def test_vanishing_tau_rejected():
    with pytest.raises(ValueError):
        population_nll(_SYM, _truth(), FitSpec(tau=1e-300))


# ---------------------------------------------------------------------------
# objective values
# ---------------------------------------------------------------------------


def test_nll_single_component_is_gaussian_entropy():
    # K=1, tau=sigma, candidate at the true mean: L = (1/2)log(2 pi sigma^2) + 1/2
    for sigma in (0.5, 1.0, 3.0):
        one = MeanConfig(np.array([[0.7]]))
        val = population_nll(one, MixtureModel(one, sigma), FitSpec(tau=sigma))
        expect = 0.5 * math.log(2 * math.pi * sigma**2) + 0.5
        assert val.value == pytest.approx(expect, rel=1e-14)
        assert val.std_error == 0.0  # quadrature path is deterministic


def test_nll_single_component_pool_path():
    one = MeanConfig(np.array([[0.2, -0.4, 1.0]]))
    model = MixtureModel(one, 1.3)
    val = population_nll(one, model, FitSpec(tau=1.3, mc_samples=200_000, seed=5))
    expect = 3 * (0.5 * math.log(2 * math.pi * 1.3**2) + 0.5)
    assert val.std_error > 0.0
    assert abs(val.value - expect) < 5 * val.std_error


def test_kmeans_risk_single_center_formula():
    # one center at the mixture mean: Phi = sigma^2 d + tr(Sigma_mu), exact on
    # the quadrature path (quadratic integrand)
    truth = _truth(0.7)
    center = MeanConfig(np.array([[0.0]]))
    val = population_kmeans_risk(center, truth, FitSpec(tau=1.0))
    assert val.value == pytest.approx(0.7**2 + 1.0, rel=1e-13)

    rng = np.random.default_rng(4)
    mu = rng.standard_normal((3, 2))
    truth2 = MixtureModel(MeanConfig(mu), 0.9)
    g = geometry(truth2)
    center2 = MeanConfig(g.mixture_mean.reshape(1, -1))
    val2 = population_kmeans_risk(center2, truth2, FitSpec(tau=1.0, mc_samples=400_000, seed=9))
    expect = 0.9**2 * 2 + float(np.trace(g.sigma_mu))
    assert abs(val2.value - expect) < 5 * val2.std_error


def test_kmeans_risk_at_truth_frozen_value():
    # exact value via the interval-moment path (first trace row of the Lloyd fit)
    fit = fit_hard_assignment(_truth(), FitSpec(tau=1.0), _SYM)
    assert fit.trace[0].objective == pytest.approx(_PHI_TRUTH, rel=1e-12)
    # Gauss-Hermite sees the min() kink, so only ~1e-3 accuracy is available there
    gh = population_kmeans_risk(_SYM, _truth(), FitSpec(tau=1.0))
    assert gh.value == pytest.approx(_PHI_TRUTH, abs=5e-3)


def test_decomposition_identity_quadrature():
    # L = d/2 log(2 pi tau^2) + log K + Phi/(2 tau^2) + r on shared nodes
    rng = np.random.default_rng(0)
    truth = _truth()
    for _ in range(25):
        K = int(rng.integers(1, 5))
        cand = MeanConfig(rng.standard_normal((K, 1)) * 2.0)
        spec = FitSpec(tau=float(rng.uniform(0.2, 3.0)))
        L = population_nll(cand, truth, spec).value
        phi = population_kmeans_risk(cand, truth, spec).value
        r = rtau_remainder(cand, truth, spec).value
        const = 0.5 * math.log(2 * math.pi * spec.tau**2) + math.log(K)
        assert abs(L - const - phi / (2 * spec.tau**2) - r) < 1e-10
        assert -math.log(K) - 1e-12 <= r <= 1e-12


def test_decomposition_identity_pool():
    rng = np.random.default_rng(1)
    mu = rng.standard_normal((3, 2))
    truth = MixtureModel(MeanConfig(mu), 1.1)
    for i in range(10):
        cand = MeanConfig(rng.standard_normal((3, 2)))
        spec = FitSpec(tau=float(rng.uniform(0.3, 2.0)), mc_samples=20_000, seed=i)
        L = population_nll(cand, truth, spec).value
        phi = population_kmeans_risk(cand, truth, spec).value
        r = rtau_remainder(cand, truth, spec).value
        const = math.log(2 * math.pi * spec.tau**2) + math.log(3)
        assert abs(L - const - phi / (2 * spec.tau**2) - r) < 1e-8


def test_remainder_magnitude_monotone_in_tau():
    rng = np.random.default_rng(8)
    truth = _truth()
    for _ in range(10):
        cand = MeanConfig(rng.standard_normal((3, 1)) * 1.5)
        rs = [rtau_remainder(cand, truth, FitSpec(tau=1.0 / 2**j)).value for j in range(4)]
        mags = [abs(r) for r in rs]
        assert mags[0] >= mags[1] >= mags[2] >= mags[3]  # |r| shrinks as tau -> 0


def test_candidate_dimension_mismatch():
    with pytest.raises(ValueError):
        population_nll(MeanConfig(np.ones((2, 2))), _truth(), FitSpec(tau=1.0))


# ---------------------------------------------------------------------------
# quasi-MLE minimization
# ---------------------------------------------------------------------------


def test_quasi_mle_correct_spec_recovers_truth():
    fit = fit_quasi_mle(_truth(), FitSpec(tau=1.0), _SYM)
    assert fit.converged and not fit.diverged
    assert normalized_mse(fit.means, _SYM) <= 1e-20
    assert quasi_mle(_truth(), FitSpec(tau=1.0), _SYM).means.shape == (2, 1)


def test_quasi_mle_trace_monotone_and_csv(tmp_path):
    start = MeanConfig(np.array([[2.5], [-0.3]]))
    fit = fit_quasi_mle(_truth(), FitSpec(tau=0.8), start)
    objs = [row.objective for row in fit.trace]
    assert len(objs) == fit.n_iters + 1
    assert all(b <= a + 1e-12 * abs(a) for a, b in zip(objs, objs[1:]))
    assert fit.trace[0].perm_dist_to_truth == pytest.approx(perm_distance(start, _SYM))
    path = tmp_path / "trace.csv"
    trace_to_csv(fit, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "iter,objective,std_error,perm_dist_to_truth,perm_dist_step"
    assert len(lines) == len(fit.trace) + 1


def test_quasi_mle_pool_traces_bitwise_reproducible():
    mu = MeanConfig(np.array([[1.0, 0.5], [-1.0, -0.5]]))
    truth = MixtureModel(mu, 1.0)
    start = MeanConfig(np.array([[0.8, 0.8], [-0.8, -0.8]]))
    spec = FitSpec(tau=0.9, mc_samples=50_000, seed=7, max_iters=40)
    a = fit_quasi_mle(truth, spec, start)
    b = fit_quasi_mle(truth, spec, start)
    assert a.trace == b.trace  # frozen CRN pool: identical float sequences
    assert np.array_equal(a.means.means, b.means.means)
    c = fit_quasi_mle(truth, FitSpec(tau=0.9, mc_samples=50_000, seed=8, max_iters=40), start)
    assert a.trace[0].objective != c.trace[0].objective


def test_damped_gradient_agrees_with_em():
    start = MeanConfig(np.array([[1.4], [-0.7]]))
    em = fit_quasi_mle(_truth(), FitSpec(tau=1.0), start)
    gr = fit_quasi_mle(_truth(), FitSpec(tau=1.0, optimizer="damped-gradient", max_iters=2000), start)
    assert gr.converged
    objs = [row.objective for row in gr.trace]
    assert all(b <= a + 1e-12 * abs(a) for a, b in zip(objs, objs[1:]))
    assert perm_distance(em.means, gr.means) < 1e-6


def test_em_freezes_vanishing_component():
    far = MeanConfig(np.array([[0.5], [60.0]]))
    fit = fit_quasi_mle(_truth(), FitSpec(tau=0.3), far)
    assert 1 in fit.frozen_components
    assert fit.means.means[1, 0] == 60.0  # frozen in place


def test_over_threshold_fit_collapses_to_center():
    # rho^2 = 9 > 1 + snr = 2: the collapsed configuration is the stable target
    fit = fit_quasi_mle(_truth(), FitSpec(tau=3.0), MeanConfig(0.01 * _SYM.means))
    assert np.abs(fit.means.means).max() < 1e-6
    assert normalized_mse(fit.means, _SYM) == pytest.approx(1.0, abs=1e-9)


# ---------------------------------------------------------------------------
# population Lloyd
# ---------------------------------------------------------------------------


def test_lloyd_exact_1d_reaches_closed_form_target():
    target = ha_target_k2(K2Model(np.array([1.0]), 1.0))
    fit = fit_hard_assignment(_truth(), FitSpec(tau=1.0), _SYM)
    assert fit.converged
    assert perm_distance(fit.means, target) < 1e-12
    assert fit.objective.value == pytest.approx(2.0 - _C_STAR**2, rel=1e-12)
    # objective decreasing along the trace
    objs = [row.objective for row in fit.trace]
    assert all(b <= a + 1e-12 for a, b in zip(objs, objs[1:]))


def test_lloyd_optimizer_delegates():
    via_spec = fit_quasi_mle(_truth(), FitSpec(tau=1.0, optimizer="population-Lloyd"), _SYM)
    direct = fit_hard_assignment(_truth(), FitSpec(tau=1.0), _SYM)
    assert np.array_equal(via_spec.means.means, direct.means.means)
    assert hard_assignment_target(_truth(), FitSpec(tau=1.0), _SYM).means.shape == (2, 1)


def test_lloyd_freezes_empty_cell():
    weird = MeanConfig(np.array([[0.5], [1000.0]]))
    fit = fit_hard_assignment(_truth(), FitSpec(tau=1.0), weird)
    assert fit.frozen_components == (1,)
    assert fit.means.means[1, 0] == 1000.0
    assert fit.means.means[0, 0] == pytest.approx(0.0, abs=1e-12)  # all mass, mean 0


def test_lloyd_pool_path_matches_closed_form():
    base = MeanConfig(np.array([[1.0, 0.0], [-1.0, 0.0]]))
    fit = fit_hard_assignment(MixtureModel(base, 1.0), FitSpec(tau=1.0, seed=3), base)
    assert fit.converged
    norms = np.linalg.norm(fit.means.means, axis=1)
    # Monte Carlo n=1e6: half-space means land within a few 1e-3 of c*
    np.testing.assert_allclose(norms, _C_STAR, atol=0.01)
    assert fit.objective.std_error > 0.0


def test_lloyd_limit_of_quasi_mle_path():
    # tau -> 0 minimizers approach the hard-assignment target; agreement is
    # limited by node resolution at the soft boundary, so tolerances are loose
    target = ha_target_k2(K2Model(np.array([1.0]), 1.0))
    for rho, nodes in ((0.2, 1000), (0.1, 2000), (0.05, 4000)):
        fit = fit_quasi_mle(_truth(), FitSpec(tau=rho, quadrature_nodes=nodes), _SYM)
        assert fit.converged
        assert perm_distance(fit.means, target) < 2e-4


def test_low_snr_drift_grows_with_sigma():
    # under-smoothing at low SNR: minimizer drifts from truth, d_perm ~ sigma
    drifts = []
    for sigma in (10.0, 20.0, 40.0):
        spec = FitSpec.from_rho(0.5, sigma, quadrature_nodes=400)
        fit = fit_quasi_mle(MixtureModel(_SYM, sigma), spec, _SYM)
        assert fit.converged
        drifts.append(perm_distance(fit.means, _SYM))
    assert drifts[0] < drifts[1] < drifts[2]
    for d, sigma in zip(drifts, (10.0, 20.0, 40.0)):
        assert d * d / sigma**2 > 0.5  # measured ~0.9-1.1 in this window


def test_high_snr_minimizer_pinned_uniformly_in_rho():
    # over the window rho in [0.5, 2] the drift is exponentially small in
    # 1/sigma^2; allow an explicit machine-precision floor on top
    for sigma in (0.2, 0.1, 0.05):
        worst = 0.0
        for rho in (0.5, 1.0, 2.0):
            spec = FitSpec.from_rho(rho, sigma, quadrature_nodes=400)
            fit = fit_quasi_mle(MixtureModel(_SYM, sigma), spec, _SYM)
            worst = max(worst, perm_distance(fit.means, _SYM))
        bound = sigma * math.exp(-1.0 / (8.0 * sigma**2)) + 64 * np.finfo(float).eps
        assert worst <= bound, (sigma, worst, bound)


# ---------------------------------------------------------------------------
# Hessian at the collapsed configuration
# ---------------------------------------------------------------------------


def test_hessian_validation():
    with pytest.raises(ValueError):
        hessian_at_origin(1.0, np.array([[1.0, 0.5], [0.4, 1.0]]), 2)  # asymmetric
    with pytest.raises(ValueError):
        hessian_at_origin(1.0, np.eye(2), 1)
    with pytest.raises(ValueError):
        hessian_at_origin(-1.0, np.eye(2), 2)
    with pytest.raises(ValueError):
        hessian_at_origin(1.0, np.ones((2, 3)), 2)


def test_hessian_block_identities():
    rng = np.random.default_rng(3)
    for _ in range(8):
        d = int(rng.integers(1, 4))
        K = int(rng.integers(2, 5))
        A = rng.standard_normal((d, d))
        M = A @ A.T + 0.5 * np.eye(d)
        tau = float(rng.uniform(0.5, 2.0))
        h = hessian_at_origin(tau, M, K)
        # common shift curvature is exactly 1/tau^2 per unit shift norm
        assert h.common_shift_min_eig == pytest.approx(1.0 / tau**2, rel=1e-10)
        # zero-sum minimum curvature from the closed form
        lam = float(np.linalg.eigvalsh(M)[-1])
        expect = 1.0 / (K * tau**2) - lam / (K * tau**4)
        assert h.zero_sum_min_eig == pytest.approx(expect, rel=1e-10, abs=1e-14)
        # and from the assembled matrix restricted to the sum-zero subspace
        full = h.full_matrix()
        assert full.shape == (K * d, K * d)
        basis = []
        for k in range(1, K):
            e = np.zeros((K, d, d))
            e[0] = np.eye(d)
            e[k] = -np.eye(d)
            basis.append(e.reshape(K * d, d))
        B = np.hstack(basis)  # columns span the sum-zero subspace
        G = B.T @ B
        vals = np.linalg.eigvalsh(np.linalg.solve(G, B.T @ full @ B))
        assert float(vals[0]) == pytest.approx(h.zero_sum_min_eig, rel=1e-8, abs=1e-12)


def test_hessian_zero_signal_example():
    # M = I (sigma = 1, no signal): min zero-sum eigenvalue = -(1 - tau^2)/(K tau^4)
    for K in (2, 3, 5):
        for tau in (0.5, 0.9, 1.3):
            h = hessian_at_origin(tau, np.eye(3), K)
            assert h.zero_sum_min_eig == pytest.approx(-(1 - tau**2) / (K * tau**4), rel=1e-12)


def test_collapse_report_thresholds():
    rep = collapse_report(_truth())
    assert rep.rho_sq_threshold == pytest.approx(2.0, rel=1e-12)  # 1 + snr for K=2
    assert rep.is_collapse_stable_at(1.5) and not rep.is_collapse_stable_at(1.4)

    simp = make_regular_simplex(4, 5, 1.3)
    model = MixtureModel(simp, 0.8)
    g = geometry(model)
    rep2 = collapse_report(model)
    assert rep2.rho_sq_threshold == pytest.approx(1.0 + g.snr / 3, rel=1e-10)

    rng = np.random.default_rng(12)
    for _ in range(10):
        mu = rng.standard_normal((4, 3))
        mu -= mu.mean(axis=0)
        m = MixtureModel(MeanConfig(mu), float(rng.uniform(0.5, 2.0)))
        g = geometry(m)
        t = collapse_report(m).rho_sq_threshold
        assert 1.0 + g.snr / 3 - 1e-12 <= t <= 1.0 + g.snr + 1e-12

    with pytest.raises(ValueError):
        collapse_report(MixtureModel(MeanConfig(np.ones((1, 2))), 1.0))


def test_regular_simplex_invariants():
    for K, dim in ((3, 2), (4, 3), (5, 8)):
        cfg = make_regular_simplex(K, dim, 0.7)
        mu = cfg.means
        np.testing.assert_allclose(mu.sum(axis=0), 0.0, atol=1e-14)
        np.testing.assert_allclose(np.linalg.norm(mu, axis=1), 0.7, rtol=1e-14)
        gram = mu @ mu.T
        off = gram[~np.eye(K, dtype=bool)]
        np.testing.assert_allclose(off, -0.7**2 / (K - 1), atol=1e-14)
        assert np.all(mu[:, K - 1:] == 0.0)  # embedded in the first K-1 coords
        g = geometry(MixtureModel(cfg, 1.0))
        assert g.lambda_max == pytest.approx(0.7**2 / (K - 1), rel=1e-12)
    with pytest.raises(ValueError):
        make_regular_simplex(2, 5, 1.0)
    with pytest.raises(ValueError):
        make_regular_simplex(4, 2, 1.0)
