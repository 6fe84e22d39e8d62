"""Core model layer: configs, sampling, geometry, permutation distance."""

import numpy as np
import pytest

from mismix import (
    MeanConfig,
    MixtureModel,
    geometry,
    normalized_mse,
    perm_distance,
    perm_distance_bruteforce,
    rng_for,
    sample_gmm,
)
from mismix.model import derive_seed, perm_distance_sq


# ---------------------------------------------------------------------------
# MeanConfig
# ---------------------------------------------------------------------------


def test_mean_config_defensive_copy_and_readonly():
    src = np.array([[1.0, 2.0], [3.0, 4.0]])
    cfg = MeanConfig(src)
    src[0, 0] = 99.0
    assert cfg.means[0, 0] == 1.0
    with pytest.raises(ValueError):
        cfg.means[0, 0] = 5.0  # numpy raises on writes to read-only arrays
    assert cfg.n_components == 2 and cfg.dim == 2
    assert cfg.frobenius_norm == pytest.approx(np.sqrt(30.0), rel=1e-15)


@pytest.mark.parametrize("bad", [np.ones(3), np.ones((2, 2, 2)), np.array([[np.inf]]), np.empty((0, 2))])
def test_mean_config_rejects_bad_shapes(bad):
    with pytest.raises(ValueError):
        MeanConfig(bad)


def test_mean_config_csv_round_trip_is_bit_exact(tmp_path):
    rng = np.random.default_rng(7)
    cfg = MeanConfig(rng.standard_normal((4, 3)) * np.pi)
    path = tmp_path / "means.csv"
    cfg.to_csv(path)
    back = MeanConfig.from_csv(path)
    assert back.means.tobytes() == cfg.means.tobytes()
    header = path.read_text().splitlines()[0]
    assert header == "component,dim0,dim1,dim2"


def test_mean_config_csv_rejects_bad_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("foo,dim0\n0,1.0\n")
    with pytest.raises(ValueError):
        MeanConfig.from_csv(path)
    path.write_text("component,dim0\n")
    with pytest.raises(ValueError):
        MeanConfig.from_csv(path)


def test_mixture_model_requires_positive_sigma():
    cfg = MeanConfig(np.array([[1.0]]))
    for bad in (0.0, -1.0, np.nan):
        with pytest.raises(ValueError):
            MixtureModel(cfg, bad)


# ---------------------------------------------------------------------------
# seeding / sampling
# ---------------------------------------------------------------------------


def test_derive_seed_is_stable_and_path_sensitive():
    a = derive_seed(0, "pool", 3)
    b = derive_seed(0, "pool", 3)
    assert a.entropy == b.entropy and a.spawn_key == b.spawn_key
    assert derive_seed(0, "pool", 4).spawn_key != a.spawn_key
    assert derive_seed(1, "pool", 3).entropy != a.entropy
    # string path parts hash independently of PYTHONHASHSEED
    assert derive_seed(0, "cell").spawn_key != derive_seed(0, "pool").spawn_key


def test_rng_for_streams_are_reproducible_and_distinct():
    x = rng_for(123, "a", 0).standard_normal(8)
    y = rng_for(123, "a", 0).standard_normal(8)
    z = rng_for(123, "a", 1).standard_normal(8)
    np.testing.assert_array_equal(x, y)
    assert not np.array_equal(x, z)


def test_sample_gmm_deterministic_and_shaped():
    model = MixtureModel(MeanConfig(np.array([[1.0, 0.0], [-1.0, 0.0]])), 0.5)
    s1 = sample_gmm(model, 1000, 42)
    s2 = sample_gmm(model, 1000, 42)
    np.testing.assert_array_equal(s1.observations, s2.observations)
    np.testing.assert_array_equal(s1.labels, s2.labels)
    assert s1.observations.shape == (1000, 2)
    assert s1.labels.dtype == np.int64
    assert s1.labels.min() >= 0 and s1.labels.max() <= 1
    assert s1.seed == 42
    assert not np.array_equal(s1.observations, sample_gmm(model, 1000, 43).observations)


def test_sample_gmm_first_and_second_moments():
    # symmetric K=2 at mu=+-1, sigma=1: E[Y]=0, E[Y^2] = sigma^2 + 1 = 2
    model = MixtureModel(MeanConfig(np.array([[1.0], [-1.0]])), 1.0)
    obs = sample_gmm(model, 200_000, 3).observations
    assert abs(obs.mean()) < 0.02
    assert obs.var() == pytest.approx(2.0, abs=0.03)
    labels = sample_gmm(model, 200_000, 3).labels
    assert labels.mean() == pytest.approx(0.5, abs=0.01)  # equal weights


# ---------------------------------------------------------------------------
# geometry
# ---------------------------------------------------------------------------


def test_geometry_known_configuration():
    cfg = MeanConfig(np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 2.0]]))
    g = geometry(MixtureModel(cfg, 0.5))
    assert g.delta_min == pytest.approx(2.0)
    assert g.delta_max == pytest.approx(np.sqrt(5.0))  # (+-1,0) to (0,2)
    # snr = tr(Sigma_mu)/sigma^2 with Sigma_mu the centered second moment
    mu = cfg.means - cfg.means.mean(axis=0)
    tr = np.sum(mu**2) / 3
    assert g.snr == pytest.approx(tr / 0.25, rel=1e-12)
    assert np.trace(g.sigma_mu) == pytest.approx(tr, rel=1e-12)
    assert g.lambda_max <= np.trace(g.sigma_mu) + 1e-12
    assert not g.degenerate


def test_geometry_single_component_is_degenerate():
    g = geometry(MixtureModel(MeanConfig(np.array([[2.0, 1.0]])), 1.0))
    assert g.snr == 0.0
    assert np.isinf(g.delta_min) and g.delta_max == 0.0
    assert g.degenerate


def test_geometry_flags_coincident_means():
    cfg = MeanConfig(np.array([[1.0], [1.0], [0.0]]))
    g = geometry(MixtureModel(cfg, 1.0))
    assert g.delta_min == 0.0 and g.degenerate


def test_geometry_snr_invariant_under_translation():
    rng = np.random.default_rng(11)
    mu = rng.standard_normal((4, 3))
    g0 = geometry(MixtureModel(MeanConfig(mu), 0.7))
    g1 = geometry(MixtureModel(MeanConfig(mu + 5.0), 0.7))
    assert g1.snr == pytest.approx(g0.snr, rel=1e-12)
    assert g1.delta_min == pytest.approx(g0.delta_min, rel=1e-12)


# ---------------------------------------------------------------------------
# permutation-invariant distance
# ---------------------------------------------------------------------------


def test_perm_distance_example():
    a = MeanConfig(np.array([[0.0, 0.0], [3.0, 4.0]]))
    b = MeanConfig(np.array([[3.0, 4.0], [1.0, 2.0]]))
    # best matching pairs (0,0)<->(1,2) and (3,4)<->(3,4): sqrt(5)
    assert perm_distance(a, b) == pytest.approx(np.sqrt(5.0), rel=1e-15)


def test_perm_distance_zero_iff_relabeling():
    rng = np.random.default_rng(5)
    mu = rng.standard_normal((4, 2))
    a = MeanConfig(mu)
    b = MeanConfig(mu[[2, 0, 3, 1]])
    assert perm_distance(a, b) == 0.0
    c = MeanConfig(mu + 1e-9)
    assert 0.0 < perm_distance(a, c) < 1e-8


def test_perm_distance_pseudometric_properties():
    rng = np.random.default_rng(17)
    for _ in range(25):
        K, d = int(rng.integers(2, 5)), int(rng.integers(1, 4))
        a = MeanConfig(rng.standard_normal((K, d)))
        b = MeanConfig(rng.standard_normal((K, d)))
        c = MeanConfig(rng.standard_normal((K, d)))
        dab, dba = perm_distance(a, b), perm_distance(b, a)
        assert dab == pytest.approx(dba, rel=1e-12)
        assert dab >= 0.0
        assert dab <= perm_distance(a, c) + perm_distance(c, b) + 1e-12
        # never larger than the identity matching
        assert dab <= np.linalg.norm(a.means - b.means) + 1e-12


def test_perm_distance_matches_bruteforce_small_sweep():
    rng = np.random.default_rng(23)
    for _ in range(50):
        K, d = int(rng.integers(2, 6)), int(rng.integers(1, 4))
        a = MeanConfig(rng.standard_normal((K, d)))
        b = MeanConfig(rng.standard_normal((K, d)))
        assert perm_distance(a, b) == perm_distance_bruteforce(a, b)


def test_perm_distance_shape_mismatch():
    a = MeanConfig(np.ones((2, 2)))
    b = MeanConfig(np.ones((3, 2)))
    with pytest.raises(ValueError):
        perm_distance(a, b)


def test_normalized_mse_example_and_zero_truth():
    truth = MeanConfig(np.array([[1.0], [-1.0]]))
    est = MeanConfig(np.array([[1.2], [-1.2]]))
    # d_perm^2 = 2 * 0.2^2 = 0.08, ||truth||^2 = 2
    assert normalized_mse(est, truth) == pytest.approx(0.04, rel=1e-12)
    assert normalized_mse(truth, truth) == 0.0
    with pytest.raises(ValueError):
        normalized_mse(est, MeanConfig(np.zeros((2, 1))))
    assert perm_distance_sq(est, truth) == pytest.approx(0.08, rel=1e-12)
