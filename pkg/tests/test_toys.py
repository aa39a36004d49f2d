import numpy as np
import pytest
from scipy.stats import norm

from dge.errors import BadSpec
from dge.toys import (
    ToySpec,
    gaussian_toy_prob,
    gen_circles,
    gen_gaussian_toy,
    gen_minority_toy,
    gen_toy,
    gen_two_moons,
    minority_toy_prob,
    ramp,
)


def test_bad_specs():
    with pytest.raises(BadSpec):
        ToySpec("spiral", 10)
    with pytest.raises(BadSpec):
        ToySpec("moons", 1)
    with pytest.raises(BadSpec):
        ToySpec("moons", 10, noise=-0.1)
    with pytest.raises(BadSpec):
        gen_circles(ToySpec("moons", 10))


def test_default_noise():
    assert ToySpec("moons", 10).noise == 0.1
    assert ToySpec("circles", 10).noise == 0.05


def test_moons_zero_noise_on_loci():
    d = gen_two_moons(ToySpec("moons", 4, noise=0.0, seed=3))
    X, y = d.features, d.labels
    upper = X[y == 0]
    lower = X[y == 1]
    assert np.allclose(np.hypot(upper[:, 0], upper[:, 1]), 1.0, atol=1e-12)
    assert np.all(upper[:, 1] >= -1e-12)
    # (1 - cos t, 0.5 - sin t): unit circle about (1, 0.5), below its centre
    assert np.allclose(np.hypot(lower[:, 0] - 1.0, lower[:, 1] - 0.5), 1.0, atol=1e-12)
    assert np.all(lower[:, 1] <= 0.5 + 1e-12)


def test_moons_balanced_and_shape():
    d = gen_two_moons(ToySpec("moons", 11, seed=0))
    assert d.n_rows == 11 and d.features.shape == (11, 2)
    assert d.class_counts() == (6, 5)


def test_moons_class_means_match_construction():
    n = 1000
    d = gen_two_moons(ToySpec("moons", n, noise=0.1, seed=1))
    # oracle: the noiseless loci at the same angles, noise has mean zero
    t0 = np.linspace(0, np.pi, (n + 1) // 2)
    t1 = np.linspace(0, np.pi, n // 2)
    m0 = np.array([np.cos(t0).mean(), np.sin(t0).mean()])
    m1 = np.array([(1 - np.cos(t1)).mean(), (0.5 - np.sin(t1)).mean()])
    e0 = d.features[d.labels == 0].mean(axis=0)
    e1 = d.features[d.labels == 1].mean(axis=0)
    tol = 4 * 0.1 / np.sqrt(n / 2)
    assert np.all(np.abs(e0 - m0) < tol) and np.all(np.abs(e1 - m1) < tol)
    assert np.all(np.abs(e0 - e1) > 0.3)


def test_circles_zero_noise_radii():
    d = gen_circles(ToySpec("circles", 50, noise=0.0, seed=2))
    r = np.hypot(d.features[:, 0], d.features[:, 1])
    assert np.allclose(r[d.labels == 1], 0.5, atol=1e-12)
    assert np.allclose(r[d.labels == 0], 1.0, atol=1e-12)


def test_circles_noisy_mean_radius():
    d = gen_circles(ToySpec("circles", 1000, noise=0.05, seed=4))
    r = np.hypot(d.features[:, 0], d.features[:, 1])
    assert abs(r[d.labels == 0].mean() - 1.0) < 0.02
    assert abs(r[d.labels == 1].mean() - 0.5) < 0.02


def test_ramp_values():
    assert gaussian_toy_prob(-1.0) == 0.0
    assert gaussian_toy_prob(1.0) == 1.0
    assert gaussian_toy_prob(0.0) == 0.5
    assert ramp(-3.0) == 0.0 and ramp(5.0) == 1.0 and ramp(1.0) == 0.5


def test_gaussian_bayes_rule_is_sign_of_x1():
    x1 = np.linspace(-3, 3, 601)
    p = gaussian_toy_prob(x1)
    assert np.array_equal(p > 0.5, x1 > 0)


def test_gaussian_local_probability_near_zero():
    d = gen_gaussian_toy(ToySpec("gaussian", 100_000, seed=5))
    sel = np.abs(d.features[:, 0]) < 0.1
    assert abs(d.labels[sel].mean() - 0.5) < 0.02


def test_gaussian_binned_probability_within_binomial_error():
    d = gen_gaussian_toy(ToySpec("gaussian", 100_000, seed=6))
    x1, y = d.features[:, 0], d.labels
    edges = np.linspace(-2.5, 2.5, 26)
    for lo, hi in zip(edges[:-1], edges[1:]):
        sel = (x1 >= lo) & (x1 < hi)
        n = sel.sum()
        # expected P(Y=1) in the bin, weighting the ramp by the normal density
        grid = np.linspace(lo, hi, 201)
        w = norm.pdf(grid)
        p = float(np.sum(gaussian_toy_prob(grid) * w) / np.sum(w))
        sigma = np.sqrt(max(p * (1 - p), 1e-12) / n)
        assert abs(y[sel].mean() - p) <= 3 * sigma + 1e-12


def test_gaussian_features_standard_normal():
    d = gen_gaussian_toy(ToySpec("gaussian", 50_000, seed=7))
    assert np.allclose(d.features.mean(axis=0), 0, atol=0.03)
    assert np.allclose(d.features.std(axis=0), 1, atol=0.03)


@pytest.mark.parametrize("kind", ["moons", "circles", "gaussian", "minority"])
def test_pure_functions_of_spec(kind):
    a = gen_toy(ToySpec(kind, 300, seed=9))
    b = gen_toy(ToySpec(kind, 300, seed=9))
    assert a == b
    assert a.features.tobytes() == b.features.tobytes()
    assert a != gen_toy(ToySpec(kind, 300, seed=10))


def test_minority_toy_group_share_and_boundary():
    spec = ToySpec("minority", 20_000, seed=1, minority_share=0.05, minority_shift=1.0)
    d = gen_minority_toy(spec)
    share = d.features[:, 2].mean()
    assert abs(share - 0.05) < 0.01
    assert minority_toy_prob(-1.0, 1) == 0.5
    assert minority_toy_prob(0.0, 0) == 0.5
