import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from faceopt.gp import (
    Dataset,
    GpFitError,
    KernelConfig,
    fit,
    kernel_eval,
    kernel_matrix,
    log_marginal_likelihood,
    normalize,
    predict,
    predict_batch,
    select_hyperparameters,
)
from faceopt.space import grouped

from .oracles import naive_gp, naive_lml


def random_dataset(rng, space, n):
    ds = Dataset()
    while len(ds) < n:
        ds.add(tuple(rng.integers(space.lower, space.upper + 1, space.dim)), rng.uniform())
    return ds


def test_normalize_endpoints(space):
    z = normalize(space, (0,) * 14)
    assert z.tolist() == [0.0] * 14
    x = normalize(space, (255, 51) + (0,) * 12)
    assert x[0] == 1.0 and x[1] == pytest.approx(0.2, abs=1e-15)


def test_kernel_values():
    k = KernelConfig(lengthscale=0.3, signal_variance=1.0)
    assert kernel_eval(k, [0.1, 0.2], [0.1, 0.2]) == 1.0
    assert kernel_eval(k, [0.0, 0.0], [0.3, 0.0]) == pytest.approx(0.6065306597126334, abs=1e-12)
    with pytest.raises(ValueError):
        kernel_eval(k, [0.0], [0.0, 1.0])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=6, max_size=6))
def test_kernel_symmetric(xs):
    k = KernelConfig(0.4, 2.0)
    u, w = xs[:3], xs[3:]
    assert kernel_eval(k, u, w) == kernel_eval(k, w, u)


def test_kernel_config_validation():
    for bad in ({"lengthscale": 0}, {"signal_variance": -1}, {"noise_variance": -1e-9}):
        with pytest.raises(ValueError):
            KernelConfig(**bad)


def test_single_observation_interpolates(space):
    p0 = (10,) * 14
    ds = Dataset()
    ds.add(p0, 0.7)
    post = predict(fit(ds, KernelConfig(noise_variance=0.0), space), space, p0)
    assert post.mean == pytest.approx(0.7, abs=1e-12)
    assert post.stddev <= 1e-6


def test_two_points_match_dense_oracle(toy_space):
    ds = Dataset()
    ds.add((1, 2), 0.3)
    ds.add((4, 6), 0.9)
    k = KernelConfig(0.4, 1.3, 1e-3)
    model = fit(ds, k, toy_space)
    queries = [(a, b) for a in range(8) for b in range(8)]
    mean, sd = predict_batch(model, toy_space, queries)
    om, osd = naive_gp(normalize(toy_space, ds.points()), ds.values(), normalize(toy_space, queries), 0.4, 1.3, 1e-3)
    assert np.max(np.abs(mean - om)) < 1e-8
    assert np.max(np.abs(sd - osd)) < 1e-8


def test_empty_dataset_rejected(space):
    with pytest.raises(ValueError):
        fit(Dataset(), KernelConfig(), space)


def test_prior_reversion_far_away(space):
    ds = Dataset()
    ds.add((0,) * 14, 0.2)
    ds.add((5,) * 14, 0.6)
    model = fit(ds, KernelConfig(lengthscale=0.05), space)
    post = predict(model, space, (255,) * 14)
    assert post.mean == pytest.approx(model.target_mean, abs=1e-3)
    assert post.stddev == pytest.approx(1.0, abs=1e-3)


def test_random_small_datasets_match_oracle(space):
    rng = np.random.default_rng(11)
    ds = random_dataset(rng, space, 5)
    k = KernelConfig(0.5, 0.7, 1e-4)
    queries = rng.integers(0, 256, (20, 14))
    mean, sd = predict_batch(fit(ds, k, space), space, queries)
    om, osd = naive_gp(normalize(space, ds.points()), ds.values(), normalize(space, queries), 0.5, 0.7, 1e-4)
    assert np.max(np.abs(mean - om)) < 1e-8
    assert np.max(np.abs(sd - osd)) < 1e-8


def test_factor_reproduces_covariance(space):
    rng = np.random.default_rng(3)
    ds = random_dataset(rng, space, 30)
    k = KernelConfig(0.6, 1.0, 1e-4)
    model = fit(ds, k, space)
    x = normalize(space, ds.points())
    cov = kernel_matrix(k, x, x) + k.noise_variance * np.eye(len(ds))
    assert np.max(np.abs(model.factor @ model.factor.T - cov)) < 1e-10
    assert model.jitter == 0.0


def test_lml_closed_form_single_point(space):
    ds = Dataset()
    ds.add((3,) * 14, 0.0)
    model = fit(ds, KernelConfig(0.2, 1.0, 1.0), space)
    expected = -0.5 * 0.0 - 0.5 * math.log(2.0) - 0.5 * math.log(2 * math.pi)
    assert log_marginal_likelihood(model) == pytest.approx(expected, abs=1e-12)


def test_lml_matches_dense_oracle(space):
    rng = np.random.default_rng(5)
    for _ in range(10):
        ds = random_dataset(rng, space, int(rng.integers(2, 25)))
        ls, sv, nv = rng.uniform(0.2, 1.5), rng.uniform(0.1, 2.0), rng.uniform(1e-4, 1e-2)
        model = fit(ds, KernelConfig(ls, sv, nv), space)
        ref = naive_lml(normalize(space, ds.points()), ds.values(), ls, sv, nv)
        assert log_marginal_likelihood(model) == pytest.approx(ref, abs=1e-8)


def test_noise_model_preferred_on_pure_noise():
    s = grouped([[1]], lower=0, upper=255)
    rng = np.random.default_rng(0)
    ds = Dataset()
    for x in rng.choice(256, 40, replace=False):
        ds.add((int(x),), rng.normal(0.0, 0.1))
    overfit = log_marginal_likelihood(fit(ds, KernelConfig(0.02, 0.01, 1e-10), s))
    noisy = log_marginal_likelihood(fit(ds, KernelConfig(0.02, 0.01, 0.01), s))
    assert noisy > overfit


def test_select_singleton_and_ties(space):
    rng = np.random.default_rng(1)
    ds = random_dataset(rng, space, 8)
    only = KernelConfig(0.3)
    assert select_hyperparameters(ds, space, [only]) is only
    a, b = KernelConfig(0.3), KernelConfig(0.3)
    assert select_hyperparameters(ds, space, [a, b]) is a
    with pytest.raises(ValueError):
        select_hyperparameters(ds, space, [])


def test_select_recovers_generating_lengthscale():
    s = grouped([[1], [2]], lower=0, upper=255)
    grid = [KernelConfig(ls, 1.0, 1e-4) for ls in (0.05, 0.3, 2.0)]
    hits = 0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        pts = set()
        while len(pts) < 40:
            pts.add(tuple(int(v) for v in rng.integers(0, 256, 2)))
        pts = sorted(pts)
        x = normalize(s, pts)
        cov = kernel_matrix(KernelConfig(0.3, 1.0), x, x) + 1e-4 * np.eye(len(pts))
        y = np.linalg.cholesky(cov) @ rng.standard_normal(len(pts))
        ds = Dataset()
        for p, v in zip(pts, y):
            ds.add(p, v)
        hits += select_hyperparameters(ds, s, grid).lengthscale == 0.3
    assert hits > 10


def test_jitter_escalation_and_failure(space):
    ds = Dataset()
    ds.add((0,) * 14, 0.1)
    ds.add((1,) + (0,) * 13, 0.2)
    with pytest.raises(GpFitError) as info:
        fit(ds, KernelConfig(lengthscale=1e6, signal_variance=1e12, noise_variance=0.0), space)
    assert info.value.jitters == (1e-10, 1e-9, 1e-8, 1e-7, 1e-6)
    # the two columns are bit-identical, so the bare matrix is singular
    model = fit(ds, KernelConfig(lengthscale=1e6, signal_variance=1.0, noise_variance=0.0), space)
    assert model.jitter > 0


def test_dataset_merges_duplicates():
    ds = Dataset()
    ds.add((1, 2), 0.1)
    ds.add((3, 4), 0.2)
    ds.add((1, 2), 0.5)
    assert [(o.point, o.value) for o in ds] == [((1, 2), 0.5), ((3, 4), 0.2)]
    with pytest.raises(ValueError):
        ds.add((9, 9), float("nan"))


def test_fit_is_deterministic(space):
    rng = np.random.default_rng(9)
    ds = random_dataset(rng, space, 20)
    q = rng.integers(0, 256, (50, 14))
    a = predict_batch(fit(ds, KernelConfig(0.7), space), space, q)
    b = predict_batch(fit(ds, KernelConfig(0.7), space), space, q)
    assert a[0].tobytes() == b[0].tobytes() and a[1].tobytes() == b[1].tobytes()


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 20), st.floats(0.05, 2.0), st.floats(0.01, 3.0))
def test_posterior_std_bounded_by_prior(seed, n, ls, sv):
    s = grouped([[1], [2], [3]], lower=0, upper=255)
    rng = np.random.default_rng(seed)
    ds = random_dataset(rng, s, n)
    k = KernelConfig(ls, sv, 1e-4)
    _, sd = predict_batch(fit(ds, k, s), s, rng.integers(0, 256, (30, 3)))
    assert (sd <= math.sqrt(sv + 1e-4) + 1e-9).all()


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 15))
def test_new_observation_never_raises_variance_there(seed, n):
    s = grouped([[1], [2], [3]], lower=0, upper=255)
    rng = np.random.default_rng(seed)
    ds = random_dataset(rng, s, n)
    k = KernelConfig(0.4, 1.0, 1e-4)
    new = tuple(int(v) for v in rng.integers(0, 256, 3))
    if new in ds:
        return
    before = predict(fit(ds, k, s), s, new).stddev
    ds.add(new, 0.5)
    after = predict(fit(ds, k, s), s, new).stddev
    assert after <= before + 1e-12
