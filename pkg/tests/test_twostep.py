import numpy as np
import pytest

from conftest import random_factor_panel
from factorscope.eigen import FactorModelFit, fit
from factorscope.errors import DegenerateFactorError, DimensionError
from factorscope.simulation import Example2Config, gen_example2
from factorscope.twostep import factor_strength_ratio, suggest_split, two_step_fit


def ar_panel(seed, n, loadings, phis, noise):
    rng = np.random.default_rng(seed)
    r = loadings.shape[1]
    x = np.zeros((n, r))
    for t in range(1, n):
        x[t] = np.asarray(phis) * x[t - 1] + rng.standard_normal(r)
    return x @ loadings.T + noise * rng.standard_normal((n, loadings.shape[0]))


@pytest.mark.parametrize("seed", range(20))
def test_stages_orthogonal(seed):
    y = random_factor_panel(seed, n=150, p=14, r=3)
    two = two_step_fit(y, 1, 2, 2)
    assert np.linalg.norm(two.a1_hat.T @ two.a2_check) <= 1e-8
    a = two.a_hat
    assert a.shape == (14, 3)
    assert np.linalg.norm(a.T @ a - np.eye(3)) <= 1e-8


def test_stage_one_matches_single_step_fit():
    y = random_factor_panel(5, n=100, p=12, r=3)
    two = two_step_fit(y, 2, 1, 3)
    one = fit(y, 2, 3)
    np.testing.assert_array_equal(two.a1_hat, one.a_hat)
    np.testing.assert_array_equal(two.stage1.eigenvalues, one.eigenvalues)


@pytest.mark.parametrize("seed", range(10))
def test_projector_sum(seed):
    y = random_factor_panel(seed, n=120, p=10, r=3)
    two = two_step_fit(y, 1, 2, 1)
    p_all = two.a_hat @ two.a_hat.T
    p1 = two.a1_hat @ two.a1_hat.T
    p2 = two.a2_check @ two.a2_check.T
    assert np.linalg.norm(p_all - p1 - p2) <= 1e-10


def test_residuals_reconstruct():
    y = random_factor_panel(1, n=90, p=8, r=2)
    two = two_step_fit(y, 1, 1, 1)
    np.testing.assert_allclose(two.factors @ two.a_hat.T + two.residuals, y, atol=1e-10)


def test_equal_strength_agrees_with_one_step():
    rng = np.random.default_rng(9)
    a = np.linalg.qr(rng.standard_normal((20, 2)))[0] * 4.0
    y = ar_panel(10, 400, a, [0.8, -0.6], 0.5)
    one = fit(y, 2, 1).projector()
    two = two_step_fit(y, 1, 1, 1)
    assert np.linalg.norm(two.a_hat @ two.a_hat.T - one, 2) <= 0.1


def test_no_second_factor_leaves_small_stage_two_spectrum():
    rng = np.random.default_rng(3)
    a = rng.standard_normal((10, 1)) * 2.0
    y = ar_panel(4, 400, a, [0.9], 0.1)
    two = two_step_fit(y, 1, 1, 1)
    assert two.stage2_eigenvalues[0] <= 0.01 * two.stage1.eigenvalues[0]


def test_invalid_split():
    y = random_factor_panel(0, n=50, p=4, r=1)
    with pytest.raises(DimensionError):
        two_step_fit(y, 0, 1, 1)
    with pytest.raises(DimensionError):
        two_step_fit(y, 3, 2, 1)


def test_to_dict_schema():
    y = random_factor_panel(0, n=50, p=6, r=2)
    d = two_step_fit(y, 1, 1, 1).to_dict()
    assert {"r", "r1", "r2", "k0", "eigenvalues", "stage2_eigenvalues", "a_hat", "factors"} <= set(d)
    assert (d["r"], d["r1"], d["r2"]) == (2, 1, 1)


def test_strength_ratio_white_noise_near_one():
    y = np.random.default_rng(0).standard_normal((500, 20))
    ratio = factor_strength_ratio(fit(y, 2, 1), 1)
    assert 0.5 <= ratio <= 2.0


def test_strength_ratio_weak_factors():
    cfg = Example2Config(n=500, p=500, delta1=0.0, delta2=1.0, noise="t5")
    sample = gen_example2(cfg, 0)
    assert factor_strength_ratio(fit(sample.panel, 3, 3), 1) < 0.2


def manual_fit(factors):
    factors = np.asarray(factors, dtype=float)
    r = factors.shape[1]
    return FactorModelFit(
        a_hat=np.eye(r + 1)[:, :r],
        eigenvalues=np.zeros(r + 1),
        factors=factors,
        residuals=np.zeros((factors.shape[0], r + 1)),
        r=r,
        k0=1,
    )


def test_strength_ratio_zero_trailing():
    f = manual_fit(np.column_stack([np.arange(1.0, 6.0), np.zeros(5)]))
    assert factor_strength_ratio(f, 1) == 0.0


def test_strength_ratio_by_hand():
    f = manual_fit([[3.0, 0.0, 4.0], [3.0, 1.0, 0.0]])
    # leading norms 3, 3; trailing norms 4, 1
    assert factor_strength_ratio(f, 1) == pytest.approx(2.5 / 3.0)


def test_strength_ratio_degenerate():
    f = manual_fit(np.column_stack([np.zeros(5), np.ones(5)]))
    with pytest.raises(DegenerateFactorError):
        factor_strength_ratio(f, 1)
    with pytest.raises(DimensionError):
        factor_strength_ratio(f, 2)


def test_suggest_split():
    assert suggest_split([100.0, 1.0, 0.9, 0.01], 3) == 1
    assert suggest_split([100.0, 90.0, 0.5, 0.01], 3) == 2
    with pytest.raises(DimensionError):
        suggest_split([1.0], 1)
