import numpy as np
import pytest

from gapmap.function_space import GridFunction, grid, random_lipschitz
from gapmap.map_core import make_params, make_partition
from gapmap.spectral import (
    DegenerateIterateError,
    correlation_decay,
    decay_slope,
    peripheral_check,
    power_iterate_gap,
)

M = 2**13


@pytest.fixture(scope="module")
def report(params, part):
    return power_iterate_gap(params, part, seed=1, iters=30, m=M)


def test_lambda1_is_one_up_to_tail(report):
    assert abs(report.lambda1 - (1 - report.tail.sup_tail)) <= 1e-10


def test_lambda2_below_one(report):
    assert 0 < report.lambda2_estimate < 1
    assert report.residual < 0.1
    assert len(report.ratios) == 30


def test_seed_agreement(params, part, report):
    other = power_iterate_gap(params, part, seed=2, iters=30, m=M)
    assert other.lambda2_estimate == pytest.approx(report.lambda2_estimate, rel=0.05)


def test_to_dict(report):
    d = report.to_dict()
    assert set(d["tail"]) == {"sup_tail", "lip_tail"}
    assert isinstance(d["ratios"], list)


def test_too_few_iterations(params, part):
    with pytest.raises(ValueError):
        power_iterate_gap(params, part, seed=0, iters=5, m=M)


def test_constant_start_is_degenerate(params, part):
    with pytest.raises(DegenerateIterateError):
        power_iterate_gap(params, part, seed=0, iters=10, f0=GridFunction.constant(0.0, M))
    with pytest.raises(DegenerateIterateError):
        power_iterate_gap(params, part, seed=0, iters=10, f0=GridFunction.constant(2.0, M))


def test_peripheral_clean(params, part, report):
    assert peripheral_check(params, part, report)


def test_peripheral_detects_oscillation(params, part, report):
    # u -> -u has the eigenvalue -1 on the unit circle
    assert not peripheral_check(params, part, report, step=lambda u: -u)


def test_peripheral_detects_rotation(params, part, report):
    # period-4 cycle: eigenvalues +-i
    x = grid(M)
    a = GridFunction(np.cos(2 * np.pi * x))
    b = GridFunction(np.sin(2 * np.pi * x))
    state = {"k": 0}
    cycle = [a, b, -a, -b]

    def step(u):
        state["k"] += 1
        return cycle[state["k"] % 4]

    assert not peripheral_check(params, part, report, f0=a, step=step)


def test_peripheral_angles(params, part, report):
    with pytest.raises(ValueError):
        peripheral_check(params, part, report, angles=4)


def test_correlations_of_constant_vanish(params, part):
    f = GridFunction.constant(3.0, M)
    g = random_lipschitz(4, 1.0, 3, m=M)
    cov = correlation_decay(params, part, f, g, 5)
    np.testing.assert_allclose(cov, 0.0, atol=1e-14)


def test_correlation_decay_rate(params, part):
    f = random_lipschitz(10, 1.0, 3, m=M)
    g = random_lipschitz(11, 1.0, 3, m=M)
    cov = correlation_decay(params, part, f, g, 15)
    assert decay_slope(cov) <= np.log(0.95)


def test_decay_slope_exact():
    cov = 0.5 ** np.arange(1, 11)
    assert decay_slope(cov) == pytest.approx(np.log(0.5))
    assert decay_slope(-cov) == pytest.approx(np.log(0.5))


def test_lambda2_stable_under_n_max():
    p8, p10 = make_params(n_max=8), make_params(n_max=10)
    a = power_iterate_gap(p8, make_partition(p8), seed=3, iters=20, m=M)
    b = power_iterate_gap(p10, make_partition(p10), seed=3, iters=20, m=M)
    assert a.lambda2_estimate == pytest.approx(b.lambda2_estimate, rel=0.05)
