import numpy as np
import pytest

from randsvm.dataset import from_dense
from randsvm.kernels import KernelSpec
from randsvm.oracle import MAX_DENSE, DenseQP, build_dual, project, solve_dense
from randsvm.smo import solve

from conftest import random_instance

LIN = KernelSpec.linear()


def test_build_dual_two_points(two_points):
    qp = build_dual(two_points, [0, 1], LIN, 1.0)
    assert np.array_equal(qp.Q, [[1.0, 1.0], [1.0, 1.0]])
    assert np.array_equal(qp.eq_coef, [1.0, -1.0])
    a, obj = solve_dense(qp)
    assert obj == pytest.approx(0.5, abs=1e-9)
    assert np.allclose(a, [0.5, 0.5], atol=1e-6)


def test_build_dual_single_point():
    ds = from_dense(np.array([[3.0, 4.0]]), np.array([1.0]))
    assert build_dual(ds, [0], LIN, 1.0).Q.tolist() == [[25.0]]
    rbf = build_dual(ds, [0], KernelSpec.gaussian(2.0), 1.0)
    assert rbf.Q.tolist() == [[1.0]]


def test_regression_dual_linear_term():
    ds = from_dense(np.array([[0.0], [1.0]]), np.array([0.5, -2.0]))
    qp = build_dual(ds, [0, 1], LIN, 1.0, "regress", 0.0)
    assert np.array_equal(qp.linear, [0.5, -2.0, -0.5, 2.0])
    assert np.array_equal(qp.eq_coef, [1, 1, -1, -1])


def test_size_limit():
    ds = from_dense(np.zeros((MAX_DENSE + 1, 1)), np.ones(MAX_DENSE + 1))
    with pytest.raises(ValueError):
        build_dual(ds, np.arange(MAX_DENSE + 1), LIN, 1.0)


def test_zero_problem():
    n = 4
    qp = DenseQP(np.zeros((n, n)), np.zeros(n), np.zeros(n), np.ones(n), np.array([1.0, -1, 1, -1]))
    a, obj = solve_dense(qp)
    assert obj == 0.0
    assert abs(qp.eq_coef @ a) <= 1e-12


def test_invalid_qp():
    with pytest.raises(ValueError):
        DenseQP(np.array([[1.0, 2.0], [0.0, 1.0]]), np.zeros(2), np.zeros(2), np.ones(2), np.ones(2))
    with pytest.raises(ValueError):
        DenseQP(np.eye(2), np.zeros(2), np.ones(2), np.zeros(2), np.ones(2))


def brute_projection(qp, z, grid=4001):
    # scan the multiplier densely, then polish with bisection on h
    c = qp.eq_coef

    def h(lam):
        return c @ np.clip(z - lam * c, qp.box_lo, qp.box_hi)

    lo, hi = -1e3, 1e3
    for _ in range(200):
        mid = (lo + hi) / 2
        lo, hi = (mid, hi) if h(mid) > qp.eq_rhs else (lo, mid)
    return np.clip(z - lo * c, qp.box_lo, qp.box_hi)


def test_projection_feasible_and_optimal():
    rng = np.random.default_rng(0)
    for _ in range(200):
        n = int(rng.integers(1, 25))
        c = rng.choice([-1.0, 1.0, 0.5, -2.0], n)
        lo = np.zeros(n)
        hi = rng.uniform(0.1, 3, n)
        rhs = float(c @ rng.uniform(lo, hi))
        qp = DenseQP(np.eye(n), np.zeros(n), lo, hi, c, rhs)
        z = rng.normal(0, 3, n)
        p = project(qp, z)
        assert np.all(p >= lo) and np.all(p <= hi)
        assert abs(c @ p - rhs) <= 1e-10
        ref = brute_projection(qp, z)
        assert np.sum((p - z) ** 2) <= np.sum((ref - z) ** 2) + 1e-9


def test_projection_infeasible():
    qp = DenseQP(np.eye(2), np.zeros(2), np.zeros(2), np.ones(2), np.ones(2), 5.0)
    with pytest.raises(ValueError):
        project(qp, np.zeros(2))


def test_iterates_feasible_and_monotone():
    ds = random_instance(3, "classify")
    qp = build_dual(ds, np.arange(ds.n), KernelSpec.gaussian(1.0), 1.0)
    trace = []
    a, obj = solve_dense(qp, trace=trace)
    assert np.all(np.diff(trace) >= -1e-12 * max(1.0, abs(obj)))
    assert np.all(a >= -1e-10) and np.all(a <= 1.0 + 1e-10)
    assert abs(qp.eq_coef @ a) <= 1e-10


@pytest.mark.parametrize("task", ["classify", "regress"])
def test_twenty_point_agreement(task):
    for seed in range(20):
        ds = random_instance(100 + seed, task, n_max=20)
        kern = LIN if seed % 2 else KernelSpec.gaussian(1.0)
        C = [0.1, 1.0, 100.0][seed % 3]
        W = np.arange(ds.n)
        ref = solve_dense(build_dual(ds, W, kern, C, task, 0.1))[1]
        got = solve(ds, W, kern, C, task=task, epsilon_tube=0.1, kkt_tol=1e-6).dual_objective
        assert got == pytest.approx(ref, rel=1e-5)
