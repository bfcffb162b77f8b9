import numpy as np
import pytest

from randsvm.dataset import from_dense
from randsvm.kernels import KernelSpec
from randsvm.oracle import build_dual, solve_dense
from randsvm.smo import (
    DegenerateModelError,
    SvmModel,
    decision_function,
    kkt_violations,
    load_model,
    predict,
    save_model,
    solve,
    solve_csvc,
    solve_svr,
    violates,
)

from conftest import random_instance

LIN = KernelSpec.linear()


def test_two_point_hard_margin(two_points):
    out = solve_csvc(two_points, [0, 1], LIN, 10.0, kkt_tol=1e-9)
    assert out.converged
    assert np.allclose(np.abs(out.model.dual_coef), 0.5, atol=1e-9)
    assert np.allclose(out.model.linear_weights(), [1.0], atol=1e-9)
    assert out.model.bias == pytest.approx(0.0, abs=1e-9)
    assert 1 / np.linalg.norm(out.model.linear_weights()) == pytest.approx(1.0, abs=1e-9)
    assert out.dual_objective == pytest.approx(0.5, abs=1e-12)


def test_two_point_box_clipped(two_points):
    out = solve_csvc(two_points, [0, 1], LIN, 0.1)
    assert np.allclose(np.abs(out.model.dual_coef), 0.1)
    assert out.dual_objective == pytest.approx(0.18, abs=1e-12)
    qp = build_dual(two_points, [0, 1], LIN, 0.1)
    assert solve_dense(qp)[1] == pytest.approx(0.18, abs=1e-9)


def test_xor_matches_oracle():
    ds = from_dense(np.array([[1.0, 1.0], [-1.0, -1.0], [1.0, -1.0], [-1.0, 1.0]]),
                    np.array([1.0, 1.0, -1.0, -1.0]))
    out = solve_csvc(ds, np.arange(4), LIN, 1.0, kkt_tol=1e-9)
    assert out.converged
    ref = solve_dense(build_dual(ds, np.arange(4), LIN, 1.0))[1]
    assert out.dual_objective == pytest.approx(ref, rel=1e-6)
    f = decision_function(out.model, ds)
    # no linear separator exists, so every point has positive slack
    assert np.all(ds.y * f < 1)


def test_svr_tube_contains_data():
    ds = from_dense(np.array([[0.0], [1.0]]), np.array([0.0, 0.1]))
    out = solve_svr(ds, [0, 1], LIN, 1.0, 0.2)
    assert out.model.n_sv == 0
    assert -0.1 <= out.model.bias <= 0.2


def test_svr_two_points_active_tube():
    ds = from_dense(np.array([[0.0], [1.0]]), np.array([0.0, 1.0]))
    out = solve_svr(ds, [0, 1], LIN, 100.0, 0.1, kkt_tol=1e-10)
    assert out.model.linear_weights()[0] == pytest.approx(0.8, abs=1e-8)
    assert out.model.bias == pytest.approx(0.1, abs=1e-8)
    ref = solve_dense(build_dual(ds, [0, 1], LIN, 100.0, "regress", 0.1))[1]
    assert out.dual_objective == pytest.approx(ref, rel=1e-8)


def test_svr_wide_tube_gives_flat_model():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(15, 2))
    y = rng.uniform(-1, 1, 15)
    eps = (y.max() - y.min()) / 2
    out = solve_svr(from_dense(X, y), np.arange(15), LIN, 1.0, eps)
    assert np.allclose(out.model.linear_weights(), 0.0)


def test_errors(two_points):
    with pytest.raises(ValueError):
        solve_csvc(two_points, [0, 1], LIN, 0.0)
    with pytest.raises(DegenerateModelError):
        solve_csvc(two_points, [0], LIN, 1.0)
    with pytest.raises(ValueError):
        solve_csvc(two_points, [], LIN, 1.0)
    with pytest.raises(ValueError):
        solve_csvc(two_points, [0, 0, 1], LIN, 1.0)
    with pytest.raises(IndexError):
        solve_csvc(two_points, [0, 9], LIN, 1.0)


def test_iteration_cap_reports_not_converged():
    ds = random_instance(4, "classify", n_max=40)
    out = solve_csvc(ds, np.arange(ds.n), KernelSpec.gaussian(0.5), 100.0, kkt_tol=1e-12, max_iter=3)
    assert not out.converged and out.iterations == 3


def test_predict_examples(two_points):
    model = solve_csvc(two_points, [0, 1], LIN, 10.0, kkt_tol=1e-9).model
    assert predict(model, {1: 2.0}) == pytest.approx(2.0, abs=1e-8)
    empty = SvmModel("classify", LIN, [], [], 0.25, 1.0, np.zeros((0, 1)))
    assert predict(empty, {1: 5.0}) == 0.25


def test_expansion_equals_primal():
    ds = random_instance(8, "classify")
    model = solve_csvc(ds, np.arange(ds.n), LIN, 1.0).model
    w = model.linear_weights()
    X = ds.features
    assert np.allclose(decision_function(model, ds), X[:, : w.size] @ w + model.bias, atol=1e-10)


def flat_model(task, bias, eps=0.0):
    return SvmModel(task, LIN, [], [], bias, 1.0, np.zeros((0, 1)), eps)


def test_violates_examples():
    ds = from_dense(np.array([[0.0]]), np.array([1.0]))
    assert not violates(flat_model("classify", 2.0), ds, 0, 1e-3)
    assert violates(flat_model("classify", 0.5), ds, 0, 1e-3)
    reg = from_dense(np.array([[0.0]]), np.array([0.0]))
    assert not violates(flat_model("regress", 0.1005, 0.1), reg, 0, 1e-3)
    assert violates(flat_model("regress", 0.1015, 0.1), reg, 0, 1e-3)


@pytest.mark.parametrize("task", ["classify", "regress"])
@pytest.mark.parametrize("kernel", [LIN, KernelSpec.gaussian(0.8)])
def test_feasibility_and_kkt(task, kernel):
    for seed in range(5):
        ds = random_instance(seed, task)
        C = [0.1, 1.0, 10.0][seed % 3]
        out = solve(ds, np.arange(ds.n), kernel, C, task=task, epsilon_tube=0.1, kkt_tol=1e-6)
        m = out.model
        assert out.converged
        assert np.all(np.abs(m.dual_coef) <= C * (1 + 1e-12))
        assert np.all(m.dual_coef != 0)
        assert abs(m.dual_coef.sum()) <= 1e-8 * C * max(m.n_sv, 1)
        assert kkt_violations(m, ds, tol=1e-4).size == 0
        if task == "regress":
            assert np.unique(m.sv_indices).size == m.n_sv


def test_objective_nondecreasing():
    ds = random_instance(2, "classify")
    out = solve_csvc(ds, np.arange(ds.n), KernelSpec.gaussian(1.0), 1.0, track_objective=True, kkt_tol=1e-8)
    tr = np.array(out.objective_trace)
    assert tr.size > 1
    assert np.all(np.diff(tr) >= -1e-12 * np.abs(tr[1:]).max())
    assert tr[-1] == pytest.approx(out.dual_objective, rel=1e-12)


@pytest.mark.parametrize("task", ["classify", "regress"])
def test_warm_start_neutral(task):
    ds = random_instance(6, task)
    W = np.arange(ds.n)
    half = W[: ds.n // 2 + 3]
    if task == "classify":
        while len(set(ds.y[half])) < 2:
            half = W[: half.size + 1]
    kern = KernelSpec.gaussian(1.0)
    first = solve(ds, half, kern, 1.0, task=task, epsilon_tube=0.1)
    cold = solve(ds, W, kern, 1.0, task=task, epsilon_tube=0.1, kkt_tol=1e-7)
    warm = solve(ds, W, kern, 1.0, task=task, epsilon_tube=0.1, kkt_tol=1e-7, warm_start=first.model)
    assert warm.dual_objective == pytest.approx(cold.dual_objective, rel=1e-5)


def test_sv_indices_refer_to_dataset():
    ds = random_instance(9, "classify")
    working = np.arange(3, ds.n)
    if len(set(ds.y[working])) < 2:
        working = np.arange(ds.n)
    m = solve_csvc(ds, working, LIN, 1.0).model
    assert set(m.sv_indices) <= set(working)
    assert np.array_equal(m.sv_vectors.toarray(), ds.X[m.sv_indices].toarray())


@pytest.mark.parametrize("task", ["classify", "regress"])
def test_model_file_round_trip(tmp_path, task):
    ds = random_instance(10, task)
    m = solve(ds, np.arange(ds.n), KernelSpec.gaussian(0.7), 2.0, task=task, epsilon_tube=0.05).model
    p = tmp_path / "m.model"
    save_model(m, p)
    back = load_model(p)
    assert back.task == m.task and back.kernel == m.kernel
    assert back.bias == m.bias and back.C == m.C and back.epsilon_tube == m.epsilon_tube
    assert np.array_equal(back.dual_coef, m.dual_coef)
    assert np.array_equal(decision_function(back, ds), decision_function(m, ds))
    head = p.read_text().splitlines()[0].split()
    assert head[:2] == ["randsvm-model", "v1"] and int(head[-1]) == m.n_sv


def test_load_model_rejects_garbage(tmp_path):
    p = tmp_path / "bad.model"
    p.write_text("hello\n")
    with pytest.raises(ValueError):
        load_model(p)
