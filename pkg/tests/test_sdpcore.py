import numpy as np
import pytest

from energyqrng import sdpcore
from energyqrng.errors import IllPosedProblemError
from energyqrng.qset import gram_feasibility_problem


def _sym(i, j, d=2):
    m = np.zeros((d, d))
    m[i, j] = m[j, i] = 1.0
    return m


def _two_by_two():
    # minimize x s.t. [[x, 1], [1, x]] >= 0
    p = sdpcore.SdpProblem(1, objective=[1.0])
    p.add_lmi(_sym(0, 1), {0: np.eye(2)})
    return p


@pytest.mark.parametrize("kernel", ["auto", "batched"])
def test_two_by_two_minimum(kernel):
    sol = sdpcore.solve(_two_by_two(), sdpcore.SolverOptions(kernel=kernel))
    assert sol.status == sdpcore.OPTIMAL
    assert sol.x[0] == pytest.approx(1.0, abs=1e-7)
    assert sol.gap <= 1e-9 * max(1.0, abs(sol.objective)) + 1e-12
    assert sol.dual_objective <= sol.objective + 1e-8


def test_constant_identity_block():
    p = sdpcore.SdpProblem(0)
    p.add_lmi(np.eye(4))
    sol = sdpcore.solve(p)
    assert sol.status == sdpcore.OPTIMAL
    assert sol.objective == pytest.approx(0.0, abs=1e-12)


def test_identity_feasible_with_unit_slack():
    p = sdpcore.SdpProblem(0)
    p.add_lmi(np.eye(4))
    res = sdpcore.check_feasible(p)
    assert res
    assert res.slack == pytest.approx(1.0, abs=1e-7)


def test_negative_eigenvalue_block_infeasible():
    p = sdpcore.SdpProblem(0)
    p.add_lmi(np.diag([1.0, -1.0, 1.0]))
    assert not sdpcore.check_feasible(p)


def test_theorem1_instance_outside_is_infeasible():
    p = gram_feasibility_problem((0.95, -0.95), (0.3, 0.3))
    sol = sdpcore.solve(p)
    assert sol.status == sdpcore.INFEASIBLE
    assert sdpcore.verify_infeasibility_certificate(p, sol)
    assert not sdpcore.check_feasible(p)


def test_theorem1_instance_inside_is_feasible():
    assert sdpcore.check_feasible(gram_feasibility_problem((0.9, -0.9), (0.3, 0.3)))


def test_unbounded_detected():
    # minimize -x with x * I >= 0 only
    p = sdpcore.SdpProblem(1, objective=[-1.0])
    p.add_lmi(np.zeros((2, 2)), {0: np.eye(2)})
    sol = sdpcore.solve(p)
    assert sol.status == sdpcore.UNBOUNDED
    assert sol.ray is not None and sol.ray[0] > 0


def test_nonsymmetric_rejected():
    p = sdpcore.SdpProblem(1)
    with pytest.raises(IllPosedProblemError):
        p.add_lmi(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_block_dimension_cap():
    p = sdpcore.SdpProblem(0)
    with pytest.raises(IllPosedProblemError):
        p.add_lmi(np.eye(sdpcore.MAX_BLOCK_DIM + 1))


def test_linear_constraints_and_bounds():
    # minimize x + y s.t. x + y >= 1 (as LMI-free LP), 0 <= x <= 0.3
    p = sdpcore.SdpProblem(2, objective=[1.0, 2.0])
    p.add_linear({0: 1.0, 1: 1.0}, ">=", 1.0)
    p.lower = np.array([0.0, 0.0])
    p.upper = np.array([0.3, np.inf])
    sol = sdpcore.solve(p)
    assert sol.status == sdpcore.OPTIMAL
    assert sol.x == pytest.approx([0.3, 0.7], abs=1e-7)


def test_equality_constraint():
    # minimize x00 + x11 with [[x0, x1], [x1, x2]] >= 0, x1 = 1 -> optimum 2
    p = sdpcore.SdpProblem(3, objective=[1.0, 0.0, 1.0])
    p.add_lmi(np.zeros((2, 2)), {0: np.diag([1.0, 0.0]), 1: _sym(0, 1), 2: np.diag([0.0, 1.0])})
    p.add_linear({1: 1.0}, "=", 1.0)
    sol = sdpcore.solve(p)
    assert sol.status == sdpcore.OPTIMAL
    assert sol.objective == pytest.approx(2.0, abs=1e-7)


def _random_problem(rng, nv=4, d=4, blocks=2):
    # x = 0 is strictly feasible; the box keeps the problem bounded
    p = sdpcore.SdpProblem(nv, lower=-np.full(nv, 3.0), upper=np.full(nv, 3.0))
    c = np.zeros(nv)
    for _ in range(blocks):
        coeffs = {}
        for i in range(nv):
            a = rng.normal(size=(d, d))
            coeffs[i] = a + a.T
        p.add_lmi(np.eye(d), coeffs)
        c -= np.array([np.trace(coeffs[i]) for i in range(nv)]) * rng.uniform(0.5, 1.5)
    p.objective = c
    return p


@pytest.mark.parametrize("seed", range(5))
def test_matches_reference_solver(seed):
    cp = pytest.importorskip("cvxpy")
    rng = np.random.default_rng(seed)
    p = _random_problem(rng)
    sol = sdpcore.solve(p)
    assert sol.status == sdpcore.OPTIMAL
    x = cp.Variable(p.nv)
    cons = []
    for blk in p.blocks:
        expr = blk.const + sum(x[i] * blk.coeffs[k] for k, i in enumerate(blk.index))
        cons.append((expr + expr.T) / 2 >> 0)
    cons += [x >= p.lower, x <= p.upper]
    ref = cp.Problem(cp.Minimize(p.objective @ x), cons)
    ref.solve(solver="CLARABEL")
    assert sol.objective == pytest.approx(ref.value, abs=1e-6 * max(1.0, abs(ref.value)))


@pytest.mark.parametrize("seed", range(3))
def test_kernels_agree(seed):
    rng = np.random.default_rng(seed)
    p = _random_problem(rng, nv=3, d=3, blocks=1)
    a = sdpcore.solve(p, sdpcore.SolverOptions(kernel="auto"))
    b = sdpcore.solve(p, sdpcore.SolverOptions(kernel="batched"))
    assert a.objective == pytest.approx(b.objective, abs=1e-7)


def test_deterministic():
    rng = np.random.default_rng(7)
    p = _random_problem(rng)
    a = sdpcore.solve(p)
    b = sdpcore.solve(p)
    assert np.array_equal(a.x, b.x)
    assert a.objective == b.objective


def test_weak_duality_and_residuals(rng):
    for _ in range(5):
        p = _random_problem(rng)
        sol = sdpcore.solve(p)
        assert sol.status == sdpcore.OPTIMAL
        assert sol.dual_objective <= sol.objective + 1e-9 * max(1.0, abs(sol.objective))
        for blk in p.blocks:
            m = blk.const + np.einsum("k,kij->ij", sol.x[blk.index], blk.coeffs)
            assert np.linalg.eigvalsh(m)[0] >= -1e-9


@pytest.mark.parametrize("scale", [1e-3, 1e3])
def test_feasibility_scale_invariant(scale):
    for b, w in [((0.9, -0.9), (0.3, 0.3)), ((0.95, -0.95), (0.3, 0.3)), ((0.2, 0.1), (0.01, 0.02))]:
        p = gram_feasibility_problem(b, w)
        q = gram_feasibility_problem(b, w)
        q.blocks = [sdpcore.LmiBlock(scale * blk.const, blk.index, scale * blk.coeffs) for blk in q.blocks]
        assert bool(sdpcore.check_feasible(p)) == bool(sdpcore.check_feasible(q))


def test_phase_one_caps_slack():
    p = sdpcore.SdpProblem(1)
    p.add_lmi(np.zeros((2, 2)), {0: np.eye(2)})
    q = sdpcore.phase_one(p)
    assert q.nv == 2
    res = sdpcore.check_feasible(p)
    assert res.slack == pytest.approx(1.0, abs=1e-7)
