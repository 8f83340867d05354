"""Tests for the LP/SDP/bisection/randomization kernel."""

import itertools
import math

import numpy as np
import pytest

from pimac.convex_core import (
    ContractViolationError,
    InfeasibleError,
    LinearProgram,
    LogDetConstraint,
    PsdBlock,
    RandomizationFailedError,
    SemidefiniteProgram,
    SolverConfig,
    TraceConstraint,
    UnboundedError,
    bisect,
    dominant_rank1,
    dominant_rank1_hermitian,
    find_strictly_feasible,
    gaussian_randomize,
    solve_lp,
    solve_sdp,
)

CFG = SolverConfig()


# ---------------------------------------------------------------------------
# LP
# ---------------------------------------------------------------------------

def test_lp_single_variable():
    lp = LinearProgram(np.array([1.0]), [([1.0], 0.5)])
    sol = solve_lp(lp)
    assert sol.value == pytest.approx(0.5, abs=1e-9)
    assert sol.x[0] == pytest.approx(0.5, abs=1e-9)


def test_lp_two_variables():
    lp = LinearProgram(np.array([1.0, 1.0]), [([1.0, 0.0], 1.0), ([0.0, 1.0], 2.0)])
    assert solve_lp(lp).value == pytest.approx(3.0, abs=1e-9)


def test_lp_single_link_sinr():
    # min p s.t. |h|^2 p / sigma^2 >= gamma with |h| = 1, sigma^2 = 1, gamma = 0.5
    lp = LinearProgram(np.array([1.0]), [([1.0], 0.5)])
    assert solve_lp(lp).value == pytest.approx(0.5, abs=1e-9)


def test_lp_infeasible_and_unbounded():
    with pytest.raises(InfeasibleError):
        solve_lp(LinearProgram(np.array([1.0]), [([-1.0], 1.0)]))  # -x >= 1, x >= 0
    with pytest.raises(UnboundedError):
        solve_lp(LinearProgram(np.array([-1.0]), []))  # min -x, x >= 0


# ---------------------------------------------------------------------------
# SDP
# ---------------------------------------------------------------------------

def test_sdp_pin_corner_entry():
    sdp = SemidefiniteProgram(
        blocks=(PsdBlock("X", 2),),
        objective={"X": np.eye(2)},
        constraints=(TraceConstraint({"X": np.diag([1.0, 0.0])}, "==", 1.0),),
    )
    sol = solve_sdp(sdp, CFG)
    assert sol.objective == pytest.approx(1.0, abs=1e-5)
    assert np.allclose(sol.blocks["X"], np.outer([1, 0], [1, 0]), atol=1e-3)
    assert sol.dual_bound <= sol.objective + 1e-12


def test_sdp_trace_lower_bound():
    sdp = SemidefiniteProgram(
        blocks=(PsdBlock("X", 2),),
        objective={"X": np.eye(2)},
        constraints=(TraceConstraint({"X": np.eye(2)}, ">=", 1.0),),
    )
    sol = solve_sdp(sdp, CFG)
    assert sol.objective == pytest.approx(1.0, abs=1e-5)


def test_sdp_weighted_trace():
    # min Tr(X) s.t. Tr(A X) >= 1 with A = 2I: optimum X = I/4, value 1/2.
    sdp = SemidefiniteProgram(
        blocks=(PsdBlock("X", 2),),
        objective={"X": np.eye(2)},
        constraints=(TraceConstraint({"X": 2 * np.eye(2)}, ">=", 1.0),),
    )
    assert solve_sdp(sdp, CFG).objective == pytest.approx(0.5, abs=1e-5)


def brute_force_three_block(c_list, a_list, rhs, grid):
    """Grid search over diagonal PSD candidates of a 3-block SDP.

    minimize sum_b Tr(C_b X_b) s.t. sum_b Tr(A_b X_b) >= rhs, X_b diagonal PSD.
    Valid as a bound oracle because C_b, A_b are diagonal, so diagonal
    candidates contain an optimum.
    """
    best = math.inf
    dims = [c.shape[0] for c in c_list]
    axes = [grid] * sum(dims)
    for combo in itertools.product(*axes):
        i = 0
        val = 0.0
        lhs = 0.0
        for c, a, d in zip(c_list, a_list, dims):
            x = np.array(combo[i: i + d])
            i += d
            val += float(np.diag(c) @ x)
            lhs += float(np.diag(a) @ x)
        if lhs >= rhs - 1e-12:
            best = min(best, val)
    return best


def test_sdp_three_blocks_vs_bruteforce():
    c_list = [np.diag([1.0, 2.0]), np.diag([3.0]), np.diag([1.5, 0.5])]
    a_list = [np.diag([2.0, 1.0]), np.diag([4.0]), np.diag([1.0, 3.0])]
    rhs = 2.0
    sdp = SemidefiniteProgram(
        blocks=(PsdBlock("A", 2), PsdBlock("B", 1), PsdBlock("C", 2)),
        objective={"A": c_list[0], "B": c_list[1], "C": c_list[2]},
        constraints=(TraceConstraint(
            {"A": a_list[0], "B": a_list[1], "C": a_list[2]}, ">=", rhs),),
    )
    sol = solve_sdp(sdp, CFG)
    # brute force over a discretized diagonal feasible set brackets the optimum
    grid = np.linspace(0.0, 1.5, 13)
    bound = brute_force_three_block(c_list, a_list, rhs, grid)
    # optimum puts everything on the best ratio: min_i c_i/a_i * rhs
    ratios = [c / a for cb, ab in zip(c_list, a_list)
              for c, a in zip(np.diag(cb), np.diag(ab))]
    exact = min(ratios) * rhs
    assert sol.objective == pytest.approx(exact, abs=1e-4)
    assert bound >= sol.objective - 1e-2  # grid candidates can't beat the SDP


def test_sdp_infeasible():
    sdp = SemidefiniteProgram(
        blocks=(PsdBlock("X", 2),),
        objective={"X": np.eye(2)},
        constraints=(
            TraceConstraint({"X": np.eye(2)}, "<=", 1.0),
            TraceConstraint({"X": np.eye(2)}, ">=", 2.0),
        ),
    )
    with pytest.raises(InfeasibleError):
        solve_sdp(sdp, CFG)


def test_sdp_matches_lp_on_diagonal_encoding():
    # min x1 + x2 s.t. x1 >= 1, x2 >= 2 encoded as 1x1 PSD blocks.
    sdp = SemidefiniteProgram(
        blocks=(PsdBlock("x1", 1), PsdBlock("x2", 1)),
        objective={"x1": np.eye(1), "x2": np.eye(1)},
        constraints=(
            TraceConstraint({"x1": np.eye(1)}, ">=", 1.0),
            TraceConstraint({"x2": np.eye(1)}, ">=", 2.0),
        ),
    )
    sol = solve_sdp(sdp, CFG)
    lp = LinearProgram(np.ones(2), [([1.0, 0.0], 1.0), ([0.0, 1.0], 2.0)])
    assert sol.objective == pytest.approx(solve_lp(lp).value, abs=1e-6)


def test_sdp_weak_duality_random_instances():
    rng = np.random.default_rng(101)
    for _ in range(5):
        a = rng.normal(size=(3, 3))
        a = a @ a.T + 0.5 * np.eye(3)
        sdp = SemidefiniteProgram(
            blocks=(PsdBlock("X", 3),),
            objective={"X": np.eye(3)},
            constraints=(TraceConstraint({"X": a}, ">=", 1.0),),
        )
        sol = solve_sdp(sdp, CFG)
        assert sol.dual_bound <= sol.objective + CFG.tol_feas
        assert np.linalg.eigvalsh(sol.blocks["X"]).min() >= -1e-9


def test_sdp_logdet_constraint():
    # min Tr(Q) s.t. logdet(I + Q) >= log(4): optimum Q = I (2x2), trace 2.
    sdp = SemidefiniteProgram(
        blocks=(PsdBlock("Q", 2),),
        objective={"Q": np.eye(2)},
        logdet_constraints=(LogDetConstraint(
            constant=np.eye(2), channels=(("Q", np.eye(2)),),
            linear={}, rhs=math.log(4.0)),),
    )
    sol = solve_sdp(sdp, CFG)
    assert sol.objective == pytest.approx(2.0, abs=1e-4)
    assert np.allclose(sol.blocks["Q"], np.eye(2), atol=1e-3)


def test_sdp_logdet_with_channel_and_linear_part():
    # Scalar case through a gain of 2: logdet(1 + 4q) - 0.1 q >= log(5)
    # optimum at the boundary; verify against a fine scalar grid oracle.
    g = np.array([[2.0]])
    sdp = SemidefiniteProgram(
        blocks=(PsdBlock("Q", 1),),
        objective={"Q": np.eye(1)},
        logdet_constraints=(LogDetConstraint(
            constant=np.eye(1), channels=(("Q", g),),
            linear={"Q": np.array([[0.1]])}, rhs=math.log(5.0)),),
    )
    sol = solve_sdp(sdp, CFG)
    qs = np.linspace(0, 3, 300001)
    ok = np.log1p(4 * qs) - 0.1 * qs >= math.log(5.0)
    oracle = qs[ok].min()
    assert sol.objective == pytest.approx(oracle, abs=1e-4)


def test_find_strictly_feasible():
    sdp = SemidefiniteProgram(
        blocks=(PsdBlock("X", 2),),
        objective={},
        constraints=(
            TraceConstraint({"X": np.eye(2)}, "<=", 2.0),
            TraceConstraint({"X": np.diag([1.0, 0.0])}, ">=", 0.5),
        ),
    )
    blocks = find_strictly_feasible(sdp, CFG)
    assert blocks is not None
    x = blocks["X"]
    assert np.trace(x) <= 2.0 and x[0, 0] >= 0.5
    assert np.linalg.eigvalsh(x).min() > 0

    bad = SemidefiniteProgram(
        blocks=(PsdBlock("X", 2),),
        objective={},
        constraints=(
            TraceConstraint({"X": np.eye(2)}, "<=", 1.0),
            TraceConstraint({"X": np.diag([1.0, 0.0])}, ">=", 3.0),
        ),
    )
    assert find_strictly_feasible(bad, CFG) is None


# ---------------------------------------------------------------------------
# bisection
# ---------------------------------------------------------------------------

def test_bisect_threshold():
    r = bisect(lambda x: x <= 2.5, 0.0, 10.0, 1e-3)
    assert r == pytest.approx(2.5, abs=1e-3)


def test_bisect_saturates_at_hi():
    assert bisect(lambda x: True, 0.0, 4.0, 1e-3) == 4.0


def test_bisect_infeasible_low_end():
    with pytest.raises(InfeasibleError):
        bisect(lambda x: False, 0.0, 4.0, 1e-3)


def test_bisect_refinement_stability():
    coarse = bisect(lambda x: x <= math.pi, 0.0, 10.0, 1e-2)
    fine = bisect(lambda x: x <= math.pi, 0.0, 10.0, 5e-3)
    assert abs(fine - coarse) <= 1e-2 + 1e-12


def test_bisect_detects_non_monotone():
    def flaky(x):
        return x <= 1.0 or (3.0 <= x <= 3.5)

    with pytest.raises(ContractViolationError):
        # one ladder point falls in the infeasible gap, the next in the
        # spurious feasible island above it
        bisect(flaky, 0.0, 10.0, 1e-6, probe_points=(2.0, 3.2))


def test_bisect_probe_points_tighten_bracket():
    calls = []

    def oracle(x):
        calls.append(x)
        return x <= 2.5

    r = bisect(oracle, 0.0, 10.0, 1e-3, probe_points=(1.0, 5.0))
    assert r == pytest.approx(2.5, abs=1e-3)
    assert all(c <= 5.0 + 1e-12 for c in calls[3:])


# ---------------------------------------------------------------------------
# rank-1 extraction
# ---------------------------------------------------------------------------

def test_dominant_rank1_identity_tie():
    lam, w = dominant_rank1(np.eye(2))
    assert lam == pytest.approx(1.0)
    assert np.allclose(w, [1.0, 0.0])


def test_dominant_rank1_diagonal():
    lam, w = dominant_rank1(np.diag([4.0, 1.0]))
    assert lam == pytest.approx(4.0)
    assert np.allclose(w, [1.0, 0.0])


def test_dominant_rank1_recovers_outer_product():
    rng = np.random.default_rng(55)
    for _ in range(50):
        v = rng.normal(size=4)
        lam, w = dominant_rank1(np.outer(v, v))
        assert lam == pytest.approx(v @ v, rel=1e-10)
        target = v / np.linalg.norm(v)
        if target[np.argmax(np.abs(target) > 1e-12 * np.abs(target).max())] < 0:
            target = -target
        assert np.allclose(w, target, atol=1e-10)


def test_dominant_rank1_hermitian_recovers():
    rng = np.random.default_rng(56)
    v = rng.normal(size=3) + 1j * rng.normal(size=3)
    lam, w = dominant_rank1_hermitian(np.outer(v, v.conj()))
    assert lam == pytest.approx(float(np.vdot(v, v).real), rel=1e-10)
    # recovered vector matches up to the fixed phase convention
    assert abs(abs(np.vdot(w, v / np.linalg.norm(v))) - 1) < 1e-10


# ---------------------------------------------------------------------------
# gaussian randomization
# ---------------------------------------------------------------------------

def test_randomize_rank1_input_returns_eigencandidate():
    v = np.array([1.0, 2.0])
    cov = np.outer(v, v)

    def evaluate(cand):
        x, z = cand
        return -np.linalg.norm(np.outer(x, x) - cov), x

    res = gaussian_randomize(cov, None, evaluate, k_rand=50, seed=3)
    assert res.objective == pytest.approx(0.0, abs=1e-9)


def test_randomize_zero_draws_is_pure_projection():
    cov = np.diag([4.0, 1.0])

    def evaluate(cand):
        x, _ = cand
        return float(x[0]), x

    res = gaussian_randomize(cov, None, evaluate, k_rand=0, seed=0)
    assert res.n_tried == 1
    assert res.payload[0] == pytest.approx(2.0)  # sqrt(4) * e1


def test_randomize_deterministic():
    cov = np.array([[2.0, 0.3], [0.3, 1.0]])
    herm = np.array([[1.0, 0.2j], [-0.2j, 0.5]])
    seen = []

    def evaluate(cand):
        x, z = cand
        seen.append((x.copy(), None if z is None else z.copy()))
        return float(x.sum()), x

    r1 = gaussian_randomize(cov, herm, evaluate, k_rand=25, seed=42)
    first = [s for s in seen]
    seen.clear()
    r2 = gaussian_randomize(cov, herm, evaluate, k_rand=25, seed=42)
    assert r1.objective == r2.objective
    for (x1, z1), (x2, z2) in zip(first, seen):
        assert np.array_equal(x1, x2)
        assert (z1 is None) == (z2 is None)
        if z1 is not None:
            assert np.array_equal(z1, z2)


def test_randomize_all_rejected():
    with pytest.raises(RandomizationFailedError):
        gaussian_randomize(np.eye(2), None, lambda c: None, k_rand=5, seed=1)
