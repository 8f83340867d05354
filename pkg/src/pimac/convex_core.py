"""Small dense convex kernel.

A linear-program front end (backed by scipy's HiGHS), a from-scratch
log-barrier interior-point solver for small dense semidefinite programs with
optional log-det constraints, a quasi-convex bisection driver, rank-1
extraction, and the Gaussian randomization used to project relaxation
solutions back to rank 1.

The barrier solver works on problems of desk scale (block dimensions up to
16); everything is deterministic, and the randomization RNG is a seeded
counter-based generator (Philox) owned per call.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.optimize

__all__ = [
    "InfeasibleError",
    "UnboundedError",
    "NumericFailureError",
    "RandomizationFailedError",
    "ContractViolationError",
    "SolverConfig",
    "LinearProgram",
    "LpSolution",
    "PsdBlock",
    "TraceConstraint",
    "LogDetConstraint",
    "SemidefiniteProgram",
    "SdpSolution",
    "solve_lp",
    "solve_sdp",
    "find_strictly_feasible",
    "bisect",
    "dominant_rank1",
    "dominant_rank1_hermitian",
    "gaussian_randomize",
    "RandomizationResult",
]


class InfeasibleError(RuntimeError):
    """The constraint set is empty (within tolerance)."""


class UnboundedError(RuntimeError):
    """The objective is unbounded below on the feasible set."""


class NumericFailureError(RuntimeError):
    """Newton breakdown or loss of domain during a barrier solve."""


class RandomizationFailedError(RuntimeError):
    """No feasible candidate among the randomized draws."""


class ContractViolationError(RuntimeError):
    """A caller-supplied oracle violated its monotonicity contract."""


@dataclass(frozen=True)
class SolverConfig:
    """Knobs of the barrier method, bisection and randomization.

    Defaults follow the desk-scale rationale: problem dimensions are tiny,
    so aggressive barrier settings are cheap and stable.
    """

    barrier_t0: float = 1.0
    barrier_mu: float = 10.0
    max_newton_steps: int = 60
    newton_tol: float = 1e-9
    tol_feas: float = 1e-7
    tol_bis: float = 1e-4
    k_rand: int = 200
    seed: int = 0
    gamma_scale: float = 100.0

    def __post_init__(self):
        if min(self.tol_feas, self.tol_bis, self.newton_tol) <= 0:
            raise ValueError("tolerances must be positive")
        if self.k_rand < 0:
            raise ValueError("k_rand must be >= 0")
        if self.gamma_scale < 1:
            raise ValueError("gamma_scale must be >= 1")


DEFAULT_CONFIG = SolverConfig()


# ---------------------------------------------------------------------------
# linear programming (scipy/HiGHS behind the contract)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LinearProgram:
    """min objective @ x  s.t.  coeffs @ x >= bound per row,  x >= lower_bounds."""

    objective: np.ndarray
    rows: tuple
    lower_bounds: np.ndarray | None = None

    def __post_init__(self):
        c = np.asarray(self.objective, dtype=float)
        rows = tuple((np.asarray(a, dtype=float), float(b)) for a, b in self.rows)
        for a, _ in rows:
            if a.shape != c.shape:
                raise ValueError("constraint row dimension mismatch")
        lb = self.lower_bounds
        if lb is not None:
            lb = np.asarray(lb, dtype=float)
            if lb.shape != c.shape:
                raise ValueError("lower bound dimension mismatch")
        object.__setattr__(self, "objective", c)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "lower_bounds", lb)


@dataclass(frozen=True)
class LpSolution:
    x: np.ndarray
    value: float


def solve_lp(lp: LinearProgram) -> LpSolution:
    """Solve a small dense LP to tol_feas accuracy.

    Raises InfeasibleError / UnboundedError with the solver's certificate
    status; the returned point satisfies every row within the HiGHS
    primal feasibility tolerance.
    """
    n = lp.objective.size
    if lp.rows:
        a_ub = -np.stack([a for a, _ in lp.rows])
        b_ub = -np.array([b for _, b in lp.rows])
    else:
        a_ub, b_ub = None, None
    lb = lp.lower_bounds if lp.lower_bounds is not None else np.zeros(n)
    bounds = [(float(l), None) for l in lb]
    res = scipy.optimize.linprog(lp.objective, A_ub=a_ub, b_ub=b_ub,
                                 bounds=bounds, method="highs")
    if res.status == 2:
        raise InfeasibleError("linear program is infeasible")
    if res.status == 3:
        raise UnboundedError("linear program is unbounded")
    if not res.success:
        raise NumericFailureError(f"LP solver failed: {res.message}")
    return LpSolution(np.asarray(res.x), float(res.fun))


# ---------------------------------------------------------------------------
# semidefinite programming structures
# ---------------------------------------------------------------------------

MAX_BLOCK_DIM = 16


@dataclass(frozen=True)
class PsdBlock:
    name: str
    dim: int

    def __post_init__(self):
        if not 1 <= self.dim <= MAX_BLOCK_DIM:
            raise ValueError(f"block dimension must be in [1, {MAX_BLOCK_DIM}]")


@dataclass(frozen=True)
class TraceConstraint:
    """sum_b Tr(terms[b] X_b)  <sense>  rhs, with sense in {'<=', '>=', '=='}."""

    terms: dict
    sense: str
    rhs: float

    def __post_init__(self):
        if self.sense not in ("<=", ">=", "=="):
            raise ValueError("sense must be one of <=, >=, ==")


@dataclass(frozen=True)
class LogDetConstraint:
    """logdet(constant + sum_b L_b X_b L_b^T) - sum_b Tr(D_b X_b) >= rhs.

    ``channels`` lists (block name, L_b); ``linear`` maps block names to D_b.
    """

    constant: np.ndarray
    channels: tuple
    linear: dict
    rhs: float


@dataclass(frozen=True)
class SemidefiniteProgram:
    """Block-diagonal SDP with trace-linear constraints.

    minimize    sum_b Tr(objective[b] X_b)
    subject to  every TraceConstraint, every LogDetConstraint, X_b PSD.
    """

    blocks: tuple
    objective: dict
    constraints: tuple = ()
    logdet_constraints: tuple = ()

    def __post_init__(self):
        names = {b.name for b in self.blocks}
        if len(names) != len(self.blocks):
            raise ValueError("duplicate block names")
        referenced = set(self.objective)
        for c in self.constraints:
            referenced |= set(c.terms)
        for c in self.logdet_constraints:
            referenced |= {name for name, _ in c.channels} | set(c.linear)
        unknown = referenced - names
        if unknown:
            raise ValueError(f"constraints reference undeclared blocks: {sorted(unknown)}")

    def block(self, name: str) -> PsdBlock:
        for b in self.blocks:
            if b.name == name:
                return b
        raise KeyError(name)


@dataclass(frozen=True)
class SdpSolution:
    blocks: dict
    objective: float
    dual_bound: float


# ---------------------------------------------------------------------------
# svec parameterization helpers
# ---------------------------------------------------------------------------

def _svec_pairs(dim):
    return [(p, q) for p in range(dim) for q in range(p + 1)]


def _mat_from_svec(x, dim):
    m = np.zeros((dim, dim))
    idx = 0
    for p in range(dim):
        for q in range(p + 1):
            m[p, q] = x[idx]
            m[q, p] = x[idx]
            idx += 1
    return m


def _svec_from_mat(m):
    dim = m.shape[0]
    return np.array([m[p, q] for p in range(dim) for q in range(p + 1)])


def _trace_row(a, dim):
    """Row vector t with Tr(a X) = t @ svec(X) for symmetric part of a."""
    s = 0.5 * (a + a.T)
    row = np.empty(dim * (dim + 1) // 2)
    idx = 0
    for p in range(dim):
        for q in range(p + 1):
            row[idx] = s[p, q] if p == q else 2.0 * s[p, q]
            idx += 1
    return row


class _AffineMat:
    """F0 + sum_k x[idx[k]] * F[k], with a cached stacked basis."""

    def __init__(self, f0, idx, fs):
        self.f0 = np.asarray(f0, dtype=float)
        self.idx = np.asarray(idx, dtype=int)
        self.fs = np.asarray(fs, dtype=float) if len(fs) else np.zeros((0,) + self.f0.shape)

    @property
    def dim(self):
        return self.f0.shape[0]

    def value(self, x):
        if self.idx.size == 0:
            return self.f0.copy()
        return self.f0 + np.einsum("k,kab->ab", x[self.idx], self.fs)

    def shifted(self, slack_index):
        """The same map plus s*I for the phase-1 slack variable."""
        eye = np.eye(self.dim)
        idx = np.concatenate([self.idx, [slack_index]])
        fs = np.concatenate([self.fs, eye[None]], axis=0) if self.fs.size else eye[None]
        return _AffineMat(self.f0, idx, fs)


def _block_basis(dim, offset):
    """svec basis matrices of one block and their global variable indices."""
    fs, idx = [], []
    k = 0
    for p in range(dim):
        for q in range(p + 1):
            e = np.zeros((dim, dim))
            if p == q:
                e[p, p] = 1.0
            else:
                e[p, q] = 1.0
                e[q, p] = 1.0
            fs.append(e)
            idx.append(offset + k)
            k += 1
    return idx, fs


# ---------------------------------------------------------------------------
# the barrier engine
# ---------------------------------------------------------------------------

class _BarrierProblem:
    """minimize cost @ x subject to affine PSD cones, scalar inequalities
    g @ x <= h, log-det constraints and linear equalities."""

    def __init__(self, n, cost):
        self.n = n
        self.cost = np.asarray(cost, dtype=float)
        self.psd = []          # list[_AffineMat]
        self.lin_g = []        # rows g
        self.lin_h = []        # bounds h
        self.logdet = []       # list[(affine M, d vector, r)]
        self.eq_a = []
        self.eq_b = []

    # -- constraint evaluation ------------------------------------------------

    def violation(self, x):
        """Max constraint violation (>0 infeasible, <0 strictly feasible)."""
        worst = -math.inf
        for m in self.psd:
            worst = max(worst, -float(np.linalg.eigvalsh(m.value(x)).min()))
        for g, h in zip(self.lin_g, self.lin_h):
            worst = max(worst, float(g @ x - h))
        for m, d, r in self.logdet:
            mat = m.value(x)
            vals = np.linalg.eigvalsh(mat)
            if vals.min() <= 0:
                return math.inf
            ld = float(np.sum(np.log(vals)))
            worst = max(worst, -(ld - float(d @ x) - r))
        return worst

    @property
    def barrier_complexity(self):
        nu = sum(m.dim for m in self.psd) + len(self.lin_g) + len(self.logdet)
        return max(nu, 1)

    def _chol_logdet(self, mat):
        try:
            chol = np.linalg.cholesky(mat)
        except np.linalg.LinAlgError:
            return None, None
        return chol, 2.0 * float(np.sum(np.log(np.diag(chol))))

    def barrier_value(self, x):
        """Barrier alone (no objective); +inf outside the domain."""
        total = 0.0
        for m in self.psd:
            _, ld = self._chol_logdet(m.value(x))
            if ld is None:
                return math.inf
            total -= ld
        for g, h in zip(self.lin_g, self.lin_h):
            slack = h - float(g @ x)
            if slack <= 0:
                return math.inf
            total -= math.log(slack)
        for m, d, r in self.logdet:
            _, ld = self._chol_logdet(m.value(x))
            if ld is None:
                return math.inf
            c = ld - float(d @ x) - r
            if c <= 0:
                return math.inf
            total -= math.log(c)
        return total

    def barrier_grad_hess(self, x):
        n = self.n
        grad = np.zeros(n)
        hess = np.zeros((n, n))

        for m in self.psd:
            if m.idx.size == 0:
                continue
            inv = np.linalg.inv(m.value(x))
            ks = np.einsum("ab,kbc->kac", inv, m.fs)
            grad[m.idx] -= np.einsum("kaa->k", ks)
            hess[np.ix_(m.idx, m.idx)] += np.einsum("iab,jba->ij", ks, ks)
        for g, h in zip(self.lin_g, self.lin_h):
            slack = h - float(g @ x)
            grad += g / slack
            hess += np.outer(g, g) / slack ** 2
        for m, d, r in self.logdet:
            mat = m.value(x)
            inv = np.linalg.inv(mat)
            _, ld = self._chol_logdet(mat)
            c = ld - float(d @ x) - r
            u = -d.astype(float).copy()
            if m.idx.size:
                ks = np.einsum("ab,kbc->kac", inv, m.fs)
                u[m.idx] += np.einsum("kaa->k", ks)
                curv = np.einsum("iab,jba->ij", ks, ks)
            grad -= u / c
            hess += np.outer(u, u) / c ** 2
            if m.idx.size:
                hess[np.ix_(m.idx, m.idx)] += curv / c
        return grad, hess


def _nullspace(a, rtol=1e-12):
    if a.size == 0:
        return None
    u, s, vt = np.linalg.svd(a, full_matrices=True)
    rank = int(np.sum(s > rtol * max(a.shape) * (s[0] if s.size else 1.0)))
    return vt[rank:].T


def _centering(prob, x, t, cfg, stop=None):
    """Newton centering of t*cost + barrier, staying inside the domain."""
    z = _nullspace(np.asarray(prob.eq_a, dtype=float)) if prob.eq_a else None
    if z is not None and z.shape[1] == 0:
        return x  # equalities pin the point completely
    for _ in range(cfg.max_newton_steps):
        if stop is not None and stop(x):
            return x
        grad_b, hess_b = prob.barrier_grad_hess(x)
        grad = t * prob.cost + grad_b
        hess = hess_b
        if z is not None:
            g_r = z.T @ grad
            h_r = z.T @ hess @ z
        else:
            g_r, h_r = grad, hess
        # jitter escalation keeps the step well-defined near the boundary
        jitter = 0.0
        scale = max(1.0, float(np.trace(h_r)) / max(1, h_r.shape[0]))
        for _ in range(12):
            try:
                chol = np.linalg.cholesky(h_r + jitter * np.eye(h_r.shape[0]))
                break
            except np.linalg.LinAlgError:
                jitter = max(jitter * 10.0, 1e-12 * scale)
        else:
            raise NumericFailureError("Newton system not positive definite")
        dy = -np.linalg.solve(chol.T, np.linalg.solve(chol, g_r))
        decrement = -float(g_r @ dy)
        if decrement / 2.0 <= cfg.newton_tol:
            return x
        dx = z @ dy if z is not None else dy
        # trust region: never propose steps wildly out of the iterate's scale
        step_cap = 1e3 * max(1.0, float(np.abs(x).max()))
        step_len = float(np.abs(dx).max())
        if step_len > step_cap:
            dx = dx * (step_cap / step_len)
            decrement *= step_cap / step_len
        f0 = t * float(prob.cost @ x) + prob.barrier_value(x)
        alpha = 1.0
        for _ in range(80):
            cand = x + alpha * dx
            f1 = t * float(prob.cost @ cand) + prob.barrier_value(cand)
            if f1 < f0 - 0.25 * alpha * decrement:
                x = cand
                break
            alpha *= 0.5
        else:
            return x  # stalled line search: accept current centering
    return x


def _barrier_minimize(prob, x0, cfg, stop=None):
    """Path-following loop; returns (x, gap_bound)."""
    x = np.asarray(x0, dtype=float).copy()
    if not math.isfinite(prob.barrier_value(x)):
        raise NumericFailureError("barrier start point is not strictly feasible")
    nu = prob.barrier_complexity
    t = cfg.barrier_t0
    while True:
        x = _centering(prob, x, t, cfg, stop=stop)
        if stop is not None and stop(x):
            return x, nu / t
        if nu / t <= cfg.tol_feas:
            return x, nu / t
        t *= cfg.barrier_mu


def _phase1(prob, x0, cfg, early_margin=None):
    """Minimize the max constraint violation from a domain-valid start.

    Returns (x_strict or None, smallest slack found).  ``x0`` must satisfy
    the equalities and keep every log-det argument positive definite.
    """
    n = prob.n
    aug = _BarrierProblem(n + 1, np.concatenate([np.zeros(n), [1.0]]))
    s_idx = n
    for m in prob.psd:
        aug.psd.append(m.shifted(s_idx))
    for g, h in zip(prob.lin_g, prob.lin_h):
        aug.lin_g.append(np.concatenate([g, [-1.0]]))
        aug.lin_h.append(h)
    for m, d, r in prob.logdet:
        m2 = _AffineMat(m.f0, m.idx, m.fs)
        d2 = np.concatenate([d, [-1.0]])
        aug.logdet.append((m2, d2, r))
    if prob.eq_a:
        aug.eq_a = [np.concatenate([a, [0.0]]) for a in prob.eq_a]
        aug.eq_b = list(prob.eq_b)
    # keep the slack bounded below so the phase-1 problem is bounded
    aug.lin_g.append(np.concatenate([np.zeros(n), [-1.0]]))
    aug.lin_h.append(1e8)
    # box the original variables: the slack objective alone does not bound
    # directions the original constraints leave free, and an unbounded
    # barrier term would otherwise pull the centering to infinity
    box = 1e6 * max(1.0, float(np.abs(x0).max()))
    for i in range(n):
        e = np.zeros(n + 1)
        e[i] = 1.0
        aug.lin_g.append(e.copy())
        aug.lin_h.append(box)
        aug.lin_g.append(-e)
        aug.lin_h.append(box)

    viol = prob.violation(x0)
    if not math.isfinite(viol):
        raise NumericFailureError("phase-1 start violates a log-det domain")
    # relative bump: an absolute +1 margin drowns in float rounding when a
    # constraint row carries extreme coefficients
    s0 = max(viol, 0.0) * (1.0 + 1e-9) + 1.0
    x = np.concatenate([x0, [s0]])

    margin = early_margin if early_margin is not None else cfg.tol_feas

    best = [math.inf]

    def stop(xs):
        best[0] = min(best[0], float(xs[-1]))
        return xs[-1] < -margin

    x_end, _ = _barrier_minimize(aug, x, cfg, stop=stop)
    s_end = float(x_end[-1])
    best[0] = min(best[0], s_end)
    cand = x_end[:-1]
    if s_end < 0.0 and prob.violation(cand) < 0.0:
        return cand, best[0]
    return None, best[0]


def _project_to_equalities(prob, x0):
    if not prob.eq_a:
        return x0
    a = np.asarray(prob.eq_a, dtype=float)
    b = np.asarray(prob.eq_b, dtype=float)
    resid = a @ x0 - b
    if np.abs(resid).max() < 1e-12:
        return x0
    correction = np.linalg.lstsq(a, resid, rcond=None)[0]
    return x0 - correction


def _lower_sdp(sdp: SemidefiniteProgram):
    """Translate the block/trace formulation into a _BarrierProblem."""
    offsets, total = {}, 0
    for b in sdp.blocks:
        offsets[b.name] = total
        total += b.dim * (b.dim + 1) // 2
    cost = np.zeros(total)
    for name, cmat in sdp.objective.items():
        b = sdp.block(name)
        cost[offsets[name]: offsets[name] + b.dim * (b.dim + 1) // 2] = \
            _trace_row(np.asarray(cmat, dtype=float), b.dim)
    prob = _BarrierProblem(total, cost)
    for b in sdp.blocks:
        idx, fs = _block_basis(b.dim, offsets[b.name])
        prob.psd.append(_AffineMat(np.zeros((b.dim, b.dim)), idx, fs))

    def row_of(terms):
        row = np.zeros(total)
        for name, a in terms.items():
            b = sdp.block(name)
            k = b.dim * (b.dim + 1) // 2
            row[offsets[name]: offsets[name] + k] += _trace_row(np.asarray(a, float), b.dim)
        return row

    for c in sdp.constraints:
        row = row_of(c.terms)
        if c.sense == "<=":
            prob.lin_g.append(row)
            prob.lin_h.append(float(c.rhs))
        elif c.sense == ">=":
            prob.lin_g.append(-row)
            prob.lin_h.append(-float(c.rhs))
        else:
            prob.eq_a.append(row)
            prob.eq_b.append(float(c.rhs))

    for c in sdp.logdet_constraints:
        const = np.asarray(c.constant, dtype=float)
        dim = const.shape[0]
        idx_all, fs_all = [], []
        for name, chan in c.channels:
            b = sdp.block(name)
            chan = np.asarray(chan, dtype=float)
            base_idx, base_fs = _block_basis(b.dim, offsets[name])
            for bi, bf in zip(base_idx, base_fs):
                idx_all.append(bi)
                fs_all.append(chan @ bf @ chan.T)
        d = row_of(c.linear)
        prob.logdet.append((_AffineMat(const, idx_all, fs_all), d, float(c.rhs)))
    return prob, offsets


def _blocks_from_x(sdp, offsets, x):
    out = {}
    for b in sdp.blocks:
        k = b.dim * (b.dim + 1) // 2
        out[b.name] = _mat_from_svec(x[offsets[b.name]: offsets[b.name] + k], b.dim)
    return out


def _x_from_blocks(sdp, offsets, blocks):
    total = max(offsets[b.name] + b.dim * (b.dim + 1) // 2 for b in sdp.blocks)
    x = np.zeros(total)
    for b in sdp.blocks:
        k = b.dim * (b.dim + 1) // 2
        x[offsets[b.name]: offsets[b.name] + k] = _svec_from_mat(
            np.asarray(blocks[b.name], dtype=float))
    return x


def _default_start(sdp, offsets, scale=1.0):
    blocks = {b.name: scale * np.eye(b.dim) for b in sdp.blocks}
    return _x_from_blocks(sdp, offsets, blocks)


def find_strictly_feasible(sdp: SemidefiniteProgram, config: SolverConfig = DEFAULT_CONFIG,
                           start: dict | None = None, early_margin: float | None = None):
    """Phase-1 feasibility: a strictly feasible block dict, or None.

    ``start`` provides the slack-free starting blocks (it must keep every
    log-det argument positive definite; identity blocks are used otherwise).
    """
    prob, offsets = _lower_sdp(sdp)
    x0 = _x_from_blocks(sdp, offsets, start) if start is not None \
        else _default_start(sdp, offsets)
    x0 = _project_to_equalities(prob, x0)
    x, _ = _phase1(prob, x0, config, early_margin=early_margin)
    if x is None:
        return None
    return _blocks_from_x(sdp, offsets, x)


def solve_sdp(sdp: SemidefiniteProgram, config: SolverConfig = DEFAULT_CONFIG,
              start: dict | None = None) -> SdpSolution:
    """Barrier solve of a block SDP (optionally with log-det constraints).

    The returned blocks are strictly PSD interior points whose duality-gap
    bound ``objective - dual_bound`` is at most tol_feas * barrier
    complexity; infeasibility is decided by a phase-1 slack minimization.
    """
    prob, offsets = _lower_sdp(sdp)
    x0 = None
    if start is not None:
        cand = _project_to_equalities(prob, _x_from_blocks(sdp, offsets, start))
        if prob.violation(cand) < 0 and math.isfinite(prob.barrier_value(cand)):
            x0 = cand
    if x0 is None:
        seed = _project_to_equalities(prob, _default_start(sdp, offsets))
        if prob.violation(seed) < 0 and math.isfinite(prob.barrier_value(seed)):
            x0 = seed
        else:
            x0, _ = _phase1(prob, seed, config)
        if x0 is None:
            raise InfeasibleError("SDP phase-1 found no strictly feasible point")
    x, gap = _barrier_minimize(prob, x0, config)
    objective = float(prob.cost @ x)
    return SdpSolution(_blocks_from_x(sdp, offsets, x), objective, objective - gap)


# ---------------------------------------------------------------------------
# bisection
# ---------------------------------------------------------------------------

def bisect(oracle, lo: float, hi: float, tol_bis: float, probe_points=()) -> float:
    """Largest feasible point of a monotone yes/no oracle on [lo, hi].

    The oracle's feasible set must be a down-set.  Every evaluation is
    recorded and any observed non-monotonicity raises
    ContractViolationError; ``probe_points`` adds extra ladder evaluations
    (they also tighten the bracket, so they are never wasted).
    """
    if not (hi >= lo):
        raise ValueError("need hi >= lo")
    if tol_bis <= 0:
        raise ValueError("tol_bis must be positive")
    seen = []

    def probe(r):
        ok = bool(oracle(r))
        for r2, ok2 in seen:
            good, bad = (r, r2) if ok and not ok2 else (r2, r) if ok2 and not ok else (None, None)
            if good is not None and bad < good:
                raise ContractViolationError(
                    f"oracle feasible at {good} but infeasible at smaller {bad}")
        seen.append((r, ok))
        return ok

    if not probe(lo):
        raise InfeasibleError(f"oracle infeasible at the lower end {lo}")
    feas, infeas = lo, hi
    for p in sorted(probe_points):
        if lo < p < hi:
            ok = probe(p)
            if ok and p > feas:
                feas = p
            elif not ok and p < infeas:
                infeas = p
    if infeas >= hi and probe(hi):
        return hi
    while infeas - feas > tol_bis:
        mid = 0.5 * (feas + infeas)
        if probe(mid):
            feas = mid
        else:
            infeas = mid
    return feas


# ---------------------------------------------------------------------------
# rank-1 machinery
# ---------------------------------------------------------------------------

def dominant_rank1(m: np.ndarray):
    """Largest eigenpair of a symmetric PSD matrix.

    Sign convention: the first component of the eigenvector exceeding
    1e-12 of the max magnitude is made positive; ties across equal
    eigenvalues resolve to the first column eigh reports.
    """
    m = np.asarray(m, dtype=float)
    vals, vecs = np.linalg.eigh(0.5 * (m + m.T))
    i = int(np.argmax(vals))
    lam = float(vals[i])
    w = vecs[:, i]
    return lam, _fix_sign(w)


def dominant_rank1_hermitian(m: np.ndarray):
    """Largest eigenpair of a Hermitian PSD matrix (phase left arbitrary
    except the first significant component is made real nonnegative)."""
    m = np.asarray(m, dtype=complex)
    vals, vecs = np.linalg.eigh(0.5 * (m + m.conj().T))
    i = int(np.argmax(vals))
    w = vecs[:, i]
    mag = np.abs(w)
    if mag.max() > 0:
        k = int(np.argmax(mag > 1e-12 * mag.max()))
        phase = w[k] / abs(w[k]) if abs(w[k]) > 0 else 1.0
        w = w / phase
    return float(vals[i]), w


def _fix_sign(w):
    mag = np.abs(w)
    if mag.max() == 0:
        return w
    k = int(np.argmax(mag > 1e-12 * mag.max()))
    return -w if w[k] < 0 else w


@dataclass(frozen=True)
class RandomizationResult:
    objective: float
    payload: object
    n_feasible: int
    n_tried: int


def _chol_psd(m, jitter_rel=1e-12):
    m = np.asarray(m)
    scale = max(float(np.abs(np.trace(m)).real), 1.0)
    jitter = jitter_rel * scale
    for _ in range(10):
        try:
            return np.linalg.cholesky(m + jitter * np.eye(m.shape[0]))
        except np.linalg.LinAlgError:
            jitter *= 100.0
    raise NumericFailureError("covariance is not PSD to working precision")


def gaussian_randomize(c_cov: np.ndarray, ctilde_cov: np.ndarray | None,
                       evaluate, k_rand: int, seed: int) -> RandomizationResult:
    """Recover the best rank-1 candidate from relaxation covariances.

    Draws ``k_rand`` zero-mean Gaussian sample pairs with covariances
    ``c_cov`` (real) and ``ctilde_cov`` (Hermitian, may be None for the
    proper baseline) and always also evaluates the dominant-eigenvector
    pair, so the result is never worse than that deterministic projection.

    ``evaluate`` receives a (real vector, complex vector or None) pair and
    returns None to reject or (objective, payload); the best objective wins.
    Deterministic for a fixed seed (counter-based Philox generator).
    """
    c_cov = np.asarray(c_cov, dtype=float)
    lam, w = dominant_rank1(c_cov)
    x_eig = math.sqrt(max(lam, 0.0)) * w
    z_eig = None
    if ctilde_cov is not None:
        lam_t, w_t = dominant_rank1_hermitian(ctilde_cov)
        z_eig = math.sqrt(max(lam_t, 0.0)) * w_t

    candidates = [(x_eig, z_eig)]
    if k_rand > 0:
        rng = np.random.Generator(np.random.Philox(seed))
        lc = _chol_psd(c_cov)
        lt = _chol_psd(ctilde_cov) if ctilde_cov is not None else None
        for _ in range(k_rand):
            x = lc @ rng.standard_normal(c_cov.shape[0])
            z = None
            if lt is not None:
                z = lt @ ((rng.standard_normal(lt.shape[0])
                           + 1j * rng.standard_normal(lt.shape[0])) / math.sqrt(2.0))
            candidates.append((x, z))

    best = None
    n_feasible = 0
    for cand in candidates:
        res = evaluate(cand)
        if res is None:
            continue
        objective, payload = res
        n_feasible += 1
        if best is None or objective > best[0]:
            best = (objective, payload)
    if best is None:
        raise RandomizationFailedError(
            f"no feasible candidate among {len(candidates)} randomized draws")
    return RandomizationResult(best[0], best[1], n_feasible, len(candidates))
