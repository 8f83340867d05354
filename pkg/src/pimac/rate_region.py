"""Pareto-boundary characterization by the rate-profile method.

The non-convex profile problem is homogenized into a quadratic program,
lifted to a semidefinite feasibility program (a 4x4 real block for the
variance side and a 3x3 Hermitian block for the pseudo-variance side),
solved by bisection over the sum rate, and projected back to rank 1 by
Gaussian randomization plus a deterministic coordinate polish.  The proper
baseline runs the same program with the pseudo-variance block pinned to
zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from pimac import convex_core as cc
from pimac import model

__all__ = [
    "SdrData",
    "SdrSolution",
    "RateRegionPoint",
    "P2pTradeoffPoint",
    "build_sdr_data",
    "sdr_feasible",
    "max_sum_rate",
    "max_p2p_given_mac",
    "pareto_sweep",
    "simplex_grid",
]

LN2 = math.log(2.0)

#: Achieved candidates may undershoot a fixed rate threshold by at most this
#: much (nats); keeps the audit slack of emitted points above -1e-6.
DEMAND_SLACK = 1e-9


# ---------------------------------------------------------------------------
# appendix data
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SdrData:
    """Constant vectors/matrices of the lifted feasibility program.

    Index q runs over the four rate rows (two individual MAC rows, the P2P
    row, the MAC sum row); j over the three transmitters.
    """

    a: np.ndarray          # (4, 3) real
    b: np.ndarray          # (4, 3) real
    atilde: np.ndarray     # (4, 3) complex
    btilde: np.ndarray     # (4, 3) complex
    w: np.ndarray          # (4, 4, 4) real rank-1
    z: np.ndarray          # (4, 4, 4) real rank-1
    atilde_mat: np.ndarray  # (4, 3, 3) Hermitian rank-1
    btilde_mat: np.ndarray  # (4, 3, 3) Hermitian rank-1
    m: np.ndarray          # (3, 4, 4)
    n: np.ndarray          # (3, 4, 4)
    e: np.ndarray          # (3, 3, 3)
    power_caps: np.ndarray
    sigma2: float


def build_sdr_data(ch: model.ChannelInstance) -> SdrData:
    """Populate every constant of the lifted feasibility program (J = 3)."""
    if ch.n_users != 3:
        raise ValueError("the SDR data is defined for the J = 3 network")
    h = ch.gains
    g2 = np.abs(h) ** 2
    hsq = h ** 2

    a = np.array([
        [g2[0, 0], 0.0, g2[0, 2]],
        [0.0, g2[0, 1], g2[0, 2]],
        [g2[1, 0], g2[1, 1], g2[1, 2]],
        [g2[0, 0], g2[0, 1], g2[0, 2]],
    ])
    b = np.array([
        [0.0, 0.0, g2[0, 2]],
        [0.0, 0.0, g2[0, 2]],
        [g2[1, 0], g2[1, 1], 0.0],
        [0.0, 0.0, g2[0, 2]],
    ])
    atilde = np.array([
        [hsq[0, 0], 0.0, hsq[0, 2]],
        [0.0, hsq[0, 1], hsq[0, 2]],
        [hsq[1, 0], hsq[1, 1], hsq[1, 2]],
        [hsq[0, 0], hsq[0, 1], hsq[0, 2]],
    ])
    btilde = np.array([
        [0.0, 0.0, hsq[0, 2]],
        [0.0, 0.0, hsq[0, 2]],
        [hsq[1, 0], hsq[1, 1], 0.0],
        [0.0, 0.0, hsq[0, 2]],
    ])

    sigma2 = ch.noise_variance
    w = np.stack([np.outer(np.r_[sigma2, aq], np.r_[sigma2, aq]) for aq in a])
    z = np.stack([np.outer(np.r_[sigma2, bq], np.r_[sigma2, bq]) for bq in b])
    # quadratic form ct^H A ct must equal |atilde^T ct|^2, so the Hermitian
    # rank-1 factor is the conjugated vector
    atilde_mat = np.stack([np.outer(v.conj(), v) for v in atilde])
    btilde_mat = np.stack([np.outer(v.conj(), v) for v in btilde])

    eye3 = np.eye(3)
    m = np.zeros((3, 4, 4))
    n = np.zeros((3, 4, 4))
    e = np.zeros((3, 3, 3))
    for j in range(3):
        m[j, j + 1, j + 1] = 1.0
        n[j, 0, j + 1] = 0.5
        n[j, j + 1, 0] = 0.5
        e[j] = np.outer(eye3[j], eye3[j])
    return SdrData(a, b, atilde, btilde, w, z, atilde_mat, btilde_mat,
                   m, n, e, ch.power_caps.copy(), sigma2)


@dataclass(frozen=True)
class SdrSolution:
    """Feasible point of the relaxed program plus its rank-1 reading."""

    c_matrix: np.ndarray        # 4x4 real symmetric PSD, C11 = 1
    ctilde_matrix: np.ndarray   # 3x3 Hermitian PSD (zero for proper runs)
    c: np.ndarray               # recovered variances (first-row reading)
    ctilde: np.ndarray          # recovered pseudo-variances
    rate_nats: float
    ranks: tuple

    @staticmethod
    def from_blocks(c_mat, ct_mat, rate_nats, caps):
        c = np.clip(c_mat[0, 1:] / c_mat[0, 0], 0.0, caps)
        lam, vec = cc.dominant_rank1_hermitian(ct_mat)
        ctilde = math.sqrt(max(lam, 0.0)) * vec
        ctilde = _project_pseudo(c, ctilde)
        return SdrSolution(c_mat, ct_mat, c, ctilde, rate_nats,
                           (_numeric_rank(c_mat), _numeric_rank(ct_mat)))


def _numeric_rank(mat, rel=1e-6):
    vals = np.abs(np.linalg.eigvalsh(np.asarray(mat)))
    if vals.max() <= 0:
        return 0
    return int(np.sum(vals > rel * vals.max()))


def _project_pseudo(c, ctilde):
    """Scale each pseudo-variance into the PSD disc |ct_j| <= c_j."""
    out = np.asarray(ctilde, dtype=complex).copy()
    for j in range(out.size):
        mag = abs(out[j])
        if mag > c[j]:
            out[j] *= 0.0 if c[j] <= 0 else c[j] / mag
    return out


# ---------------------------------------------------------------------------
# the feasibility program
# ---------------------------------------------------------------------------

def _embed_hermitian(h):
    """Real 6x6 image [[Re, -Im], [Im, Re]]; traces pick up a factor 2."""
    re, im = h.real, h.imag
    return np.block([[re, -im], [im, re]])


def _pick(i, j, dim):
    a = np.zeros((dim, dim))
    a[i, j] += 0.5
    a[j, i] += 0.5
    return a


def _feasibility_sdp(data: SdrData, thresholds: dict, proper_only: bool):
    """The relaxed feasibility program for fixed rate thresholds (nats).

    ``thresholds`` maps row index q to the rate the row must support; rows
    absent from the mapping impose no rate constraint (their always-valid
    sigma^4 floors stay).  Returns (program, start blocks).
    """
    s2 = data.sigma2
    s4 = s2 * s2
    caps = data.power_caps
    blocks = [cc.PsdBlock("C", 4)]
    if not proper_only:
        blocks.append(cc.PsdBlock("Ct", 6))
    cons = [cc.TraceConstraint({"C": _pick(0, 0, 4)}, "==", 1.0)]
    for j in range(3):
        cons.append(cc.TraceConstraint({"C": data.m[j]}, "<=", float(caps[j] ** 2)))
        cons.append(cc.TraceConstraint({"C": data.n[j]}, ">=", 0.0))
    if not proper_only:
        # embedding structure of the Hermitian block
        for p in range(3):
            for q in range(p, 3):
                eq = _pick(p, q, 6) - _pick(p + 3, q + 3, 6)
                cons.append(cc.TraceConstraint({"Ct": eq}, "==", 0.0))
        for p in range(3):
            cons.append(cc.TraceConstraint({"Ct": _pick(p, p + 3, 6)}, "==", 0.0))
        for p in range(3):
            for q in range(p + 1, 3):
                eq = _pick(p, q + 3, 6) + _pick(q, p + 3, 6)
                cons.append(cc.TraceConstraint({"Ct": eq}, "==", 0.0))
        for j in range(3):
            cons.append(cc.TraceConstraint(
                {"Ct": 0.5 * _embed_hermitian(data.e[j] + 0j), "C": -data.m[j]},
                "<=", 0.0))

    def row_terms(q, rate_factor):
        """W_q - factor * Z_q side of a rate row, including the Ct part."""
        terms = {"C": data.w[q] - rate_factor * data.z[q]}
        if not proper_only:
            herm = data.atilde_mat[q] - rate_factor * data.btilde_mat[q]
            terms["Ct"] = -0.5 * _embed_hermitian(herm)
        return terms

    for q in range(4):
        num = {"C": data.w[q].copy()}
        den = {"C": data.z[q].copy()}
        if not proper_only:
            num["Ct"] = -0.5 * _embed_hermitian(data.atilde_mat[q])
            den["Ct"] = -0.5 * _embed_hermitian(data.btilde_mat[q])
        cons.append(cc.TraceConstraint(num, ">=", s4))
        cons.append(cc.TraceConstraint(den, ">=", s4))
    for q, tau in thresholds.items():
        cons.append(cc.TraceConstraint(row_terms(q, math.exp(2.0 * tau)), ">=", 0.0))

    sdp = cc.SemidefiniteProgram(tuple(blocks), {}, tuple(cons))

    c0 = 0.5 * caps
    c_start = np.zeros((4, 4))
    c_start[0, 0] = 1.0
    c_start[0, 1:] = c0
    c_start[1:, 0] = c0
    c_start[1:, 1:] = np.outer(c0, c0) + 0.1 * np.diag(np.maximum(caps, 1.0) ** 2)
    start = {"C": c_start}
    if not proper_only:
        start["Ct"] = 1e-3 * min(1.0, float(caps.min() ** 2 + 1e-6)) * np.eye(6)
    return sdp, start


def sdr_feasible(rate_nats: float, profile: model.RateProfile, data: SdrData,
                 proper_only: bool = False,
                 config: cc.SolverConfig = cc.DEFAULT_CONFIG):
    """Feasibility test of the relaxed program at sum rate R along a profile.

    Returns an SdrSolution built from a strictly feasible point, or None.
    Rows whose profile weight is exactly zero are dropped rather than forcing
    a 0/0 Chebyshev ratio.
    """
    thresholds = _profile_thresholds(rate_nats, profile)
    return _solve_feasibility(thresholds, data, proper_only, config)


def _profile_thresholds(rate_nats, profile):
    weights = [profile.alpha[0], profile.alpha[1], profile.alpha[2], profile.alpha4]
    return {q: w * rate_nats for q, w in enumerate(weights) if w > 0}


def _solve_feasibility(thresholds, data, proper_only, config):
    # exact short-circuit: every feasible point (relaxed or not) satisfies
    # Tr(W_q C) <= (sigma^2 + a_q P)^2 while the denominator floor is
    # sigma^4, so a threshold beyond the row's interference-free capacity is
    # provably infeasible
    for q, tau in thresholds.items():
        cap = math.log1p(float(data.a[q] @ data.power_caps) / data.sigma2)
        if tau > cap + 1e-12:
            return None
    sdp, start = _feasibility_sdp(data, thresholds, proper_only)
    blocks = cc.find_strictly_feasible(sdp, config, start=start)
    if blocks is None:
        return None
    ct = np.zeros((3, 3), dtype=complex)
    if not proper_only:
        m6 = blocks["Ct"]
        ct = m6[:3, :3] + 1j * m6[3:, :3]
    rate = min(thresholds.values()) if thresholds else 0.0
    return SdrSolution.from_blocks(blocks["C"], ct, rate, data.power_caps)


# ---------------------------------------------------------------------------
# recovery: randomization + polish
# ---------------------------------------------------------------------------

def _candidate_from_sample(sample, caps, proper_only):
    x, z = sample
    t = float(x[0])
    if abs(t) < 1e-12:
        return None
    c = np.clip(np.asarray(x[1:]) / t, 0.0, caps)
    if proper_only or z is None:
        ctilde = np.zeros(3, dtype=complex)
    else:
        ctilde = _project_pseudo(c, np.asarray(z, dtype=complex))
    return c, ctilde


def _fast_bounds_nats(gains, sigma2, c, ctilde):
    """The four bounds in nats, written for tight refiner loops."""
    g2 = np.abs(gains) ** 2
    hsq = gains ** 2

    def pair(i, users):
        var = sigma2 + sum(g2[i, j] * c[j] for j in users)
        pvar = sum(hsq[i, j] * ctilde[j] for j in users)
        return var * var - abs(pvar) ** 2

    s1 = pair(0, (2,))
    s2 = pair(1, (0, 1))
    return np.array([
        0.5 * math.log(pair(0, (0, 2)) / s1),
        0.5 * math.log(pair(0, (1, 2)) / s1),
        0.5 * math.log(pair(1, (0, 1, 2)) / s2),
        0.5 * math.log(pair(0, (0, 1, 2)) / s1),
    ])


def _theta_pack(c, ctilde, proper_only):
    if proper_only:
        return np.asarray(c, dtype=float).copy()
    return np.concatenate([c, np.real(ctilde), np.imag(ctilde)])


def _theta_unpack(theta, proper_only):
    c = np.maximum(theta[:3], 0.0)
    if proper_only:
        return c, np.zeros(3, dtype=complex)
    return c, theta[3:6] + 1j * theta[6:9]


def _refine_candidates(ch, starts, proper_only, fixed_rows, objective_row,
                       weights=None):
    """Sequential-quadratic refinement of rate candidates.

    Two modes:
      * weights given: maximize min_q L_q / weights[q] over the active rows
        (epigraph variable t);
      * objective_row given: maximize that row subject to the fixed-row
        thresholds L_q >= fixed_rows[q].

    Every start is refined independently; the best candidate that satisfies
    the fixed rows within DEMAND_SLACK wins.  Returns (value, c, ctilde) or
    None when no start reaches feasibility.
    """
    import scipy.optimize

    caps = ch.power_caps
    gains, sigma2 = ch.gains, ch.noise_variance
    n_sig = 3 if proper_only else 9

    def bounds_of(theta):
        c, ctilde = _theta_unpack(theta[:n_sig], proper_only)
        ctilde = _project_pseudo(np.minimum(c, caps), ctilde)
        return _fast_bounds_nats(gains, sigma2, np.minimum(c, caps), ctilde)

    box = [(0.0, float(p)) for p in caps]
    if not proper_only:
        box += [(-float(p), float(p)) for p in caps] * 2

    cons = [{"type": "ineq",
             "fun": (lambda th, j=j: min(th[j], caps[j]) ** 2
                     - (0.0 if proper_only else th[3 + j] ** 2 + th[6 + j] ** 2))}
            for j in range(3)]
    for q, tau in (fixed_rows or {}).items():
        cons.append({"type": "ineq",
                     "fun": lambda th, q=q, tau=tau: bounds_of(th)[q] - tau})

    if weights is not None:
        def neg_obj(th):
            return -th[-1]
        for q, w in weights.items():
            cons.append({"type": "ineq",
                         "fun": lambda th, q=q, w=w: bounds_of(th)[q] / w - th[-1]})
    else:
        def neg_obj(th):
            return -bounds_of(th)[objective_row]

    def true_value(c, ctilde):
        vals = _fast_bounds_nats(gains, sigma2, c, ctilde)
        for q, tau in (fixed_rows or {}).items():
            if vals[q] < tau - DEMAND_SLACK:
                return None
        if weights is not None:
            return min(vals[q] / w for q, w in weights.items())
        return vals[objective_row]

    best = None
    for c0, ct0 in starts:
        theta = _theta_pack(c0, ct0, proper_only)
        if weights is not None:
            t0 = min(bounds_of(theta)[q] / w for q, w in weights.items())
            theta = np.r_[theta, max(t0, 0.0)]
            full_box = box + [(0.0, None)]
        else:
            full_box = box
        res = scipy.optimize.minimize(
            neg_obj, theta, method="SLSQP", bounds=full_box, constraints=cons,
            options={"maxiter": 120, "ftol": 1e-12})
        for th in (res.x, theta):
            c, ctilde = _theta_unpack(th[:n_sig], proper_only)
            c = np.minimum(c, caps)
            ctilde = _project_pseudo(c, ctilde)
            val = true_value(c, ctilde)
            if val is not None and (best is None or val > best[0]):
                best = (val, c, ctilde)
    if best is None:
        return None
    # cheap coordinate walk from the refined point (guards SLSQP stalls)
    val, c, ctilde = best
    val, c, ctilde = _polish(
        lambda cc_, ct_: (lambda v: -math.inf if v is None else v)(true_value(cc_, ct_)),
        c, ctilde, caps, proper_only)
    return val, c, ctilde


def _slsqp_repair(ch, c0, ct0, fixed_rows, proper_only):
    """Pull a candidate toward the demand-feasible set (shortfall descent)."""
    import scipy.optimize

    caps = ch.power_caps
    n_sig = 3 if proper_only else 9

    def shortfall(theta):
        c, ctilde = _theta_unpack(theta, proper_only)
        c = np.minimum(c, caps)
        ctilde = _project_pseudo(c, ctilde)
        vals = _fast_bounds_nats(ch.gains, ch.noise_variance, c, ctilde)
        return sum(max(0.0, t - vals[q]) ** 2 for q, t in fixed_rows.items())

    box = [(0.0, float(p)) for p in caps]
    if not proper_only:
        box += [(-float(p), float(p)) for p in caps] * 2
    res = scipy.optimize.minimize(shortfall, _theta_pack(c0, ct0, proper_only),
                                  method="SLSQP", bounds=box,
                                  options={"maxiter": 150, "ftol": 1e-16})
    c, ctilde = _theta_unpack(res.x[:n_sig], proper_only)
    c = np.minimum(c, caps)
    ctilde = _project_pseudo(c, ctilde)
    vals = _fast_bounds_nats(ch.gains, ch.noise_variance, c, ctilde)
    if any(vals[q] < t - DEMAND_SLACK for q, t in fixed_rows.items()):
        return None
    return c, ctilde


def _polish(objective, c, ctilde, caps, proper_only, sweeps=60):
    """Deterministic cyclic coordinate ascent on the true rate objective.

    Walks the 3 variances (and 6 pseudo-variance components) inside the box
    0 <= c <= P, |ct_j| <= c_j with geometrically shrinking steps; the
    objective callback returns -inf for candidates violating fixed demands.
    """
    best = objective(c, ctilde)
    step = max(float(caps.max()), 1.0) * 0.25
    n_par = 3 if proper_only else 9

    def read(vec_c, vec_t, i):
        if i < 3:
            return vec_c[i]
        j = (i - 3) % 3
        return vec_t[j].real if i < 6 else vec_t[j].imag

    def write(vec_c, vec_t, i, val):
        vec_c, vec_t = vec_c.copy(), vec_t.copy()
        if i < 3:
            vec_c[i] = min(max(val, 0.0), caps[i])
            vec_t = _project_pseudo(vec_c, vec_t)
        else:
            j = (i - 3) % 3
            cur = vec_t[j]
            vec_t[j] = complex(val, cur.imag) if i < 6 else complex(cur.real, val)
            vec_t = _project_pseudo(vec_c, vec_t)
        return vec_c, vec_t

    for _ in range(sweeps):
        improved = False
        for i in range(n_par):
            base = read(c, ctilde, i)
            for delta in (step, -step):
                c2, t2 = write(c, ctilde, i, base + delta)
                val = objective(c2, t2)
                if val > best + 1e-15:
                    c, ctilde, best = c2, t2, val
                    improved = True
                    break
        if not improved:
            step *= 0.5
            if step < 1e-8:
                break
    return best, c, ctilde


def _recovery_starts(ch, relaxed, proper_only, merit, config, seed, top_k=8,
                     corner_starts=False):
    """Top randomization candidates plus structured starts for the refiner.

    ``corner_starts`` adds fully improper full-power candidates (pseudo
    variance pinned to the variance at deterministic phases); they sharpen
    the Chebyshev recovery but go beyond the plain randomization procedure,
    so operations reproducing figure-level approximations leave them off.
    """
    ranked = []

    def evaluate(sample):
        cand = _candidate_from_sample(sample, ch.power_caps, proper_only)
        if cand is None:
            return None
        value = merit(*cand)
        ranked.append((value, cand))
        return value, cand

    cc.gaussian_randomize(relaxed.c_matrix,
                          None if proper_only else relaxed.ctilde_matrix,
                          evaluate, config.k_rand, seed)
    ranked.sort(key=lambda item: -item[0])
    starts = [cand for _, cand in ranked[:top_k]]
    caps = ch.power_caps
    starts.append((caps.copy(), np.zeros(3, dtype=complex)))
    starts.append((relaxed.c.copy(), relaxed.ctilde.copy()))
    if not proper_only:
        diag = np.sqrt(np.maximum(np.real(np.diag(relaxed.ctilde_matrix)), 0.0))
        phases = np.angle(relaxed.ctilde + (np.abs(relaxed.ctilde) < 1e-12))
        starts.append((caps.copy(),
                       _project_pseudo(caps, diag * np.exp(1j * phases))))
        if corner_starts:
            for k in range(4):
                phases = 2.0 * np.pi * (k * np.arange(1, 4)) / 7.0
                starts.append((caps.copy(),
                               _project_pseudo(caps, caps * np.exp(1j * phases))))
    return starts


def _proper_lp_feasible(data: SdrData, thresholds: dict):
    """Exact feasibility of the proper program at fixed thresholds (nats).

    With zero pseudo-variances every rate row L_q >= tau is linear in the
    variances: sigma^2 + a_q c >= e^tau (sigma^2 + b_q c).  Returns a
    feasible variance vector or None.
    """
    rows = []
    s2 = data.sigma2
    for q, tau in thresholds.items():
        k = math.exp(tau)
        rows.append((data.a[q] - k * data.b[q], s2 * (k - 1.0)))
    for j in range(3):
        e = np.zeros(3)
        e[j] = -1.0
        rows.append((e, -float(data.power_caps[j])))
    lp = cc.LinearProgram(np.zeros(3), rows)
    try:
        sol = cc.solve_lp(lp)
    except cc.InfeasibleError:
        return None
    return np.clip(sol.x, 0.0, data.power_caps)


@dataclass(frozen=True)
class RateRegionPoint:
    profile: model.RateProfile
    rate_sum_bits: float
    rates_bits: np.ndarray
    bound_bits: float
    covariances: tuple
    solution: SdrSolution | None
    status: str = "ok"
    detail: str = ""

    @property
    def triple(self):
        return tuple(self.rates_bits)


def _interference_free_sum_nats(ch):
    g2 = np.abs(ch.gains) ** 2
    caps = ch.power_caps
    s2 = ch.noise_variance
    return (math.log1p(g2[0, 0] * caps[0] / s2)
            + math.log1p(g2[0, 1] * caps[1] / s2)
            + math.log1p(g2[1, 2] * caps[2] / s2))


def max_sum_rate(profile: model.RateProfile, ch: model.ChannelInstance,
                 config: cc.SolverConfig = cc.DEFAULT_CONFIG,
                 proper_only: bool = False, seed: int | None = None) -> RateRegionPoint:
    """Largest sum rate along a profile direction and its rate tuple.

    Bisection over the relaxed feasibility program gives the relaxation
    bound; Gaussian randomization plus coordinate polish recovers rank-1
    covariances whose true bounds are re-verified before reporting.
    """
    data = build_sdr_data(ch)
    weights = {q: w for q, w in enumerate(
        [profile.alpha[0], profile.alpha[1], profile.alpha[2], profile.alpha4]) if w > 0}
    hi = _interference_free_sum_nats(ch)

    proper_hat, proper_c = _proper_exact_max(data, weights, hi, config)
    if proper_only:
        c, ctilde = proper_c, np.zeros(3, dtype=complex)
        bound = proper_hat + config.tol_bis
        relaxed = None
    else:
        state = {}

        def oracle(rate):
            sol = sdr_feasible(rate, profile, data, proper_only, config)
            if sol is not None:
                state["sol"] = sol
                state["rate"] = rate
            return sol is not None

        r_hat = cc.bisect(oracle, 0.0, hi, config.tol_bis)
        if "sol" not in state or state["rate"] < r_hat:
            oracle(r_hat)
        relaxed = state["sol"]
        bound = r_hat + config.tol_bis

        def merit(c, ctilde):
            vals = _fast_bounds_nats(ch.gains, ch.noise_variance, c, ctilde)
            return min(vals[q] / w for q, w in weights.items())

        seed = config.seed if seed is None else seed
        starts = _recovery_starts(ch, relaxed, proper_only, merit, config, seed,
                                  corner_starts=True)
        # the exact proper point seeds the improper search, so improper
        # recovery can never fall below the proper baseline
        starts.append((proper_c.copy(), np.zeros(3, dtype=complex)))
        _, c, ctilde = _refine_candidates(ch, starts, proper_only,
                                          fixed_rows=None, objective_row=None,
                                          weights=weights)

    sigs = tuple(model.AugmentedCovariance(float(ci), complex(ti))
                 for ci, ti in zip(c, ctilde))
    # reported rates are re-verified through the authoritative bound path
    verified = rate_bounds_nats(ch, sigs)
    achieved = min(verified[q] / w for q, w in weights.items())
    bits = achieved / LN2
    rates = np.array([profile.alpha[0], profile.alpha[1], profile.alpha[2]]) * bits
    return RateRegionPoint(profile, bits, rates, bound / LN2, sigs, relaxed)


def rate_bounds_nats(ch, sigs):
    b = model.rate_bounds_improper(ch, sigs)
    return b.as_array() * LN2


def _proper_exact_max(data, weights, hi, config):
    """Exact proper optimum along a profile (LP bisection).

    The proper program is linear-fractional, so the bisection oracle is a
    plain LP and the answer is exact to tol_bis; returns (rate, variances).
    """
    state = {}

    def oracle(rate):
        c = _proper_lp_feasible(data, {q: w * rate for q, w in weights.items()})
        if c is not None:
            state["c"] = c
        return c is not None

    r_hat = cc.bisect(oracle, 0.0, hi, config.tol_bis)
    if "c" not in state:
        oracle(r_hat)
    return r_hat, state["c"]


@dataclass(frozen=True)
class P2pTradeoffPoint:
    r_mac_bits: float
    r3_bits: float
    bound_bits: float
    covariances: tuple
    status: str = "ok"


def max_p2p_given_mac(r_mac_bits: float, ch: model.ChannelInstance,
                      config: cc.SolverConfig = cc.DEFAULT_CONFIG,
                      proper_only: bool = False,
                      seed: int | None = None) -> P2pTradeoffPoint:
    """Best P2P rate with both MAC users pinned at a fixed demand.

    The MAC rows are held at r_mac (individual) and 2 r_mac (sum) while the
    P2P row is bisected; raises InfeasibleError when the demand itself is
    unreachable.
    """
    if r_mac_bits < 0:
        raise ValueError("r_mac must be nonnegative")
    data = build_sdr_data(ch)
    tau = r_mac_bits * LN2
    fixed_rows = {0: tau, 1: tau, 3: 2.0 * tau}
    g2 = np.abs(ch.gains) ** 2
    hi = math.log1p(g2[1, 2] * ch.power_caps[2] / ch.noise_variance)

    proper_state = {}

    def proper_oracle(r3):
        thresholds = dict(fixed_rows)
        thresholds[2] = r3
        c = _proper_lp_feasible(data, thresholds)
        if c is not None:
            proper_state["c"] = c
        return c is not None

    try:
        proper_hat = cc.bisect(proper_oracle, 0.0, hi, config.tol_bis)
        proper_c = proper_state.get("c")
    except cc.InfeasibleError:
        if proper_only:
            raise
        proper_hat, proper_c = None, None

    if proper_only:
        sigs = tuple(model.AugmentedCovariance(float(ci), 0.0) for ci in proper_c)
        verified = rate_bounds_nats(ch, sigs)
        return P2pTradeoffPoint(r_mac_bits, verified[2] / LN2,
                                (proper_hat + config.tol_bis) / LN2, sigs)

    state = {}

    def oracle(r3):
        thresholds = dict(fixed_rows)
        thresholds[2] = r3
        sol = _solve_feasibility(thresholds, data, proper_only, config)
        if sol is not None:
            state["sol"] = sol
            state["rate"] = r3
        return sol is not None

    r_hat = cc.bisect(oracle, 0.0, hi, config.tol_bis)
    if "sol" not in state or state["rate"] < r_hat:
        oracle(r_hat)
    relaxed = state["sol"]

    def merit(c, ctilde):
        # rank raw candidates by the P2P rate minus the demand shortfall
        vals = _fast_bounds_nats(ch.gains, ch.noise_variance, c, ctilde)
        shortfall = sum(max(0.0, t - vals[q]) for q, t in fixed_rows.items())
        return vals[2] - 100.0 * shortfall

    def demand_objective(c, ctilde):
        vals = _fast_bounds_nats(ch.gains, ch.noise_variance, c, ctilde)
        if any(vals[q] < t - DEMAND_SLACK for q, t in fixed_rows.items()):
            return -math.inf
        return vals[2]

    seed = config.seed if seed is None else seed
    starts = _recovery_starts(ch, relaxed, proper_only, merit, config, seed)
    if proper_c is not None:
        starts.append((np.asarray(proper_c, dtype=float),
                       np.zeros(3, dtype=complex)))
    # figure-level recovery: polish the randomized candidates, no objective
    # push beyond them (that would overshoot the plotted plateau)
    results = []
    for c0, ct0 in starts:
        val, c, ctilde = _polish(demand_objective, c0.copy(), ct0.copy(),
                                 ch.power_caps, proper_only)
        if math.isfinite(val):
            results.append((val, c, ctilde))
    if not results:
        # none of the raw candidates reaches the demands: repair the best few
        for c0, ct0 in starts[:4]:
            repaired = _slsqp_repair(ch, c0, ct0, fixed_rows, proper_only)
            if repaired is None:
                continue
            val, c, ctilde = _polish(demand_objective, *repaired,
                                     ch.power_caps, proper_only)
            if math.isfinite(val):
                results.append((val, c, ctilde))
    if not results:
        raise cc.InfeasibleError(
            f"no rank-1 candidate meets the MAC demand {r_mac_bits} bits")
    achieved, c, ctilde = max(results, key=lambda r: r[0])
    sigs = tuple(model.AugmentedCovariance(float(ci), complex(ti))
                 for ci, ti in zip(c, ctilde))
    verified = rate_bounds_nats(ch, sigs)
    return P2pTradeoffPoint(r_mac_bits, verified[2] / LN2,
                            (r_hat + config.tol_bis) / LN2, sigs)


def pareto_sweep(ch: model.ChannelInstance, profiles,
                 config: cc.SolverConfig = cc.DEFAULT_CONFIG,
                 proper_only: bool = False):
    """One max_sum_rate evaluation per profile, failures recorded in place.

    Points are independent (each owns its solver state and RNG stream with
    seed = base_seed XOR grid index), so callers may evaluate concurrently;
    output order follows the grid.
    """
    out = []
    for i, profile in enumerate(profiles):
        if not isinstance(profile, model.RateProfile):
            profile = model.RateProfile(np.asarray(profile, dtype=float))
        try:
            out.append(max_sum_rate(profile, ch, config, proper_only,
                                    seed=config.seed ^ i))
        except Exception as exc:  # record, keep sweeping
            out.append(RateRegionPoint(profile, math.nan, np.full(3, math.nan),
                                       math.nan, (), None, "failed", str(exc)))
    return out


def simplex_grid(n_p2p: int, mac_split: float = 0.5):
    """Profiles sweeping the P2P share 0..1 with a fixed MAC split."""
    out = []
    for alpha3 in np.linspace(0.0, 1.0, n_p2p):
        rest = 1.0 - alpha3
        out.append(model.RateProfile(np.array(
            [rest * mac_split, rest * (1.0 - mac_split), alpha3])))
    return out
