"""Minimum-power transceiver design under SINR or rate demands.

Four solver families over the lifted real network:

* separate optimization: alternating MMSE beamformers (forward/reciprocal
  max-SINR iteration) followed by a per-stream power LP;
* joint optimization: alternating MMSE receivers and a semidefinite program
  over per-stream transmit covariances (rank constraint dropped);
* scalar proper baselines: exact power-control LPs in the complex domain;
* the convex-concave procedure for per-user rate demands: each rate
  constraint's subtracted log-det is replaced by its Fenchel linearization,
  iterated to a vanishing gap, with symbol extensions and any number of
  MAC users.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from pimac import convex_core as cc
from pimac import model
from pimac import rate_region

__all__ = [
    "Demands",
    "SinrPerStream",
    "RatePerUser",
    "PowerStatus",
    "PowerResult",
    "CcpState",
    "SuccessiveOptResult",
    "mmse_receiver",
    "algorithm1_beamformers",
    "power_lp",
    "separate_min_power",
    "joint_min_power",
    "proper_min_power_sinr",
    "fenchel_upper_bound",
    "ccp_min_power_rates",
    "proper_min_power_rates",
    "successive_opt",
    "default_order",
    "swapped_order",
]

LN2 = math.log(2.0)


# ---------------------------------------------------------------------------
# demand and result types
# ---------------------------------------------------------------------------

class Demands:
    """Marker base for the two demand kinds."""


@dataclass(frozen=True)
class SinrPerStream(Demands):
    """SINR demand per real stream; scalar broadcasts to every stream."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if np.any(v < 0):
            raise ValueError("SINR demands must be nonnegative")
        object.__setattr__(self, "values", v)

    def per_stream(self, n_users):
        v = self.values
        if v.ndim == 0:
            return np.full((n_users, 2), float(v))
        if v.shape != (n_users, 2):
            raise ValueError(f"expected shape {(n_users, 2)}, got {v.shape}")
        return v


@dataclass(frozen=True)
class RatePerUser(Demands):
    """Rate demand per user in bits/channel use; scalar broadcasts."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if np.any(v < 0):
            raise ValueError("rate demands must be nonnegative")
        object.__setattr__(self, "values", v)

    def per_user(self, n_users):
        v = self.values
        if v.ndim == 0:
            return np.full(n_users, float(v))
        if v.shape != (n_users,):
            raise ValueError(f"expected {n_users} rate demands, got {v.shape}")
        return v


class PowerStatus(enum.Enum):
    CONVERGED = "converged"
    INFEASIBLE = "infeasible"
    ITER_LIMIT = "iter-limit"


@dataclass(frozen=True)
class PowerResult:
    total: float
    per_user: np.ndarray
    status: PowerStatus
    iterations: int = 0
    covariances: tuple | None = None
    layout: model.StreamLayout | None = None
    ranks: tuple | None = None
    audit_slack: float | None = None
    ccp_state: object = None

    def __post_init__(self):
        if self.status is PowerStatus.INFEASIBLE:
            if self.covariances is not None:
                raise ValueError("infeasible results carry no covariances")
            return
        if abs(self.total - float(np.sum(self.per_user))) > 1e-9 * max(1.0, self.total):
            raise ValueError("total power must equal the per-user sum")

    @staticmethod
    def infeasible(n_users, iterations=0):
        return PowerResult(math.inf, np.full(n_users, math.inf),
                           PowerStatus.INFEASIBLE, iterations)


@dataclass
class CcpState:
    """Linearization points, iterates and gap of the convex-concave loop."""

    gammas: list
    qs: list
    eps: float
    t: int


# ---------------------------------------------------------------------------
# stream-level machinery
# ---------------------------------------------------------------------------

def mmse_receiver(f: np.ndarray, g: np.ndarray, v: np.ndarray) -> np.ndarray:
    """SINR-optimal unit receive filter F^{-1} G v / ||.|| for one stream."""
    try:
        u = np.linalg.solve(f, g @ v)
    except np.linalg.LinAlgError as exc:
        raise model.NumericDegeneracyError(
            "interference-plus-noise covariance is singular") from exc
    norm = np.linalg.norm(u)
    if not norm > 0:
        raise model.NumericDegeneracyError("zero MMSE direction")
    return u / norm


def _interference_pairs(decoding, j, k, users):
    if decoding is model.Decoding.PARALLEL:
        return [(l, m) for l in users for m in range(2) if (l, m) != (j, k)]
    return [(l, m) for l in users for m in range(k, 2) if (l, m) != (j, k)]


def _reciprocal_update(s, rx, u, p, decoding, noise, dim, users):
    """Transmit beamformers as MMSE filters of the reciprocal network.

    The reciprocal channel from original receiver rx(l) to transmitter j is
    the transposed forward channel; stream (l, m) is carried by its receive
    filter at the same power.
    """
    v_new = np.empty_like(u)
    for j in users:
        i = rx[j]
        for k in range(2):
            f = noise * np.eye(dim)
            for (l, m) in _interference_pairs(decoding, j, k, users):
                glu = s[(rx[l], j)].T @ u[l, m]
                f += p[l, m] * np.outer(glu, glu)
            v_new[j, k] = mmse_receiver(f, s[(i, j)].T, u[j, k])
    return v_new


def _stream_basis(dim):
    v = np.zeros((2, dim))
    v[0, 0] = 1.0
    v[1, 1] = 1.0
    return v


def algorithm1_beamformers(ch: model.ChannelInstance, powers,
                           maxiter: int = 200, tol: float = 1e-8,
                           decoding: model.Decoding = model.Decoding.PARALLEL,
                           n_ext: int = 1) -> model.StreamLayout:
    """Alternating max-SINR beamformer design at fixed stream powers.

    Forward pass: MMSE receive filters for the current transmit beamformers.
    Reverse pass: transmit beamformers become the MMSE filters of the
    reciprocal network (transposed channels, filter roles swapped, the same
    stream powers).  Stops when the largest beamformer change (modulo sign)
    drops below tol; always returns the last iterate.
    """
    j_all = ch.n_users
    dim = 2 * n_ext
    p = np.asarray(powers, dtype=float)
    if p.ndim == 0:
        p = np.full((j_all, 2), float(p))
    if p.shape != (j_all, 2):
        raise ValueError("powers must have shape (J, 2)")
    noise = ch.lifted_noise_variance
    s = {(i, j): ch.extended(i, j, n_ext) for i in (0, 1) for j in range(j_all)}
    rx = {j: ch.receiver_of(j) for j in range(j_all)}

    v = np.stack([_stream_basis(dim) for _ in range(j_all)])
    u = v.copy()
    users = range(j_all)

    def forward_filters(v_cur):
        u_new = np.empty_like(v_cur)
        for j in users:
            i = rx[j]
            for k in range(2):
                f = noise * np.eye(dim)
                for (l, m) in _interference_pairs(decoding, j, k, users):
                    glv = s[(i, l)] @ v_cur[l, m]
                    f += p[l, m] * np.outer(glv, glv)
                u_new[j, k] = mmse_receiver(f, s[(i, j)], v_cur[j, k])
        return u_new

    for it in range(maxiter):
        u = forward_filters(v)
        v_new = _reciprocal_update(s, rx, u, p, decoding, noise, dim, users)
        change = 0.0
        for j in users:
            for k in range(2):
                d = min(np.linalg.norm(v_new[j, k] - v[j, k]),
                        np.linalg.norm(v_new[j, k] + v[j, k]))
                change = max(change, d)
        v = v_new
        if change < tol:
            break
    u = forward_filters(v)
    return model.StreamLayout(v, p, u, decoding)


def power_lp(ch: model.ChannelInstance, layout: model.StreamLayout,
             demands: SinrPerStream, caps=None, n_ext: int = 1) -> PowerResult:
    """Minimum-power LP at fixed beamformers and receive filters.

    Each SINR constraint is cross-multiplied into a row linear in the
    stream powers; the interference set follows the layout's decoding mode.
    """
    j_all = ch.n_users
    gamma = demands.per_stream(j_all)
    caps = ch.power_caps if caps is None else np.asarray(caps, dtype=float)
    noise = ch.lifted_noise_variance
    s = {(i, j): ch.extended(i, j, n_ext) for i in (0, 1) for j in range(j_all)}

    def var(j, k):
        return 2 * j + k

    n = 2 * j_all
    rows = []
    for j in range(j_all):
        i = ch.receiver_of(j)
        for k in range(2):
            row = np.zeros(n)
            u = layout.u[j, k]
            row[var(j, k)] = float(u @ s[(i, j)] @ layout.v[j, k]) ** 2
            for (l, m) in _interference_pairs(layout.decoding, j, k, range(j_all)):
                row[var(l, m)] -= gamma[j, k] * float(u @ s[(i, l)] @ layout.v[l, m]) ** 2
            rows.append((row, gamma[j, k] * noise))
    for j in range(j_all):
        row = np.zeros(n)
        row[var(j, 0)] = -1.0
        row[var(j, 1)] = -1.0
        rows.append((row, -float(caps[j])))

    try:
        sol = cc.solve_lp(cc.LinearProgram(np.ones(n), rows))
    except cc.InfeasibleError:
        return PowerResult.infeasible(j_all)
    p = sol.x.reshape(j_all, 2)
    new_layout = layout.with_powers(p)
    return PowerResult(float(sol.value), p.sum(axis=1), PowerStatus.CONVERGED,
                       iterations=1, layout=new_layout,
                       audit_slack=_sinr_audit(ch, new_layout, gamma, n_ext))


def _sinr_audit(ch, layout, gamma, n_ext=1):
    covs = model.stream_covariances(ch, layout, n_ext)
    slack = math.inf
    for j in range(ch.n_users):
        i = ch.receiver_of(j)
        for k in range(2):
            t, f = covs[(i, j, k)]
            slack = min(slack, model.sinr(t, f, layout.u[j, k]) - gamma[j, k])
    return slack


def separate_min_power(ch: model.ChannelInstance, demands: SinrPerStream,
                       config: cc.SolverConfig = cc.DEFAULT_CONFIG,
                       decoding: model.Decoding = model.Decoding.PARALLEL,
                       n_ext: int = 1) -> PowerResult:
    """Beamformers from the alternating max-SINR loop at cap powers, then
    the power LP."""
    p0 = np.repeat(ch.power_caps[:, None] / 2.0, 2, axis=1)
    layout = algorithm1_beamformers(ch, p0, decoding=decoding, n_ext=n_ext)
    return power_lp(ch, layout, demands, n_ext=n_ext)


def joint_min_power(ch: model.ChannelInstance, demands: SinrPerStream,
                    config: cc.SolverConfig = cc.DEFAULT_CONFIG,
                    decoding: model.Decoding = model.Decoding.PARALLEL,
                    n_ext: int = 1, maxiter: int = 40,
                    tol: float = 1e-7) -> PowerResult:
    """Alternating MMSE receivers and per-stream covariance SDP.

    The SDP minimizes total power over the stream covariances with the rank
    constraint dropped (it admits rank-1 solutions for fixed receivers);
    infeasible iterations fall back to the reciprocal-MMSE transmit update.
    Achieved ranks are reported.
    """
    j_all = ch.n_users
    dim = 2 * n_ext
    gamma = demands.per_stream(j_all)
    noise = ch.lifted_noise_variance
    s = {(i, j): ch.extended(i, j, n_ext) for i in (0, 1) for j in range(j_all)}
    rx = {j: ch.receiver_of(j) for j in range(j_all)}
    users = range(j_all)

    # random unit-norm start at unit powers: deterministic basis vectors sit
    # on the proper-equivalent fixed point, whose supportable SINR stops at
    # the proper asymptote; cap-level powers start the filters in the
    # interference-limited regime
    rng = np.random.Generator(np.random.Philox(config.seed))
    v = rng.normal(size=(j_all, 2, dim))
    v /= np.linalg.norm(v, axis=2, keepdims=True)
    p = np.minimum(np.repeat(ch.power_caps[:, None] / 2.0, 2, axis=1), 1.0)
    q = {(j, k): p[j, k] * np.outer(v[j, k], v[j, k]) for j in users for k in range(2)}

    def receive_filters():
        u = np.empty((j_all, 2, dim))
        for j in users:
            i = rx[j]
            for k in range(2):
                f = noise * np.eye(dim)
                for (l, m) in _interference_pairs(decoding, j, k, users):
                    sil = s[(i, l)]
                    f += sil @ q[(l, m)] @ sil.T
                u[j, k] = mmse_receiver(f, s[(i, j)], v[j, k])
        return u

    def sdp_for(u):
        blocks, objective, cons = [], {}, []
        for j in users:
            for k in range(2):
                name = f"Q{j}_{k}"
                blocks.append(cc.PsdBlock(name, dim))
                objective[name] = np.eye(dim)
        for j in users:
            i = rx[j]
            for k in range(2):
                terms = {}
                su = s[(i, j)].T @ u[j, k]
                terms[f"Q{j}_{k}"] = np.outer(su, su)
                for (l, m) in _interference_pairs(decoding, j, k, users):
                    su_i = s[(i, l)].T @ u[j, k]
                    terms.setdefault(f"Q{l}_{m}", np.zeros((dim, dim)))
                    terms[f"Q{l}_{m}"] = terms[f"Q{l}_{m}"] - gamma[j, k] * np.outer(su_i, su_i)
                cons.append(cc.TraceConstraint(terms, ">=", gamma[j, k] * noise))
        for j in users:
            cons.append(cc.TraceConstraint(
                {f"Q{j}_0": np.eye(dim), f"Q{j}_1": np.eye(dim)},
                "<=", float(ch.power_caps[j])))
        return cc.SemidefiniteProgram(tuple(blocks), objective, tuple(cons))

    total_prev = math.inf
    ever_feasible = False
    u = receive_filters()
    iterations = 0
    ranks = None
    for it in range(maxiter):
        iterations = it + 1
        u = receive_filters()
        try:
            sol = cc.solve_sdp(sdp_for(u), config)
            feasible = True
        except cc.InfeasibleError:
            feasible = False
        if feasible:
            ever_feasible = True
            ranks = []
            for j in users:
                for k in range(2):
                    mat = sol.blocks[f"Q{j}_{k}"]
                    q[(j, k)] = mat
                    lam, w = cc.dominant_rank1(mat)
                    v[j, k] = w
                    p[j, k] = max(lam, 0.0)
                    ranks.append(_numeric_rank(mat))
            total = float(sol.objective)
            if abs(total_prev - total) < tol * max(1.0, total):
                total_prev = total
                break
            total_prev = total
        else:
            # reciprocal-MMSE transmit update at the current powers
            v = _reciprocal_update(s, rx, u, p, decoding, noise, dim, users)
            for j in users:
                for k in range(2):
                    q[(j, k)] = p[j, k] * np.outer(v[j, k], v[j, k])
    if not ever_feasible:
        return PowerResult.infeasible(j_all, iterations)

    per_user = np.array([sum(np.trace(q[(j, k)]) for k in range(2)) for j in users])
    layout = model.StreamLayout(v, np.maximum(p, 0.0), u, decoding)
    covs = tuple(model.TransmitCovariance(q[(j, 0)] + q[(j, 1)], j) for j in users)
    return PowerResult(float(per_user.sum()), per_user, PowerStatus.CONVERGED,
                       iterations, covariances=covs, layout=layout,
                       ranks=tuple(ranks),
                       audit_slack=_sinr_audit(ch, layout.with_powers(p), gamma, n_ext))


def _numeric_rank(mat, rel=1e-6):
    vals = np.abs(np.linalg.eigvalsh(mat))
    if vals.max() <= 0:
        return 0
    return int(np.sum(vals > rel * vals.max()))


# ---------------------------------------------------------------------------
# proper (complex scalar) baselines
# ---------------------------------------------------------------------------

def default_order(ch):
    """Decoding order: MAC user 0 first ("order 1")."""
    return tuple(ch.mac_users)


def swapped_order(ch):
    """Decoding order with the first two MAC users exchanged ("order 2")."""
    order = list(ch.mac_users)
    if len(order) >= 2:
        order[0], order[1] = order[1], order[0]
    return tuple(order)


def _proper_sinr_rows(ch, gamma, decoding, order):
    """LP rows of the complex-domain TIN power control problem."""
    g2 = np.abs(ch.gains) ** 2
    j_all = ch.n_users
    p2p = ch.p2p_user
    sigma2 = ch.noise_variance
    order = tuple(order) if order is not None else default_order(ch)
    rows = []

    def interferers(j):
        if j == p2p:
            return [l for l in range(j_all) if l != p2p]
        others = [p2p]
        if decoding is model.Decoding.PARALLEL:
            others += [l for l in ch.mac_users if l != j]
        else:
            pos = order.index(j)
            others += list(order[pos + 1:])
        return others

    for j in range(j_all):
        i = ch.receiver_of(j)
        row = np.zeros(j_all)
        row[j] = g2[i, j]
        for l in interferers(j):
            row[l] = -gamma[j] * g2[i, l]
        rows.append((row, gamma[j] * sigma2))
    for j in range(j_all):
        e = np.zeros(j_all)
        e[j] = -1.0
        rows.append((e, -float(ch.power_caps[j])))
    return rows


def proper_min_power_sinr(ch: model.ChannelInstance, demands,
                          decoding: model.Decoding = model.Decoding.PARALLEL,
                          order=None) -> PowerResult:
    """Exact proper-signaling power control under per-user SINR demands.

    TIN SINRs are linear in the powers after cross multiplication, so the
    problem is an LP solved to optimality; successive decoding removes the
    already-decoded MAC users at the base station.
    """
    j_all = ch.n_users
    gamma = np.asarray(demands, dtype=float)
    if gamma.ndim == 0:
        gamma = np.full(j_all, float(gamma))
    if gamma.shape != (j_all,):
        raise ValueError("need one SINR demand per user")
    rows = _proper_sinr_rows(ch, gamma, decoding, order)
    try:
        sol = cc.solve_lp(cc.LinearProgram(np.ones(j_all), rows))
    except cc.InfeasibleError:
        return PowerResult.infeasible(j_all)
    covs = tuple(model.TransmitCovariance(
        p / 2.0 * np.eye(2), j) for j, p in enumerate(sol.x))
    slack = _proper_sinr_audit(ch, sol.x, gamma, decoding, order)
    return PowerResult(float(sol.value), sol.x.copy(), PowerStatus.CONVERGED,
                       iterations=1, covariances=covs, audit_slack=slack)


def _proper_sinr_audit(ch, p, gamma, decoding, order):
    g2 = np.abs(ch.gains) ** 2
    order = tuple(order) if order is not None else default_order(ch)
    slack = math.inf
    for j in range(ch.n_users):
        i = ch.receiver_of(j)
        if j == ch.p2p_user:
            others = list(ch.mac_users)
        elif decoding is model.Decoding.PARALLEL:
            others = [l for l in ch.mac_users if l != j] + [ch.p2p_user]
        else:
            others = list(order[order.index(j) + 1:]) + [ch.p2p_user]
        den = ch.noise_variance + sum(g2[i, l] * p[l] for l in others)
        slack = min(slack, g2[i, j] * p[j] / den - gamma[j])
    return slack


def proper_min_power_rates(ch: model.ChannelInstance, demands: RatePerUser,
                           order=None) -> PowerResult:
    """Proper-signaling minimum power under per-user rate demands.

    Rates R = log2(1 + SINR) convert the demands into SINR targets, after
    which the successive-decoding power control LP is exact.
    """
    beta = demands.per_user(ch.n_users)
    gamma = np.exp2(beta) - 1.0
    return proper_min_power_sinr(ch, gamma, model.Decoding.SUCCESSIVE, order)


# ---------------------------------------------------------------------------
# convex-concave procedure for rate demands
# ---------------------------------------------------------------------------

def fenchel_upper_bound(gamma: np.ndarray, terms, dim: int) -> float:
    """Linear upper bound of logdet(sum_i A_i X_i A_i^T + I_dim) at Gamma.

    Equality holds when Gamma equals the log-det argument; raises on a
    singular linearization point.
    """
    gamma = np.asarray(gamma, dtype=float)
    m = np.eye(dim)
    for a, x in terms:
        a = np.asarray(a, dtype=float)
        m = m + a @ np.asarray(x, dtype=float) @ a.T
    sign, logdet_gamma = np.linalg.slogdet(gamma)
    if sign <= 0:
        raise model.NumericDegeneracyError("linearization point is singular")
    try:
        inv = np.linalg.inv(gamma)
    except np.linalg.LinAlgError as exc:
        raise model.NumericDegeneracyError("linearization point is singular") from exc
    return float(logdet_gamma + np.trace(inv @ m) - dim)


def _logdet_psd(m):
    sign, val = np.linalg.slogdet(m)
    if sign <= 0:
        raise model.NumericDegeneracyError("covariance argument not PD")
    return float(val)


def _rate_structure(ch, order):
    """num/den transmitter sets per user for successive decoding + TIN."""
    order = tuple(order) if order is not None else default_order(ch)
    if sorted(order) != list(ch.mac_users):
        raise ValueError("order must be a permutation of the MAC users")
    p2p = ch.p2p_user
    sets = {}
    for pos, j in enumerate(order):
        sets[j] = (list(order[pos:]) + [p2p], list(order[pos + 1:]) + [p2p])
    sets[p2p] = (list(range(ch.n_users)), list(ch.mac_users))
    return sets


def ccp_min_power_rates(ch: model.ChannelInstance, demands: RatePerUser,
                        n_ext: int = 1, order=None,
                        config: cc.SolverConfig = cc.DEFAULT_CONFIG,
                        eps_star: float = 1e-4, max_outer: int = 80,
                        max_reinit: int = 10, init_q=None) -> PowerResult:
    """Power minimization under per-user rate demands (improper, vector SD).

    The noise is scaled down by gamma_scale so unit-norm random
    linearization points start feasible, every rate constraint's subtracted
    log-det is replaced by its Fenchel bound, and the convex subproblem is
    re-solved while the linearization gap exceeds eps_star.  Reported powers
    are rescaled back.  ``init_q`` (true-scale covariances) seeds both the
    linearization and the first subproblem, making the seeded run no worse
    than the seed.
    """
    j_all = ch.n_users
    dim = 2 * n_ext
    beta = demands.per_user(j_all)
    rho = 2.0 * n_ext * beta * LN2
    scale = config.gamma_scale
    ch_s = replace(ch, noise_variance=ch.noise_variance / scale,
                   power_caps=ch.power_caps / scale)
    noise = ch_s.lifted_noise_variance
    s = {(i, j): ch_s.extended(i, j, n_ext) for i in (0, 1) for j in range(j_all)}
    sets = _rate_structure(ch_s, order)
    rng = np.random.Generator(np.random.Philox(config.seed))

    def den_matrix(j, qs):
        i = ch_s.receiver_of(j)
        m = noise * np.eye(dim)
        for l in sets[j][1]:
            m = m + s[(i, l)] @ qs[l] @ s[(i, l)].T
        return m

    def random_gamma():
        a = rng.normal(size=(dim, dim))
        g = a @ a.T + 0.1 * np.eye(dim)
        return g / np.linalg.norm(g)

    if init_q is not None:
        qs = [np.asarray(q.matrix if isinstance(q, model.TransmitCovariance) else q,
                         dtype=float) / scale for q in init_q]
        gammas = [den_matrix(j, qs) for j in range(j_all)]
        start = {f"Q{j}": qs[j] + 1e-9 * np.eye(dim) for j in range(j_all)}
    else:
        gammas = [random_gamma() for _ in range(j_all)]
        start = None

    def subproblem():
        blocks = tuple(cc.PsdBlock(f"Q{j}", dim) for j in range(j_all))
        objective = {f"Q{j}": np.eye(dim) for j in range(j_all)}
        cons = [cc.TraceConstraint({f"Q{j}": np.eye(dim)}, "<=",
                                   float(ch_s.power_caps[j]))
                for j in range(j_all)]
        logdets = []
        for j in range(j_all):
            i = ch_s.receiver_of(j)
            num_set, den_set = sets[j]
            inv = np.linalg.inv(gammas[j])
            channels = tuple((f"Q{l}", s[(i, l)]) for l in num_set)
            linear = {f"Q{l}": s[(i, l)].T @ inv @ s[(i, l)] for l in den_set}
            rhs = (rho[j] + _logdet_psd(gammas[j])
                   + noise * float(np.trace(inv)) - dim)
            logdets.append(cc.LogDetConstraint(noise * np.eye(dim), channels,
                                               linear, rhs))
        return cc.SemidefiniteProgram(blocks, objective, tuple(cons),
                                      tuple(logdets))

    reinits = 0
    qs = None
    eps = math.inf
    iterations = 0
    status = PowerStatus.ITER_LIMIT
    for it in range(max_outer):
        iterations = it + 1
        try:
            sol = cc.solve_sdp(subproblem(), config, start=start)
        except cc.InfeasibleError:
            if reinits >= max_reinit:
                return PowerResult.infeasible(j_all, iterations)
            reinits += 1
            gammas = [random_gamma() for _ in range(j_all)]
            start = None
            continue
        qs = [sol.blocks[f"Q{j}"] for j in range(j_all)]
        start = {f"Q{j}": qs[j] for j in range(j_all)}
        eps = 0.0
        for j in range(j_all):
            den = den_matrix(j, qs)
            lin = (_logdet_psd(gammas[j])
                   + float(np.trace(np.linalg.inv(gammas[j]) @ den)) - dim)
            eps = max(eps, lin - _logdet_psd(den))
        if eps < eps_star:
            status = PowerStatus.CONVERGED
            break
        gammas = [den_matrix(j, qs) for j in range(j_all)]
    if qs is None:
        return PowerResult.infeasible(j_all, iterations)

    qs_true = [scale * q for q in qs]
    per_user = np.array([float(np.trace(q)) for q in qs_true])
    covs = tuple(model.TransmitCovariance(q, j) for j, q in enumerate(qs_true))
    rates = model.vector_rates(ch, qs_true, n_ext, order)
    slack = float(np.min(rates - beta))
    state = CcpState([g.copy() for g in gammas], [q.copy() for q in qs], eps,
                     iterations)
    return PowerResult(float(per_user.sum()), per_user, status, iterations,
                       covariances=covs, audit_slack=slack, ccp_state=state)


# ---------------------------------------------------------------------------
# successive rate-then-power optimization
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SuccessiveOptResult:
    rates_bits: np.ndarray
    power_rate_stage: float
    power_min_base: float
    power_min_extended: float
    saving_vs_rate_stage: float | None
    saving_vs_base: float | None
    extension_length: int
    status: PowerStatus


def _best_order_ccp(ch, demands, n_ext, config, init_q=None):
    best = None
    for order in (default_order(ch), swapped_order(ch)):
        res = ccp_min_power_rates(ch, demands, n_ext, order, config,
                                  init_q=init_q)
        if res.status is PowerStatus.INFEASIBLE:
            continue
        if best is None or res.total < best.total:
            best = res
    return best


def successive_opt(profile: model.RateProfile, ch: model.ChannelInstance,
                   n_ext: int = 3,
                   config: cc.SolverConfig = cc.DEFAULT_CONFIG) -> SuccessiveOptResult:
    """Pareto point at full caps, then minimum power for its rate tuple.

    Stage 1 consumes the full power budget (P' = sum of caps); stage 2 runs
    the rate-demand CCP at extension lengths 1 and n_ext, trying both MAC
    decoding orders.  Saving ratios follow 1 - P_min/P_reference.
    """
    point = rate_region.max_sum_rate(profile, ch, config)
    r_prime = np.asarray(point.rates_bits, dtype=float)
    p_prime = float(np.sum(ch.power_caps))
    demands = RatePerUser(r_prime)

    base = _best_order_ccp(ch, demands, 1, config)
    if base is None:
        return SuccessiveOptResult(r_prime, p_prime, math.inf, math.inf,
                                   None, None, n_ext, PowerStatus.INFEASIBLE)
    init = None
    if base.covariances is not None:
        init = [np.kron(np.eye(n_ext), q.matrix) for q in base.covariances]
    extended = _best_order_ccp(ch, demands, n_ext, config, init_q=init)
    if extended is None:
        return SuccessiveOptResult(r_prime, p_prime, base.total, math.inf,
                                   None, None, n_ext, PowerStatus.INFEASIBLE)

    tiny = 1e-9
    saving1 = None if p_prime < tiny else 1.0 - base.total / p_prime
    saving2 = None if base.total < tiny else 1.0 - extended.total / base.total
    return SuccessiveOptResult(r_prime, p_prime, base.total, extended.total,
                               saving1, saving2, n_ext, PowerStatus.CONVERGED)
