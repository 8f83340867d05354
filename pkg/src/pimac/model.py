"""Domain types and closed-form signal/rate/SINR algebra.

Everything here is moment-level: channels are fixed complex gains, signals
are described by second-order statistics only (variance/pseudo-variance in
the complex domain, real covariance matrices in the lifted domain), and all
rates are deterministic functions of those moments.  No symbols are ever
drawn.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "NumericDegeneracyError",
    "ChannelInstance",
    "AugmentedCovariance",
    "RealChannelMatrix",
    "ExtendedChannelMatrix",
    "TransmitCovariance",
    "RateProfile",
    "RateBounds",
    "Decoding",
    "StreamLayout",
    "lift_channel",
    "extend_channel",
    "rate_bounds_improper",
    "vector_rates",
    "received_covariance",
    "stream_covariances",
    "sinr",
    "proper_signal",
]

LN2 = math.log(2.0)

#: Relative PSD tolerance for covariance validation (solver output carries
#: interior-point residuals).
TOL_PSD = 1e-9


class NumericDegeneracyError(ArithmeticError):
    """A denominator/covariance that must be positive (definite) is not."""


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ChannelInstance:
    """Fixed 2xJ complex network: J-1 uplink transmitters plus one P2P pair.

    Row i of ``gains`` is receiver i, column j is transmitter j.  Receiver 0
    (the base station) serves transmitters 0..J-2; receiver 1 serves the last
    transmitter (the point-to-point link).

    Parameters
    ----------
    gains : (2, J) complex ndarray
        Channel coefficients h_ij.
    noise_variance : float
        Receiver noise power sigma^2 (watts), strictly positive.
    power_caps : (J,) float ndarray
        Per-transmitter power budgets P_j (watts).
    """

    gains: np.ndarray
    noise_variance: float
    power_caps: np.ndarray

    def __post_init__(self):
        gains = np.atleast_2d(np.asarray(self.gains, dtype=complex))
        caps = np.asarray(self.power_caps, dtype=float)
        if gains.shape[0] != 2:
            raise ValueError(f"gains must have 2 rows, got {gains.shape}")
        if gains.shape[1] < 3:
            raise ValueError("need at least 3 transmitters (J >= 3)")
        if caps.shape != (gains.shape[1],):
            raise ValueError("power_caps length must equal the transmitter count")
        if np.any(caps < 0):
            raise ValueError("power caps must be nonnegative")
        if not self.noise_variance > 0:
            raise ValueError("noise variance must be positive")
        object.__setattr__(self, "gains", gains)
        object.__setattr__(self, "power_caps", caps)

    @property
    def n_users(self) -> int:
        return self.gains.shape[1]

    @property
    def mac_users(self) -> range:
        """Indices of the uplink (MAC) transmitters."""
        return range(self.n_users - 1)

    @property
    def p2p_user(self) -> int:
        return self.n_users - 1

    def receiver_of(self, j: int) -> int:
        """Desired receiver of transmitter j (0 = base station, 1 = P2P)."""
        return 0 if j < self.p2p_user else 1

    @property
    def desired_pairs(self) -> list[tuple[int, int]]:
        """(receiver, transmitter) pairs carrying desired signal."""
        return [(0, j) for j in self.mac_users] + [(1, self.p2p_user)]

    @property
    def lifted_noise_variance(self) -> float:
        """Noise variance per real dimension of the lifted model.

        Complex noise of power sigma^2 has independent real and imaginary
        parts of variance sigma^2/2 each, so every lifted-domain covariance
        carries (sigma^2/2) I.  This keeps the lifted log-det rates equal to
        the complex-domain TIN rates.
        """
        return 0.5 * self.noise_variance

    def lifted(self, i: int, j: int) -> "RealChannelMatrix":
        return lift_channel(self.gains[i, j])

    def extended(self, i: int, j: int, n_ext: int) -> np.ndarray:
        """2N x 2N real channel block for an N-symbol extension."""
        return extend_channel(self.lifted(i, j), n_ext).entries


@dataclass(frozen=True)
class AugmentedCovariance:
    """Second-order description (C_X, pseudo C_X) of a complex Gaussian signal."""

    variance: float
    pseudo_variance: complex = 0.0

    def __post_init__(self):
        if self.variance < -TOL_PSD:
            raise ValueError("variance must be nonnegative")
        tol = TOL_PSD * max(1.0, self.variance)
        if abs(self.pseudo_variance) > self.variance + tol:
            raise ValueError(
                "invalid augmented covariance: |pseudo-variance| exceeds variance"
            )

    def proper(self) -> bool:
        return self.pseudo_variance == 0

    def as_matrix(self) -> np.ndarray:
        """The 2x2 augmented matrix [[C, Ct], [Ct*, C]]."""
        c, ct = self.variance, self.pseudo_variance
        return np.array([[c, ct], [np.conj(ct), c]])

    def as_real_covariance(self, n_ext: int = 1) -> np.ndarray:
        """Equivalent covariance of the stacked (real, imag) vector.

        For ``n_ext > 1`` the 2x2 block is replicated on the diagonal
        (independent identically-distributed symbols across the extension).
        """
        c = self.variance
        re, im = self.pseudo_variance.real, self.pseudo_variance.imag
        block = 0.5 * np.array([[c + re, im], [im, c - re]])
        return np.kron(np.eye(n_ext), block)

    @staticmethod
    def from_real_covariance(q: np.ndarray) -> "AugmentedCovariance":
        """Inverse of :meth:`as_real_covariance` for a single 2x2 block."""
        q = np.asarray(q, dtype=float)
        if q.shape != (2, 2):
            raise ValueError("expected a 2x2 real covariance block")
        variance = q[0, 0] + q[1, 1]
        pseudo = (q[0, 0] - q[1, 1]) + 2j * 0.5 * (q[0, 1] + q[1, 0])
        return AugmentedCovariance(variance, pseudo)


@dataclass(frozen=True)
class RealChannelMatrix:
    """Real 2x2 rotation-scaling image [[a, -b], [b, a]] of a complex gain."""

    entries: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=float)
        if e.shape != (2, 2):
            raise ValueError("entries must be 2x2")
        scale = max(1.0, float(np.abs(e).max()))
        if abs(e[0, 0] - e[1, 1]) > 1e-12 * scale or abs(e[0, 1] + e[1, 0]) > 1e-12 * scale:
            raise ValueError("entries lack the [[a,-b],[b,a]] lifting structure")
        object.__setattr__(self, "entries", e)

    @property
    def as_complex(self) -> complex:
        return complex(self.entries[0, 0], self.entries[1, 0])

    def __matmul__(self, other):
        if isinstance(other, RealChannelMatrix):
            return RealChannelMatrix(self.entries @ other.entries)
        return self.entries @ other

    def __add__(self, other):
        if isinstance(other, RealChannelMatrix):
            return RealChannelMatrix(self.entries + other.entries)
        return NotImplemented


@dataclass(frozen=True)
class ExtendedChannelMatrix:
    """Block-diagonal I_N (x) G channel acting on an N-symbol extension."""

    entries: np.ndarray
    extension_length: int

    def __post_init__(self):
        n = self.extension_length
        e = np.asarray(self.entries, dtype=float)
        if n < 1:
            raise ValueError("extension length must be >= 1")
        if e.shape != (2 * n, 2 * n):
            raise ValueError("entries must be 2N x 2N")
        object.__setattr__(self, "entries", e)


@dataclass(frozen=True)
class TransmitCovariance:
    """Real 2Nx2N transmit covariance Q_j of one user in the lifted domain."""

    matrix: np.ndarray
    user: int

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] % 2 != 0:
            raise ValueError("matrix must be square with even dimension")
        scale = max(1.0, float(np.trace(m)))
        if np.abs(m - m.T).max() > 1e-9 * scale:
            raise ValueError("matrix must be symmetric")
        if np.linalg.eigvalsh(0.5 * (m + m.T)).min() < -TOL_PSD * scale:
            raise ValueError("matrix must be positive semidefinite")
        object.__setattr__(self, "matrix", 0.5 * (m + m.T))

    @property
    def extension_length(self) -> int:
        return self.matrix.shape[0] // 2

    @property
    def power(self) -> float:
        return float(np.trace(self.matrix))

    def check_cap(self, cap: float, tol_feas: float = 1e-7) -> bool:
        return self.power <= cap + tol_feas * max(1.0, cap)


@dataclass(frozen=True)
class RateProfile:
    """Direction vector on the rate simplex used for Pareto scanning."""

    alpha: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.alpha, dtype=float)
        if a.shape != (3,):
            raise ValueError("alpha must have 3 components")
        if np.any(a < 0):
            raise ValueError("alpha components must be nonnegative")
        if abs(a.sum() - 1.0) > 1e-12:
            raise ValueError("alpha must sum to 1")
        object.__setattr__(self, "alpha", a)

    @property
    def alpha4(self) -> float:
        """Weight of the MAC sum-rate row (alpha_1 + alpha_2)."""
        return float(self.alpha[0] + self.alpha[1])


@dataclass(frozen=True)
class RateBounds:
    """The four TIN rate bounds (bits/channel use): the two individual MAC
    bounds, the P2P bound and the MAC sum bound."""

    L1: float
    L2: float
    L3: float
    L4: float

    def as_array(self) -> np.ndarray:
        return np.array([self.L1, self.L2, self.L3, self.L4])


class Decoding(enum.Enum):
    PARALLEL = "parallel"
    SUCCESSIVE = "successive"


@dataclass(frozen=True)
class StreamLayout:
    """Per-stream transmit/receive description of the lifted network.

    ``v[j, k]`` and ``u[j, k]`` are unit vectors (each user's receive filter
    lives at its desired receiver), ``p[j, k]`` the per-stream powers.
    """

    v: np.ndarray
    p: np.ndarray
    u: np.ndarray
    decoding: Decoding = Decoding.PARALLEL

    def __post_init__(self):
        v = np.asarray(self.v, dtype=float)
        p = np.asarray(self.p, dtype=float)
        u = np.asarray(self.u, dtype=float)
        if v.ndim != 3 or v.shape[1] != 2 or v.shape != u.shape:
            raise ValueError("v and u must have shape (J, 2, dim)")
        if p.shape != v.shape[:2]:
            raise ValueError("p must have shape (J, 2)")
        if np.any(p < -1e-12):
            raise ValueError("stream powers must be nonnegative")
        for w in (v, u):
            norms = np.linalg.norm(w, axis=2)
            if np.abs(norms - 1.0).max() > 1e-10:
                raise ValueError("beamformers and receive filters must be unit norm")
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "p", np.maximum(p, 0.0))
        object.__setattr__(self, "u", u)

    @property
    def n_users(self) -> int:
        return self.v.shape[0]

    @property
    def dim(self) -> int:
        return self.v.shape[2]

    def with_powers(self, p: np.ndarray) -> "StreamLayout":
        return StreamLayout(self.v, np.asarray(p, dtype=float), self.u, self.decoding)


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def lift_channel(h: complex) -> RealChannelMatrix:
    """Real 2x2 image of a complex scalar channel.

    The map commutes with complex arithmetic under the C -> R^2 embedding:
    lift(h1*h2) = lift(h1) @ lift(h2) and lift(h1+h2) = lift(h1) + lift(h2).
    """
    h = complex(h)
    return RealChannelMatrix(np.array([[h.real, -h.imag], [h.imag, h.real]]))


def extend_channel(g: RealChannelMatrix, n_ext: int) -> ExtendedChannelMatrix:
    """Block-diagonal replication I_N (x) G for an N-symbol extension."""
    if n_ext < 1:
        raise ValueError("extension length must be >= 1")
    return ExtendedChannelMatrix(np.kron(np.eye(n_ext), g.entries), n_ext)


def _received_moments(ch, sigs, receiver, transmitters):
    """Variance and pseudo-variance of noise plus the listed transmitters."""
    var = ch.noise_variance
    pvar = 0.0 + 0.0j
    for j in transmitters:
        h = ch.gains[receiver, j]
        var += abs(h) ** 2 * sigs[j].variance
        pvar += h ** 2 * sigs[j].pseudo_variance
    return var, pvar


def _half_log2_ratio(num_var, num_pvar, den_var, den_pvar):
    num = num_var ** 2 - abs(num_pvar) ** 2
    den = den_var ** 2 - abs(den_pvar) ** 2
    if den <= TOL_PSD * max(1.0, num_var ** 2):
        raise NumericDegeneracyError("degenerate interference-plus-noise moment")
    return 0.5 * math.log2(num / den)


def rate_bounds_improper(ch: ChannelInstance, sigs) -> RateBounds:
    """TIN rate bounds for improper Gaussian signals (J = 3 network).

    Each bound is half the base-2 log of the ratio of augmented-covariance
    determinants ``(C^2 - |Ct|^2)`` of the relevant received signal and of the
    interference-plus-noise part.  The MAC receiver bounds are the two
    conditional rates plus the sum rate; the P2P bound treats both MAC signals
    as noise.

    Parameters
    ----------
    ch : ChannelInstance
        A J = 3 channel.
    sigs : sequence of 3 AugmentedCovariance
        Transmit-signal second moments, one per transmitter.

    Returns
    -------
    RateBounds
        All four bounds in bits/channel use.
    """
    if ch.n_users != 3:
        raise ValueError("rate_bounds_improper is defined for the J = 3 network")
    if len(sigs) != 3:
        raise ValueError("need one augmented covariance per transmitter")

    s1 = _received_moments(ch, sigs, 0, [2])          # interference + noise at BS
    s2 = _received_moments(ch, sigs, 1, [0, 1])       # interference + noise at P2P
    y1 = _received_moments(ch, sigs, 0, [0, 1, 2])
    y2 = _received_moments(ch, sigs, 1, [0, 1, 2])
    y12 = _received_moments(ch, sigs, 0, [0, 2])      # y1 with user 2 removed
    y11 = _received_moments(ch, sigs, 0, [1, 2])      # y1 with user 1 removed

    return RateBounds(
        L1=_half_log2_ratio(*y12, *s1),
        L2=_half_log2_ratio(*y11, *s1),
        L3=_half_log2_ratio(*y2, *s2),
        L4=_half_log2_ratio(*y1, *s1),
    )


def _as_q_matrices(ch, qs, n_ext):
    out = []
    for j, q in enumerate(qs):
        m = q.matrix if isinstance(q, TransmitCovariance) else np.asarray(q, dtype=float)
        if m.shape != (2 * n_ext, 2 * n_ext):
            raise ValueError(
                f"covariance of user {j} has shape {m.shape}, expected {(2*n_ext, 2*n_ext)}"
            )
        out.append(m)
    return out


def _logdet_psd(m: np.ndarray) -> float:
    sign, val = np.linalg.slogdet(m)
    if sign <= 0:
        raise NumericDegeneracyError("singular noise-plus-interference matrix")
    return float(val)


def vector_rates(ch: ChannelInstance, qs, n_ext: int = 1, order=None) -> np.ndarray:
    """Per-user rates of the lifted network under successive decoding + TIN.

    The base station decodes the MAC users along ``order`` (first entry
    decoded first, seeing every later user plus the P2P signal as noise); the
    P2P receiver treats everything as noise.  Rates are log-det ratios of the
    noise-plus-interference covariances, normalized per channel use (divide
    by N) and returned in bits, indexed by user.

    Parameters
    ----------
    ch : ChannelInstance
    qs : sequence of J transmit covariances (TransmitCovariance or arrays)
    n_ext : int
        Symbol-extension length N.
    order : sequence of MAC user indices, optional
        Decoding order at the base station; defaults to 0, 1, ..., J-2.
    """
    j_all = ch.n_users
    p2p = ch.p2p_user
    if order is None:
        order = tuple(ch.mac_users)
    order = tuple(order)
    if sorted(order) != list(ch.mac_users):
        raise ValueError("order must be a permutation of the MAC users")
    q_mats = _as_q_matrices(ch, qs, n_ext)

    s = {(i, j): ch.extended(i, j, n_ext) for i in (0, 1) for j in range(j_all)}
    eye = np.eye(2 * n_ext)

    def cov(receiver, users):
        total = ch.lifted_noise_variance * eye.copy()
        for j in users:
            sij = s[(receiver, j)]
            total += sij @ q_mats[j] @ sij.T
        return total

    rates = np.zeros(j_all)
    for pos, j in enumerate(order):
        num = cov(0, list(order[pos:]) + [p2p])
        den = cov(0, list(order[pos + 1:]) + [p2p])
        rates[j] = 0.5 * (_logdet_psd(num) - _logdet_psd(den))
    num = cov(1, range(j_all))
    den = cov(1, list(ch.mac_users))
    rates[p2p] = 0.5 * (_logdet_psd(num) - _logdet_psd(den))
    return rates / (n_ext * LN2)


def received_covariance(ch: ChannelInstance, layout: StreamLayout, receiver: int,
                        n_ext: int = 1) -> np.ndarray:
    """Total received covariance (all streams plus noise) at one receiver."""
    dim = 2 * n_ext
    total = ch.lifted_noise_variance * np.eye(dim)
    for l in range(ch.n_users):
        sil = ch.extended(receiver, l, n_ext)
        for m in range(2):
            glv = sil @ layout.v[l, m]
            total += layout.p[l, m] * np.outer(glv, glv)
    return total


def stream_covariances(ch: ChannelInstance, layout: StreamLayout, n_ext: int = 1):
    """Desired and interference-plus-noise covariances per desired stream.

    Returns a dict mapping ``(i, j, k)`` over the desired pairs and the two
    streams to ``(T, F)``.  Under parallel decoding F is the full received
    covariance minus the stream's own term; under successive decoding the
    streams with index below k are removed for every transmitter.
    """
    dim = 2 * n_ext
    out = {}
    for (i, j) in ch.desired_pairs:
        sij = ch.extended(i, j, n_ext)
        for k in range(2):
            gv = sij @ layout.v[j, k]
            t = layout.p[j, k] * np.outer(gv, gv)
            if layout.decoding is Decoding.PARALLEL:
                f = received_covariance(ch, layout, i, n_ext) - t
            else:
                f = ch.lifted_noise_variance * np.eye(dim) - t
                for l in range(ch.n_users):
                    sil = ch.extended(i, l, n_ext)
                    for m in range(k, 2):
                        glv = sil @ layout.v[l, m]
                        f += layout.p[l, m] * np.outer(glv, glv)
            out[(i, j, k)] = (t, f)
    return out


def sinr(t: np.ndarray, f: np.ndarray, u: np.ndarray) -> float:
    """Rayleigh-quotient SINR  u'Tu / u'Fu  of one stream.

    Invariant to scaling of ``u``; raises if F is not positive definite.
    """
    u = np.asarray(u, dtype=float)
    if not np.any(u):
        raise ValueError("receive filter must be nonzero")
    den = float(u @ f @ u)
    if den <= TOL_PSD * max(1.0, float(np.trace(f))) * float(u @ u):
        raise NumericDegeneracyError("interference-plus-noise covariance is singular")
    return float(u @ t @ u) / den


def proper_signal(power: float) -> AugmentedCovariance:
    """Proper complex Gaussian of the given power (zero pseudo-variance)."""
    return AugmentedCovariance(power, 0.0)
