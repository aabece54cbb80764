"""Shield-state discrimination for noisy processing.

States are ``|x> = Z^x |phi_q>^N`` with ``|phi_q> = sqrt(1-q)|0> + sqrt(q)|1>``.
Everything here is real, so vectors and operators are float arrays.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import hashing, qsim
from .gf2 import BitVec, CandidateSet
from .rng import as_generator

MAX_PGM_QUBITS = 12


def _h(x: float) -> float:
    if x <= 0.0 or x >= 1.0:
        return 0.0
    return -x * math.log2(x) - (1 - x) * math.log2(1 - x)


# ---------------------------------------------------------------------------
# the single-copy state


@dataclass(frozen=True, eq=False)
class RhoHat:
    q: float
    e: float
    matrix: np.ndarray
    lambda0: float
    lambda1: float
    eigvecs: np.ndarray  # columns: |0~> (lambda0), |1~> (lambda1)

    @property
    def entropy(self) -> float:
        return _h(self.lambda1)


def closed_form_eigenvalues(q: float, e: float) -> tuple[float, float]:
    r = math.sqrt((0.5 - q) ** 2 + (1 - 2 * e) ** 2 * q * (1 - q))
    return 0.5 + r, 0.5 - r


def rho_hat(q: float, e: float) -> RhoHat:
    """``(1-e)|phi_q><phi_q| + e Z|phi_q><phi_q|Z`` with its eigen-decomposition."""
    if not 0.0 <= e <= 0.5:
        raise ValueError(f"phase error rate {e} outside [0, 1/2]")
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"noise probability {q} outside [0, 1]")
    phi = np.array([math.sqrt(1 - q), math.sqrt(q)])
    zphi = phi * np.array([1.0, -1.0])
    matrix = (1 - e) * np.outer(phi, phi) + e * np.outer(zphi, zphi)
    w, V = qsim.eig_hermitian(matrix)
    w, V = w[::-1].real, V[:, ::-1].real
    for j in range(2):
        k = np.flatnonzero(np.abs(V[:, j]) > 1e-12)[0]
        if V[k, j] < 0:
            V[:, j] = -V[:, j]
    l0, l1 = closed_form_eigenvalues(q, e)
    if abs(l0 - w[0]) > 1e-12 or abs(l1 - w[1]) > 1e-12:
        raise ArithmeticError("closed-form and numeric eigenvalues disagree")
    return RhoHat(q, e, matrix, l0, l1, V)


def shield_vector(x: BitVec, q: float) -> np.ndarray:
    """Real amplitudes of ``Z^x |phi_q>^N``."""
    if x.length > MAX_PGM_QUBITS:
        raise ValueError(f"{x.length} shields exceed the cap of {MAX_PGM_QUBITS}")
    a, b = math.sqrt(1 - q), math.sqrt(q)
    out = np.ones(1)
    for bit in x.bits():
        out = np.kron(out, np.array([a, -b if bit else b]))
    return out


def shield_state(x: BitVec, q: float) -> qsim.StateVector:
    return qsim.StateVector(shield_vector(x, q), x.length)


def overlap_law(x: BitVec, y: BitVec, q: float) -> float:
    return (1 - 2 * q) ** (x ^ y).weight


# ---------------------------------------------------------------------------
# typical subspace


def _weights(N: int) -> np.ndarray:
    return np.bitwise_count(np.arange(1 << N)).astype(int)


def _to_eigenbasis(vec: np.ndarray, W: np.ndarray, N: int) -> np.ndarray:
    t = vec.reshape([2] * N) if N else vec
    for q in range(N):
        t = np.moveaxis(np.tensordot(W, t, axes=([1], [q])), 0, q)
    return t.reshape(-1)


@dataclass(eq=False)
class TypicalProjector:
    rho: RhoHat
    N: int
    omega: float
    admitted_weights: tuple[int, ...]

    @cached_property
    def _mask(self) -> np.ndarray:
        return np.isin(_weights(self.N), self.admitted_weights)

    @property
    def rank(self) -> int:
        return sum(math.comb(self.N, k) for k in self.admitted_weights)

    @property
    def admitted_strings(self) -> list[BitVec]:
        return [BitVec(int(v), self.N) for v in np.flatnonzero(self._mask)]

    def apply(self, vec: np.ndarray) -> np.ndarray:
        W = self.rho.eigvecs
        coeff = _to_eigenbasis(vec, W.T, self.N) * self._mask
        return _to_eigenbasis(coeff, W, self.N)

    @cached_property
    def matrix(self) -> np.ndarray:
        """Dense projector ``W^{(x)N} diag(mask) W^{T (x)N}``."""
        WN = np.ones((1, 1))
        for _ in range(self.N):
            WN = np.kron(WN, self.rho.eigvecs)
        return (WN * self._mask) @ WN.T

    def tail_mass(self) -> float:
        """``Tr(rho^{(x)N} (1 - P))`` summed over excluded weight shells."""
        l0, l1 = self.rho.lambda0, self.rho.lambda1
        return float(
            sum(
                math.comb(self.N, k) * l1**k * l0 ** (self.N - k)
                for k in range(self.N + 1)
                if k not in self.admitted_weights
            )
        )

    def tail_bound(self) -> float:
        return 2.0 ** (1 - self.N * self.omega**2)


def typical_projector(rho: RhoHat, N: int, omega: float) -> TypicalProjector:
    """Projector onto eigenbasis strings with ``| |a| - N lambda1 | <= N omega``."""
    if N > MAX_PGM_QUBITS:
        raise ValueError(f"N={N} exceeds the cap of {MAX_PGM_QUBITS}")
    if omega < 0:
        raise ValueError("omega must be non-negative")
    centre, width = N * rho.lambda1, N * omega
    admitted = tuple(k for k in range(N + 1) if abs(k - centre) <= width + 1e-12)
    return TypicalProjector(rho, N, omega, admitted)


# ---------------------------------------------------------------------------
# pretty good measurement


@dataclass(eq=False)
class PgmSet:
    """PGM ``M_x = S^-1/2 P|x><x|P S^-1/2`` stored as the vectors ``S^-1/2 P|x>``."""

    candidates: CandidateSet
    rho: RhoHat
    projector: TypicalProjector
    vectors: np.ndarray  # (dim, k) measurement vectors
    projected: np.ndarray  # (dim, k) columns P|x>
    rank: int

    @property
    def collapsed(self) -> bool:
        return self.rank < len(self.candidates)

    def index(self, x: BitVec) -> int:
        try:
            return self.candidates.members.index(x)
        except ValueError:
            raise KeyError(f"{x} is not a candidate") from None

    def element(self, x: BitVec) -> np.ndarray:
        v = self.vectors[:, self.index(x)]
        return np.outer(v, v)

    @property
    def elements(self) -> list[np.ndarray]:
        return [np.outer(v, v) for v in self.vectors.T]

    @cached_property
    def total(self) -> np.ndarray:
        return self.vectors @ self.vectors.T

    @property
    def leftover(self) -> np.ndarray:
        """Failure element completing the POVM on the typical subspace."""
        return self.projector.matrix - self.total


def build_pgm(candidates: CandidateSet, rho: RhoHat, P: TypicalProjector) -> PgmSet:
    if candidates.width != P.N:
        raise ValueError("candidate width must equal the number of shields")
    psi = np.column_stack([P.apply(shield_vector(x, rho.q)) for x in candidates])
    S = psi @ psi.T
    B = qsim.inv_sqrt_on_support(S)
    w = np.linalg.eigvalsh(S)
    rank = int(np.sum(w > qsim.KERNEL_RTOL * max(w.max(), 0.0))) if w.size and w.max() > 0 else 0
    pgm = PgmSet(candidates, rho, P, B @ psi, psi, rank)
    if pgm.collapsed:
        warnings.warn(
            f"PGM span has rank {rank} for {len(candidates)} candidates; some states are not distinguishable",
            RuntimeWarning,
            stacklevel=2,
        )
    return pgm


def success_prob(pgm: PgmSet, x: BitVec) -> float:
    """``<x|M_x|x>``."""
    v = pgm.vectors[:, pgm.index(x)]
    return float(np.dot(v, shield_vector(x, pgm.rho.q)) ** 2)


# ---------------------------------------------------------------------------
# Gram route: <x|P|x'> from per-site generating polynomials


def _site_coefficients(rho: RhoHat) -> np.ndarray:
    """``c[b, j] = <j~| Z^b |phi_q>``."""
    phi = np.array([math.sqrt(1 - rho.q), math.sqrt(rho.q)])
    return np.stack([rho.eigvecs.T @ phi, rho.eigvecs.T @ (phi * np.array([1.0, -1.0]))])


def projected_overlap(x: BitVec, y: BitVec, rho: RhoHat, admitted_weights) -> float:
    """``<x|P|y>`` as the admitted-weight coefficients of a product of linear polynomials."""
    c = _site_coefficients(rho)
    poly = np.ones(1)
    for a, b in zip(x.bits(), y.bits()):
        poly = np.convolve(poly, [c[a, 0] * c[b, 0], c[a, 1] * c[b, 1]])
    return float(sum(poly[k] for k in admitted_weights))


def gram_matrix(candidates, rho: RhoHat, admitted_weights) -> np.ndarray:
    members = list(candidates)
    k = len(members)
    G = np.empty((k, k))
    for i in range(k):
        for j in range(i, k):
            G[i, j] = G[j, i] = projected_overlap(members[i], members[j], rho, admitted_weights)
    return G


def gram_success(G: np.ndarray) -> np.ndarray:
    """PGM success of every candidate: squared diagonal of ``G^{1/2}``."""
    return np.diag(qsim.sqrt_psd(G)) ** 2


# ---------------------------------------------------------------------------
# averaging over the random hashing


@dataclass
class HashingAverage:
    mean: float
    stderr: float
    mode: str
    family: str
    evaluations: int
    distinct_sets: int
    inclusion_rate: float

    def __float__(self) -> float:
        return self.mean


def _membership_keys(rows: np.ndarray, true_x: BitVec, members: list[BitVec]) -> np.ndarray:
    keys = np.zeros(rows.shape[0], dtype=np.int64)
    for j, y in enumerate(members):
        if y == true_x:
            keys |= np.int64(1) << j
        else:
            keys |= hashing.survives(rows, (y ^ true_x).value).astype(np.int64) << j
    return keys


def average_over_hashing(
    true_x: BitVec,
    T: CandidateSet,
    m: int,
    rho: RhoHat,
    P: TypicalProjector,
    mode: str = "exhaustive",
    seed=None,
    samples: int = 4000,
    family: str = "toeplitz",
) -> HashingAverage:
    """``E_Omega <x|M_x|x>`` where Omega keeps ``true_x`` and every member of ``T`` passing ``m`` parity checks."""
    members = list(T)
    if true_x not in T:
        raise ValueError("the true pattern must belong to the candidate set")
    N = true_x.length
    if mode == "exhaustive":
        if len(members) > 12 or m > 8:
            raise ValueError("exhaustive averaging needs |T| <= 12 and m <= 8")
        if family != "toeplitz":
            raise ValueError("exhaustive averaging enumerates the Toeplitz family")
        rows = hashing.all_toeplitz_rows(m, N)
    elif mode == "monte_carlo":
        rows = hashing.sample_rows(family, m, N, samples, as_generator(seed))
    else:
        raise ValueError(f"unknown mode {mode!r}")
    keys = _membership_keys(rows, true_x, members)
    uniq, counts = np.unique(keys, return_counts=True)
    G = gram_matrix(T, rho, P.admitted_weights)
    xi = members.index(true_x)
    values = {}
    for key in uniq:
        idx = [j for j in range(len(members)) if (int(key) >> j) & 1]
        sub = G[np.ix_(idx, idx)]
        values[int(key)] = float(gram_success(sub)[idx.index(xi)])
    vals = np.array([values[int(k)] for k in uniq])
    weights = counts / counts.sum()
    mean = float(np.dot(weights, vals))
    var = float(np.dot(weights, (vals - mean) ** 2))
    stderr = 0.0 if mode == "exhaustive" else math.sqrt(var / len(keys))
    others = len(members) - 1
    incl = float((np.bitwise_count(keys).sum() - len(keys)) / (len(keys) * others)) if others else 0.0
    return HashingAverage(mean, stderr, mode, family, len(keys), len(uniq), incl)


# ---------------------------------------------------------------------------
# analytic bounds


def kl_slack(e: float, epsilon: float) -> float:
    """``epsilon * log2((e-eps)/(1-e+eps) * e/(1-e))`` as printed; zero at ``e = epsilon = 0``."""
    if epsilon == 0.0:
        return 0.0
    if e == 0.0:
        return 0.0
    if e - epsilon <= 0.0:
        raise ValueError("the slack term needs e > epsilon")
    return epsilon * math.log2((e - epsilon) / (1 - e + epsilon) * e / (1 - e))


def _exp2(x: float) -> float:
    """``2**x`` saturating to ``inf`` instead of raising."""
    return math.inf if x > 1023 else 2.0**x


def avefail_terms(N: float, m: float, q: float, e: float, epsilon: float, omega: float) -> tuple[float, float]:
    """(typicality term, hashing term) of the average-success bound."""
    S = rho_hat(q, e).entropy
    typ = 6 * N * _exp2(-N * (omega**2 + kl_slack(e, epsilon)))
    hsh = _exp2(-N * (-_h(e) + S + m / N - epsilon - omega))
    return typ, hsh


def bound_avefail(
    N: float, m: float, q: float, e: float, epsilon: float, omega: float, sign: str = "corrected"
) -> float:
    """Lower bound on ``E_Omega <x|M_x|x>``; may be negative (vacuous) at small N.

    ``sign="printed"`` adds the hashing term instead of subtracting it.
    """
    typ, hsh = avefail_terms(N, m, q, e, epsilon, omega)
    if sign == "corrected":
        return 1.0 - typ - hsh
    if sign == "printed":
        return 1.0 - typ + hsh
    raise ValueError("sign must be 'corrected' or 'printed'")


def omega_from_delta(e: float, epsilon: float, delta: float) -> float:
    """Typical-subspace width balancing the slack term, evaluated verbatim.

    Raises ``ValueError`` when the radicand is negative.
    """
    if epsilon == 0.0:
        radicand = delta
    else:
        if not 0.0 < epsilon < e:
            raise ValueError("need 0 < epsilon < e")
        radicand = epsilon * math.log2((1 - e + epsilon) / (e - epsilon) * (1 - e) / e) + delta
    if radicand < 0:
        raise ValueError(f"negative radicand {radicand} for omega")
    return math.sqrt(radicand)


def hashing_rounds(N: float, q: float, e: float, epsilon: float, omega: float, delta_m: float) -> float:
    """``N (h(e) - S + epsilon + omega + delta_m)`` hashing rounds."""
    return N * (_h(e) - rho_hat(q, e).entropy + epsilon + omega + delta_m)


def sampling_term(N: float, epsilon: float, constant: float = 4.0) -> float:
    return constant * N * 2.0 ** (-N * epsilon**2)


def p_fail_bound(
    N: float, m: float, q: float, e: float, epsilon: float, omega: float, constant: float = 4.0
) -> float:
    typ, hsh = avefail_terms(N, m, q, e, epsilon, omega)
    return typ + hsh + sampling_term(N, epsilon, constant)


def fidelity_bound(
    N: float, q: float, e: float, epsilon: float, delta: float, delta_m: float, constant: float = 4.0,
    form: str = "display",
) -> float:
    """Fidelity lower bound with ``omega`` and ``m`` set from ``delta`` and ``delta_m``.

    ``form="display"`` charges the sampling failure as ``C N 2^{-N omega^2}``;
    ``form="p_fail"`` returns ``1 - p_fail_bound`` (charged as ``2^{-N eps^2}``).
    """
    omega = omega_from_delta(e, epsilon, delta)
    if form == "display":
        return 1.0 - 6 * N * 2.0 ** (-N * delta) - 2.0 ** (-N * delta_m) - constant * N * 2.0 ** (-N * omega**2)
    if form == "p_fail":
        m = hashing_rounds(N, q, e, epsilon, omega, delta_m)
        return 1.0 - p_fail_bound(N, m, q, e, epsilon, omega, constant)
    raise ValueError("form must be 'display' or 'p_fail'")


def typicalerror_bound(N: int, e: float, epsilon: float, omega: float) -> float:
    """Lower bound on ``<x|P|x>``."""
    return 1.0 - N * 2.0 ** (1 - N * (omega**2 + kl_slack(e, epsilon)))


# ---------------------------------------------------------------------------
# numerical audit of the success-probability argument


@dataclass
class DiagnosticsReport:
    checks: dict[str, str] = field(default_factory=dict)
    values: dict[str, float] = field(default_factory=dict)

    @property
    def failed(self) -> list[str]:
        return [k for k, v in self.checks.items() if v == "fail"]

    @property
    def passed(self) -> bool:
        return not self.failed

    def to_dict(self) -> dict:
        return {"checks": self.checks, "values": self.values, "passed": self.passed}


def _flag(ok: bool) -> str:
    return "pass" if ok else "fail"


def appendix_diagnostics(
    pgm: PgmSet, T: CandidateSet | None = None, m: int | None = None, epsilon: float = 0.0, tol: float = 1e-9
) -> DiagnosticsReport:
    """Check the operator identities and inequalities behind the success bound on one instance.

    * ``completeness``: sum of elements is the projector onto span{P|x>} and lies below P
    * ``gamma_chain``: ``(G^1/2_xx)^2 >= 2 G^1/2_xx - 1 >= 3 G_xx - (G^2)_xx - 1``
    * ``gamma_entries``: ``(G^1/2)^2`` from the full space equals ``<x|P|x'>``
    * ``typicalerror``: ``<x|P|x>`` against its analytic lower bound (may be vacuous)
    * ``hash_inclusion`` (needs ``T`` and ``m``): exact second-moment identity
      ``E sum_{x' in Omega} <x|P|x'>^2 = G_xx^2 + 2^-m sum_{y != x} <x|P|y>^2``
    """
    rep = DiagnosticsReport()
    P = pgm.projector
    Pm = P.matrix
    total = pgm.total
    # supp(sum P|x><x|P) is the column span of the projected candidates
    U, sv, _ = np.linalg.svd(pgm.projected, full_matrices=False)
    keep = sv**2 > qsim.KERNEL_RTOL * float(np.max(sv**2)) if sv.size and sv.max() > 0 else np.zeros(sv.shape, bool)
    support = U[:, keep] @ U[:, keep].T
    rep.values["completeness_error"] = float(np.max(np.abs(total - support)))
    below = np.linalg.eigvalsh(Pm - total).min() if Pm.size else 0.0
    rep.values["p_minus_total_min_eig"] = float(below)
    if Pm.shape[0] <= 256:
        min_elem = min(float(np.linalg.eigvalsh(E).min()) for E in pgm.elements)
    else:
        # rank-one v v^T: spectrum is {|v|^2, 0, ...}
        min_elem = min(0.0, float(np.min(np.sum(pgm.vectors**2, axis=0))))
    rep.values["min_element_eig"] = min_elem
    rep.checks["completeness"] = _flag(
        rep.values["completeness_error"] <= tol and below >= -1e-10 and min_elem >= -1e-10
    )

    half = pgm.projected.T @ pgm.vectors  # Gamma^{1/2} in the full space
    half = (half + half.T) / 2
    gamma = half @ half
    direct = gram_matrix(pgm.candidates, pgm.rho, P.admitted_weights)
    rep.values["gamma_entry_error"] = float(np.max(np.abs(gamma - direct)))
    rep.checks["gamma_entries"] = _flag(rep.values["gamma_entry_error"] <= tol)

    a = np.diag(half)
    g = np.diag(direct)
    g2 = np.diag(direct @ direct)
    first = a**2 - (2 * a - 1)
    second = (2 * a - 1) - (3 * g - g2 - 1)
    rep.values["gamma_chain_min_slack"] = float(min(first.min(), second.min()))
    rep.checks["gamma_chain"] = _flag(rep.values["gamma_chain_min_slack"] >= -tol)

    bound = typicalerror_bound(P.N, pgm.rho.e, epsilon, P.omega)
    rep.values["typicalerror_bound"] = bound
    rep.values["min_projected_norm"] = float(g.min())
    if bound <= 0:
        rep.checks["typicalerror"] = "vacuous"
    else:
        rep.checks["typicalerror"] = _flag(bool(np.all(g >= bound - tol)))

    if T is not None and m is not None:
        G = gram_matrix(T, pgm.rho, P.admitted_weights)
        members = list(T)
        rows = hashing.all_toeplitz_rows(m, P.N)
        worst = 0.0
        for i, x in enumerate(members):
            keys = _membership_keys(rows, x, members)
            incl = ((keys[:, None] >> np.arange(len(members))) & 1).astype(float)
            empirical = float((incl @ (G[i] ** 2)).mean())
            predicted = G[i, i] ** 2 + 2.0**-m * float(np.sum(np.delete(G[i], i) ** 2))
            worst = max(worst, abs(empirical - predicted))
        rep.values["hash_inclusion_error"] = worst
        rep.checks["hash_inclusion"] = _flag(worst <= tol)
    return rep
