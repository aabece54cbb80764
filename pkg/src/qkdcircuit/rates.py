"""Entropies, key-generation rates and bit-error-rate thresholds.

All logarithms are base 2.  Rate functions accept floats or ``mpmath.mpf``
values; the threshold solver uses the latter because near ``q = 1/2`` the
noisy rates shrink like ``(1/2 - q)^2`` and fall below double precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import mpmath

from .pgm import RhoHat

# geometric approach to q = 1/2: q_k = 1/2 - 2^-k, k = 2..30
Q_GRID_EXPONENTS = tuple(range(2, 31))
THRESHOLD_TOL = 1e-6
_MP_DPS = 50


def _is_mp(*xs) -> bool:
    return any(isinstance(x, mpmath.mpf) for x in xs)


def _log2(x):
    return mpmath.log(x, 2) if isinstance(x, mpmath.mpf) else math.log2(x)


def _sqrt(x):
    return mpmath.sqrt(x) if isinstance(x, mpmath.mpf) else math.sqrt(x)


def binary_entropy(x):
    """``h(x) = -x log x - (1-x) log(1-x)`` with ``h(0) = h(1) = 0``."""
    if x < 0 or x > 1:
        raise ValueError(f"binary entropy undefined at {x}")
    if x == 0 or x == 1:
        return x * 0
    return -x * _log2(x) - (1 - x) * _log2(1 - x)


def lambda1(q, e):
    """Smaller eigenvalue of the single-shield state for noise ``q`` and phase error ``e``."""
    half = mpmath.mpf(1) / 2 if _is_mp(q, e) else 0.5
    return half - _sqrt((half - q) ** 2 + (1 - 2 * e) ** 2 * q * (1 - q))


def shield_entropy(q, e):
    """Von Neumann entropy of the shield state, ``h(lambda1)``."""
    l1 = lambda1(q, e)
    if l1 < 0:
        l1 = l1 * 0
    return binary_entropy(l1)


def von_neumann(rho: RhoHat) -> float:
    return float(binary_entropy(rho.lambda1))


def processed_error(e, q):
    """Bit error rate after flipping each sifted bit with probability ``q``."""
    return e * (1 - q) + q * (1 - e)


# ---------------------------------------------------------------------------
# finite-length displays


def rate_case_i(n: int, s: int, e: float, d: int = 0) -> float:
    """``(n+s)[1 - h(e)] - (s+d)``."""
    return (n + s) * (1 - binary_entropy(e)) - (s + d)


def rate_case_ii(n: int, s: int, e: float, d: int = 0) -> float:
    return (n + s) * (1 - binary_entropy(e)) - (s + d)


def rate_noisy(n: int, s: int, e: float, q: float, d: int = 0) -> float:
    """BB84 noisy display ``(n+s)[1 - (h(e) - S)] - (s+d)``."""
    return (n + s) * (1 - phase_deficit("bb84_noisy", e, q)) - (s + d)


# ---------------------------------------------------------------------------
# asymptotic per-code-bit rates


def rate_bb84_noisy(e, q):
    """``1 - [h(e) - S] - h(e(1-q) + q(1-e))``; at ``q = 0`` this is ``1 - 2h(e)``."""
    if not 0 <= q <= 0.5:
        raise ValueError("q must lie in [0, 1/2]")
    return 1 - (binary_entropy(e) - shield_entropy(q, e)) - binary_entropy(processed_error(e, q))


@dataclass(frozen=True)
class SixStateModel:
    """Joint law of (bit error, phase error): ``p_joint[bit][phase]``."""

    p_joint: tuple[tuple[float, float], tuple[float, float]]

    def __post_init__(self) -> None:
        flat = [p for row in self.p_joint for p in row]
        if any(p < 0 for p in flat) or abs(sum(flat) - 1) > 1e-12:
            raise ValueError("p_joint must be a probability table")

    @classmethod
    def depolarizing(cls, e: float) -> "SixStateModel":
        """Symmetric six-state channel: each Pauli error with probability ``e/2``."""
        if not 0 <= e <= 2 / 3:
            raise ValueError("depolarizing model needs 0 <= e <= 2/3")
        return cls(((1 - 3 * e / 2, e / 2), (e / 2, e / 2)))

    def p_bit(self, i: int) -> float:
        return sum(self.p_joint[i])

    @property
    def bit_error_rate(self) -> float:
        return self.p_bit(1)

    def phase_rate_given(self, i: int) -> float:
        p = self.p_bit(i)
        return self.p_joint[i][1] / p if p > 0 else 0.0

    @property
    def H_X(self) -> float:
        return binary_entropy(self.bit_error_rate)

    @property
    def H_Z_given_X(self) -> float:
        return sum(self.p_bit(i) * binary_entropy(self.phase_rate_given(i)) for i in (0, 1))


def rate_sixstate_noisy(e, q, model: SixStateModel | None = None, cost: str = "processed"):
    """``1 - [H(Z|X) - sum_i p(X=i) S_i] - C``.

    ``S_i`` is the shield entropy at the phase error rate conditioned on
    ``X = i``.  With ``cost="processed"`` the reconciliation cost ``C`` is
    ``h`` of the bit error rate after noisy processing (equal to ``H(X)`` at
    ``q = 0``); ``cost="raw"`` charges ``H(X)`` for every ``q``, which stays
    positive up to ``e = 1/2`` as ``q -> 1/2`` and so has no threshold.
    """
    if cost not in ("processed", "raw"):
        raise ValueError("cost must be 'processed' or 'raw'")
    if not 0 <= q <= 0.5:
        raise ValueError("q must lie in [0, 1/2]")
    mp = _is_mp(e, q)
    if model is None:
        if mp:
            half = mpmath.mpf(1) / 2
            p = ((1 - 3 * e * half, e * half), (e * half, e * half))
        else:
            model = SixStateModel.depolarizing(float(e))
            p = model.p_joint
    else:
        if abs(model.bit_error_rate - float(e)) > 1e-9:
            raise ValueError("model bit error rate does not match e")
        p = model.p_joint
    phase = 0 * e
    deficit = 0 * e
    for i in (0, 1):
        pi = p[i][0] + p[i][1]
        if pi == 0:
            continue
        ei = p[i][1] / pi
        phase += pi * binary_entropy(ei)
        deficit += pi * shield_entropy(q, ei)
    bit = p[1][0] + p[1][1]
    charge = binary_entropy(processed_error(bit, q) if cost == "processed" else bit)
    return 1 - (phase - deficit) - charge


def rate_case_asymptotic(e):
    """Per-code-bit rate of cases (i)/(ii) with an ideal code (``s = (n+s) h(e)``, ``d = 0``)."""
    return 1 - 2 * binary_entropy(e)


RATE_FUNCTIONS: dict[str, Callable] = {
    "bb84": rate_bb84_noisy,
    "sixstate": rate_sixstate_noisy,
}


# ---------------------------------------------------------------------------
# thresholds


def q_grid(exponents=Q_GRID_EXPONENTS):
    return [mpmath.mpf(1) / 2 - mpmath.mpf(2) ** (-k) for k in exponents]


@dataclass
class ThresholdResult:
    threshold: float
    q_strategy: str
    best_q: float | None
    iterations: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def threshold(
    rate_fn: Callable,
    q_strategy: float | str = "sup",
    tol: float = THRESHOLD_TOL,
    exponents=Q_GRID_EXPONENTS,
    scan_step: float = 0.0025,
) -> ThresholdResult:
    """Largest ``e`` at which the rate (sup over the q-grid, or at fixed q) is positive.

    Scans ``e`` upward from 0 to bracket the first sign change, then bisects
    to ``tol``.
    """
    with mpmath.workdps(_MP_DPS):
        if q_strategy == "sup":
            qs = q_grid(exponents)
            label = "sup"
        else:
            qs = [mpmath.mpf(q_strategy)]
            label = f"fixed q={float(q_strategy)}"

        def best(e):
            vals = [rate_fn(e, q) for q in qs]
            k = max(range(len(vals)), key=lambda i: vals[i])
            return vals[k], qs[k]

        lo = mpmath.mpf(0)
        if best(lo)[0] <= 0:
            raise ValueError("rate is not positive at e = 0")
        hi = None
        e = lo
        while e < mpmath.mpf(1) / 2:
            e = min(e + mpmath.mpf(scan_step), mpmath.mpf(1) / 2)
            if best(e)[0] <= 0:
                hi = e
                break
            lo = e
        if hi is None:
            raise ValueError("no sign change found on [0, 1/2]")
        it = 0
        while hi - lo > tol / 10:
            mid = (lo + hi) / 2
            if best(mid)[0] > 0:
                lo = mid
            else:
                hi = mid
            it += 1
        q_star = best(lo)[1]
        return ThresholdResult(float((lo + hi) / 2), label, float(q_star), it)


# ---------------------------------------------------------------------------
# dispatch and sweeps

PROTOCOLS = ("case_i", "case_ii", "bb84_noisy", "sixstate_noisy")
_ALIASES = {"bb84": "bb84_noisy", "sixstate": "sixstate_noisy"}


@dataclass(frozen=True)
class RateInput:
    protocol: str
    e: float
    q: float = 0.0
    n: int | None = None
    s: int | None = None
    d: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "protocol", _ALIASES.get(self.protocol, self.protocol))
        if self.protocol not in PROTOCOLS:
            raise ValueError(f"unknown protocol {self.protocol!r}; choose from {PROTOCOLS}")
        if not 0 <= self.e <= 0.5:
            raise ValueError("e must lie in [0, 1/2]")
        if not 0 <= self.q <= 0.5:
            raise ValueError("q must lie in [0, 1/2]")
        if (self.n is None) != (self.s is None):
            raise ValueError("give both n and s, or neither")
        if self.n is not None and (self.n < 1 or self.s < 0 or self.d < 0):
            raise ValueError("need n >= 1, s >= 0, d >= 0")


def per_bit_rate(inp: RateInput) -> float:
    """Asymptotic rate per code bit, evaluated in extended precision."""
    with mpmath.workdps(_MP_DPS):
        e, q = mpmath.mpf(inp.e), mpmath.mpf(inp.q)
        if inp.protocol in ("case_i", "case_ii"):
            return float(rate_case_asymptotic(e))
        if inp.protocol == "bb84_noisy":
            return float(rate_bb84_noisy(e, q))
        return float(rate_sixstate_noisy(e, q))


def phase_deficit(protocol: str, e, q):
    """Phase-error cost left after the shield entropy is credited.

    ``h(e) - S`` for BB84 and ``H(Z|X) - sum_i p(X=i) S_i`` for six-state.
    """
    protocol = _ALIASES.get(protocol, protocol)
    if protocol == "bb84_noisy":
        return binary_entropy(e) - shield_entropy(q, e)
    if protocol == "sixstate_noisy":
        # undo the reconciliation charge from the per-bit rate
        return 1 - rate_sixstate_noisy(e, q) - binary_entropy(processed_error(e, q))
    raise ValueError(f"no shield deficit for protocol {protocol!r}")


def raw_rate(inp: RateInput) -> float | None:
    """The (n+s)-scaled finite display ``G``, or None without ``n, s``."""
    if inp.n is None:
        return None
    if inp.protocol == "case_i":
        return float(rate_case_i(inp.n, inp.s, inp.e, inp.d))
    if inp.protocol == "case_ii":
        return float(rate_case_ii(inp.n, inp.s, inp.e, inp.d))
    with mpmath.workdps(_MP_DPS):
        deficit = phase_deficit(inp.protocol, mpmath.mpf(inp.e), mpmath.mpf(inp.q))
        return float((inp.n + inp.s) * (1 - deficit) - (inp.s + inp.d))


def sweep(protocol: str, es, qs) -> list[dict]:
    """One row per ``(e, q)`` point with columns protocol, e, q, rate."""
    rows = []
    for e in es:
        for q in qs:
            inp = RateInput(protocol, float(e), float(q))
            rows.append({"protocol": inp.protocol, "e": inp.e, "q": inp.q, "rate": per_bit_rate(inp)})
    return rows
