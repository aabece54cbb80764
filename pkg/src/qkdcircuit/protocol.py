"""Actual and virtual protocol models, candidate sets, shield coupling, harnesses."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from . import qsim
from .cnot import (
    CnotCircuit,
    SyndromeCircuit,
    build_cnot1,
    build_cnot2,
    check_hash_pair,
    hashing_ports,
    key_ports,
    random_hashing_circuit,
)
from .gf2 import (
    BitMatrix,
    BitVec,
    CandidateSet,
    LinearCode,
    hamming_ball,
    iter_hamming_ball,
    invert,
    random_bitvec,
    random_full_rank,
    syndrome,
)
from .qsim import StateVector
from .rng import as_generator

FlipRule = Callable[[BitVec, "ProtocolConfig"], BitVec]

# Serfling-style explicit constant standing in for O(N) in the sampling bound
SAMPLING_CONSTANT = 4.0
TV_TOLERANCE = 1e-9


def _h(x: float) -> float:
    if x <= 0.0 or x >= 1.0:
        return 0.0
    return -x * math.log2(x) - (1 - x) * math.log2(1 - x)


# ---------------------------------------------------------------------------
# reconciliation rules


def coset_leader_rule(diff: BitVec, cfg: "ProtocolConfig") -> BitVec:
    """Flip the kept bits of the minimum-weight error with syndrome ``diff``."""
    return cfg.coset_leader_masks[diff.value]


def zero_rule(diff: BitVec, cfg: "ProtocolConfig") -> BitVec:
    return BitVec.zeros(cfg.n)


def shifted_rule(diff: BitVec, cfg: "ProtocolConfig") -> BitVec:
    """Deliberately different rule, used as a negative control."""
    mask = coset_leader_rule(diff, cfg)
    return BitVec(mask.value ^ 1, cfg.n) if cfg.n else mask


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True, eq=False)
class ProtocolConfig:
    n: int
    s: int
    m: int
    code: LinearCode
    pa_matrix: BitMatrix
    hash_matrix: BitMatrix
    q: float = 0.0
    e_p_t: float = 0.0
    epsilon: float = 0.0
    omega: float = 0.0
    delta: float = 0.0
    delta_m: float = 0.0
    d: int = 0
    seed: int = 0
    flip_rule: FlipRule = coset_leader_rule

    def __post_init__(self) -> None:
        if not 0 <= self.m < self.n:
            raise ValueError(f"need 0 <= m < n, got m={self.m}, n={self.n}")
        if self.code.length != self.n + self.s or self.code.s != self.s:
            raise ValueError("parity-check matrix must be s x (n+s)")
        if self.hash_matrix.shape != (self.m, self.n):
            raise ValueError(f"hash matrix must be {self.m} x {self.n}")
        check_hash_pair(self.hash_matrix, self.pa_matrix)
        if not (0.0 <= self.q < 1.0) or self.q == 0.5:
            raise ValueError("noise probability must satisfy 0 <= q < 1, q != 1/2")
        if not 0.0 <= self.e_p_t < 0.5:
            raise ValueError("test-bit phase error rate must lie in [0, 1/2)")
        if not 0 <= self.d <= self.n:
            raise ValueError("cannot discard more than n bits")

    @classmethod
    def random(cls, n: int, s: int, m: int, seed=None, **kwargs) -> "ProtocolConfig":
        rng = as_generator(seed)
        H = random_full_rank(s, n + s, rng) if s else BitMatrix((), n + s)
        _, U, V = random_hashing_circuit(n, m, rng)
        return cls(n, s, m, LinearCode(H), V, U, **kwargs)

    @cached_property
    def cnot1(self) -> SyndromeCircuit:
        return build_cnot1(self.code)

    @cached_property
    def cnot2(self) -> CnotCircuit:
        return build_cnot2(self.hash_matrix, self.pa_matrix)

    @cached_property
    def key_map(self) -> BitMatrix:
        """Rows of CNOT(I)'s Z-map that survive syndrome extraction."""
        return self.cnot1.z_map.take_rows(range(self.n))

    @property
    def discard_positions(self) -> list[int]:
        """Key positions dropped for bidirectional reconciliation (the last ``d``)."""
        return list(range(self.n - self.d, self.n))

    @cached_property
    def coset_leader_masks(self) -> list[BitVec]:
        N = self.n + self.s
        if N > 20:
            raise ValueError("coset-leader table limited to n+s <= 20")
        leaders: dict[int, BitVec] = {}
        for e in iter_hamming_ball(BitVec.zeros(N), N):
            leaders.setdefault(syndrome(self.code, e).value, e)
            if len(leaders) == 1 << self.s:
                break
        return [self.key_map.matvec(leaders[k]) for k in range(1 << self.s)]

    def flips_for(self, alice: BitVec, bob: BitVec) -> BitVec:
        mask = self.flip_rule(alice ^ bob, self)
        if mask.length != self.n:
            raise ValueError("flip rule must return an n-bit mask")
        return mask

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "s": self.s,
            "m": self.m,
            "parity_check": [str(self.code.parity_check.row(i)) for i in range(self.s)],
            "pa_matrix": [str(self.pa_matrix.row(i)) for i in range(self.pa_matrix.nrows)],
            "hash_matrix": [str(self.hash_matrix.row(i)) for i in range(self.m)],
            "q": self.q,
            "e_p_t": self.e_p_t,
            "epsilon": self.epsilon,
            "omega": self.omega,
            "delta": self.delta,
            "delta_m": self.delta_m,
            "d": self.d,
            "seed": self.seed,
            "flip_rule": getattr(self.flip_rule, "__name__", repr(self.flip_rule)),
        }


@dataclass(frozen=True)
class RunTranscript:
    syndrome_alice: BitVec
    final_key: BitVec
    syndrome_bob: BitVec | None = None
    x_syndrome: BitVec | None = None
    reconciled_key: BitVec | None = None

    def to_dict(self) -> dict:
        return {k: (None if v is None else str(v)) for k, v in self.__dict__.items()}


# ---------------------------------------------------------------------------
# protocol runs


def run_actual(cfg: ProtocolConfig, sifted: BitVec, bob_syndrome: BitVec, flips: BitVec | None = None) -> RunTranscript:
    """Classical post-processing of Alice's sifted key."""
    if sifted.length != cfg.n + cfg.s:
        raise ValueError(f"sifted key must have {cfg.n + cfg.s} bits")
    if bob_syndrome.length != cfg.s:
        raise ValueError(f"Bob's syndrome must have {cfg.s} bits")
    s_alice = syndrome(cfg.code, sifted)
    if flips is None:
        flips = cfg.flips_for(s_alice, bob_syndrome)
    if flips.length != cfg.n:
        raise ValueError(f"flip mask must have {cfg.n} bits")
    kept = cfg.key_map.matvec(sifted)
    rec = kept ^ flips
    if cfg.d:
        keep_mask = ((1 << cfg.n) - 1) ^ ((1 << cfg.d) - 1)
        rec = BitVec(rec.value & keep_mask, cfg.n)
    final = cfg.pa_matrix.matvec(rec)
    return RunTranscript(s_alice, final, syndrome_bob=bob_syndrome, reconciled_key=rec)


def _reset_discarded(cfg: ProtocolConfig, state: StateVector):
    """Branches after resetting the ``d`` discarded key qubits to |0>."""
    if not cfg.d:
        return [(1.0, state)]
    out = []
    ports = cfg.discard_positions
    for br in qsim.measurement_branches(state, "Z", ports, min_prob=1e-15):
        mask = BitVec(0, cfg.n)
        for j, p in enumerate(ports):
            if br.outcome[j]:
                mask = mask ^ BitVec.unit(cfg.n, p)
        out.append((br.probability, qsim.apply_pauli(br.post_state, "X", mask)))
    return out


def _virtual_after_reconciliation(cfg: ProtocolConfig, state: StateVector, bob_syndrome: BitVec):
    """Exact branches (prob, S_z, n-qubit state) after Steps 1v-2v."""
    stage = qsim.apply_circuit(state, cfg.cnot1.circuit)
    ports = list(range(cfg.n, cfg.n + cfg.s))
    if not ports:
        yield 1.0, BitVec.zeros(0), stage
        return
    for br in qsim.measurement_branches(stage, "Z", ports, min_prob=1e-15):
        rest = qsim.discard(br.post_state, ports, br.outcome)
        flipped = qsim.apply_pauli(rest, "X", cfg.flips_for(br.outcome, bob_syndrome))
        yield br.probability, br.outcome, flipped


def run_virtual(cfg: ProtocolConfig, input_state: StateVector, bob_syndrome: BitVec, seed=None) -> RunTranscript:
    """One sampled run of the virtual protocol on Alice's ``n+s`` qubits."""
    if input_state.num_qubits != cfg.n + cfg.s:
        raise ValueError(f"input state must have {cfg.n + cfg.s} qubits")
    rng = as_generator(seed)
    n, s, m = cfg.n, cfg.s, cfg.m
    stage = qsim.apply_circuit(input_state, cfg.cnot1.circuit)
    sports = list(range(n, n + s))
    if s:
        rec = qsim.measure(stage, "Z", sports, rng)
        s_alice = rec.outcome
        stage = qsim.discard(rec.post_state, sports, s_alice)
    else:
        s_alice = BitVec.zeros(0)
        stage = qsim.StateVector(stage.amplitudes, n)
    stage = qsim.apply_pauli(stage, "X", cfg.flips_for(s_alice, bob_syndrome))
    if cfg.d:
        rec = qsim.measure(stage, "Z", cfg.discard_positions, rng)
        mask = 0
        for j, p in enumerate(cfg.discard_positions):
            if rec.outcome[j]:
                mask |= 1 << (n - 1 - p)
        stage = qsim.apply_pauli(rec.post_state, "X", BitVec(mask, n))
    stage = qsim.apply_circuit(stage, cfg.cnot2)
    x_syn = BitVec.zeros(0)
    if m:
        rec = qsim.measure(stage, "X", hashing_ports(n, m), rng)
        x_syn, stage = rec.outcome, rec.post_state
    key = qsim.measure(stage, "Z", key_ports(n, m), rng).outcome
    return RunTranscript(s_alice, key, syndrome_bob=bob_syndrome, x_syndrome=x_syn)


# ---------------------------------------------------------------------------
# exact distributions and the equivalence harness

Distribution = dict[tuple[int, int], float]


def virtual_distribution(
    cfg: ProtocolConfig, state: StateVector, bob_syndrome: BitVec, measure_x: bool = True
) -> Distribution:
    """Exact joint law of (S_z, final key) from the virtual protocol."""
    n, m = cfg.n, cfg.m
    dist: Distribution = defaultdict(float)
    for p_syn, s_alice, stage in _virtual_after_reconciliation(cfg, state, bob_syndrome):
        for p_reset, reset in _reset_discarded(cfg, stage):
            out = qsim.apply_circuit(reset, cfg.cnot2)
            if measure_x and m:
                branches = [
                    (br.probability, br.post_state)
                    for br in qsim.measurement_branches(out, "X", hashing_ports(n, m), min_prob=1e-15)
                ]
            else:
                branches = [(1.0, out)]
            for p_x, post in branches:
                probs = qsim.outcome_distribution(post, "Z", key_ports(n, m))
                w = p_syn * p_reset * p_x
                for k, pk in enumerate(probs):
                    if pk > 0:
                        dist[(s_alice.value, k)] += w * pk
    return dict(dist)


def actual_distribution(
    cfg: ProtocolConfig, state: StateVector, bob_syndrome: BitVec, flip_rule: FlipRule | None = None
) -> Distribution:
    """Exact joint law of (S_z, final key) when Alice Z-measures ``state`` and runs the actual protocol."""
    N = cfg.n + cfg.s
    rule = flip_rule or cfg.flip_rule
    dist: Distribution = defaultdict(float)
    for x, p in enumerate(state.probabilities()):
        if p <= 0:
            continue
        sifted = BitVec(x, N)
        s_alice = syndrome(cfg.code, sifted)
        flips = rule(s_alice ^ bob_syndrome, cfg)
        t = run_actual(cfg, sifted, bob_syndrome, flips)
        dist[(s_alice.value, t.final_key.value)] += float(p)
    return dict(dist)


def total_variation(p: Distribution, q: Distribution) -> float:
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)


@dataclass
class EquivalenceReport:
    tv_with_vs_without_x: float
    tv_virtual_vs_actual: float
    tv_without_x_vs_actual: float
    bob_syndromes: list[str] = field(default_factory=list)
    tolerance: float = TV_TOLERANCE

    @property
    def max_tv(self) -> float:
        return max(self.tv_with_vs_without_x, self.tv_virtual_vs_actual, self.tv_without_x_vs_actual)

    @property
    def passed(self) -> bool:
        return self.max_tv <= self.tolerance

    def to_dict(self) -> dict:
        return {
            "tv_with_vs_without_x": self.tv_with_vs_without_x,
            "tv_virtual_vs_actual": self.tv_virtual_vs_actual,
            "tv_without_x_vs_actual": self.tv_without_x_vs_actual,
            "max_tv": self.max_tv,
            "bob_syndromes": self.bob_syndromes,
            "passed": self.passed,
        }


def equivalence_check(
    cfg: ProtocolConfig,
    input_state: StateVector,
    trials: int = 1,
    seed=None,
    actual_flip_rule: FlipRule | None = None,
) -> EquivalenceReport:
    """Compare the three exact (S_z, key) laws for ``trials`` Bob syndromes.

    The first trial uses Bob's all-zero syndrome; later ones are random.
    ``actual_flip_rule`` overrides the actual protocol's rule (negative control).
    """
    if cfg.n + cfg.s > 12:
        raise ValueError("exact equivalence check limited to n+s <= 12")
    rng = as_generator(seed)
    worst = [0.0, 0.0, 0.0]
    used = []
    for t in range(trials):
        bob = BitVec.zeros(cfg.s) if t == 0 else random_bitvec(cfg.s, rng)
        used.append(str(bob))
        a = virtual_distribution(cfg, input_state, bob, measure_x=True)
        b = virtual_distribution(cfg, input_state, bob, measure_x=False)
        c = actual_distribution(cfg, input_state, bob, actual_flip_rule)
        for i, tv in enumerate((total_variation(a, b), total_variation(a, c), total_variation(b, c))):
            worst[i] = max(worst[i], tv)
    return EquivalenceReport(*worst, bob_syndromes=used)


# ---------------------------------------------------------------------------
# candidate sets


def ball_radius(length: int, e: float, epsilon: float) -> int:
    r = math.floor(length * (e + epsilon) + 1e-9)
    return max(0, min(r, length))


def _log2_ball_bound(length: int, e: float, epsilon: float) -> float:
    return length * _h(min(e + epsilon, 0.5))


def candidates_case_i(cfg: ProtocolConfig, mu_tilde: BitVec) -> tuple[CandidateSet, CandidateSet]:
    """Candidates for Alice's phase pattern when only she holds qubits."""
    N = cfg.n + cfg.s
    if mu_tilde.length != N:
        raise ValueError(f"Bob's estimate must have {N} bits")
    radius = ball_radius(N, cfg.e_p_t, cfg.epsilon)
    code_set = hamming_ball(mu_tilde, radius, label="case_i_code")
    F = cfg.cnot1.x_map
    key_set = CandidateSet(tuple(F.matvec(t).head(cfg.n) for t in code_set), label="case_i_key")
    return code_set, key_set


def candidates_case_ii(
    cfg: ProtocolConfig, mu: BitVec, a_k: BitVec | None = None
) -> tuple[CandidateSet, CandidateSet]:
    """Candidates when both parties hold qubits and Bob reads ``mu`` off CNOT(I)'s first n ports.

    ``a_k`` (zero on the first n bits) selects which preimage of ``mu`` builds
    the code-level set; the key-level set does not depend on it.
    """
    N, n = cfg.n + cfg.s, cfg.n
    if mu.length != n:
        raise ValueError(f"Bob's outcome must have {n} bits")
    if a_k is None:
        a_k = BitVec.zeros(N)
    if a_k.length != N or a_k.head(n).value:
        raise ValueError("a_k must have n+s bits with the first n equal to zero")
    radius = ball_radius(N, cfg.e_p_t, cfg.epsilon)
    F = cfg.cnot1.x_map
    base = invert(F).matvec(mu.concat(BitVec.zeros(cfg.s)) ^ a_k)
    errors = hamming_ball(BitVec.zeros(N), radius)
    code_set = CandidateSet(tuple(base ^ r for r in errors), label="case_ii_code")
    key_set = CandidateSet(tuple(F.matvec(t).head(n) for t in code_set), label="case_ii_key")
    return code_set, key_set


def candidates_case_ii_direct(cfg: ProtocolConfig, mu: BitVec) -> CandidateSet:
    """Key-level case (ii) set written straight from linearity: ``mu + Tr[F(r)]``."""
    N = cfg.n + cfg.s
    radius = ball_radius(N, cfg.e_p_t, cfg.epsilon)
    F = cfg.cnot1.x_map
    return CandidateSet(
        tuple(mu ^ F.matvec(r).head(cfg.n) for r in hamming_ball(BitVec.zeros(N), radius)),
        label="case_ii_key",
    )


def candidate_log2_bound(cfg: ProtocolConfig) -> float:
    """``(n+s) h(e + epsilon)``: log2 of the recorded cardinality bound."""
    return _log2_ball_bound(cfg.n + cfg.s, cfg.e_p_t, cfg.epsilon)


# ---------------------------------------------------------------------------
# noisy processing


def phi_q(q: float) -> np.ndarray:
    return np.array([math.sqrt(1 - q), math.sqrt(q)])


def apply_shield(q: float, code_state: StateVector) -> StateVector:
    """Couple ``|phi_q>^N`` shields (qubits 0..N-1) to the code (qubits N..2N-1).

    Shield ``i`` controls a CNOT onto code qubit ``i``.  Writing the code
    state in the X basis, ``sum_x a_x |e_x>``, the result is
    ``sum_x a_x (Z^x |phi_q>^N) |e_x>``: phase kickback moves the X-basis
    label onto the shields.
    """
    N = code_state.num_qubits
    if 2 * N > qsim.MAX_QUBITS:
        raise ValueError(f"shielded register of {2 * N} qubits exceeds the cap")
    if not 0.0 <= q <= 1.0:
        raise ValueError("q must lie in [0, 1]")
    shields = StateVector.product(*([phi_q(q)] * N)) if N else StateVector(np.ones(1), 0)
    joint = shields.tensor(code_state)
    for i in range(N):
        joint = qsim.apply_cnot(joint, i, N + i)
    return joint


# ---------------------------------------------------------------------------
# sampling-bound harness


@dataclass
class SamplingReport:
    N: int
    e_true: float
    epsilon: float
    trials: int
    empirical: float
    stderr: float
    bound: float
    constant: float

    @property
    def passed(self) -> bool:
        return self.empirical <= self.bound

    def to_dict(self) -> dict:
        return {**self.__dict__, "passed": self.passed}


def sampling_bound_check(
    N: int, e_true: float, epsilon: float, trials: int = 10**4, seed=None, constant: float = SAMPLING_CONSTANT
) -> SamplingReport:
    """Monte Carlo tail of ``|e_code - e_test| >= epsilon`` for random halves of 2N bits.

    The population holds ``round(2 N e_true)`` errors; each trial splits it
    uniformly into N code bits and N test bits.
    """
    if trials < 10**4:
        raise ValueError("use at least 10^4 trials")
    rng = as_generator(seed)
    errors = round(2 * N * e_true)
    k = rng.hypergeometric(errors, 2 * N - errors, N, size=trials)
    dev = np.abs(k - (errors - k)) / N
    hit = dev >= epsilon - 1e-12
    p = float(hit.mean())
    return SamplingReport(
        N=N,
        e_true=e_true,
        epsilon=epsilon,
        trials=trials,
        empirical=p,
        stderr=float(np.sqrt(max(p * (1 - p), 1.0 / trials) / trials)),
        bound=constant * N * 2.0 ** (-N * epsilon**2),
        constant=constant,
    )
