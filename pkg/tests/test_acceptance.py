"""Acceptance criteria, one test each; every test prints a single PASS/FAIL line."""

import itertools
import json
import math
import time
import warnings

import numpy as np
import pytest

from qkdcircuit import hashing, pgm, protocol, qsim, rates
from qkdcircuit.cli import run
from qkdcircuit.gf2 import BitVec, all_bitvecs, hamming_ball, hamming_ball_size
from qkdcircuit.rng import as_generator, split


@pytest.fixture
def report(capsys):
    def emit(criterion: int, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\n[criterion {criterion}] {'PASS' if ok else 'FAIL'}: {detail}")
        assert ok, detail

    return emit


def h(x):
    return 0.0 if x in (0.0, 1.0) else -x * math.log2(x) - (1 - x) * math.log2(1 - x)


def test_criterion_1_thresholds(report):
    cases = [(["threshold", "bb84"], 0.124), (["threshold", "sixstate"], 0.141), (["threshold", "bb84", "--q", "0"], 0.110)]
    parts, ok = [], True
    for argv, target in cases:
        t0 = time.perf_counter()
        code, text, _ = run(argv)
        dt = time.perf_counter() - t0
        value = json.loads(text)["result"]["threshold"]
        good = code == 0 and abs(value - target) <= 0.0005 and dt < 5
        ok &= good
        parts.append(f"{' '.join(argv[1:])}={value:.4f} ({dt:.2f}s)")
    report(1, ok, "; ".join(parts))


def test_criterion_2_rate_identities(report):
    es = np.linspace(0, 0.5, 100)
    err_q0 = max(abs(rates.rate_bb84_noisy(float(e), 0.0) - (1 - 2 * h(float(e)))) for e in es)
    err_half = max(abs(rates.rate_bb84_noisy(float(e), 0.5)) for e in es)
    err_vn = max(abs(rates.von_neumann(pgm.rho_hat(0.5, float(e))) - h(float(e))) for e in es)
    ok = err_q0 <= 1e-12 and err_half <= 1e-9 and err_vn <= 1e-12
    report(2, ok, f"q=0 err {err_q0:.1e}; q=1/2 err {err_half:.1e}; S(rho, q=1/2) err {err_vn:.1e}")


def test_criterion_3_protocol_equivalence(report):
    t0 = time.perf_counter()
    configs, states, worst = 60, 20, 0.0
    shapes = []
    for stream in split(2024, configs):
        rng = as_generator(stream)
        n = int(rng.integers(1, 8))
        s = int(rng.integers(0, min(10 - n, 4) + 1))
        m = int(rng.integers(0, n))
        d = int(rng.integers(0, n - m + 1)) if rng.random() < 0.3 else 0
        cfg = protocol.ProtocolConfig.random(n, s, m, rng, d=d)
        shapes.append((n, s, m))
        for _ in range(states):
            psi = qsim.random_state(n + s, rng)
            rep = protocol.equivalence_check(cfg, psi, trials=1, seed=rng)
            worst = max(worst, rep.max_tv)
    dt = time.perf_counter() - t0
    ok = worst <= 1e-9 and dt < 60
    report(3, ok, f"{configs} configs x {states} states, max n+s={max(a + b for a, b, _ in shapes)}, "
                  f"max TV {worst:.1e}, {dt:.1f}s")


def shield_oracle(q, code_state):
    N = code_state.num_qubits
    alpha = qsim.apply_hadamard(code_state, range(N)).amplitudes
    phi = np.array([math.sqrt(1 - q), math.sqrt(q)])
    out = np.zeros(1 << (2 * N), dtype=complex)
    for x in all_bitvecs(N):
        sh = np.ones(1)
        for bit in x.bits():
            sh = np.kron(sh, phi * np.array([1, -1]) if bit else phi)
        e_x = qsim.apply_hadamard(qsim.StateVector.basis(x), range(N)).amplitudes
        out += alpha[x.value] * np.kron(sh, e_x)
    return out


def test_criterion_4_shield_identity(report):
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(100):
        N = int(rng.integers(1, 6))
        q = float(rng.uniform(0, 1))
        psi = qsim.random_state(N, rng)
        worst = max(worst, float(np.max(np.abs(protocol.apply_shield(q, psi).amplitudes - shield_oracle(q, psi)))))
    report(4, worst <= 1e-12, f"100 random (N<=5, q, state): max deviation {worst:.1e}")


def test_criterion_5_pgm_suite(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    povm_ok, overlap_err, gram_err, typ_ok = True, 0.0, 0.0, True
    for N, q, e, omega in itertools.product((4, 6, 8), (0.1, 0.25, 0.4), (0.05, 0.1), (0.2, 0.4)):
        rho = pgm.rho_hat(q, e)
        P = pgm.typical_projector(rho, N, omega)
        radius = max(r for r in range(N + 1) if hamming_ball_size(N, r) <= 12)
        T = hamming_ball(BitVec.zeros(N), radius)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            p = pgm.build_pgm(T, rho, P)
        povm_ok &= all(np.linalg.eigvalsh(E).min() >= -1e-10 for E in p.elements)
        povm_ok &= np.linalg.eigvalsh(P.matrix - p.total).min() >= -1e-10
        G = pgm.gram_matrix(T, rho, P.admitted_weights)
        full = np.array([pgm.success_prob(p, x) for x in T])
        gram_err = max(gram_err, float(np.max(np.abs(full - pgm.gram_success(G)))))
        for _ in range(20):
            x, y = (BitVec(int(v), N) for v in rng.integers(0, 1 << N, 2))
            direct = float(np.dot(pgm.shield_vector(x, q), pgm.shield_vector(y, q)))
            overlap_err = max(overlap_err, abs(direct - (1 - 2 * q) ** (x ^ y).weight))
    for N in range(1, 11):
        for q, e in ((0.1, 0.05), (0.25, 0.1), (0.4, 0.2)):
            rho = pgm.rho_hat(q, e)
            for omega in np.linspace(0, 0.6, 13):
                P = pgm.typical_projector(rho, N, float(omega))
                typ_ok &= P.tail_mass() <= 2.0 ** (1 - N * float(omega) ** 2) + 1e-12
    dt = time.perf_counter() - t0
    ok = povm_ok and overlap_err <= 1e-12 and gram_err <= 1e-9 and typ_ok and dt < 120
    report(5, ok, f"POVM valid={povm_ok}, overlap err {overlap_err:.1e}, Gram err {gram_err:.1e}, "
                  f"typicality bound holds={typ_ok}, {dt:.1f}s")


# instances shared by criteria 6 and 7
GRID = list(itertools.product((6, 8, 10), (0.1, 0.25, 0.4), (0.05, 0.1), range(5)))
OMEGAS = (0.3, 0.6, 0.9)
_PGM_CACHE = {}


def grid_instances():
    """Yield every grid point with its candidate ball and PGM (the PGM does not depend on m)."""
    for N, q, e, m in GRID:
        for omega in OMEGAS:
            key = (N, q, e, omega)
            if key not in _PGM_CACHE:
                radius = max(r for r in range(N + 1) if hamming_ball_size(N, r) <= 12)
                T = hamming_ball(BitVec.zeros(N), radius)
                rho = pgm.rho_hat(q, e)
                P = pgm.typical_projector(rho, N, omega)
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", RuntimeWarning)
                    _PGM_CACHE[key] = (T, rho, P, pgm.build_pgm(T, rho, P))
            yield (N, q, e, m, omega) + _PGM_CACHE[key]


def chain_bound(G, i, m):
    """``3 G_xx - E sum_{x' in Omega} G_xx'^2 - 1``: the finite-N step of the success bound."""
    return 3 * G[i, i] - G[i, i] ** 2 - 2.0**-m * float(np.sum(np.delete(G[i], i) ** 2)) - 1


def test_criterion_6_bound_consistency(report):
    checked = vacuous = failures = 0
    chain_checked = chain_failures = 0
    min_typ = math.inf
    for N, q, e, m, omega, T, rho, P, _ in grid_instances():
        typ, _ = pgm.avefail_terms(N, m, q, e, 0.0, omega)
        min_typ = min(min_typ, typ)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            avg = pgm.average_over_hashing(T.members[0], T, m, rho, P)
        G = pgm.gram_matrix(T, rho, P.admitted_weights)
        cb = chain_bound(G, 0, m)
        if cb > 0:
            chain_checked += 1
            chain_failures += avg.mean < cb - 1e-12
        bound = pgm.bound_avefail(N, m, q, e, 0.0, omega)
        if bound <= 0:
            vacuous += 1
            continue
        checked += 1
        failures += avg.mean < bound
    # asymptotics with omega and m set from delta, delta_m
    q, e, eps, delta, delta_m = 0.25, 0.1, 0.02, 0.01, 0.01
    omega = pgm.omega_from_delta(e, eps, delta)
    asym = {}
    for N in (10**3, 10**4):
        m = pgm.hashing_rounds(N, q, e, eps, omega, delta_m)
        asym[N] = pgm.bound_avefail(N, m, q, e, eps, omega)
    ok = failures == 0 and chain_failures == 0 and asym[10**4] >= asym[10**3] and 1 - asym[10**4] < 1e-15
    report(6, ok, f"{len(GRID) * len(OMEGAS)} points: {checked} non-vacuous checked, {failures} violations, "
                  f"{vacuous} vacuous (typicality term >= {min_typ:.2f} on the whole grid); "
                  f"intermediate chain bound: {chain_checked} non-vacuous, {chain_failures} violations; "
                  f"bound at N=1e3: {asym[10**3]:.4f}, N=1e4: {asym[10**4]:.15f}")


def test_criterion_7_appendix_diagnostics(report):
    counts = {"pass": 0, "vacuous": 0, "fail": 0}
    instances = 0
    for N, q, e, m, omega, T, rho, P, p in grid_instances():
        rep = pgm.appendix_diagnostics(p, T, m)
        instances += 1
        for name in ("completeness", "gamma_chain", "gamma_entries", "typicalerror", "hash_inclusion"):
            counts[rep.checks[name]] += 1
    report(7, counts["fail"] == 0, f"{instances} instances: check outcomes {counts}")


def test_criterion_8_hashing_statistics(report):
    parts, ok = [], True
    for N, m in ((10, 1), (10, 3), (12, 5)):
        st = hashing.collision_stats(N, m, 100_000, seed=N * 10 + m, family="uniform")
        good = abs(st["frequency"] - 2.0**-m) <= 3 * st["sigma"]
        ok &= good
        parts.append(f"N={N} m={m}: {st['frequency']:.5f} vs {2.0**-m:.5f} (z={st['z_score']:+.2f})")
    report(8, ok, "; ".join(parts))


def test_criterion_9_sampling_bound(report):
    rep = protocol.sampling_bound_check(200, 0.1, 0.05, trials=100_000, seed=9)
    report(9, rep.passed, f"empirical tail {rep.empirical:.4f} +- {rep.stderr:.4f} <= bound {rep.bound:.3g} "
                          f"(C={rep.constant:g})")
