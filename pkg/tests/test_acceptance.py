"""Acceptance criteria 1-10, one PASS/FAIL line each.

Run alone with ``pytest tests/test_acceptance.py -v`` or ``python tests/test_acceptance.py``.
Timings cover the whole criterion, oracles included.
"""
import itertools
import json
import math
import sys
import time

import numpy as np
import pytest

import oracles
from pathmeasures import (BlockMeasure, DivergentAtomReport, FiniteMeasure, FiniteSpace, Map,
                          MarkovSpec, SigmaFinite, TimeGrid, cli, cond_density_formula, cond_expect,
                          density_factorize, disintegrate, dual_maximize, dual_value,
                          entropy_decompose, is_conditionable, markov_factorization,
                          markov_factorization_interval, paths_of, rel_entropy, rel_entropy_W,
                          sigma_finite_probe, sinkhorn, solve_bridge, static_reduce)
from pathmeasures.constructions import (dyadic_columns, first_coordinate, frozen_then_collapsed,
                                        hub_alpha, hub_beta, hub_chain)


@pytest.fixture
def verdict(capsys):
    """Print one line per criterion, bypassing output capture."""
    def emit(n, ok, detail, elapsed, limit):
        ok = ok and elapsed <= limit
        with capsys.disabled():
            print(f"\ncriterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}  [{elapsed:.3f}s / {'no limit' if math.isinf(limit) else f'{limit:g}s'}]")
        return ok
    return emit


def _space(n, p="w"):
    return FiniteSpace(tuple(f"{p}{i}" for i in range(n)))


def _measure(rng, sp, zeros=0.2):
    w = rng.exponential(1.0, sp.size) * (rng.random(sp.size) >= zeros)
    if not w.any():
        w[rng.integers(sp.size)] = 1.0
    return FiniteMeasure(sp, w)


def _phi(rng, sp):
    k = int(rng.integers(1, sp.size + 1))
    return Map(sp, _space(k, "z"), rng.integers(0, k, sp.size))


def _chain(rng, S, N, zeros=0.0):
    k = rng.exponential(1.0, (N, S, S)) * (rng.random((N, S, S)) >= zeros)
    for i, x in itertools.product(range(N), range(S)):
        if not k[i, x].any():
            k[i, x, rng.integers(S)] = 1.0
    k /= k.sum(axis=2, keepdims=True)
    st = FiniteSpace(tuple("abcd"[:S]))
    return paths_of(MarkovSpec(st, TimeGrid(N), FiniteMeasure(st, rng.exponential(1.0, S)), k))


def test_criterion_01_disintegration(verdict):
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(200):
        R = _measure(rng, _space(int(rng.integers(1, 21))))
        r_phi, k = disintegrate(R, _phi(rng, R.space))
        worst = max(worst, float(np.max(np.abs(k.mix(r_phi).weights - R.weights))))
    dt = time.perf_counter() - t0
    assert verdict(1, worst <= 1e-12, f"max atomwise error {worst:.2e} (tol 1e-12)", dt, 1.0)


def test_criterion_02_density_and_conditioning(verdict):
    rng = np.random.default_rng(102)
    t0 = time.perf_counter()
    fac_err = form_err = 0.0
    for _ in range(100):
        R = _measure(rng, _space(int(rng.integers(1, 21))))
        Q = FiniteMeasure(R.space, R.weights * rng.exponential(1.0, R.space.size)
                          * (rng.random(R.space.size) > 0.3))
        if not Q.support.any():
            Q = R.scale(2.0)
        phi = _phi(rng, R.space)
        fac_err = max(fac_err, density_factorize(Q, R, phi).max_error)
        f = rng.normal(size=R.space.size)
        via = cond_density_formula(Q, R, phi, f)
        ref = oracles.cond_expect(Q.weights, [phi.target.labels[i] for i in phi.index], f)
        assert set(via.as_dict()) == set(ref)
        for z, v in ref.items():
            form_err = max(form_err, abs(via[z] - v) / max(1.0, abs(v)))
    dt = time.perf_counter() - t0
    ok = fac_err <= 1e-12 and form_err <= 1e-12
    assert verdict(2, ok, f"factorization {fac_err:.2e}, density formula {form_err:.2e} (tol 1e-12)", dt, 1.0)


def _blocks(rng):
    growth = rng.uniform(-1.0, 3.0)
    width = int(rng.integers(1, 4))
    scales = rng.exponential(1.0, (64, width)) * np.exp2(growth * np.arange(1, 65))[:, None]
    zvals = rng.integers(0, 4, (64, width))
    fvals = rng.normal(size=(64, width))

    def gen(n):
        labels = tuple(f"n{n}j{j}z{zvals[n - 1, j]}" for j in range(width))
        return FiniteMeasure(FiniteSpace(labels), scales[n - 1])

    def f(lab):
        n, rest = lab[1:].split("j")
        return float(fvals[int(n) - 1, int(rest.split("z")[0])])

    return BlockMeasure(gen, 64), (lambda lab: lab.split("z")[1]), f


def test_criterion_03_gamma_extension(verdict):
    rng = np.random.default_rng(103)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(50):
        R, phi, f = _blocks(rng)
        got = cond_expect(R, phi, f, depth=64, threshold=math.inf)
        tr = R.truncate(64)
        labels = tr.measure.space.labels
        ref = oracles.cond_expect(tr.measure.weights, [phi(x) for x in labels], [f(x) for x in labels])
        for z, v in ref.items():
            worst = max(worst, abs(got[z] - v) / max(1.0, abs(v)))
    dt = time.perf_counter() - t0
    assert verdict(3, worst <= 1e-12, f"max gap between R and gamma(phi)R conditioning {worst:.2e} (tol 1e-12)", dt, 2.0)


def test_criterion_04_entropy_axioms_and_w_coherence(verdict):
    rng = np.random.default_rng(104)
    t0 = time.perf_counter()
    h_min, zero_ok = math.inf, True
    for _ in range(500):
        sp = _space(int(rng.integers(1, 12)))
        R = _measure(rng, sp, 0.1)
        R = R.scale(1.0 / R.mass)
        P = _measure(rng, sp, 0.3)
        P = P.scale(1.0 / P.mass)
        h = rel_entropy(P, R)
        h_min = min(h_min, h)
        equal = bool(np.max(np.abs(P.weights - R.weights)) <= 1e-12)
        zero_ok &= (abs(h) <= 1e-12) == equal
        zero_ok &= abs(rel_entropy(R, R)) <= 1e-12
    spread = 0.0
    for _ in range(50):
        sp = _space(int(rng.integers(2, 15)))
        P = _measure(rng, sp, 0.2)
        P = P.scale(1.0 / P.mass)
        R = FiniteMeasure(sp, np.where(P.support, 1.0, 0.0) * rng.exponential(2.0, sp.size)
                          + (~P.support) * rng.exponential(1.0, sp.size) * (rng.random(sp.size) > 0.5))
        vals = [rel_entropy_W(P, R, rng.exponential(3.0, sp.size)) for _ in range(5)]
        spread = max(spread, max(vals) - min(vals))
    dt = time.perf_counter() - t0
    ok = h_min >= -1e-12 and zero_ok and spread <= 1e-10
    detail = f"min H {h_min:.2e}, zero iff equal {zero_ok}, W spread {spread:.2e} (tol 1e-12 / 1e-10)"
    assert verdict(4, ok, detail, dt, 2.0)


def test_criterion_05_duality(verdict):
    rng = np.random.default_rng(105)
    t0 = time.perf_counter()
    weak = -math.inf
    gap = 0.0
    for _ in range(20):
        sp = _space(int(rng.integers(2, 16)))
        R = _measure(rng, sp, 0.0)
        P = _measure(rng, sp, 0.0)
        P = P.scale(1.0 / P.mass)
        h = rel_entropy(P, R)
        for _ in range(100):
            weak = max(weak, dual_value(P, R, rng.uniform(-5.0, 5.0, sp.size)) - h)
        _, _, g = dual_maximize(P, R, iters=10_000)
        gap = max(gap, g)
    dt = time.perf_counter() - t0
    ok = weak <= 1e-12 and gap <= 1e-6
    assert verdict(5, ok, f"max weak-duality excess {weak:.2e}, max gap {gap:.2e} (tol 1e-12 / 1e-6)", dt, 10.0)


def test_criterion_06_additive_property(verdict):
    rng = np.random.default_rng(106)
    t0 = time.perf_counter()
    err, smin = 0.0, math.inf
    for _ in range(200):
        sp = _space(int(rng.integers(1, 16)))
        P = _measure(rng, sp, 0.3)
        P = P.scale(1.0 / P.mass)
        R = FiniteMeasure(sp, np.where(P.support, 1.0, rng.random(sp.size) > 0.5) * rng.exponential(1.0, sp.size))
        dec = entropy_decompose(P, R, _phi(rng, sp))
        err = max(err, abs(dec.total - rel_entropy(P, R)))
        smin = min(smin, dec.min_summand)
    dt = time.perf_counter() - t0
    ok = err <= 1e-10 and smin >= -1e-12
    assert verdict(6, ok, f"total vs direct {err:.2e}, min summand {smin:.2e} (tol 1e-10 / -1e-12)", dt, 2.0)


def _rand_fn(rng, paths, lo, hi, S, zeros, infs=0.0):
    shape = (S,) * (hi - lo + 1)
    v = rng.exponential(1.0, shape) * (rng.random(shape) >= zeros)
    v[rng.random(shape) < infs] = math.inf
    return [float(v[p[lo:hi + 1]]) for p in paths]


def test_criterion_07_markov_factorization(verdict):
    rng = np.random.default_rng(107)
    t0 = time.perf_counter()
    worst, all_ok, n_checks = 0.0, True, 0

    def close(a, b):
        if math.isinf(a) or math.isinf(b):
            return a == b
        return abs(a - b) <= 1e-12 * max(1.0, abs(a), abs(b))

    for S, N in itertools.product((2, 3), (1, 2, 3)):
        R = _chain(rng, S, N, zeros=0.2)
        paths = [tuple(int(c) for c in p) for p in R.paths]
        w = R.weights.weights
        for _ in range(50):
            s, t = sorted(rng.integers(0, N + 1, 2))
            a = _rand_fn(rng, paths, 0, s, S, 0.2, 0.05)
            z = _rand_fn(rng, paths, s, t, S, 0.1)
            b = _rand_fn(rng, paths, t, N, S, 0.2)
            e_a = oracles.nonneg_given(paths, w, a, lambda p: p[s])
            e_b = oracles.nonneg_given(paths, w, b, lambda p: p[t])
            abz = [oracles.ext_prod(x, y, u) for x, y, u in zip(a, z, b)]
            lhs = oracles.nonneg_given(paths, w, abz, lambda p: p[s:t + 1])
            rep = markov_factorization_interval(R, a, z, b, s, t)
            all_ok &= rep.ok
            assert len(rep.rows) == len(lhs)
            for r in rep.rows:
                key = tuple(R.states.index(c) for c in r.window.split(","))
                ea, eb, zv = e_a[key[0]], e_b[key[-1]], r.zeta
                all_ok &= close(r.lhs, lhs[key])
                full = oracles.ext_prod(ea, zv, eb)
                all_ok &= close(lhs[key], full)
                if math.isfinite(lhs[key]):
                    guarded = full if (math.isfinite(ea) and math.isfinite(eb)) else 0.0
                    all_ok &= close(lhs[key], guarded)
                    worst = max(worst, abs(lhs[key] - guarded) / max(1.0, lhs[key]))
                n_checks += 1
            # the two-window form at time t
            rep2 = markov_factorization(R, a, b, t) if s == t else markov_factorization(
                R, _rand_fn(rng, paths, 0, t, S, 0.2), b, t)
            all_ok &= rep2.ok
    hub = markov_factorization(hub_chain(), hub_alpha, hub_beta, 1).row("hub")
    hub_ok = hub.e_a == math.inf and hub.e_ab == 0.0 and hub.guarded == 0.0 and hub.guarded_ok
    dt = time.perf_counter() - t0
    ok = all_ok and hub_ok and worst <= 1e-12
    detail = f"{n_checks} window atoms vs enumeration, max rel error {worst:.2e}, guarded block case {hub_ok} (tol 1e-12)"
    assert verdict(7, ok, detail, dt, 5.0)


def _entropy_of(pi, K):
    return oracles.kl(pi.ravel().tolist(), K.ravel().tolist())


def test_criterion_08_schrodinger(verdict):
    rng = np.random.default_rng(108)
    t0 = time.perf_counter()
    K = np.full((2, 2), 0.25)
    mu0, mu1 = np.array([0.3, 0.7]), np.array([0.6, 0.4])
    res = sinkhorn(K, mu0, mu1)
    a_err = float(np.max(np.abs(res.pi - np.outer(mu0, mu1))))
    ref, _ = oracles.ternary_coupling_2x2(K.tolist(), mu0.tolist(), mu1.tolist())
    tern = float(np.max(np.abs(res.pi - ref)))
    dev = marg = uniq = 0.0
    beat = -math.inf
    for _ in range(20):
        S, N = int(rng.integers(2, 5)), int(rng.integers(1, 4))
        R = _chain(rng, S, N)
        m0, m1 = rng.dirichlet(np.ones(S)), rng.dirichlet(np.ones(S))
        sol = solve_bridge(R, m0, m1)
        dev = max(dev, sol.diagnostics["bridge_deviation"])
        marg = max(marg, *sol.diagnostics["marginal_errors"])
        r01 = static_reduce(R)[0].weights.reshape(S, S)
        pi = sol.coupling.weights.reshape(S, S)
        alt = sinkhorn(r01, m0, m1, init_g=rng.uniform(0.1, 10.0, S)).pi
        uniq = max(uniq, float(np.max(np.abs(alt - pi))))
        h0 = _entropy_of(pi, r01)
        for _ in range(20):
            moved = oracles.cycle_perturbation(pi, rng)
            beat = max(beat, h0 - _entropy_of(moved, r01))
    dt = time.perf_counter() - t0
    ok = a_err <= 1e-9 and tern <= 1e-9 and dev <= 1e-10 and marg <= 1e-10 and uniq <= 1e-8 and beat <= 1e-12
    detail = (f"(a) {a_err:.1e} / oracle {tern:.1e}  (b) {dev:.1e}  (c) {marg:.1e}  "
              f"(d) {uniq:.1e}  (e) best improvement {beat:.1e}")
    assert verdict(8, ok, detail, dt, 10.0)


def test_criterion_09_conditionability_and_probe(verdict):
    t0 = time.perf_counter()
    rep = is_conditionable(frozen_then_collapsed(N=1))
    flagged = rep.passes(0) and not rep.passes(1) and rep.per_time[1][1] == 1.0
    _, Q = dyadic_columns()
    Qx = Q.pushforward(first_coordinate)
    early = sigma_finite_probe(Qx, atom_threshold=1e6, depth=20)
    late = sigma_finite_probe(Qx, atom_threshold=1e6, depth=21)
    deep = sigma_finite_probe(Qx, atom_threshold=1e6, depth=64)
    probe_ok = (isinstance(early, SigmaFinite) and isinstance(late, DivergentAtomReport)
                and isinstance(deep, DivergentAtomReport) and late.depth >= 21 and late.atom == "x1")
    dt = time.perf_counter() - t0
    detail = (f"flagged at t=1 and passing at t=0: {flagged}; report at depth {late.depth} "
              f"(atom {late.atom}, mass {late.partial_mass:.3g})")
    assert verdict(9, flagged and probe_ok, detail, dt, 1.0)


def test_criterion_10_cli(verdict, tmp_path):
    t0 = time.perf_counter()
    a, b, c = (tmp_path / n for n in ("a.json", "b.json", "c.json"))
    codes = [cli.main(["check", "example:uniform2x2", "--seed", "42", "--output", str(p)]) for p in (a, b)]
    same = a.read_bytes() == b.read_bytes()
    code = cli.main(["bridge", "example:uniform2x2", "--output", str(c)])
    pi = np.array(json.loads(c.read_text())["results"]["coupling"])
    err = float(np.max(np.abs(pi - [[0.18, 0.12], [0.42, 0.28]])))
    dt = time.perf_counter() - t0
    ok = codes == [0, 0] and same and code == 0 and err <= 1e-9
    assert verdict(10, ok, f"check reports identical {same}; bundled bridge coupling error {err:.1e}", dt, math.inf)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
