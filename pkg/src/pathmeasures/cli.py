"""Command-line front end: ``pathmeasures <command> <spec.json> [flags]``.

Input files are JSON objects (``spec_version`` 1)::

    {
      "spec_version": 1,
      "states": ["a", "b"],
      "N": 2,
      "markov": {"initial": [0.5, 0.5], "kernels": [[[0.5, 0.5], [0.5, 0.5]], ...]},
      "paths": [...],              # instead of "markov": one weight per path, or {"a,b,a": w}
      "P": [...],                  # optional compared measure, same forms as "paths"
      "mu0": {"a": 0.3, "b": 0.7}, # optional target marginals (list or dict)
      "mu1": [0.6, 0.4],
      "observable": "X_0X_2",      # "X_t", concatenations, "X_N", or {"map": {path: value}}
      "f": ..., "W": ..., "alpha": ..., "beta": ..., "zeta": ...,   # path functions
      "t_index": 1, "s_index": 1,
      "options": {"tol": 1e-10, "max_iters": 100000, "depth": 64, "threshold": 1e12}
    }

Path functions are a list (one value per path, lexicographic), ``{"paths":
{label: value}, "default": 0}``, or ``{"time": t, "values": {state: value}}``.
Exit status: 0 ok, 1 domain error or failed check, 2 schema or IO error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import re
import sys
from dataclasses import dataclass, field
from importlib import resources
from typing import Any

import numpy as np

from . import __version__
from .conditioning import cond_density_formula, cond_expect, density_factorize, disintegrate
from .entropy import dual_maximize, dual_value, entropy_decompose, rel_entropy, rel_entropy_W
from .errors import DomainError
from .measure import DEFAULT_ATOM_THRESHOLD, DEFAULT_DEPTH, FiniteMeasure, FiniteSpace, Map
from .pathspace import (SEP, MarkovSpec, PathMeasure, TimeGrid, check_markov, is_conditionable,
                        markov_factorization, markov_factorization_interval, paths_of)
from .schrodinger import (DEFAULT_MAX_ITERS, DEFAULT_TOL, basis_move, sinkhorn, solve_bridge,
                          static_reduce)

SPEC_VERSION = 1
REPORT_VERSION = 1
COMMANDS = ("entropy", "condition", "markov", "factorize", "bridge", "check")
DEFAULT_THRESHOLD = 1e12
DEFAULT_SEED = 0

EXIT_OK, EXIT_DOMAIN, EXIT_SCHEMA = 0, 1, 2


class SchemaError(Exception):
    """Input violates the file schema; ``errors`` lists ``(field path, message)``."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(f"{p}: {m}" for p, m in self.errors))


class IoError(Exception):
    pass


# -- problem specification ------------------------------------------------------------------


def _freeze(x):
    if isinstance(x, dict):
        return tuple(sorted((k, _freeze(v)) for k, v in x.items()))
    if isinstance(x, (list, tuple)):
        return tuple(_freeze(v) for v in x)
    return x


def _thaw(x):
    return json.loads(json.dumps(x))


@dataclass(frozen=True)
class ProblemSpec:
    """Validated contents of an input file.

    Values keep their JSON shape; ``raw`` is the canonical dict and equality
    is decided on it.
    """

    raw: dict = field(compare=False)
    key: tuple = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "key", _freeze(self.raw))

    def __hash__(self):
        return hash(self.key)

    @property
    def states(self) -> FiniteSpace:
        return FiniteSpace(tuple(self.raw["states"]))

    @property
    def N(self) -> int:
        return self.raw["N"]

    def get(self, name, default=None):
        return self.raw.get(name, default)

    def option(self, name, default):
        return self.raw.get("options", {}).get(name, default)

    def to_dict(self) -> dict:
        return _thaw(self.raw)

    def reference(self) -> PathMeasure:
        states = self.states
        if "markov" in self.raw:
            mk = self.raw["markov"]
            init = FiniteMeasure(states, _state_vector(states, mk["initial"]))
            return paths_of(MarkovSpec(states, TimeGrid(self.N), init, np.array(mk["kernels"], dtype=float)))
        space = _path_space(states, self.N)
        return PathMeasure(states, TimeGrid(self.N), FiniteMeasure(space, _path_vector(space, self.raw["paths"])))


def _path_space(states: FiniteSpace, N: int) -> FiniteSpace:
    return FiniteSpace.product(*([states] * (N + 1)), sep=SEP)


def _state_vector(states: FiniteSpace, v) -> np.ndarray:
    if isinstance(v, dict):
        return np.array([float(v.get(s, 0.0)) for s in states.labels])
    return np.asarray(v, dtype=float)


def _path_vector(space: FiniteSpace, v) -> np.ndarray:
    if isinstance(v, dict):
        return np.array([float(v.get(p, 0.0)) for p in space.labels])
    return np.asarray(v, dtype=float)


_OBS = re.compile(r"^(X_(\d+|N))+$")


def _obs_coords(obs: str, N: int) -> list[int]:
    return [N if c == "N" else int(c) for c in re.findall(r"X_(\d+|N)", obs)]


class _Checker:
    def __init__(self):
        self.errors = []

    def err(self, path, msg):
        self.errors.append((path, msg))

    def number(self, path, v, *, nonneg=True, allow_inf=False) -> bool:
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            self.err(path, f"expected a number, got {type(v).__name__}")
            return False
        if math.isnan(v) or (math.isinf(v) and not allow_inf):
            self.err(path, f"{v!r} is not allowed")
            return False
        if nonneg and v < 0:
            self.err(path, f"must be nonnegative, got {v!r}")
            return False
        return True

    def state_weights(self, path, v, states, *, allow_inf=False):
        if isinstance(v, dict):
            for k, x in v.items():
                if k not in states:
                    self.err(f"{path}.{k}", f"label {k!r} is not a state")
                else:
                    self.number(f"{path}.{k}", x, allow_inf=allow_inf)
        elif isinstance(v, list):
            if len(v) != len(states):
                self.err(path, f"expected {len(states)} values, got {len(v)}")
            for i, x in enumerate(v):
                self.number(f"{path}[{i}]", x, allow_inf=allow_inf)
        else:
            self.err(path, "expected a list or an object keyed by state")

    def path_weights(self, path, v, space, *, allow_inf=False):
        if isinstance(v, dict):
            for k, x in v.items():
                if k not in space:
                    self.err(f"{path}.{k}", f"{k!r} is not a path label")
                else:
                    self.number(f"{path}.{k}", x, allow_inf=allow_inf)
        elif isinstance(v, list):
            if len(v) != space.size:
                self.err(path, f"expected {space.size} path weights, got {len(v)}")
            for i, x in enumerate(v):
                self.number(f"{path}[{i}]", x, allow_inf=allow_inf)
        else:
            self.err(path, "expected a list or an object keyed by path label")

    def path_function(self, path, v, states, space, N):
        if isinstance(v, list):
            self.path_weights(path, v, space, allow_inf=True)
        elif isinstance(v, dict) and "paths" in v:
            self.path_weights(f"{path}.paths", v["paths"], space, allow_inf=True)
            if "default" in v:
                self.number(f"{path}.default", v["default"], allow_inf=True)
        elif isinstance(v, dict) and "time" in v:
            t = v["time"]
            if not isinstance(t, int) or isinstance(t, bool) or not 0 <= t <= N:
                self.err(f"{path}.time", f"must be an integer in 0..{N}")
            vals = v.get("values")
            if not isinstance(vals, dict):
                self.err(f"{path}.values", "expected an object keyed by state")
            else:
                self.state_weights(f"{path}.values", vals, states, allow_inf=True)
        else:
            self.err(path, "expected a list, {\"paths\": ...} or {\"time\": t, \"values\": ...}")


_OPTION_TYPES = {"tol": float, "max_iters": int, "depth": int, "threshold": float}
_KNOWN = {"spec_version", "states", "N", "markov", "paths", "P", "mu0", "mu1", "observable", "f",
          "W", "alpha", "beta", "zeta", "t_index", "s_index", "options", "description"}


def validate(data: Any) -> ProblemSpec:
    """Validate a decoded input file; raises :class:`SchemaError` listing every violation."""
    c = _Checker()
    if not isinstance(data, dict):
        raise SchemaError([("$", "top level must be an object")])
    for k in data:
        if k not in _KNOWN:
            c.err(k, "unknown field")
    if data.get("spec_version") != SPEC_VERSION:
        c.err("spec_version", f"must be {SPEC_VERSION}")
    states = data.get("states")
    if not (isinstance(states, list) and states and all(isinstance(s, str) and s for s in states)):
        c.err("states", "expected a nonempty list of nonempty strings")
        raise SchemaError(c.errors)
    if len(set(states)) != len(states):
        c.err("states", "labels must be distinct")
    if any(SEP in s for s in states):
        c.err("states", f"labels may not contain {SEP!r}")
    N = data.get("N")
    if not isinstance(N, int) or isinstance(N, bool) or N < 1:
        c.err("N", "expected an integer >= 1")
        raise SchemaError(c.errors)
    if c.errors:
        raise SchemaError(c.errors)
    sp = FiniteSpace(tuple(states))
    space = _path_space(sp, N)
    S = len(states)

    if ("markov" in data) == ("paths" in data):
        c.err("markov|paths", "exactly one of 'markov' and 'paths' is required")
    if "markov" in data:
        mk = data["markov"]
        if not isinstance(mk, dict) or set(mk) != {"initial", "kernels"}:
            c.err("markov", "expected an object with 'initial' and 'kernels'")
        else:
            c.state_weights("markov.initial", mk["initial"], sp)
            ks = mk["kernels"]
            if not isinstance(ks, list) or len(ks) != N:
                c.err("markov.kernels", f"expected {N} matrices")
            else:
                for s, K in enumerate(ks):
                    if not isinstance(K, list) or len(K) != S:
                        c.err(f"markov.kernels[{s}]", f"expected {S} rows")
                        continue
                    for i, row in enumerate(K):
                        p = f"markov.kernels[{s}][{i}]"
                        if not isinstance(row, list) or len(row) != S:
                            c.err(p, f"expected {S} entries")
                            continue
                        if all(c.number(f"{p}[{j}]", x) for j, x in enumerate(row)):
                            tot = math.fsum(row)
                            if abs(tot - 1.0) > 1e-12:
                                c.err(p, f"row {states[i]!r} sums to {tot!r}, expected 1")
    if "paths" in data:
        c.path_weights("paths", data["paths"], space)
    if "P" in data:
        c.path_weights("P", data["P"], space)
    for name in ("mu0", "mu1"):
        if name in data:
            c.state_weights(name, data[name], sp)
    if "observable" in data:
        obs = data["observable"]
        if isinstance(obs, str):
            if not _OBS.match(obs):
                c.err("observable", "expected 'X_t' terms such as 'X_1' or 'X_0X_N'")
            elif any(t > N for t in _obs_coords(obs, N)):
                c.err("observable", f"time indices must lie in 0..{N}")
        elif isinstance(obs, dict) and set(obs) == {"map"} and isinstance(obs["map"], dict):
            m = obs["map"]
            for k, v in m.items():
                if k not in space:
                    c.err(f"observable.map.{k}", f"{k!r} is not a path label")
                elif not isinstance(v, str):
                    c.err(f"observable.map.{k}", "values must be strings")
            missing = [p for p in space.labels if p not in m]
            if missing:
                c.err("observable.map", f"no value for path {missing[0]!r}")
        else:
            c.err("observable", "expected a string or {\"map\": {path: value}}")
    for name in ("f", "W", "alpha", "beta", "zeta"):
        if name in data:
            c.path_function(name, data[name], sp, space, N)
    for name in ("t_index", "s_index"):
        if name in data:
            v = data[name]
            if not isinstance(v, int) or isinstance(v, bool) or not 0 <= v <= N:
                c.err(name, f"expected an integer in 0..{N}")
    opts = data.get("options", {})
    if not isinstance(opts, dict):
        c.err("options", "expected an object")
    else:
        for k, v in opts.items():
            if k not in _OPTION_TYPES:
                c.err(f"options.{k}", "unknown option")
            elif _OPTION_TYPES[k] is int and (not isinstance(v, int) or isinstance(v, bool) or v < 1):
                c.err(f"options.{k}", "expected a positive integer")
            elif _OPTION_TYPES[k] is float and (c.number(f"options.{k}", v) and v <= 0):
                c.err(f"options.{k}", "must be positive")
    if c.errors:
        raise SchemaError(c.errors)
    return ProblemSpec(_thaw(data))


def parse_spec(path: str) -> tuple[ProblemSpec, bytes]:
    """Read and validate an input file (or ``example:<name>`` for a bundled one)."""
    try:
        if path.startswith("example:"):
            raw = resources.files("pathmeasures").joinpath("data", path[8:] + ".json").read_bytes()
        else:
            with open(path, "rb") as fh:
                raw = fh.read()
    except OSError as e:
        raise IoError(f"cannot read {path}: {e.strerror or e}") from None
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as e:
        raise IoError(f"{path} is not UTF-8: {e}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaError([(f"line {e.lineno} column {e.colno}", e.msg)]) from None
    return validate(data), raw


def bundled_examples() -> list[str]:
    d = resources.files("pathmeasures").joinpath("data")
    return sorted(p.name[:-5] for p in d.iterdir() if p.name.endswith(".json"))


# -- report serialization -------------------------------------------------------------------


def _fmt_float(x: float) -> str:
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    s = format(x, ".17g")
    return s if any(c in s for c in ".en") else s + ".0"


def dumps(obj, indent: int = 2, _level: int = 0) -> str:
    """Deterministic JSON: sorted keys, floats with 17 significant digits."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}"
                 for k, v in sorted(obj.items(), key=lambda kv: str(kv[0]))]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple)) for v in obj):
            return "[" + ", ".join(dumps(v, indent, _level + 1) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + dumps(v, indent, _level + 1) for v in obj) + "\n" + end + "]"
    if isinstance(obj, np.ndarray):
        return dumps(obj.tolist(), indent, _level)
    if obj is None or isinstance(obj, (bool, np.bool_)):
        return json.dumps(None if obj is None else bool(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    return json.dumps(str(obj))


def _table(labels, values) -> dict:
    return {lab: float(v) for lab, v in zip(labels, values)}


def _defined_table(cond) -> dict:
    return {lab: float(v) for lab, v in zip(cond.space.labels, cond.values) if not np.isnan(v)}


# -- helpers shared by the commands ----------------------------------------------------------


def observable_map(R: PathMeasure, obs) -> Map:
    if isinstance(obs, dict):
        return Map.from_dict(R.space, obs["map"])
    cols = _obs_coords(obs, R.N)
    target = FiniteSpace.product(*([R.states] * len(cols)), sep=SEP)
    idx = np.zeros(R.paths.shape[0], dtype=np.intp)
    for c in cols:
        idx = idx * R.states.size + R.paths[:, c]
    return Map(R.space, target, idx)


def path_function(R: PathMeasure, spec) -> np.ndarray:
    if isinstance(spec, list):
        return np.asarray(spec, dtype=float)
    if "paths" in spec:
        d = spec.get("default", 0.0)
        return np.array([float(spec["paths"].get(p, d)) for p in R.space.labels])
    vals = np.array([float(spec["values"].get(s, 0.0)) for s in R.states.labels])
    return vals[R.paths[:, spec["time"]]]


def _probability(R: PathMeasure, v) -> FiniteMeasure:
    return FiniteMeasure(R.space, _path_vector(R.space, v))


@dataclass
class Options:
    tol: float = DEFAULT_TOL
    max_iters: int = DEFAULT_MAX_ITERS
    depth: int = DEFAULT_DEPTH
    threshold: float = DEFAULT_THRESHOLD
    seed: int = DEFAULT_SEED

    def as_dict(self) -> dict:
        return {"tol": self.tol, "max_iters": self.max_iters, "depth": self.depth,
                "threshold": self.threshold, "seed": self.seed}


# -- commands ---------------------------------------------------------------------------------


def cmd_entropy(spec: ProblemSpec, R: PathMeasure, opt: Options):
    P = _probability(R, spec.get("P")) if "P" in spec.raw else R.weights.normalized()
    h = rel_entropy(P, R.weights)
    W = path_function(R, spec.get("W")) if "W" in spec.raw else None
    h_w = rel_entropy_W(P, R.weights, W, threshold=opt.threshold)
    phi = observable_map(R, spec.get("observable", "X_0X_N"))
    dec = entropy_decompose(P, R.weights, phi) if math.isfinite(h) else None
    results = {"relative_entropy": h, "relative_entropy_W": h_w,
               "compared_measure": "P" if "P" in spec.raw else "R/mass(R)"}
    if dec is not None:
        results["decomposition"] = {"observable": spec.get("observable", "X_0X_N"),
                                    "marginal_term": dec.marginal_term,
                                    "conditional_term": dec.conditional_term, "total": dec.total,
                                    "summands": dec.summands}
    return results, {"mass_R": R.mass}, True


def cmd_condition(spec: ProblemSpec, R: PathMeasure, opt: Options):
    phi = observable_map(R, spec.get("observable", "X_N"))
    f = path_function(R, spec.get("f")) if "f" in spec.raw else R.paths[:, -1].astype(float)
    r_phi, kernel = disintegrate(R.weights, phi)
    recon = kernel.mix(r_phi).weights
    kernels = {z: {p: float(w) for p, w in zip(R.space.labels, row.weights) if w > 0}
               for z, row in kernel.rows()}
    results = {"pushforward": _table(r_phi.space.labels, r_phi.weights), "kernel": kernels,
               "cond_expectation": _defined_table(cond_expect(R.weights, phi, f))}
    diag = {"reconstruction_error": float(np.max(np.abs(recon - R.weights.weights)))}
    if "P" in spec.raw:
        Q = _probability(R, spec.get("P"))
        fac = density_factorize(Q, R.weights, phi)
        via = cond_density_formula(Q, R.weights, phi, f)
        direct = cond_expect(Q, phi, f)
        on = via.defined
        results["density_factorization"] = {
            p: {"density": float(fac.lhs[i]), "marginal_factor": float(fac.marginal_factor[i]),
                "bridge_factor": float(fac.bridge_factor[i])}
            for i, p in enumerate(R.space.labels) if fac.included[i]}
        results["cond_expectation_P"] = _defined_table(via)
        diag["factorization_error"] = fac.max_error
        diag["density_formula_error"] = float(np.max(np.abs(via.values[on] - direct.values[on]), initial=0.0))
    return results, diag, True


def cmd_markov(spec: ProblemSpec, R: PathMeasure, opt: Options):
    checks = [check_markov(R, t) for t in range(R.N + 1)]
    cond = is_conditionable(R, depth=opt.depth, threshold=DEFAULT_ATOM_THRESHOLD)
    per_time = [{"t_index": t, "time": time, "sigma_finite": cond.passes(t)} for t, time, _ in cond.per_time]
    results = {"markov": [{"t_index": t, "is_markov": c.is_markov, "max_deviation": c.max_deviation}
                          for t, c in enumerate(checks)],
               "is_markov": all(c.is_markov for c in checks),
               "conditionable": cond.conditionable, "per_time": per_time,
               "sigma_finite_witness": cond.sigma_finite_witness}
    return results, {}, True


def cmd_factorize(spec: ProblemSpec, R: PathMeasure, opt: Options):
    one = np.ones(R.paths.shape[0])
    a = path_function(R, spec.get("alpha")) if "alpha" in spec.raw else one
    b = path_function(R, spec.get("beta")) if "beta" in spec.raw else one
    t = spec.get("t_index", min(1, R.N))
    rep = markov_factorization(R, a, b, t, threshold=opt.threshold)
    results = {"t_index": t, "rows": [vars(r) for r in rep.rows], "ok": rep.ok}
    ok = rep.ok
    if "zeta" in spec.raw or "s_index" in spec.raw:
        z = path_function(R, spec.get("zeta")) if "zeta" in spec.raw else one
        s = spec.get("s_index", t)
        if s > t:
            raise DomainError(f"s_index {s} exceeds t_index {t}")
        irep = markov_factorization_interval(R, a, z, b, s, t, threshold=opt.threshold)
        results["interval"] = {"s_index": s, "t_index": t, "rows": [vars(r) for r in irep.rows],
                               "ok": irep.ok}
        ok = ok and irep.ok
    return results, {}, ok


def _require_marginals(spec: ProblemSpec, R: PathMeasure):
    missing = [m for m in ("mu0", "mu1") if m not in spec.raw]
    if missing:
        raise SchemaError([(m, "required by this command") for m in missing])
    return _state_vector(R.states, spec.get("mu0")), _state_vector(R.states, spec.get("mu1"))


def cmd_bridge(spec: ProblemSpec, R: PathMeasure, opt: Options):
    mu0, mu1 = _require_marginals(spec, R)
    sol = solve_bridge(R, mu0, mu1, tol=opt.tol, max_iters=opt.max_iters)
    S = R.states.labels
    pi = sol.coupling.weights.reshape(len(S), len(S))
    results = {
        "coupling": [[float(x) for x in row] for row in pi],
        "coupling_labels": list(S),
        "f": _table(S, sol.fg.f), "g": _table(S, sol.fg.g),
        "entropy": sol.entropy,
        "decomposition": {"marginal_term": sol.decomposition.marginal_term,
                          "conditional_term": sol.decomposition.conditional_term},
        "path_measure": _table(R.space.labels, sol.path_measure.weights.weights),
    }
    return results, dict(sol.diagnostics), True


# -- the property battery ----------------------------------------------------------------------


def _item(name, passed, value=None, tol=None, note=None):
    out = {"name": name, "passed": passed}
    if value is not None:
        out["value"] = value
    if tol is not None:
        out["tol"] = tol
    if note is not None:
        out["note"] = note
    return out


def _random_on(rng, support: np.ndarray) -> np.ndarray:
    w = np.zeros(support.size)
    w[support] = rng.dirichlet(np.ones(int(support.sum())))
    return w


def cmd_check(spec: ProblemSpec, R: PathMeasure, opt: Options):
    rng = np.random.default_rng(opt.seed)
    items = []
    mass = R.mass
    scale = max(1.0, mass)
    sup = R.weights.support

    gap = max(abs(R.marginal(t).mass - mass) for t in range(R.N + 1))
    items.append(_item("marginal_mass", gap <= 1e-12 * scale, gap, 1e-12))

    obs = [("X_%d" % t) for t in range(R.N + 1)] + ["X_0X_N"]
    if "observable" in spec.raw:
        obs.append(spec.get("observable"))
    err = 0.0
    for o in obs:
        phi = observable_map(R, o)
        r_phi, k = disintegrate(R.weights, phi)
        err = max(err, float(np.max(np.abs(k.mix(r_phi).weights - R.weights.weights))))
    items.append(_item("disintegration", err <= 1e-12 * scale, err, 1e-12))

    dev = max(check_markov(R, t).max_deviation for t in range(R.N + 1))
    if "markov" in spec.raw:
        items.append(_item("markov", dev <= 1e-10, dev, 1e-10))
    else:
        items.append(_item("markov", None, dev, 1e-10, "explicit path weights: informational"))

    Rn = R.weights.normalized()
    h_min, spread, weak, dec_err, summand_min = math.inf, 0.0, -math.inf, 0.0, math.inf
    phi_dec = observable_map(R, spec.get("observable", "X_0X_N"))
    for _ in range(20):
        P = FiniteMeasure(R.space, _random_on(rng, sup))
        h = rel_entropy(P, Rn)
        h_min = min(h_min, h)
        h_ref = rel_entropy(P, R.weights)
        for _ in range(5):
            W = rng.exponential(2.0, R.space.size)
            spread = max(spread, abs(rel_entropy_W(P, R.weights, W) - h_ref))
        for _ in range(20):
            u = rng.normal(0.0, 2.0, R.space.size)
            weak = max(weak, dual_value(P, R.weights, u) - h_ref)
        dec = entropy_decompose(P, R.weights, phi_dec)
        dec_err = max(dec_err, abs(dec.total - h_ref))
        summand_min = min(summand_min, dec.min_summand)
    items.append(_item("entropy_nonnegative", h_min >= -1e-12, h_min, 1e-12))
    h_self = rel_entropy(Rn, Rn)
    items.append(_item("entropy_zero_at_reference", abs(h_self) <= 1e-12, h_self, 1e-12))
    items.append(_item("w_coherence", spread <= 1e-10, spread, 1e-10))
    items.append(_item("weak_duality", weak <= 1e-12, weak, 1e-12))
    P = FiniteMeasure(R.space, _random_on(rng, sup))
    _, _, dgap = dual_maximize(P, R.weights)
    items.append(_item("dual_gap", dgap <= 1e-6, dgap, 1e-6))
    items.append(_item("additive_decomposition", dec_err <= 1e-10, dec_err, 1e-10))
    items.append(_item("conditional_summands_nonnegative", summand_min >= -1e-12, summand_min, 1e-12))

    Q = FiniteMeasure(R.space, _random_on(rng, sup) * rng.uniform(0.5, 2.0))
    fac_err, form_err = 0.0, 0.0
    f = rng.normal(size=R.space.size)
    for o in obs:
        phi = observable_map(R, o)
        fac_err = max(fac_err, density_factorize(Q, R.weights, phi).max_error)
        via = cond_density_formula(Q, R.weights, phi, f)
        direct = cond_expect(Q, phi, f)
        on = via.defined
        form_err = max(form_err, float(np.max(np.abs(via.values[on] - direct.values[on]), initial=0.0)))
    items.append(_item("density_factorization", fac_err <= 1e-12, fac_err, 1e-12))
    items.append(_item("conditional_density_formula", form_err <= 1e-12, form_err, 1e-12))

    if "markov" in spec.raw:
        ok, worst = True, 0.0
        for t in range(R.N + 1):
            va = rng.exponential(1.0, (R.states.size,) * (t + 1))
            vb = rng.exponential(1.0, (R.states.size,) * (R.N - t + 1))
            a = va[tuple(R.paths[:, :t + 1].T)]
            b = vb[tuple(R.paths[:, t:].T)]
            rep = markov_factorization(R, a, b, t)
            ok = ok and rep.ok
            for r in rep.rows:
                if r.case == "positive":
                    worst = max(worst, abs(r.e_ab - r.product) / max(1.0, r.e_ab))
        items.append(_item("markov_factorization", ok, worst, 1e-12))

    if "mu0" in spec.raw and "mu1" in spec.raw:
        items.extend(_bridge_battery(spec, R, opt, rng))

    passed = all(it["passed"] is not False for it in items)
    summary = {"total": len(items), "passed": sum(it["passed"] is True for it in items),
               "failed": sum(it["passed"] is False for it in items),
               "informational": sum(it["passed"] is None for it in items)}
    return {"checks": items, "summary": summary}, {}, passed


def _bridge_battery(spec, R, opt, rng):
    mu0, mu1 = _require_marginals(spec, R)
    sol = solve_bridge(R, mu0, mu1, tol=opt.tol, max_iters=opt.max_iters)
    d = sol.diagnostics
    items = [
        _item("bridge_marginals", max(d["marginal_errors"]) <= 1e-10, max(d["marginal_errors"]), 1e-10),
        _item("bridge_invariance", d["bridge_deviation"] <= 1e-10, d["bridge_deviation"], 1e-10),
        _item("bridge_entropy_consistency", abs(sol.decomposition.conditional_term) <= 1e-10,
              sol.decomposition.conditional_term, 1e-10),
    ]
    S = R.states.size
    r01 = static_reduce(R)[0].weights
    K = r01.reshape(S, S)
    pi = sol.coupling.weights.reshape(S, S)
    g0 = rng.uniform(0.5, 2.0, S)
    alt = sinkhorn(K, mu0, mu1, tol=opt.tol, max_iters=opt.max_iters, init_g=g0).pi
    diff = float(np.max(np.abs(alt - pi)))
    items.append(_item("bridge_uniqueness", diff <= 1e-8, diff, 1e-8))
    support = K > 0
    h0 = rel_entropy(FiniteMeasure(sol.coupling.space, pi.reshape(-1)),
                     FiniteMeasure(sol.coupling.space, r01))
    worst, moves = math.inf, 0
    for _ in range(20):
        alt = basis_move(pi, support, rng)
        if alt is None:
            break
        moves += 1
        h1 = rel_entropy(FiniteMeasure(sol.coupling.space, alt.reshape(-1)),
                         FiniteMeasure(sol.coupling.space, r01))
        worst = min(worst, h1 - h0)
    if moves:
        items.append(_item("bridge_optimality", worst >= -1e-12, worst, 1e-12))
    else:
        items.append(_item("bridge_optimality", None, None, 1e-12, "no feasible perturbation exists"))
    return items


_DISPATCH = {"entropy": cmd_entropy, "condition": cmd_condition, "markov": cmd_markov,
             "factorize": cmd_factorize, "bridge": cmd_bridge, "check": cmd_check}


def run(command: str, spec: ProblemSpec, opt: Options | None = None, digest: str = "") -> tuple[dict, int]:
    """Execute ``command`` and return ``(report, exit status)``."""
    if command not in _DISPATCH:
        raise ValueError(f"unknown command {command!r}")
    opt = opt or options_for(spec)
    report = {"report_version": REPORT_VERSION, "version": __version__, "command": command,
              "input_digest": digest, "spec": spec.to_dict(), "options": opt.as_dict(),
              "seed": opt.seed}
    try:
        R = spec.reference()
        results, diag, ok = _DISPATCH[command](spec, R, opt)
    except SchemaError as e:
        report.update(status="schema_error", errors=[{"field": p, "message": m} for p, m in e.errors])
        return report, EXIT_SCHEMA
    except DomainError as e:
        report.update(status="domain_error", error={"type": type(e).__name__, "message": str(e)})
        return report, EXIT_DOMAIN
    report.update(results=results, diagnostics=diag, status="ok" if ok else "failed")
    return report, EXIT_OK if ok else EXIT_DOMAIN


def options_for(spec: ProblemSpec, args: argparse.Namespace | None = None) -> Options:
    opt = Options(tol=float(spec.option("tol", DEFAULT_TOL)),
                  max_iters=int(spec.option("max_iters", DEFAULT_MAX_ITERS)),
                  depth=int(spec.option("depth", DEFAULT_DEPTH)),
                  threshold=float(spec.option("threshold", DEFAULT_THRESHOLD)))
    if args is not None:
        for name in ("tol", "max_iters", "depth", "threshold", "seed"):
            v = getattr(args, name)
            if v is not None:
                setattr(opt, name, v)
    return opt


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pathmeasures", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("spec", help="input JSON file, or example:<name> for a bundled one")
        s.add_argument("--tol", type=float)
        s.add_argument("--max-iters", dest="max_iters", type=int)
        s.add_argument("--depth", type=int)
        s.add_argument("--threshold", type=float)
        s.add_argument("--seed", type=int)
        s.add_argument("--output", help="write the report here instead of stdout")
    sub.add_parser("examples", help="list bundled example files")
    return p


def _emit(text: str, output: str | None) -> int:
    if output is None:
        sys.stdout.write(text)
        return EXIT_OK
    try:
        with open(output, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as e:
        print(f"error: cannot write {output}: {e.strerror or e}", file=sys.stderr)
        return EXIT_SCHEMA
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "examples":
        print("\n".join(bundled_examples()))
        return EXIT_OK
    try:
        spec, raw = parse_spec(args.spec)
    except IoError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_SCHEMA
    except SchemaError as e:
        for path, msg in e.errors:
            print(f"schema error: {path}: {msg}", file=sys.stderr)
        return EXIT_SCHEMA
    opt = options_for(spec, args)
    report, status = run(args.command, spec, opt, hashlib.sha256(raw).hexdigest())
    if status != EXIT_OK and "error" in report:
        print(f"error: {report['error']['type']}: {report['error']['message']}", file=sys.stderr)
    return _emit(dumps(report) + "\n", args.output) or status


if __name__ == "__main__":
    sys.exit(main())
