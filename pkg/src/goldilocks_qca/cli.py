"""Command-line front end.

Every task reads a flat parameter map, either from a YAML file::

    task: evolve-gaussian
    parameters:
      L: 256
      steps: 1000
      alpha: pi/4

or from ``-p key=value`` pairs (which override the file). Run
``goldilocks-qca TASK --help-params`` for a task's schema.
"""

from __future__ import annotations

import argparse
import ast
import math
import operator
import os
import sys
from dataclasses import dataclass

import numpy as np
import yaml

from . import __version__

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3
DEFAULT_L_MAX = 22


class ConfigError(Exception):
    def __init__(self, message, line=None, source=None):
        super().__init__(message)
        self.line, self.source = line, source

    def __str__(self):
        where = ""
        if self.source:
            where = f"{self.source}:"
            where += f"{self.line}:" if self.line is not None else ""
            where += " "
        return where + self.args[0]


class NumericalFailure(Exception):
    pass


# --- value parsing ------------------------------------------------------------

_OPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
    ast.USub: operator.neg,
    ast.UAdd: operator.pos,
}
_NAMES = {"pi": math.pi, "e": math.e, "j": 1j}


def _eval_number(text: str):
    """Arithmetic on literals and ``pi``, e.g. ``"pi/4"`` or ``"0.3+0.7j"``."""

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float, complex)):
            return node.value
        if isinstance(node, ast.Name) and node.id in _NAMES:
            return _NAMES[node.id]
        if isinstance(node, ast.BinOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.operand))
        raise ValueError(f"unsupported expression {text!r}")

    return ev(ast.parse(str(text).strip(), mode="eval"))


def _to_float(v):
    if isinstance(v, bool):
        raise ValueError("expected a number")
    x = _eval_number(v) if isinstance(v, str) else v
    if isinstance(x, complex):
        raise ValueError("expected a real number")
    return float(x)


def _to_int(v):
    if isinstance(v, bool):
        raise ValueError("expected an integer")
    if isinstance(v, str):
        v = _eval_number(v)
    if isinstance(v, float) and not v.is_integer():
        raise ValueError("expected an integer")
    return int(v)


def _to_complex(v):
    if isinstance(v, (list, tuple)) and len(v) == 2:
        return complex(float(v[0]), float(v[1]))
    x = _eval_number(v) if isinstance(v, str) else v
    return complex(x)


def _to_bool(v):
    if isinstance(v, bool):
        return v
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected a boolean")


def _listof(conv):
    def parse(v):
        if isinstance(v, str):
            v = [p for p in v.replace("[", "").replace("]", "").split(",") if p.strip()]
        elif not isinstance(v, (list, tuple)):
            v = [v]
        return [conv(x.strip() if isinstance(x, str) else x) for x in v]

    return parse


def _choice(*options):
    def parse(v):
        s = str(v).strip().lower()
        if s not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return s

    return parse


def _int_or_inf(v):
    if isinstance(v, str) and v.strip().lower() in ("inf", "infinity"):
        return math.inf
    return _to_int(v)


def _optional(conv):
    def parse(v):
        if v is None or (isinstance(v, str) and v.strip().lower() in ("", "none", "null")):
            return None
        return conv(v)

    return parse


@dataclass(frozen=True)
class Param:
    convert: object
    default: object = None
    required: bool = False
    help: str = ""


_V_PARAMS = {
    "alpha": Param(_optional(_to_float), None, help="V_free angle (radians, expressions like pi/4 allowed)"),
    "beta": Param(_to_float, 0.0, help="V_free phase"),
    "sign": Param(_to_int, -1, help="V_free sign label, +1 or -1"),
    "a": Param(_optional(_to_complex), None, help="generic V'(a, b) entry"),
    "b": Param(_optional(_to_complex), None, help="generic V'(a, b) entry"),
    "random": Param(_to_bool, False, help="draw V' from --seed"),
    "rule": Param(_choice("goldilocks", "pxp", "fa"), "goldilocks", help="activation rule"),
}
_STATE_PARAMS = {
    "theta": Param(_to_float, math.pi / 2, help="tilted-ferromagnet polar angle"),
    "phi": Param(_to_float, math.pi / 2, help="tilted-ferromagnet azimuth"),
}
_OBS_PARAMS = {
    "gamma": Param(_choice("x", "y", "z"), "y", help="Pauli letter of the string"),
    "ks": Param(_listof(_to_int), [1, 2, 3, 4], help="string lengths"),
    "offset": Param(_optional(_to_int), None, help="string position; omitted means cyclic average"),
    "every": Param(_to_int, 1, help="record every n-th step"),
}

SCHEMAS = {
    "evolve-exact": {
        "L": Param(_to_int, required=True),
        "steps": Param(_to_int, required=True),
        **_V_PARAMS,
        **_STATE_PARAMS,
        **_OBS_PARAMS,
        "seeds": Param(_optional(_listof(_to_int)), None, help="sweep over random V' seeds"),
        "l_max": Param(_to_int, DEFAULT_L_MAX, help="largest L allowed for dense evolution"),
    },
    "evolve-gaussian": {
        "L": Param(_to_int, required=True),
        "steps": Param(_to_int, required=True),
        "alpha": Param(_to_float, required=True),
        "beta": Param(_to_float, 0.0),
        "sign": Param(_to_int, -1),
        **_OBS_PARAMS,
    },
    "charges-verify": {
        "L": Param(_to_int, 8),
        **_V_PARAMS,
        "seeds": Param(_optional(_listof(_to_int)), None, help="check Q1 against random V' seeds"),
        "charges": Param(_optional(_listof(str)), None, help="names from the library (default all)"),
        "printed": Param(_to_bool, False, help="use the typeset Q4/Q6/Q7/Q11"),
        "pozsgay": Param(_to_bool, False, help="check the three terms at alpha = pi/2"),
        "tol": Param(_to_float, 1e-10),
    },
    "charges-search": {
        "L": Param(_to_int, 12),
        "support_max": Param(_to_int, 5),
        **_V_PARAMS,
        "bracket_set": Param(_choice("both", "full", "even"), "both"),
        "support_measure": Param(_choice("cell", "string"), "cell"),
    },
    "gge-fit": {
        "L": Param(_to_int, 10),
        "alpha": Param(_to_float, math.pi / 4),
        **_STATE_PARAMS,
        "charges": Param(_optional(_listof(str)), None),
        "jacobian": Param(_choice("analytic", "fd"), "analytic"),
        "tol": Param(_to_float, 1e-8),
    },
    "gge-predict": {
        "mode": Param(_choice("library", "single-charge"), "library"),
        "L": Param(_int_or_inf, 10),
        "alpha": Param(_to_float, math.pi / 4),
        **_STATE_PARAMS,
        "gamma": Param(_choice("x", "y", "z"), "y"),
        "ks": Param(_listof(_to_int), [1, 2, 3, 4]),
        "charges": Param(_optional(_listof(str)), None),
    },
    "spectra": {
        "L": Param(_to_int, 14),
        "K": Param(_to_int, 1),
        "q1": Param(_to_int, 2),
        **_V_PARAMS,
        "seeds": Param(_optional(_listof(_to_int)), None, help="median over random V' seeds"),
        "bins": Param(_to_int, 25),
        "wrap": Param(_to_bool, True, help="include the circular wrap spacing"),
        "operator": Param(_choice("shift-layer", "step"), "shift-layer"),
    },
    "sixvertex-check": {
        "alpha": Param(_to_float, math.pi / 4),
        "beta": Param(_to_float, 0.0),
        "eps1": Param(_to_int, 1),
        "eps2": Param(_to_int, -1),
        "weights": Param(_optional(str), None, help="JSON file with weights and gauge"),
    },
}

TASKS = tuple(SCHEMAS)


def _key_lines(text: str) -> dict:
    """Line numbers (1-based) of keys in the YAML mapping and its ``parameters`` block."""
    lines = {}
    try:
        node = yaml.compose(text)
    except yaml.YAMLError:
        return lines
    if not isinstance(node, yaml.MappingNode):
        return lines
    for k, v in node.value:
        lines[k.value] = k.start_mark.line + 1
        if k.value == "parameters" and isinstance(v, yaml.MappingNode):
            for pk, _ in v.value:
                lines["parameters." + str(pk.value)] = pk.start_mark.line + 1
    return lines


def load_config(path):
    """Return ``(task, seed, raw parameters, key line map)`` from a YAML file."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", source=path) from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise ConfigError(f"invalid YAML: {getattr(exc, 'problem', exc)}", line, path) from None
    lines = _key_lines(text)
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("top level must be a mapping", 1, path)
    allowed = {"task", "seed", "parameters"}
    for key in data:
        if key not in allowed:
            raise ConfigError(f"unknown top-level key {key!r}", lines.get(key), path)
    params = data.get("parameters") or {}
    if not isinstance(params, dict):
        raise ConfigError("'parameters' must be a mapping", lines.get("parameters"), path)
    return data.get("task"), data.get("seed"), params, lines


def validate(task: str, raw: dict, lines=None, source=None) -> dict:
    """Convert raw values against the task schema, filling defaults."""
    if task not in SCHEMAS:
        raise ConfigError(f"unknown task {task!r}; choose from {', '.join(TASKS)}", (lines or {}).get("task"), source)
    schema = SCHEMAS[task]
    lines = lines or {}
    out = {}
    for key, val in raw.items():
        line = lines.get("parameters." + str(key))
        if key not in schema:
            raise ConfigError(f"unknown parameter {key!r} for task {task}", line, source)
        try:
            out[key] = schema[key].convert(val)
        except (ValueError, TypeError, SyntaxError) as exc:
            raise ConfigError(f"parameter {key!r}: {exc}", line, source) from None
    for key, p in schema.items():
        if key not in out:
            if p.required:
                raise ConfigError(f"missing required parameter {key!r} for task {task}", None, source)
            out[key] = p.default
    return out


# --- task runners -------------------------------------------------------------


@dataclass
class TaskOutput:
    records: list
    columns: tuple
    meta: dict
    summary: str = ""
    extra: list = None  # [(suffix, records, columns)]
    failure: str | None = None


def _resolve_V(p, seed):
    from .core import make_single_site_unitary, sample_random_unitary

    if p.get("a") is not None or p.get("b") is not None:
        return make_single_site_unitary(a=p.get("a") or 0, b=p.get("b") or 0)
    if p.get("random"):
        return sample_random_unitary(0 if seed is None else seed)
    if p.get("alpha") is None:
        raise ConfigError("give alpha (V_free), a/b (V'), or random: true")
    if p["sign"] not in (1, -1):
        raise ConfigError("sign must be +1 or -1")
    return make_single_site_unitary(p["alpha"], p["beta"], p["sign"])


def _check_L(L, even=True, low=2):
    if L < low or (even and L % 2):
        raise ConfigError(f"L must be an even integer >= {low}, got {L}")


def run_evolve_exact(p, seed):
    from .core import CircuitSpec, iter_evolution, tilted_ferromagnet, expectation_string

    _check_L(p["L"], low=4)
    if p["L"] > p["l_max"]:
        raise ConfigError(f"L={p['L']} exceeds l_max={p['l_max']} for dense evolution")
    if p["steps"] < 0 or p["every"] < 1:
        raise ConfigError("steps must be >= 0 and every >= 1")
    for k in p["ks"]:
        if not 1 <= k <= p["L"]:
            raise ConfigError(f"string length {k} outside [1, L]")
    from .core import sample_random_unitary

    sweep = p["seeds"] is not None
    Vs = [(s, sample_random_unitary(s)) for s in p["seeds"]] if sweep else [(seed, _resolve_V(p, seed))]
    psi0 = tilted_ferromagnet(p["L"], p["theta"], p["phi"])
    records = []
    for s, V in Vs:
        spec = CircuitSpec(p["L"], V, p["rule"])
        for t, psi in iter_evolution(psi0, spec, p["steps"]):
            if t % p["every"]:
                continue
            for k in p["ks"]:
                rec = {"t": t, "k": k, "value": expectation_string(psi, p["L"], p["gamma"], k, p["offset"])}
                if sweep:
                    rec["seed"] = s
                records.append(rec)
    meta = {"V": np.asarray(Vs[0][1].matrix).tolist() if not sweep else "per seed"}
    if not sweep:
        return TaskOutput(records, ("t", "k", "value"), meta, f"{len(records)} rows")
    median = []
    keys = sorted({(r["t"], r["k"]) for r in records})
    groups = {}
    for r in records:
        groups.setdefault((r["t"], r["k"]), []).append(r["value"])
    for t, k in keys:
        median.append({"t": t, "k": k, "value": float(np.median(groups[(t, k)]))})
    return TaskOutput(
        records,
        ("seed", "t", "k", "value"),
        meta,
        f"{len(p['seeds'])} seeds, {len(records)} rows",
        extra=[("median", median, ("t", "k", "value"))],
    )


def run_evolve_gaussian(p, seed):
    from .gaussian import build_step, string_series, vacuum_covariance

    _check_L(p["L"], low=4)
    if p["sign"] not in (1, -1):
        raise ConfigError("sign must be +1 or -1")
    for k in p["ks"]:
        if not 1 <= k <= p["L"]:
            raise ConfigError(f"string length {k} outside [1, L]")
    step = build_step(p["alpha"], p["beta"], p["sign"], p["L"])
    series = string_series(vacuum_covariance(p["L"]), step, p["steps"], p["gamma"], p["ks"], p["offset"])
    records = [
        {"t": t, "k": k, "value": float(series[t, i])}
        for t in range(0, p["steps"] + 1, p["every"])
        for i, k in enumerate(p["ks"])
    ]
    meta = {"initial_state": "rotated-frame vacuum (y-ferromagnet when beta = 0)", "orthogonality_residual": step.orthogonality_residual()}
    return TaskOutput(records, ("t", "k", "value"), meta, f"{len(records)} rows")


def run_charges_verify(p, seed):
    from .charges import charge_library, pozsgay_terms, rotate_charge, verify_conserved
    from .core import make_single_site_unitary, sample_random_unitary, step_matrix

    L = p["L"]
    _check_L(L, low=6)
    if L > 14:
        raise ConfigError("charges-verify builds dense unitaries; L <= 14")
    records = []
    failures = []

    def check(label, U, charges, s=None):
        for q in charges:
            res = verify_conserved(U, q, L, p["tol"])
            rec = {"charge": q.name, "residual": res.residual, "conserved": res.conserved}
            if s is not None:
                rec["seed"] = s
            records.append(rec)
            if not res.conserved:
                failures.append(f"{label} {q.name}: residual {res.residual:.3e}")

    lib = None
    if p["seeds"] is not None:
        q1 = charge_library(0.0)[0]
        for s in p["seeds"]:
            check(f"seed {s}", step_matrix(L, sample_random_unitary(s), p["rule"]), [q1], s)
        cols = ("seed", "charge", "residual", "conserved")
    else:
        if p["pozsgay"]:
            V = make_single_site_unitary(math.pi / 2, 0.0, p["sign"])
            charges = pozsgay_terms()
        else:
            V = _resolve_V(p, seed)
            if p.get("alpha") is not None and p["a"] is None and not p["random"]:
                lib = charge_library(p["alpha"], printed=p["printed"])
                if p["beta"]:
                    lib = [rotate_charge(q, p["beta"]) for q in lib]
            else:
                lib = charge_library(0.0)[:1]
            if p["charges"]:
                names = {q.name: q for q in lib}
                unknown = [n for n in p["charges"] if n not in names]
                if unknown:
                    raise ConfigError(f"unknown charge names {unknown}")
                lib = [names[n] for n in p["charges"]]
            charges = lib
        check("V", step_matrix(L, V, p["rule"]), charges)
        cols = ("charge", "residual", "conserved")
    summary = f"{sum(r['conserved'] for r in records)}/{len(records)} conserved"
    return TaskOutput(records, cols, {}, summary, failure="; ".join(failures) or None)


def run_charges_search(p, seed):
    from .charges import search_conserved

    V = _resolve_V(p, seed)
    L = p["L"]
    if L < 2 * p["support_max"] + 2:
        raise ConfigError(f"L must be at least 2*support_max+2 = {2 * p['support_max'] + 2}")
    _check_L(L)
    res = search_conserved(V, p["support_max"], L, p["bracket_set"], p["rule"], p["support_measure"])
    records = [{"index": i, "name": q.name, "charge": str(q)} for i, q in enumerate(res.charges)]
    meta = {
        "dimension": res.dimension,
        "gap_ratio": res.gap_ratio,
        "certified": res.certified,
        "smallest_singular_values": [float(s) for s in res.singular_values[: res.dimension + 3]],
    }
    return TaskOutput(records, ("index", "name", "charge"), meta, f"dimension {res.dimension}")


def _library_subset(alpha, names):
    from .charges import charge_library

    lib = charge_library(alpha)
    if not names:
        return lib
    table = {q.name: q for q in lib}
    unknown = [n for n in names if n not in table]
    if unknown:
        raise ConfigError(f"unknown charge names {unknown}")
    return [table[n] for n in names]


def run_gge_fit(p, seed):
    from .core import tilted_ferromagnet
    from .gge import MAX_DENSE_L, fit_potentials

    _check_L(p["L"], low=6)
    if p["L"] > MAX_DENSE_L:
        raise ConfigError(f"dense GGE needs L <= {MAX_DENSE_L}")
    charges = _library_subset(p["alpha"], p["charges"])
    spec = fit_potentials(charges, tilted_ferromagnet(p["L"], p["theta"], p["phi"]), p["L"], tol=p["tol"], jacobian=p["jacobian"])
    records = [
        {"charge": q.name, "mu": float(m), "residual": float(r)}
        for q, m, r in zip(spec.charges, spec.mu, spec.residuals)
    ]
    fail = None if spec.converged else f"fit did not converge (max residual {np.abs(spec.residuals).max():.3e})"
    return TaskOutput(records, ("charge", "mu", "residual"), {"iterations": spec.iterations, "converged": spec.converged}, f"{len(records)} potentials", failure=fail)


def run_gge_predict(p, seed):
    from .core import tilted_ferromagnet
    from .gge import MAX_DENSE_L, analytic_single_charge, fit_potentials, gge_expectations

    if p["mode"] == "single-charge":
        if p["gamma"] != "z":
            raise ConfigError("single-charge predictions are for gamma = z")
        records = []
        for k in p["ks"]:
            pr = analytic_single_charge(p["theta"], k, p["L"])
            records.append({"k": k, "mu": pr.mu, "value": pr.prediction})
        if any(math.isinf(r["mu"]) for r in records):
            raise NumericalFailure("chemical potential diverges at cos^2(theta) = 1")
        return TaskOutput(records, ("k", "mu", "value"), {"L": str(p["L"])}, f"{len(records)} predictions")
    L = p["L"]
    if math.isinf(L):
        raise ConfigError("library mode needs a finite L")
    _check_L(L, low=6)
    if L > MAX_DENSE_L:
        raise ConfigError(f"dense GGE needs L <= {MAX_DENSE_L}")
    charges = _library_subset(p["alpha"], p["charges"])
    spec = fit_potentials(charges, tilted_ferromagnet(L, p["theta"], p["phi"]), L)
    vals = gge_expectations(spec, p["gamma"], p["ks"])
    records = [{"k": k, "value": float(v)} for k, v in zip(p["ks"], vals)]
    fail = None if spec.converged else "GGE fit did not converge"
    meta = {"mu": dict(zip([q.name for q in charges], spec.mu.tolist()))}
    return TaskOutput(records, ("k", "value"), meta, f"{len(records)} predictions", failure=fail)


def run_spectra(p, seed):
    from .core import sample_random_unitary
    from .spectra import HISTOGRAM_COLUMNS, SectorLeakageError, median_statistics, ratio_statistics, sector_basis, sector_quasienergies, spacing_ratios

    try:
        sector = sector_basis(p["L"], p["K"], p["q1"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if sector.N < 3:
        raise ConfigError(f"sector has only {sector.N} levels")
    if p["seeds"] is not None:
        Vs = [(s, sample_random_unitary(s)) for s in p["seeds"]]
    else:
        Vs = [(seed, _resolve_V(p, seed))]
    stats, per_seed = [], []
    try:
        for s, V in Vs:
            spec = sector_quasienergies(V, sector, p["operator"], p["rule"])
            r = spacing_ratios(spec, wrap=p["wrap"])
            st = ratio_statistics(r.values, p["bins"])
            stats.append(st)
            per_seed.append({"seed": s, "l1_poisson": st.l1_poisson, "l1_wd": st.l1_wd, "mean_r": st.mean_r, "degenerate": r.degenerate})
    except SectorLeakageError as exc:
        raise NumericalFailure(str(exc)) from None
    final = stats[0] if len(stats) == 1 else median_statistics(stats)
    meta = {
        "L": p["L"],
        "K": sector.K,
        "q1": p["q1"],
        "N": sector.N,
        "seeds": [s for s, _ in Vs],
        "wrap": p["wrap"],
        "l1_poisson": final.l1_poisson,
        "l1_wd": final.l1_wd,
        "per_seed": per_seed,
    }
    summary = f"N={sector.N} L1(Poisson)={final.l1_poisson:.4f} L1(WD)={final.l1_wd:.4f} closer to {final.closer_to}"
    return TaskOutput(list(final.rows()), HISTOGRAM_COLUMNS, meta, summary)


def run_sixvertex_check(p, seed):
    from .core import neighborhood_gate, vfree_matrix
    from .sixvertex import free_fermion_residual, from_json, gate_from_weights, solve_goldilocks, weights_from_vfree

    if p["weights"]:
        try:
            with open(p["weights"]) as fh:
                w, g = from_json(fh.read())
        except (OSError, ValueError, KeyError) as exc:
            raise ConfigError(f"cannot load weights: {exc}") from None
    else:
        if p["eps1"] not in (1, -1) or p["eps2"] not in (1, -1):
            raise ConfigError("eps1 and eps2 must be +1 or -1")
        w, g = weights_from_vfree(p["alpha"], p["beta"], p["eps1"], p["eps2"])
    sol = solve_goldilocks(w, g)
    ff = abs(free_fermion_residual(w))
    rec = {
        "feasible": sol.feasible,
        "violated": sol.violated or "",
        "alpha": sol.alpha,
        "beta": sol.beta,
        "eps1": sol.eps1,
        "eps2": sol.eps2,
        "free_fermion_residual": ff,
        "gate_residual": None,
    }
    if sol.feasible:
        target = neighborhood_gate(vfree_matrix(sol.alpha, sol.beta, sol.eps2))
        rec["gate_residual"] = float(np.abs(gate_from_weights(w, g).three_site() - target).max())
    verdict = "feasible" if sol.feasible else f"infeasible ({sol.violated})"
    summary = f"free-fermion residual {ff:.3e}; {verdict}"
    fail = None
    if sol.feasible and ff > 1e-12:
        fail = f"feasible weights with free-fermion residual {ff:.3e}"
    meta = {"weights": w.to_dict(), "gauge": g.to_dict()}
    cols = ("feasible", "violated", "alpha", "beta", "eps1", "eps2", "free_fermion_residual", "gate_residual")
    return TaskOutput([rec], cols, meta, summary, failure=fail)


RUNNERS = {
    "evolve-exact": run_evolve_exact,
    "evolve-gaussian": run_evolve_gaussian,
    "charges-verify": run_charges_verify,
    "charges-search": run_charges_search,
    "gge-fit": run_gge_fit,
    "gge-predict": run_gge_predict,
    "spectra": run_spectra,
    "sixvertex-check": run_sixvertex_check,
}


def run(task: str, params: dict, seed=None, out=None, fmt="csv", config_echo=None, stream=sys.stdout) -> int:
    """Validate, dispatch and emit; returns the process exit code."""
    from .output import emit, metadata_header

    result = RUNNERS[task](params, seed)
    meta = metadata_header({"task": task, "seed": seed, "parameters": config_echo or params}, **result.meta)
    emit(result.records, out, result.columns, fmt, meta)
    for suffix, recs, cols in result.extra or []:
        if out is not None:
            root, ext = os.path.splitext(out)
            emit(recs, f"{root}_{suffix}{ext}", cols, fmt, meta)
    if out is None:
        from .output import render_csv, render_json

        render = render_csv if fmt == "csv" else render_json
        stream.write(render(result.records, result.columns, meta))
    if result.summary:
        print(f"{task}: {result.summary}", file=sys.stderr)
    if result.failure:
        raise NumericalFailure(result.failure)
    return EXIT_OK


def _parse_overrides(pairs):
    out = {}
    for item in pairs or []:
        key, sep, val = item.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"override {item!r} is not key=value")
        out[key.strip()] = val.strip()
    return out


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="RNG seed for random updates")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output file (default: stdout)")
    common.add_argument("--format", choices=("csv", "json"), default=argparse.SUPPRESS)

    parser = argparse.ArgumentParser(prog="goldilocks-qca", description="Goldilocks QCA simulation and analysis", parents=[common])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="task", metavar="TASK")
    for task in TASKS:
        sp = sub.add_parser(task, parents=[common], help=f"run the {task} task")
        sp.add_argument("--config", help="YAML file with a 'parameters' mapping")
        sp.add_argument("-p", "--param", action="append", metavar="KEY=VALUE", help="parameter override")
        sp.add_argument("--help-params", action="store_true", help="list the task's parameters")
    rp = sub.add_parser("run", parents=[common], help="run the task named in a config file")
    rp.add_argument("config")
    rp.add_argument("-p", "--param", action="append", metavar="KEY=VALUE")
    return parser


def _schema_text(task):
    lines = [f"parameters for {task}:"]
    for key, p in SCHEMAS[task].items():
        default = "required" if p.required else f"default {p.default!r}"
        lines.append(f"  {key:16s} {default}" + (f"  {p.help}" if p.help else ""))
    return "\n".join(lines)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.task is None:
        parser.print_help(sys.stderr)
        return EXIT_CONFIG
    if getattr(args, "help_params", False):
        print(_schema_text(args.task))
        return EXIT_OK
    seed = getattr(args, "seed", None)
    out = getattr(args, "out", None)
    fmt = getattr(args, "format", "csv")
    try:
        task, raw, lines, source = args.task, {}, {}, None
        config = getattr(args, "config", None)
        if config:
            cfg_task, cfg_seed, raw, lines = load_config(config)
            source = config
            if args.task == "run":
                if cfg_task is None:
                    raise ConfigError("config does not name a task", None, source)
                task = cfg_task
            elif cfg_task is not None and cfg_task != args.task:
                raise ConfigError(f"config is for task {cfg_task!r}, not {args.task!r}", lines.get("task"), source)
            if seed is None and cfg_seed is not None:
                try:
                    seed = _to_int(cfg_seed)
                except ValueError:
                    raise ConfigError("seed must be an integer", lines.get("seed"), source) from None
        raw = {**raw, **_parse_overrides(args.param)}
        params = validate(task, raw, lines, source)
        echo = {k: (v if not isinstance(v, complex) else [v.real, v.imag]) for k, v in params.items()}
        if isinstance(echo.get("L"), float):
            echo["L"] = str(echo["L"])
        return run(task, params, seed, out, fmt, echo)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ArithmeticError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"output error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
