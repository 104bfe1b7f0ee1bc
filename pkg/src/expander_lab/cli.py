"""Command line pipeline: solve, analyze, verify, persist.

Every number written here comes from a module operation; this file parses
arguments, shuttles arrays between stages, and formats output. All CSV
output is comma separated with a header row and full-precision repr floats.
The output root comes from EXPANDER_LAB_OUT when that is set, otherwise
from the --out / out_dir arguments.
"""

import argparse
import hashlib
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import heat_cauchy
from . import variation
from ._numerics import smooth_bump
from .drift_elliptic import DriftedOperator, solve_decaying
from .expander_solve import solve_for_cone
from .geometry import (TransverseSection, cone_correction, expander_residual,
                       load_profile, save_profile)
from .jacobi import assemble_jacobi, asymptotic_trace, fredholm_index, index_sweep
from .weighted_spaces import decay_fit

STAGE_KINDS = ("solve-expander", "drift-solve", "jacobi", "asymptotics",
               "heat", "variation-check", "sweep")
HEAT_SOURCES = ("const", "cos", "bump", "random")
VARIATION_KINDS = ("normal", "tangent", "section")

PLOT_TEMPLATE = """#!/usr/bin/env python3
\"\"\"Plot kernel dimension against cone slope from a sweep plot-data CSV.

Works with any plotting tool; this template uses matplotlib when present
and falls back to a text dump otherwise.
\"\"\"
import csv
import sys

path = sys.argv[1] if len(sys.argv) > 1 else "sweep_plot.csv"
with open(path) as fh:
    lines = [ln for ln in fh if not ln.startswith("#")]
rows = [r for r in csv.DictReader(lines) if r["dim_ker"] != ""]
try:
    import matplotlib.pyplot as plt
except ImportError:
    for r in rows:
        print(r["slope"], r["mode"], r["dim_ker"])
    raise SystemExit(0)
for mode in sorted({r["mode"] for r in rows}, key=int):
    pts = [(float(r["slope"]), int(r["dim_ker"]))
           for r in rows if r["mode"] == mode]
    pts.sort()
    plt.step([p[0] for p in pts], [p[1] for p in pts],
             where="mid", label="mode %s" % mode)
plt.xlabel("cone slope")
plt.ylabel("dim ker")
plt.legend()
plt.tight_layout()
plt.savefig("sweep.png", dpi=150)
print("wrote sweep.png")
"""


class SchemaError(Exception):
    def __init__(self, path, message):
        super().__init__("%s: %s" % (path, message))
        self.path = path


def _out_root(explicit=None):
    env = os.environ.get("EXPANDER_LAB_OUT")
    root = env if env else (explicit if explicit else ".")
    os.makedirs(root, exist_ok=True)
    return root


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    return obj


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(_jsonable(obj), fh, sort_keys=True, indent=2)
        fh.write("\n")


def _fmt_cell(x):
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    text = str(x)
    if "," in text or '"' in text:
        text = '"' + text.replace('"', '""') + '"'
    return text


def _write_csv(path, header, rows, seed=None):
    # the seed preamble keeps randomized runs reproducible from any one file
    lines = [] if seed is None else ["# seed: %d" % seed]
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(_fmt_cell(c) for c in row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _sha256(path):
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(65536), b""):
            digest.update(block)
    return digest.hexdigest()


def parse_rhs(spec, curve):
    """zero | const:<c> | powerlaw:<d> | file:<path> -> node values."""
    kind, _, arg = str(spec).partition(":")
    if kind == "zero":
        return np.zeros(curve.rho.size)
    if kind == "const":
        return float(arg) * np.ones(curve.rho.size)
    if kind == "powerlaw":
        # capped inside the unit ball so the plane's axis node stays finite
        return np.maximum(curve.radius(), 1.0) ** float(arg)
    if kind == "file":
        with open(arg) as fh:
            vals = np.array([float(line) for line in fh if line.strip()])
        if vals.size != curve.rho.size:
            raise ValueError("rhs file has %d values for %d nodes"
                             % (vals.size, curve.rho.size))
        return vals
    raise ValueError("unknown rhs spec %r" % spec)


def parse_heat_source(spec, n, seed):
    """const:<c> | cos | bump | random[:<seed>] -> source callable."""
    kind, _, arg = str(spec).partition(":")
    if kind == "const":
        c = float(arg)
        return lambda ms, t: c * np.ones_like(ms[0])
    if kind == "cos":
        return lambda ms, t: np.cos(ms[0])
    if kind == "bump":
        return lambda ms, t: smooth_bump(ms[0], 0.5 * np.pi, 1.5 * np.pi)
    if kind == "random":
        rng = np.random.default_rng(int(arg) if arg else seed)
        modes = range(1, 4)
        if n == 1:
            amp = rng.normal(size=3)
            ph = rng.uniform(0, 2 * np.pi, size=3)

            def h1(ms, t):
                out = np.zeros_like(ms[0])
                for j, k in enumerate(modes):
                    out += amp[j] * np.cos(k * ms[0] + ph[j])
                return out
            return h1
        amp = rng.normal(size=(3, 3))
        ph = rng.uniform(0, 2 * np.pi, size=(3, 3, 2))

        def h2(ms, t):
            out = np.zeros_like(ms[0])
            for i, k in enumerate(modes):
                for j, m in enumerate(modes):
                    out += amp[i, j] * (np.cos(k * ms[0] + ph[i, j, 0])
                                        * np.cos(m * ms[1] + ph[i, j, 1]))
            return out
        return h2
    raise ValueError("unknown heat source %r" % spec)


def _build_variation_spec(curve, params):
    lo, hi = params["bump"]
    f = variation.bump_profile(curve, float(lo), float(hi),
                               amplitude=float(params.get("amplitude", 0.05)))
    step = float(params.get("step", 1e-3))
    kind = params.get("kind", "normal")
    if kind == "normal":
        return variation.normal_field(curve, f, step=step)
    if kind == "tangent":
        return variation.tangent_field(curve, f, step=step)
    vr, vz = params["section"]
    section = TransverseSection(curve.n, curve.slope,
                                v_rho=float(vr), v_z=float(vz))
    return variation.section_field(curve, f, section, step=step)


# ---------------------------------------------------------------------------
# stage executors: take a parameter dict, write files under out_dir, return
# the list of written file names (relative to out_dir)


def stage_solve_expander(params, out_dir, seed, label):
    curve = solve_for_cone(float(params["slope"]), int(params["dim"]),
                           rho_max=float(params.get("rho_max", 20.0)),
                           nodes=int(params.get("nodes", 2000)))
    profile = "%s_profile.csv" % label
    profile_path = os.path.join(out_dir, profile)
    save_profile(curve, profile_path)
    with open(profile_path) as fh:
        body = fh.read()
    with open(profile_path, "w") as fh:
        fh.write("# seed: %d\n" % seed + body)
    meta_path = os.path.join(out_dir, profile + ".meta.json")
    with open(meta_path) as fh:
        meta = json.load(fh)
    meta["seed"] = seed
    with open(meta_path, "w") as fh:
        json.dump(meta, fh, sort_keys=True)
        fh.write("\n")
    res = expander_residual(curve)
    summary = {
        "seed": seed,
        "slope": curve.slope,
        "dim": curve.n,
        "nodes": curve.rho.size,
        "rho_max": float(curve.rho[-1]),
        "axis_height": float(curve.u[0]) if curve.meets_axis else None,
        "residual_sup": float(np.max(np.abs(res.values))),
    }
    name = "%s_solve.json" % label
    _write_json(os.path.join(out_dir, name), summary)
    return [profile, profile + ".meta.json", name]


def stage_drift_solve(params, out_dir, seed, label):
    curve = load_profile(os.path.join(out_dir, params["surface"]))
    op = DriftedOperator(curve, mode=int(params.get("mode", 0)))
    rhs = parse_rhs(params["rhs"], curve)
    fld, report = solve_decaying(op, rhs, tol=float(params.get("tol", 1e-8)))
    rows = list(zip(fld.axis, fld.radius, rhs[:fld.values.size], fld.values))
    csv_name = "%s_drift.csv" % label
    _write_csv(os.path.join(out_dir, csv_name),
               ["rho", "radius", "source", "solution"], rows, seed=seed)
    summary = {"seed": seed, "mode": op.mode, "rhs": str(params["rhs"]),
               "exhaustion": report,
               "solution_sup": float(np.max(np.abs(fld.values)))}
    try:
        slope_fit, resid_fit = decay_fit(fld)
        summary["solution_decay"] = {"rate": slope_fit, "fit_residual": resid_fit}
    except ValueError as exc:
        summary["solution_decay"] = {"error": str(exc)}
    name = "%s_drift.json" % label
    _write_json(os.path.join(out_dir, name), summary)
    return [csv_name, name]


def stage_jacobi(params, out_dir, seed, label):
    curve = load_profile(os.path.join(out_dir, params["surface"]))
    per_mode = []
    for mode in params.get("modes", [0, 1, 2, 3]):
        op = assemble_jacobi(curve, int(mode))
        rep = fredholm_index(op)
        per_mode.append({"mode": int(mode),
                         "dim_ker": rep.dim_ker,
                         "dim_coker": rep.dim_coker,
                         "obstructed": rep.obstructed,
                         "sigma_min": float(np.min(rep.sigmas)),
                         "adjoint_eig_min": float(np.min(np.abs(rep.adjoint_eigs)))})
    name = "%s_jacobi.json" % label
    _write_json(os.path.join(out_dir, name),
                {"seed": seed, "slope": curve.slope, "dim": curve.n,
                 "modes": per_mode})
    return [name]


def stage_asymptotics(params, out_dir, seed, label):
    curve = load_profile(os.path.join(out_dir, params["surface"]))
    corr = cone_correction(curve)
    rows = list(zip(curve.rho, corr.radius, curve.u, corr.values))
    csv_name = "%s_asymptotics.csv" % label
    _write_csv(os.path.join(out_dir, csv_name),
               ["rho", "radius", "u", "correction"], rows, seed=seed)
    summary = {"seed": seed, "slope": curve.slope, "dim": curve.n}
    try:
        slope_fit, resid_fit = decay_fit(corr)
        summary["correction_decay"] = {"rate": slope_fit,
                                       "fit_residual": resid_fit}
    except (RuntimeError, ValueError) as exc:
        summary["correction_decay"] = {"error": str(exc)}
    try:
        a_u, trace_report = asymptotic_trace(corr)
        summary["trace_coefficient"] = a_u
        summary["trace_diagnostics"] = trace_report
    except (RuntimeError, ValueError) as exc:
        summary["trace_diagnostics"] = {"error": str(exc)}
    name = "%s_asymptotics.json" % label
    _write_json(os.path.join(out_dir, name), summary)
    return [csv_name, name]


def stage_heat(params, out_dir, seed, label):
    n = int(params["dim"])
    source = parse_heat_source(params.get("source", "cos"), n, seed)
    times = params.get("times")
    sol = heat_cauchy.duhamel_solve(
        source, n, nx=params.get("nx"),
        times=None if times is None else [float(t) for t in times])
    rows = []
    if n == 1:
        for k, t in enumerate(sol.t):
            for i, x in enumerate(sol.x):
                rows.append((t, x, sol.w[k, i]))
        header = ["time", "x", "w"]
    else:
        for k, t in enumerate(sol.t):
            for i, x in enumerate(sol.x):
                for j, y in enumerate(sol.x):
                    rows.append((t, x, y, sol.w[k, i, j]))
        header = ["time", "x", "y", "w"]
    csv_name = "%s_heat.csv" % label
    _write_csv(os.path.join(out_dir, csv_name), header, rows, seed=seed)
    summary = {"seed": seed, "dim": n, "source": str(params.get("source", "cos")),
               "times": sol.t, "sup_by_time": sol.sup_by_time(),
               "positive_part_max": heat_cauchy.max_principle_check(sol),
               "interior_pde_residual": heat_cauchy.pde_residual(sol)}
    beta = params.get("beta")
    if beta is not None:
        summary["schauder"] = heat_cauchy.schauder_report(sol, float(beta))
    name = "%s_heat.json" % label
    _write_json(os.path.join(out_dir, name), summary)
    return [csv_name, name]


def stage_variation_check(params, out_dir, seed, label, out_file=None):
    curve = load_profile(os.path.join(out_dir, params["surface"]))
    spec = _build_variation_spec(curve, params)
    first = variation.first_variation_check(curve, spec)
    summary = {"seed": seed, "kind": params.get("kind", "normal"),
               "bump": [float(b) for b in params["bump"]],
               "first_variation": first}
    if params.get("g_bump") is not None:
        lo, hi = params["g_bump"]
        f = variation.bump_profile(
            curve, *[float(b) for b in params["bump"]],
            amplitude=float(params.get("amplitude", 0.05)))
        g = variation.bump_profile(
            curve, float(lo), float(hi),
            amplitude=float(params.get("amplitude", 0.05)))
        summary["second_variation"] = variation.second_variation_check(
            curve, f, g)
    name = out_file if out_file else "%s_variation.json" % label
    _write_json(os.path.join(out_dir, name), summary)
    return [name]


def _sweep_slope(task):
    """One sweep slope: solve once, report every mode; never raises."""
    slope, dim, modes, rho_max, nodes = task
    try:
        curve = solve_for_cone(slope, dim, rho_max=rho_max, nodes=nodes)
    except Exception as exc:
        return [(slope, m, "", "", "", "solve failed: %s" % exc)
                for m in modes]
    try:
        asymptotic_trace(cone_correction(curve))
        note = ""
    except (RuntimeError, ValueError) as exc:
        # the plane's correction is identically zero; that is not a defect
        note = "" if "zero field" in str(exc) else str(exc)
    rows = []
    for r in index_sweep(slopes=[slope], modes=tuple(modes), n=dim,
                         rho_max=rho_max, nodes=nodes,
                         solver=lambda *a, **k: curve):
        rows.append((r["slope"], r["mode"], r["dim_ker"], r["dim_coker"],
                     r["a_u"], note))
    return rows


def stage_sweep(params, out_dir, seed, label):
    slopes = [float(s) for s in params.get(
        "slopes", [round(0.2 + 0.1 * k, 1) for k in range(19)])]
    modes = [int(m) for m in params.get("modes", [0, 1, 2, 3])]
    dim = int(params.get("dim", 2))
    rho_max = float(params.get("rho_max", 16.0))
    nodes = int(params.get("nodes", 1200))
    workers = int(params.get("workers", 0)) or min(4, os.cpu_count() or 1)
    tasks = [(s, dim, modes, rho_max, nodes) for s in slopes]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_sweep_slope, tasks))
    else:
        chunks = [_sweep_slope(t) for t in tasks]
    rows = [row for chunk in chunks for row in chunk]
    csv_name = "%s_sweep.csv" % label
    _write_csv(os.path.join(out_dir, csv_name),
               ["slope", "mode", "dim_ker", "dim_coker", "a_u", "error"],
               rows, seed=seed)
    plot_name = "%s_sweep_plot.csv" % label
    _write_csv(os.path.join(out_dir, plot_name),
               ["slope", "mode", "dim_ker"],
               [(r[0], r[1], r[2]) for r in rows], seed=seed)
    script_name = "%s_plot_sweep.py" % label
    with open(os.path.join(out_dir, script_name), "w") as fh:
        fh.write(PLOT_TEMPLATE.replace("sweep_plot.csv", plot_name, 1))
    return [csv_name, plot_name, script_name]


STAGE_RUNNERS = {
    "solve-expander": stage_solve_expander,
    "drift-solve": stage_drift_solve,
    "jacobi": stage_jacobi,
    "asymptotics": stage_asymptotics,
    "heat": stage_heat,
    "variation-check": stage_variation_check,
    "sweep": stage_sweep,
}


# ---------------------------------------------------------------------------
# scenario schema validation

def _require(stage, i, field, types, what):
    if field not in stage:
        raise SchemaError("stages[%d].%s" % (i, field),
                          "required field missing (%s)" % what)
    val = stage[field]
    if isinstance(val, bool) or not isinstance(val, types):
        raise SchemaError("stages[%d].%s" % (i, field),
                          "expected %s" % what)
    return val


def _check_number_pair(stage, i, field):
    val = stage[field]
    ok = (isinstance(val, list) and len(val) == 2
          and all(isinstance(v, (int, float)) and not isinstance(v, bool)
                  for v in val))
    if not ok:
        raise SchemaError("stages[%d].%s" % (i, field),
                          "expected [lo, hi] numbers")


KNOWN_FIELDS = {
    "solve-expander": {"kind", "label", "slope", "dim", "rho_max", "nodes"},
    "drift-solve": {"kind", "label", "surface", "rhs", "mode", "tol"},
    "jacobi": {"kind", "label", "surface", "modes"},
    "asymptotics": {"kind", "label", "surface"},
    "heat": {"kind", "label", "dim", "source", "nx", "times", "beta"},
    "variation-check": {"kind", "label", "surface", "variation", "bump",
                        "g_bump", "amplitude", "step", "section"},
    "sweep": {"kind", "label", "slopes", "modes", "dim", "rho_max", "nodes",
              "workers"},
}

SURFACE_PRODUCERS = {"solve-expander"}
SURFACE_CONSUMERS = {"drift-solve", "jacobi", "asymptotics",
                     "variation-check"}


def validate_scenario(cfg):
    """Raise SchemaError naming the offending field on any violation."""
    if not isinstance(cfg, dict):
        raise SchemaError("config", "expected a JSON object")
    for key in cfg:
        if key not in ("seed", "out_dir", "stages"):
            raise SchemaError(key, "unknown field")
    if "seed" not in cfg:
        raise SchemaError("seed", "required field missing (integer seed)")
    if isinstance(cfg["seed"], bool) or not isinstance(cfg["seed"], int):
        raise SchemaError("seed", "expected an integer")
    if "out_dir" in cfg and not isinstance(cfg["out_dir"], str):
        raise SchemaError("out_dir", "expected a string path")
    stages = cfg.get("stages")
    if not isinstance(stages, list) or not stages:
        raise SchemaError("stages", "expected a non-empty list")
    produced = set()
    for i, stage in enumerate(stages):
        if not isinstance(stage, dict):
            raise SchemaError("stages[%d]" % i, "expected a JSON object")
        kind = stage.get("kind")
        if kind not in STAGE_KINDS:
            raise SchemaError("stages[%d].kind" % i,
                              "expected one of %s" % ", ".join(STAGE_KINDS))
        for field in stage:
            if field not in KNOWN_FIELDS[kind]:
                raise SchemaError("stages[%d].%s" % (i, field),
                                  "unknown field for kind %r" % kind)
        label = stage.get("label", "stage%02d" % i)
        if not isinstance(label, str) or not label.replace("-", "").replace(
                "_", "").isalnum():
            raise SchemaError("stages[%d].label" % i,
                              "expected an alphanumeric label")
        if kind == "solve-expander":
            _require(stage, i, "slope", (int, float), "cone slope number")
            _require(stage, i, "dim", int, "surface dimension integer")
            if stage["dim"] < 2:
                raise SchemaError("stages[%d].dim" % i, "dimension must be >= 2")
            produced.add("%s_profile.csv" % label)
        if kind in SURFACE_CONSUMERS:
            surface = _require(stage, i, "surface", str,
                               "profile file from a prior stage")
            if surface not in produced and not os.path.exists(surface):
                raise SchemaError(
                    "stages[%d].surface" % i,
                    "%r is not produced by a prior stage" % surface)
        if kind == "drift-solve":
            _require(stage, i, "rhs", str, "rhs spec string")
        if kind == "heat":
            dim = _require(stage, i, "dim", int, "cell dimension 1 or 2")
            if dim not in (1, 2):
                raise SchemaError("stages[%d].dim" % i,
                                  "cell dimension must be 1 or 2")
            src = stage.get("source", "cos")
            if not isinstance(src, str) or src.partition(":")[0] not in HEAT_SOURCES:
                raise SchemaError("stages[%d].source" % i,
                                  "expected one of %s" % ", ".join(HEAT_SOURCES))
        if kind == "variation-check":
            var_kind = stage.get("variation", "normal")
            if var_kind not in VARIATION_KINDS:
                raise SchemaError("stages[%d].variation" % i,
                                  "expected one of %s" % ", ".join(VARIATION_KINDS))
            _require(stage, i, "bump", list, "bump window [lo, hi]")
            _check_number_pair(stage, i, "bump")
            if stage.get("g_bump") is not None:
                _check_number_pair(stage, i, "g_bump")
            if var_kind == "section":
                _require(stage, i, "section", list, "section direction [v_rho, v_z]")
                _check_number_pair(stage, i, "section")
        if kind == "jacobi":
            modes = stage.get("modes", [0, 1, 2, 3])
            ok = (isinstance(modes, list) and modes
                  and all(isinstance(m, int) and not isinstance(m, bool)
                          and m >= 0 for m in modes))
            if not ok:
                raise SchemaError("stages[%d].modes" % i,
                                  "expected a list of nonnegative integers")


def run_scenario(config_path, out_override=None):
    """Execute a scenario config; returns the process exit status."""
    try:
        with open(config_path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return 2
    except json.JSONDecodeError as exc:
        print("config error: invalid JSON: %s" % exc, file=sys.stderr)
        return 2
    try:
        validate_scenario(cfg)
    except SchemaError as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return 2
    seed = cfg["seed"]
    out_dir = _out_root(out_override or cfg.get("out_dir"))
    written = []
    for i, stage in enumerate(cfg["stages"]):
        kind = stage["kind"]
        label = stage.get("label", "stage%02d" % i)
        params = dict(stage)
        if kind == "variation-check":
            params["kind"] = params.pop("variation", "normal")
        try:
            files = STAGE_RUNNERS[kind](params, out_dir, seed, label)
        except Exception as exc:
            print("stage failure: stages[%d] (%s): %s" % (i, kind, exc),
                  file=sys.stderr)
            return 1
        written.extend(files)
        print("stages[%d] %s: %s" % (i, kind, ", ".join(files)))
    manifest_cfg = {"seed": seed, "stages": cfg["stages"]}
    manifest = {
        "seed": seed,
        "config": manifest_cfg,
        "files": {name: _sha256(os.path.join(out_dir, name))
                  for name in sorted(written)},
    }
    _write_json(os.path.join(out_dir, "manifest.json"), manifest)
    print("manifest.json: %d files" % len(written))
    return 0


# ---------------------------------------------------------------------------
# argument parsing

def _add_common(sub):
    sub.add_argument("--out", default=None, help="output directory")
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--label", default=None)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="expander-lab",
        description="asymptotically conical self-expander toolkit")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("solve-expander", help="solve the profile for a cone")
    p.add_argument("--slope", type=float, required=True)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--rho-max", type=float, default=20.0)
    p.add_argument("--nodes", type=int, default=2000)
    _add_common(p)

    p = subs.add_parser("drift-solve", help="decaying drifted elliptic solve")
    p.add_argument("--surface", required=True)
    p.add_argument("--rhs", required=True,
                   help="zero | const:<c> | powerlaw:<d> | file:<path>")
    p.add_argument("--mode", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-8)
    _add_common(p)

    p = subs.add_parser("jacobi", help="Fredholm index report per mode")
    p.add_argument("--surface", required=True)
    p.add_argument("--modes", default="0,1,2,3")
    _add_common(p)

    p = subs.add_parser("asymptotics", help="cone correction decay and trace")
    p.add_argument("--surface", required=True)
    _add_common(p)

    p = subs.add_parser("heat", help="Duhamel solve on the periodic cell")
    p.add_argument("--dim", type=int, required=True, choices=(1, 2))
    p.add_argument("--source", default="cos",
                   help="const:<c> | cos | bump | random[:<seed>]")
    p.add_argument("--nx", type=int, default=None)
    p.add_argument("--times", default=None,
                   help="comma separated times in (0,1)")
    p.add_argument("--beta", type=float, default=None,
                   help="also emit the Holder ratio report at this exponent")
    _add_common(p)

    p = subs.add_parser("variation-check", help="variation formula checks")
    p.add_argument("--surface", required=True)
    p.add_argument("--spec", required=True,
                   help="JSON file: {kind, bump, amplitude, step, section, g_bump}")
    p.add_argument("--out", default=None,
                   help="output JSON file path")
    p.add_argument("--seed", type=int, default=0)

    p = subs.add_parser("sweep", help="kernel dimension sweep over slopes")
    p.add_argument("--slopes", default=None,
                   help="comma list or lo:hi:step range")
    p.add_argument("--modes", default="0,1,2,3")
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--rho-max", type=float, default=16.0)
    p.add_argument("--nodes", type=int, default=1200)
    p.add_argument("--workers", type=int, default=0)
    _add_common(p)

    p = subs.add_parser("run", help="execute a scenario config")
    p.add_argument("config")
    p.add_argument("--out", default=None)
    return parser


def _parse_slopes(text):
    if text is None:
        return None
    if ":" in text:
        lo, hi, step = (float(tok) for tok in text.split(":"))
        count = int(round((hi - lo) / step)) + 1
        return [round(lo + k * step, 10) for k in range(count)]
    return [float(tok) for tok in text.split(",") if tok.strip()]


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return run_scenario(args.config, out_override=args.out)

    seed = getattr(args, "seed", 0)
    label = getattr(args, "label", None) or "run"

    if args.command == "variation-check":
        # --out names the report file itself, not a directory
        with open(args.spec) as fh:
            params = json.load(fh)
        params["surface"] = args.surface
        out_file = None
        out_dir = os.environ.get("EXPANDER_LAB_OUT") or "."
        if args.out:
            out_dir = os.path.dirname(args.out) or out_dir
            out_file = os.path.basename(args.out)
        os.makedirs(out_dir, exist_ok=True)
        try:
            files = stage_variation_check(params, out_dir, seed, "variation",
                                          out_file=out_file)
        except Exception as exc:
            print("variation-check failed: %s" % exc, file=sys.stderr)
            return 1
        print(", ".join(files))
        return 0

    out_dir = _out_root(getattr(args, "out", None))
    params = {}
    if args.command == "solve-expander":
        params = {"slope": args.slope, "dim": args.dim,
                  "rho_max": args.rho_max, "nodes": args.nodes}
    elif args.command == "drift-solve":
        params = {"surface": args.surface, "rhs": args.rhs,
                  "mode": args.mode, "tol": args.tol}
    elif args.command == "jacobi":
        params = {"surface": args.surface,
                  "modes": [int(m) for m in args.modes.split(",")]}
    elif args.command == "asymptotics":
        params = {"surface": args.surface}
    elif args.command == "heat":
        params = {"dim": args.dim, "source": args.source}
        if args.nx is not None:
            params["nx"] = args.nx
        if args.times is not None:
            params["times"] = [float(t) for t in args.times.split(",")]
        if args.beta is not None:
            params["beta"] = args.beta
    elif args.command == "sweep":
        params = {"modes": [int(m) for m in args.modes.split(",")],
                  "dim": args.dim, "rho_max": args.rho_max,
                  "nodes": args.nodes, "workers": args.workers}
        slopes = _parse_slopes(args.slopes)
        if slopes is not None:
            params["slopes"] = slopes

    try:
        files = STAGE_RUNNERS[args.command](params, out_dir, seed, label)
    except Exception as exc:
        print("%s failed: %s" % (args.command, exc), file=sys.stderr)
        return 1
    print(", ".join(files))
    return 0


if __name__ == "__main__":
    sys.exit(main())
