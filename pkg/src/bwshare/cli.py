"""Command-line scenario runner binding the library modules.

Each subcommand loads a network document, runs one operation, and writes
a single CSV or JSON artifact carrying a schema version header.  Writes
are atomic (temp file plus rename) and outputs contain no timestamps, so
identical scenarios with identical seeds produce byte-identical files.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from dataclasses import dataclass, field

import numpy as np

from . import alloc, cone, ctmc, fluid, model, multipath, srbm
from .errors import BwshareError, ConfigInvalid, NotApplicable

SCHEMA_VERSION = "bwshare-output/1"


@dataclass(frozen=True)
class Scenario:
    command: str
    spec_path: str | None
    out: str | None
    seed: int
    fmt: str | None
    params: dict = field(default_factory=dict)


def _fmt_cell(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _render_csv(header, rows) -> str:
    lines = [f"# schema={SCHEMA_VERSION}", ",".join(header)]
    lines.extend(",".join(_fmt_cell(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (np.floating, float)):
        return float(x)
    if isinstance(x, (np.integer, int)):
        return int(x)
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    return x


def _render_json(doc) -> str:
    return json.dumps({"schema": SCHEMA_VERSION, **_jsonable(doc)}, indent=2) + "\n"


def _emit(out, text) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    directory = os.path.dirname(os.path.abspath(out))
    try:
        fd, tmp = tempfile.mkstemp(dir=directory, prefix=".bwshare-", text=True)
    except OSError as exc:
        raise ConfigInvalid(f"cannot write output {out}: {exc}") from exc
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, out)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _parse_floats(text, name) -> np.ndarray:
    try:
        return np.array([float(tok) for tok in str(text).split(",") if tok.strip()])
    except ValueError as exc:
        raise ConfigInvalid(f"cannot parse {name} list {text!r}") from exc


def _parse_ints(text, name) -> list:
    vals = _parse_floats(text, name)
    out = [int(round(v)) for v in vals]
    if np.max(np.abs(vals - np.array(out, dtype=float))) > 0:
        raise ConfigInvalid(f"{name} must contain integers, got {text!r}")
    return out


def _read_json_file(path, what) -> dict:
    if path is None:
        raise ConfigInvalid(f"a {what} file is required (--spec)")
    if not os.path.isfile(path):
        raise ConfigInvalid(f"{what} file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigInvalid(f"cannot read {what} file {path}: {exc}") from exc


def _load_network(scn) -> model.NetworkSpec:
    doc = _read_json_file(scn.spec_path, "network spec")
    try:
        spec = model.NetworkSpec(doc["A"], doc["C"], doc["nu"], doc["mu"],
                                 doc["kappa"], doc["alpha"])
    except KeyError as exc:
        raise ConfigInvalid(f"network spec missing key {exc}") from exc
    model.validate_network(spec)
    return spec


def _load_multipath(scn) -> multipath.MultipathSpec:
    doc = _read_json_file(scn.spec_path, "multipath spec")
    try:
        mspec = multipath.MultipathSpec(
            H=np.asarray(doc["H"], dtype=float),
            A_bar=np.asarray(doc["A_bar"], dtype=float),
            C_bar=np.asarray(doc["C_bar"], dtype=float),
            nu=np.asarray(doc["nu"], dtype=float),
            mu=np.asarray(doc["mu"], dtype=float),
            kappa=np.asarray(doc["kappa"], dtype=float),
            alpha=float(doc["alpha"]))
    except KeyError as exc:
        raise ConfigInvalid(f"multipath spec missing key {exc}") from exc
    multipath.validate_multipath(mspec)
    return mspec


def _choose_format(scn, default, allowed) -> str:
    fmt = scn.fmt or default
    if fmt not in allowed:
        raise ConfigInvalid(
            f"{scn.command} supports format {'/'.join(sorted(allowed))}, not {fmt}")
    return fmt


def _required(scn, key):
    val = scn.params.get(key)
    if val is None:
        raise ConfigInvalid(f"--{key.replace('_', '-')} is required for {scn.command}")
    return val


def _cmd_allocate(scn):
    _choose_format(scn, "json", {"json"})
    spec = _load_network(scn)
    n = _parse_floats(_required(scn, "n"), "--n")
    res = alloc.allocate(spec, n)
    return _render_json({"n": n, "lam": res.lam, "p": res.p,
                         "kkt_residual": res.kkt_residual,
                         "iterations": res.iterations})


def _cmd_fluid_run(scn):
    _choose_format(scn, "csv", {"csv"})
    spec = _load_network(scn)
    n0 = _parse_floats(_required(scn, "n0"), "--n0")
    T = float(_required(scn, "T"))
    step = scn.params.get("h")
    traj = fluid.integrate_fluid(spec, n0, T, step=None if step is None else float(step))
    header = ["t"] + [f"n_{i + 1}" for i in range(spec.I)] + ["F", "proxy"]
    rows = [[t, *state, f, proxy]
            for t, state, f, proxy in zip(traj.times, traj.states,
                                          traj.F_values, traj.manifold_proxy)]
    return _render_csv(header, rows)


def _cmd_lift(scn):
    _choose_format(scn, "json", {"json"})
    spec = _load_network(scn)
    w = _parse_floats(_required(scn, "w"), "--w")
    n = fluid.lift_delta(spec, w)
    back = model.workload(spec, n)
    return _render_json({"w": w, "n": n, "workload": back,
                         "roundtrip_residual": float(np.max(np.abs(back - w)))})


def _cmd_cone_report(scn):
    _choose_format(scn, "json", {"json"})
    spec = _load_network(scn)
    theta = _parse_floats(_required(scn, "theta"), "--theta")
    geom = cone.build_geometry(spec, theta)
    residual, norm = cone.skew_symmetry_report(geom)
    ok, witness = cone.completely_s_check(geom.G_inv)
    return _render_json({
        "G": geom.G, "G_inv": geom.G_inv, "normals": geom.normals,
        "Gamma": geom.Gamma, "theta": geom.theta, "v": geom.v,
        "skew_residual": residual, "skew_residual_norm": norm,
        "completely_s": bool(ok),
        "completely_s_witness": None if witness is None else list(witness)})


def _cmd_simulate(scn):
    spec = _load_network(scn)
    horizon = float(_required(scn, "horizon"))
    n0_text = scn.params.get("n0")
    n0 = (np.zeros(spec.I, dtype=np.int64) if n0_text is None
          else _parse_floats(n0_text, "--n0").astype(np.int64))
    path = ctmc.simulate(spec, n0, horizon, seed=scn.seed)
    fmt = _choose_format(scn, "csv", {"csv", "json"})
    if fmt == "csv":
        header = ["t"] + [f"n_{i + 1}" for i in range(spec.I)]
        rows = [[t, *state] for t, state in zip(path.event_times, path.states)]
        return _render_csv(header, rows)
    est = ctmc.stationary_estimate(path)
    return _render_json({"horizon": horizon, "seed": scn.seed,
                         "events": len(path.event_times) - 1,
                         "mean": est.mean, "variance": est.variance,
                         "correlation": est.correlation,
                         "half_widths": est.half_widths,
                         "burn_in": est.burn_in, "batches": est.batches})


def _cmd_ssc_sweep(scn):
    spec = _load_network(scn)
    theta = _parse_floats(_required(scn, "theta"), "--theta")
    r_values = _parse_ints(_required(scn, "r_list"), "--r-list")
    n_seeds = int(_required(scn, "seeds"))
    T = float(scn.params.get("T") or 10.0)
    grid_dt = float(scn.params.get("grid_dt") or 0.1)
    seq = model.build_ht_sequence(spec, theta, r_values)
    rows = []
    for r, spec_r in zip(seq.r_values, seq.specs):
        for k in range(n_seeds):
            seed = scn.seed + k
            path = ctmc.simulate(spec_r, np.zeros(spec.I, dtype=np.int64),
                                 horizon=float(r) ** 2 * T, seed=seed)
            stat = ctmc.ssc_statistic(spec, path, float(r), T, grid_dt)
            rows.append([int(r), seed, stat])
    fmt = _choose_format(scn, "csv", {"csv", "json"})
    if fmt == "csv":
        return _render_csv(["r", "seed", "ssc_statistic"], rows)
    medians = {str(r): float(np.median([row[2] for row in rows if row[0] == r]))
               for r in r_values}
    return _render_json({"T": T, "grid_dt": grid_dt, "median_by_r": medians,
                         "rows": rows})


def _cmd_srbm_run(scn):
    spec = _load_network(scn)
    theta = _parse_floats(_required(scn, "theta"), "--theta")
    h = float(_required(scn, "h"))
    T = float(_required(scn, "T"))
    n_seeds = int(scn.params.get("seeds") or 1)
    geom = cone.build_geometry(spec, theta)
    w0 = np.zeros(spec.J)
    paths = [srbm.simulate_srbm(geom, w0, T, h, scn.seed + k)
             for k in range(n_seeds)]
    fmt = _choose_format(scn, "csv", {"csv", "json"})
    if fmt == "csv":
        header = (["seed", "t"]
                  + [f"W_{j + 1}" for j in range(spec.J)]
                  + [f"Q_{j + 1}" for j in range(spec.J)]
                  + [f"U_{j + 1}" for j in range(spec.J)])
        rows = []
        for path in paths:
            for k in range(len(path.times)):
                rows.append([path.seed, path.times[k], *path.W[k], *path.Q[k],
                             *path.U[k]])
        return _render_csv(header, rows)
    reports = []
    for path in paths:
        rep = srbm.validate_product_form(geom, path)
        reports.append({"seed": path.seed, "mean": rep.mean,
                        "target_mean": rep.target_mean,
                        "mean_half_widths": rep.mean_half_widths,
                        "ks_distance": rep.ks_distance,
                        "correlation": rep.correlation,
                        "batches": rep.batches})
    return _render_json({"h": h, "T": T, "reports": reports})


def _star_parameters(spec) -> tuple:
    """Identify the one-through-route linear topology behind the exact law."""
    if spec.alpha != 1.0 or np.any(spec.kappa != 1.0) or np.any(spec.C != 1.0):
        raise NotApplicable("exact law needs alpha=1, kappa=1, unit capacities")
    cols = [tuple(int(round(x)) for x in spec.A[:, i]) for i in range(spec.I)]
    if not all(all(x in (0, 1) for x in col) for col in cols):
        raise NotApplicable("exact law needs a zero-one incidence matrix")
    through = [i for i, col in enumerate(cols) if sum(col) == spec.J]
    locals_ = [i for i, col in enumerate(cols) if sum(col) == 1]
    if spec.J < 2 or len(through) != 1 or len(locals_) != spec.J or spec.I != spec.J + 1:
        raise NotApplicable("exact law needs one through route plus one local route per resource")
    order = sorted(locals_, key=lambda i: cols[i].index(1))
    rho = spec.rho
    return float(rho[through[0]]), np.array([rho[i] for i in order]), through[0], order


def _cmd_stationary_compare(scn):
    _choose_format(scn, "json", {"json"})
    spec = _load_network(scn)
    mode = scn.params.get("mode")
    if mode is None:
        raise ConfigInvalid("choose one of --exact or --approx")
    if mode == "approx":
        approx = ctmc.stationary_approx(spec)
        return _render_json({"mode": "approx", "mean": approx.mean,
                             "dual_rates": approx.dual_rates})
    rho0, rho, through, order = _star_parameters(spec)
    law = ctmc.exact_linear_law(len(rho), rho0, rho)
    local_means = [law.marginal_mean(j + 1) for j in range(len(rho))]
    mean = np.empty(spec.I)
    mean[through] = law.marginal_mean(0)
    for j, i in enumerate(order):
        mean[i] = local_means[j]
    return _render_json({"mode": "exact", "rho0": rho0, "rho": rho,
                         "mean": mean, "through_route": through})


def _cmd_project_multipath(scn):
    _choose_format(scn, "json", {"json"})
    mspec = _load_multipath(scn)
    rep = multipath.project(mspec)
    ok, witnesses = multipath.local_traffic_check(rep.A)
    return _render_json({"A": rep.A, "C": rep.C,
                         "certificates": rep.certificates,
                         "local_traffic": bool(ok),
                         "local_traffic_witnesses": list(witnesses)})


def _cmd_extend_mixture(scn):
    _choose_format(scn, "json", {"json"})
    spec = _load_network(scn)
    mix_path = _required(scn, "mixtures")
    doc = _read_json_file(mix_path, "mixtures")
    try:
        mixtures = [[(float(f), float(m)) for f, m in route] for route in doc]
    except (TypeError, ValueError) as exc:
        raise ConfigInvalid(f"mixtures file must hold per-route [fraction, rate] pairs: {exc}") from exc
    ext = model.extend_mixture(spec, mixtures)
    return _render_json(json.loads(model.spec_to_json(ext)))


_HANDLERS = {
    "allocate": _cmd_allocate,
    "fluid-run": _cmd_fluid_run,
    "lift": _cmd_lift,
    "cone-report": _cmd_cone_report,
    "simulate": _cmd_simulate,
    "ssc-sweep": _cmd_ssc_sweep,
    "srbm-run": _cmd_srbm_run,
    "stationary-compare": _cmd_stationary_compare,
    "project-multipath": _cmd_project_multipath,
    "extend-mixture": _cmd_extend_mixture,
}


def _blame_module(exc) -> str:
    name = "cli"
    tb = exc.__traceback__
    while tb is not None:
        mod = tb.tb_frame.f_globals.get("__name__", "")
        if mod.startswith("bwshare.") and mod != "bwshare.cli":
            name = mod.split(".", 1)[1]
        tb = tb.tb_next
    return name


def run(scenario: Scenario) -> int:
    """Execute one scenario; returns the process exit status."""
    try:
        handler = _HANDLERS[scenario.command]
        text = handler(scenario)
        _emit(scenario.out, text)
        return 0
    except BrokenPipeError:
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return 0
    except BwshareError as exc:
        err = {"error": {"code": exc.code, "module": _blame_module(exc),
                         "message": str(exc)}}
        sys.stdout.write(_render_json(err))
        return 2 if isinstance(exc, ConfigInvalid) else 1


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--spec", help="path to the network document (JSON)")
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--format", choices=["csv", "json"], dest="fmt")
    parser = argparse.ArgumentParser(prog="bwshare",
                                     description="flow-level bandwidth sharing toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("allocate", parents=[common])
    p.add_argument("--n", help="comma-separated state vector")
    p = sub.add_parser("fluid-run", parents=[common])
    p.add_argument("--n0")
    p.add_argument("--T", type=float)
    p.add_argument("--h", type=float)
    p = sub.add_parser("lift", parents=[common])
    p.add_argument("--w")
    p = sub.add_parser("cone-report", parents=[common])
    p.add_argument("--theta")
    p = sub.add_parser("simulate", parents=[common])
    p.add_argument("--horizon", type=float)
    p.add_argument("--n0")
    p = sub.add_parser("ssc-sweep", parents=[common])
    p.add_argument("--theta")
    p.add_argument("--r-list", dest="r_list")
    p.add_argument("--seeds", type=int)
    p.add_argument("--T", type=float)
    p.add_argument("--grid-dt", dest="grid_dt", type=float)
    p = sub.add_parser("srbm-run", parents=[common])
    p.add_argument("--theta")
    p.add_argument("--h", type=float)
    p.add_argument("--T", type=float)
    p.add_argument("--seeds", type=int)
    p = sub.add_parser("stationary-compare", parents=[common])
    group = p.add_mutually_exclusive_group()
    group.add_argument("--exact", dest="mode", action="store_const", const="exact")
    group.add_argument("--approx", dest="mode", action="store_const", const="approx")
    sub.add_parser("project-multipath", parents=[common])
    p = sub.add_parser("extend-mixture", parents=[common])
    p.add_argument("--mixtures", help="JSON file of per-route (fraction, rate) pairs")
    return parser


_LIST_FLAGS = {"--theta", "--n", "--n0", "--w", "--r-list"}


def _normalize_argv(argv):
    """Join list flags with their value so -1,-2 is not read as an option."""
    out, it = [], iter(argv)
    for tok in it:
        if tok in _LIST_FLAGS:
            nxt = next(it, None)
            out.append(tok if nxt is None else f"{tok}={nxt}")
        else:
            out.append(tok)
    return out


def scenario_from_args(args: argparse.Namespace) -> Scenario:
    reserved = {"command", "spec", "out", "seed", "fmt"}
    params = {k: v for k, v in vars(args).items() if k not in reserved}
    return Scenario(command=args.command, spec_path=args.spec, out=args.out,
                    seed=args.seed, fmt=args.fmt, params=params)


def main(argv=None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    args = _build_parser().parse_args(_normalize_argv(argv))
    return run(scenario_from_args(args))


if __name__ == "__main__":
    sys.exit(main())
