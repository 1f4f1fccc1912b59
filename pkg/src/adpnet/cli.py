"""Command-line front end.

Subcommands: solve, sweep, verify, project, bounds, plot.  A flat
key = value config file can prefill any flag; explicit flags win.  All
outputs are written atomically (temp file, then rename) and are byte
deterministic for a fixed config and seed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile

import numpy as np

from .errors import AdpnetError, ValidationError
from .measure import load_measure
from .network import Network, total_length
from .perturb import CompetitorSpec, bound_check
from .projection import project
from .solver import SolveResult, SolverConfig, solve, sweep
from .verify import check_soft, diagnostics_for_network


def _atomic_write(path: str, writer) -> None:
    """Write via a temp file in the destination directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    os.close(fd)
    try:
        writer(tmp)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def _atomic_json(path: str, data: dict) -> None:
    _atomic_write(path, lambda tmp: open(tmp, "w").write(json.dumps(data, indent=2) + "\n"))


def _load_config_file(path: str) -> dict:
    """Flat key = value file; '#' starts a comment."""
    values: dict[str, str] = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValidationError(f"{path}: line {lineno}: expected 'key = value'")
            key, val = line.split("=", 1)
            values[key.strip().replace("-", "_")] = val.strip()
    return values


_CONFIG_TYPES = {
    "p": float, "length": float, "lam": float, "mode": str, "h": float,
    "step": float, "max_iters": int, "grad_tol": float, "seed": int,
    "init_strategy": str, "topology_every": int, "prune_mass_tol": float,
    "atom_insert_threshold": float, "min_edge": float, "mollify_bandwidth": float,
    "eps": float, "center_vertex": int, "lengths": str, "arrow_scale": float,
    "project_axis": str, "measure": str, "network": str, "out": str,
    "width": float, "height": float, "subsample": int,
}


def _merge_config(args: argparse.Namespace) -> argparse.Namespace:
    if getattr(args, "config", None):
        file_vals = _load_config_file(args.config)
        for key, raw in file_vals.items():
            if key not in _CONFIG_TYPES:
                raise ValidationError(f"unknown config key {key!r}")
            if getattr(args, key, None) is None:
                setattr(args, key, _CONFIG_TYPES[key](raw))
    return args


def _solver_config(args: argparse.Namespace, mode: str | None = None) -> SolverConfig:
    mode = mode or (args.mode or "hard")
    kwargs = dict(
        p=args.p if args.p is not None else 2.0,
        mode=mode,
        length=args.length if mode == "hard" else None,
        lam=args.lam if mode == "soft" else None,
    )
    for name in ("h", "step", "max_iters", "grad_tol", "seed", "init_strategy",
                 "topology_every", "prune_mass_tol", "atom_insert_threshold",
                 "min_edge", "mollify_bandwidth"):
        val = getattr(args, name, None)
        if val is not None:
            kwargs[name] = val
    return SolverConfig(**kwargs)


def _load_network_arg(path: str) -> Network:
    with open(path) as fh:
        data = json.load(fh)
    if "network" in data:  # a solution file
        data = data["network"]
    return Network.from_json_dict(data)


def _ensure_out(args) -> str:
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    return out


def _write_solution(out: str, result: SolveResult) -> None:
    _atomic_json(os.path.join(out, "solution.json"), result.to_json_dict())
    _atomic_write(os.path.join(out, "trace.csv"), result.trace_csv)


def _render_solution_figures(out: str, measure, result: SolveResult, args) -> None:
    from . import plotting
    field = result.field
    plotting.plot_solution(
        measure, result.network, os.path.join(out, "solution.svg"),
        field_pos=field.node_pos, field_nu=field.nu, field_B=field.B,
        arrow_scale=args.arrow_scale if args.arrow_scale is not None else 1.0,
        subsample=args.subsample if args.subsample is not None else 2000,
        project_axis=args.project_axis, seed=result.config.seed)
    plotting.plot_trace(result.trace, os.path.join(out, "trace.svg"))


def _cmd_solve(args) -> int:
    measure = load_measure(args.measure)
    config = _solver_config(args)
    init = _load_network_arg(args.network) if args.network else None
    result = solve(measure, config, init=init)
    out = _ensure_out(args)
    _write_solution(out, result)
    diag = diagnostics_for_network(measure, result.network, config)
    payload = diag.to_json_dict()
    if config.mode == "soft":
        payload["soft"] = check_soft(measure, result, config.lam).to_json_dict()
    _atomic_json(os.path.join(out, "diagnostics.json"), payload)
    if measure.dim == 2 or args.project_axis:
        _render_solution_figures(out, measure, result, args)
    print(diag.summary_text())
    if args.strict and diag.failures():
        return 2
    return 0


def _cmd_sweep(args) -> int:
    measure = load_measure(args.measure)
    if not args.lengths:
        raise ValidationError("sweep needs --lengths")
    lengths = [float(tok) for tok in str(args.lengths).split(",") if tok.strip()]
    if args.length is None:
        args.length = lengths[0]
    base = _solver_config(args, mode="hard")
    result = sweep(measure, base.p, lengths, base)
    out = _ensure_out(args)
    _atomic_write(os.path.join(out, "sweep.csv"), result.to_csv)
    from . import plotting
    plotting.plot_sweep(result.lengths, result.j_values, os.path.join(out, "sweep.svg"))
    for l, j in zip(result.lengths, result.j_values):
        print(f"l = {l:g}: J = {j:.6e}")
    return 0


def _cmd_verify(args) -> int:
    measure = load_measure(args.measure)
    net = _load_network_arg(args.network)
    config = _solver_config(args)
    diag = diagnostics_for_network(measure, net, config)
    out = _ensure_out(args)
    _atomic_json(os.path.join(out, "diagnostics.json"), diag.to_json_dict())
    print(diag.summary_text())
    if args.strict and diag.failures():
        return 2
    return 0


def _cmd_project(args) -> int:
    measure = load_measure(args.measure)
    net = _load_network_arg(args.network)
    table = project(measure, net)
    out = _ensure_out(args)
    _atomic_write(os.path.join(out, "projection.csv"), table.to_csv)
    print(f"projected {measure.size} points onto {net.num_edges} edges; "
          f"mean distance {float(table.distance.mean()):.6f}")
    return 0


def _cmd_bounds(args) -> int:
    measure = load_measure(args.measure)
    net = _load_network_arg(args.network)
    if args.center_vertex is None:
        raise ValidationError("bounds needs --center-vertex")
    if args.eps is None:
        raise ValidationError("bounds needs --eps")
    if args.center_vertex < 0 or args.center_vertex >= net.num_vertices:
        raise ValidationError(f"--center-vertex {args.center_vertex} out of range")
    budget = args.length if args.length is not None else total_length(net)
    p = args.p if args.p is not None else 2.0
    spec = CompetitorSpec(center=net.vertices[args.center_vertex], eps=args.eps, budget=budget)
    table = project(measure, net)
    report = bound_check(measure, net, table, spec, p)
    out = _ensure_out(args)
    _atomic_json(os.path.join(out, "bounds.json"), report.to_json_dict(per_point=bool(args.per_point)))
    from . import plotting
    plotting.plot_bounds(report.psi, report.lhs, os.path.join(out, "bounds.svg"))
    print(f"violations = {report.violations}; aggregate gap {report.j_gap:.6e} "
          f">= bound {report.rhs_aggregate:.6e}: {report.aggregate_ok}")
    if args.strict and (report.violations or not report.aggregate_ok):
        return 2
    return 0


def _cmd_plot(args) -> int:
    from . import plotting
    with open(args.result) as fh:
        data = json.load(fh)
    net = Network.from_json_dict(data["network"] if "network" in data else data)
    measure = load_measure(args.measure) if args.measure else None
    if net.dim > 3 or (net.dim == 3 and not args.project_axis):
        raise ValidationError("plotting needs d = 2, or d = 3 with --project-axis")
    out_path = args.out or "plot.svg"
    if os.path.isdir(out_path):
        out_path = os.path.join(out_path, "plot.svg")
    field_pos = field_nu = field_B = None
    if args.measure:
        from .functional import barycentre_field
        from .network import subdivide
        from .projection import pushforward
        h = args.h if args.h is not None else max(total_length(net) / 50.0, 1e-6)
        sampled = subdivide(net, h)
        table = project(measure, net)
        pf = pushforward(table, sampled, measure)
        field = barycentre_field(measure, table, pf, sampled, args.p if args.p is not None else 2.0)
        field_pos, field_nu, field_B = field.node_pos, field.nu, field.B
    plotting.plot_solution(
        measure, net, out_path, field_pos=field_pos, field_nu=field_nu, field_B=field_B,
        arrow_scale=args.arrow_scale if args.arrow_scale is not None else 1.0,
        subsample=args.subsample if args.subsample is not None else 2000,
        width=args.width if args.width is not None else 6.0,
        height=args.height if args.height is not None else 6.0,
        project_axis=args.project_axis)
    print(f"wrote {out_path}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="adpnet",
                                     description="average-distance network solver and verification suite")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp, need_measure=True):
        if need_measure:
            sp.add_argument("--measure", help="measure file (csv or json)")
        sp.add_argument("--network", help="network json (or a solution.json)")
        sp.add_argument("--config", help="flat key = value config file; flags win")
        sp.add_argument("--p", type=float, default=None)
        sp.add_argument("--length", type=float, default=None)
        sp.add_argument("--lambda", dest="lam", type=float, default=None)
        sp.add_argument("--mode", choices=("hard", "soft"), default=None)
        sp.add_argument("--h", type=float, default=None)
        sp.add_argument("--step", type=float, default=None)
        sp.add_argument("--max-iters", dest="max_iters", type=int, default=None)
        sp.add_argument("--grad-tol", dest="grad_tol", type=float, default=None)
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--init-strategy", dest="init_strategy", default=None,
                        choices=("principal_segment", "mst_of_centers", "point"))
        sp.add_argument("--strict", action="store_true")
        sp.add_argument("--out", default=None)
        sp.add_argument("--eps", type=float, default=None)
        sp.add_argument("--center-vertex", dest="center_vertex", type=int, default=None)
        sp.add_argument("--lengths", default=None)
        sp.add_argument("--arrow-scale", dest="arrow_scale", type=float, default=None)
        sp.add_argument("--project-axis", dest="project_axis", choices=("x", "y", "z"), default=None)
        sp.add_argument("--width", type=float, default=None)
        sp.add_argument("--height", type=float, default=None)
        sp.add_argument("--subsample", type=int, default=None)
        sp.add_argument("--per-point", dest="per_point", action="store_true")

    for name in ("solve", "sweep", "verify", "project", "bounds"):
        common(sub.add_parser(name))
    plot_sp = sub.add_parser("plot")
    plot_sp.add_argument("result", help="solution.json or network json")
    common(plot_sp)
    return parser


_COMMANDS = {
    "solve": _cmd_solve,
    "sweep": _cmd_sweep,
    "verify": _cmd_verify,
    "project": _cmd_project,
    "bounds": _cmd_bounds,
    "plot": _cmd_plot,
}


def run(argv) -> int:
    """Entry point used by tests; returns the process exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(list(argv))
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    try:
        args = _merge_config(args)
        required = {"solve": ("measure",), "sweep": ("measure",), "verify": ("measure", "network"),
                    "project": ("measure", "network"), "bounds": ("measure", "network")}
        for field in required.get(args.command, ()):
            if getattr(args, field, None) is None:
                raise ValidationError(f"{args.command} needs --{field}")
        return _COMMANDS[args.command](args)
    except AdpnetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    np.seterr(all="ignore")
    sys.exit(run(sys.argv[1:]))
