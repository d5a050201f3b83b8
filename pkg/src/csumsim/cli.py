"""Command-line front end of the two-photon 16-dimensional CSUM simulator.

Exit codes: 0 success, 2 configuration error, 3 numerical singularity.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (FIG5_PARAMS, Axis, SweepGrid, basis_paths, protocol1_basis_fidelities,
                       sweep)
from .cavity import CavityParams
from .circuits import build_protocol, run, truth_table
from .elements import ImperfectionParams
from .errors import (ConfigurationError, DomainError, SingularParameterError,
                     UndefinedFidelityError)
from .fock import NORM_TOL
from .netlist import dumps, loads

EXIT_OK, EXIT_CONFIG, EXIT_SINGULAR = 0, 2, 3

FIG4_RANGES = {"phi": (0.0, 0.01), "p": (0.0, 0.001)}
FIG6_RANGES = {"g": (0.5, 3.0), "kappa_s": (0.0, 0.1)}
FIG6_GAMMA = 0.1
FIG7_PARAMS = CavityParams(g=2.4, kappa_s=0.0, gamma=0.1)
DEFAULT_POINTS = 101


def fmt(x: float) -> str:
    """17 significant digits, locale-independent."""
    return format(float(x), ".16e")


# --- config -----------------------------------------------------------------


@dataclass(frozen=True)
class RunConfig:
    protocol: int
    input16: np.ndarray
    input_label: str
    cavity: CavityParams
    elements: ImperfectionParams
    output_format: str = "csv"
    seed: int | None = None


def _amps(text: str) -> np.ndarray:
    try:
        vals = [complex(v.strip().replace(" ", "")) for v in text.split(",")]
    except ValueError:
        raise ConfigurationError(f"cannot parse amplitudes {text!r}") from None
    if len(vals) != 4:
        raise ConfigurationError("amplitude lists need 4 entries")
    return np.array(vals)


def run_config(args) -> RunConfig:
    basis = args.control is not None or args.target is not None
    amps = args.amps_control is not None or args.amps_target is not None
    if basis and amps:
        raise ConfigurationError("give either --control/--target or --amps-control/--amps-target")
    if basis:
        if args.control is None or args.target is None:
            raise ConfigurationError("--control and --target go together")
        for v in (args.control, args.target):
            if not 0 <= v < 4:
                raise ConfigurationError("basis indices run from 0 to 3")
        vec = np.zeros(16, dtype=complex)
        vec[4 * args.control + args.target] = 1
        label = f"basis({args.control},{args.target})"
    elif amps:
        if args.amps_control is None or args.amps_target is None:
            raise ConfigurationError("--amps-control and --amps-target go together")
        ca, ta = _amps(args.amps_control), _amps(args.amps_target)
        for name, v in (("control", ca), ("target", ta)):
            if abs(np.vdot(v, v).real - 1) > NORM_TOL:
                raise ConfigurationError(f"{name} amplitudes are not normalized")
        vec, label = np.kron(ca, ta), "product"
    elif args.seed is not None:
        rng = np.random.default_rng(args.seed)
        vec = rng.normal(size=16) + 1j * rng.normal(size=16)
        vec /= np.linalg.norm(vec)
        label = f"random(seed={args.seed})"
    else:
        vec, label = np.full(16, 0.25, dtype=complex), "uniform"
    cavity = CavityParams(g=args.g_over_kappa, kappa_s=args.kappas_over_kappa,
                          gamma=args.gamma_over_kappa)
    elements = ImperfectionParams(p=args.p, phi=args.phi, delta=args.delta, xi=args.xi)
    if args.protocol not in (1, 2, 3):
        raise ConfigurationError("--protocol must be 1, 2 or 3")
    return RunConfig(args.protocol, vec, label, cavity, elements, args.format, args.seed)


# --- output helpers ------------------------------------------------------------


def _write(text: str, out: str | None):
    if out is None or out == "-":
        sys.stdout.write(text)
        return
    path = Path(out)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8", newline="")


def _csv(header, rows, meta: dict | None = None) -> str:
    buf = io.StringIO()
    for key, value in (meta or {}).items():
        buf.write(f"# {key}: {value}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False) + "\n"


def read_csv(text: str) -> tuple[dict, list[str], list[list[str]]]:
    """Parse an emitted CSV back into (metadata, header, rows)."""
    meta, body = {}, []
    for line in text.splitlines():
        if line.startswith("# "):
            key, _, value = line[2:].partition(": ")
            meta[key] = value
        else:
            body.append(line)
    rows = list(csv.reader(body))
    return meta, rows[0], rows[1:]


def _timestamp() -> str:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    t = int(epoch) if epoch else int(time.time())
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(t))


# --- commands ------------------------------------------------------------------


def cmd_truth_table(args) -> int:
    if args.d < 2:
        raise ConfigurationError("d must be at least 2")
    table = truth_table(args.d)
    header = ("c", "t", "c_out", "t_out")
    if args.format == "json":
        _write(_json({"d": args.d, "rows": [dict(zip(header, r)) for r in table]}), args.out)
    else:
        _write(_csv(header, table, {"d": args.d}), args.out)
    return EXIT_OK


def _report_circuit(cfg: RunConfig, netlist_path: str | None):
    if netlist_path:
        return loads(Path(netlist_path).read_text(encoding="utf-8"))
    return build_protocol(cfg.protocol, cfg.cavity, cfg.elements)


def cmd_simulate(args) -> int:
    cfg = run_config(args)
    circuit = _report_circuit(cfg, args.netlist)
    report = run(circuit, cfg.input16)
    meta = {"artifact": f"csumsim {__version__}", "circuit": circuit.name, "input": cfg.input_label}
    if cfg.protocol in (2, 3) and not args.netlist:
        meta.update(g=cfg.cavity.g, kappa_s=cfg.cavity.kappa_s, gamma=cfg.cavity.gamma)
        a = cfg.cavity.herald_amplitudes.A
        meta["A_cubed_abs"] = fmt(abs(a) ** 3)
    if cfg.protocol == 1 and not args.netlist:
        e = cfg.elements
        meta.update(p=e.p, phi=e.phi, delta=e.delta, xi=e.xi)
    if cfg.output_format == "json":
        _write(_json({"meta": meta, "report": report.to_dict()}), args.out)
        return EXIT_OK
    rows = [(k, "", "", getattr(report, k), 0.0) for k in (
        "efficiency", "efficiency_amp", "herald_probability", "postselection_probability",
        "mean_fidelity", "min_fidelity", "input_fidelity", "input_raw_overlap")]
    rows += [(f"branch:{k}", "", "", v, 0.0) for k, v in report.branch_stats.items()]
    rows += [("per_basis_fidelity", "", k, v, 0.0) for k, v in enumerate(report.per_basis_fidelity)]
    pm = report.process_matrix
    rows += [("process_matrix", o, i, pm[o, i].real, pm[o, i].imag)
             for o in range(16) for i in range(16) if pm[o, i] != 0]
    _write(_csv(("quantity", "out", "in", "re", "im"), rows, meta), args.out)
    return EXIT_OK


def _range(text: str | None, default: tuple[float, float]) -> tuple[float, float]:
    if text is None:
        return default
    try:
        lo, hi = (float(v) for v in text.split(":"))
    except ValueError:
        raise ConfigurationError(f"range {text!r} is not lo:hi") from None
    return lo, hi


def figure_files(fig: int, points: int = DEFAULT_POINTS, ranges: dict | None = None,
                 fmt_: str = "csv") -> dict[str, str]:
    """Render one figure's datasets to ``{file name: text}``."""
    ranges = ranges or {}
    out = {}
    ext = ".json" if fmt_ == "json" else ".csv"

    def emit(name, header, rows, meta):
        if fmt_ == "json":
            out[name + ext] = _json({"meta": meta, "header": list(header), "rows": [list(r) for r in rows]})
        else:
            out[name + ext] = _csv(header, rows, meta)

    if fig == 4:
        (plo, phi_hi), (qlo, qhi) = ranges.get("phi", FIG4_RANGES["phi"]), ranges.get("p", FIG4_RANGES["p"])
        grid = SweepGrid((Axis("phi", plo, phi_hi, points), Axis("p", qlo, qhi, points)),
                         {"delta": FIG5_PARAMS.delta, "xi": FIG5_PARAMS.xi})
        table = sweep(("F_m1", "F_m2", "F_n11", "F_n12", "F_n2"), grid, threads=1)
        meta = {"figure": 4, "delta": fmt(FIG5_PARAMS.delta), "xi": fmt(FIG5_PARAMS.xi)}
        pts = grid.points()
        for panel, metric in zip("abcde", table.values):
            rows = zip(pts["phi"], pts["p"], table.values[metric].reshape(-1))
            emit(f"fig4{panel}_{metric}", ("phi", "p", metric), rows, {**meta, "panel": panel})
    elif fig == 5:
        e = FIG5_PARAMS
        fids = protocol1_basis_fidelities(e.p, e.phi, e.delta, e.xi)
        rows = [(k // 4, k % 4, *basis_paths(k // 4, k % 4), fids[k]) for k in range(16)]
        emit("fig5", ("c", "t", "m_path", "n_path", "fidelity"), rows,
             {"figure": 5, "p": fmt(e.p), "phi": fmt(e.phi), "delta": fmt(e.delta), "xi": fmt(e.xi),
              "min_fidelity": fmt(fids.min())})
    elif fig == 6:
        (glo, ghi), (klo, khi) = ranges.get("g", FIG6_RANGES["g"]), ranges.get("kappa_s", FIG6_RANGES["kappa_s"])
        grid = SweepGrid((Axis("g", glo, ghi, points), Axis("kappa_s", klo, khi, points)),
                         {"gamma": FIG6_GAMMA})
        table = sweep(("F2", "F3", "eta2", "eta2_amp", "eta3", "eta3_amp"), grid, threads=1)
        pts = grid.points()
        meta = {"figure": 6, "gamma": fmt(FIG6_GAMMA)}
        for panel, metrics in (("a", ("F2",)), ("b", ("F3",)), ("c", ("eta2", "eta2_amp")),
                               ("d", ("eta3", "eta3_amp"))):
            cols = [table.values[m].reshape(-1) for m in metrics]
            rows = zip(pts["g"], pts["kappa_s"], *cols)
            emit(f"fig6{panel}_{metrics[0]}", ("g", "kappa_s", *metrics), rows, {**meta, "panel": panel})
    elif fig == 7:
        report = run(build_protocol(2, FIG7_PARAMS))
        rows = [(k // 4, k % 4, report.per_basis_fidelity[k]) for k in range(16)]
        emit("fig7", ("c", "t", "fidelity"), rows,
             {"figure": 7, "g": fmt(FIG7_PARAMS.g), "kappa_s": fmt(FIG7_PARAMS.kappa_s),
              "gamma": fmt(FIG7_PARAMS.gamma), "min_fidelity": fmt(report.min_fidelity)})
    else:
        raise ConfigurationError("figure id must be 4, 5, 6 or 7")
    return out


def cmd_figure(args) -> int:
    ranges = {}
    for key, text in (("g", args.g_range), ("kappa_s", args.kappas_range),
                      ("phi", args.phi_range), ("p", args.p_range)):
        if text is not None:
            ranges[key] = _range(text, (0, 0))
    files = figure_files(args.id, args.points, ranges, args.format)
    out_dir = Path(args.out or ".")
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        for name, text in files.items():
            (out_dir / name).write_text(text, encoding="utf-8", newline="")
    except OSError as exc:
        raise ConfigurationError(f"cannot write to {out_dir}: {exc}") from None
    for name in files:
        print(out_dir / name)
    return EXIT_OK


def _axis(text: str) -> Axis:
    parts = text.split(":")
    if len(parts) != 4:
        raise ConfigurationError(f"axis {text!r} is not name:lo:hi:n")
    try:
        return Axis(parts[0], float(parts[1]), float(parts[2]), int(parts[3]))
    except ValueError:
        raise ConfigurationError(f"axis {text!r} has non-numeric bounds") from None


PARAM_ALIASES = {"g_over_kappa": "g", "kappas_over_kappa": "kappa_s", "gamma_over_kappa": "gamma"}


def cmd_sweep(args) -> int:
    axes = tuple(_axis(a) for a in args.axis)
    fixed = {}
    for item in args.set or ():
        key, _, value = item.partition("=")
        try:
            fixed[PARAM_ALIASES.get(key, key)] = float(value)
        except ValueError:
            raise ConfigurationError(f"--set {item!r} is not name=value") from None
    metrics = []
    for m in args.metric:
        metrics.append(m)
        if m.startswith("eta") and not m.endswith("_amp"):
            metrics.append(m + "_amp")  # always emit both conventions
        elif m.startswith("eta") and m.endswith("_amp"):
            metrics.insert(len(metrics) - 1, m[:-4])
    metrics = list(dict.fromkeys(metrics))
    grid = SweepGrid(axes, fixed)
    table = sweep(metrics, grid)
    meta = {"artifact": f"csumsim {__version__}", "metrics": ",".join(metrics),
            "grid": " ".join(f"{a.name}:{fmt(a.lo)}:{fmt(a.hi)}:{a.n}" for a in axes),
            "fixed": " ".join(f"{k}={fmt(v)}" for k, v in sorted(fixed.items())) or "-",
            "timestamp": _timestamp()}
    if args.format == "json":
        _write(_json({"meta": meta, "header": list(table.header),
                      "rows": [list(r) for r in table.rows()]}), args.out)
    else:
        _write(_csv(table.header, table.rows(), meta), args.out)
    return EXIT_OK


def cmd_netlist(args) -> int:
    if args.action == "dump":
        cfg = run_config(args)
        _write(dumps(build_protocol(cfg.protocol, cfg.cavity, cfg.elements)), args.out)
    else:  # check
        if not args.path:
            raise ConfigurationError("netlist check needs a path")
        circuit = loads(Path(args.path).read_text(encoding="utf-8"))
        print(f"{circuit.name}: {len(circuit.nodes)} nodes, {len(circuit.spatial_ids)} spatial modes, "
              f"{circuit.n_spins} spins")
    return EXIT_OK


# --- parser --------------------------------------------------------------------


def _add_run_flags(p):
    p.add_argument("--protocol", type=int, default=1, choices=(1, 2, 3))
    p.add_argument("--control", type=int)
    p.add_argument("--target", type=int)
    p.add_argument("--amps-control")
    p.add_argument("--amps-target")
    p.add_argument("--g-over-kappa", type=float, default=2.4)
    p.add_argument("--kappas-over-kappa", type=float, default=0.0)
    p.add_argument("--gamma-over-kappa", type=float, default=0.1)
    p.add_argument("--p", type=float, default=0.0)
    p.add_argument("--phi", type=float, default=0.0)
    p.add_argument("--delta", type=float, default=0.0)
    p.add_argument("--xi", type=float, default=0.0)
    p.add_argument("--seed", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="csumsim", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"csumsim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("truth-table", help="ideal CSUM truth table")
    p.add_argument("--d", type=int, default=4)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out")
    p.set_defaults(func=cmd_truth_table)

    p = sub.add_parser("simulate", help="run a protocol and print its gate report")
    _add_run_flags(p)
    p.add_argument("--netlist", help="run a netlist file instead of a built-in protocol")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("figure", help="write the datasets behind a figure")
    p.add_argument("id", type=int, choices=(4, 5, 6, 7))
    p.add_argument("--points", type=int, default=DEFAULT_POINTS)
    p.add_argument("--g-range")
    p.add_argument("--kappas-range")
    p.add_argument("--phi-range")
    p.add_argument("--p-range")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_figure)

    p = sub.add_parser("sweep", help="evaluate metrics over a parameter grid")
    p.add_argument("--metric", action="append", required=True)
    p.add_argument("--axis", action="append", required=True, help="name:lo:hi:n")
    p.add_argument("--set", action="append", help="fixed parameter name=value")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("netlist", help="dump or check netlists")
    p.add_argument("action", choices=("dump", "check"))
    p.add_argument("path", nargs="?")
    _add_run_flags(p)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out")
    p.set_defaults(func=cmd_netlist)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError, DomainError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SingularParameterError, UndefinedFidelityError, ZeroDivisionError) as exc:
        print(f"numerical singularity: {exc}", file=sys.stderr)
        return EXIT_SINGULAR


if __name__ == "__main__":
    sys.exit(main())
