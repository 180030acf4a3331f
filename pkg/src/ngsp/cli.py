"""``ngsp`` command line: solve, contour, converge, validate."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .analysis import (ReferenceSpec, convergence_study, exact_hjb1_grid, exponent_oracle,
                       hjb1_sign_table)
from .contour import default_levels, emit_contours
from .io import RunConfig, format_table, load_config, read_csv, write_csv, write_raw, write_table
from .solve import METHODS, ValueField, solve
from .speed import PROBLEM_NAMES, ConfigurationError, ProblemSpec, make_problem, validate_bounds

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3

log = logging.getLogger("ngsp")


def stats_line(vf: ValueField) -> str:
    s = vf.stats
    ph = s.get("phase_seconds", {})
    return (f"accepted={s['accept_count']} update_calls={s['update_calls']} "
            f"oum_updates={s['oum_updates']} ngsp_updates={s['ngsp_updates']} "
            f"segment_evals={s['segment_evals']} point_evals={s['point_evals']} "
            f"ray_steps={s['ray_steps']} bootstrap_accepted={s.get('bootstrap_accepted', 0)} "
            f"oum_seconds={ph.get('oum', 0.0):.4f} ngsp_seconds={ph.get('ngsp', 0.0):.4f} "
            f"wall_seconds={vf.wall_seconds:.4f} backend={s['backend']}")


def _config(args) -> RunConfig:
    if not args.config:
        raise ConfigurationError("--config is required for this command")
    cfg = load_config(args.config)
    if getattr(args, "method", None):
        cfg.method = args.method
    if getattr(args, "size", None):
        if args.size < 11:
            raise ConfigurationError("size must be at least 11")
        cfg.size = args.size
    return cfg


def _output(args, cfg: RunConfig, key: str, default: str) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    name = cfg.outputs.get(key, default)
    p = Path(name)
    return p if p.is_absolute() else out / p


def _run(cfg: RunConfig, backend: str) -> ValueField:
    field = make_problem(cfg.problem)
    return solve(cfg.grid, field, cfg.problem.target, cfg.method, backend=backend,
                 bootstrap_fraction=cfg.bootstrap_fraction)


def cmd_solve(args) -> int:
    cfg = _config(args)
    vf = _run(cfg, args.backend)
    stem = f"{cfg.problem.name}_{cfg.method}_{cfg.size}"
    csv_path = _output(args, cfg, "csv", stem + ".csv")
    write_csv(vf, csv_path)
    written = [csv_path]
    if args.raw or "raw" in cfg.outputs:
        raw_path = _output(args, cfg, "raw", stem + ".f64")
        written += [raw_path, write_raw(vf, raw_path)]
    print(stats_line(vf))
    for p in written:
        print(f"wrote {p}")
    return EXIT_OK


def cmd_contour(args) -> int:
    cfg = _config(args)
    vf = read_csv(args.field) if args.field else _run(cfg, args.backend)
    overlay = None
    labels = ("u", "u0")
    if args.overlay == "exact":
        if cfg.problem.name != "hjb1":
            raise ConfigurationError("the exact overlay exists only for hjb1")
        p = make_problem(cfg.problem).params
        overlay = ValueField(vf.grid, exact_hjb1_grid(vf.grid, p["lambda"], p["mu"]) / cfg.problem.scale,
                             "hjb1", "exact")
    elif args.overlay in METHODS:
        other = RunConfig(**{**cfg.__dict__, "method": args.overlay})
        overlay = _run(other, args.backend)
        labels = (cfg.method, args.overlay)
    levels = cfg.levels or default_levels(vf.values)
    svg_path = _output(args, cfg, "svg", f"{cfg.problem.name}_{vf.method}_{vf.grid.n_x}.svg")
    emit_contours(vf, levels, svg_path, overlay=overlay, labels=labels)
    print(f"wrote {svg_path}")
    return EXIT_OK


def cmd_converge(args) -> int:
    cfg = _config(args)
    ref = cfg.reference
    if args.reference_size:
        ref = ReferenceSpec("oum", args.reference_size)
    reports = convergence_study(cfg.problem, cfg.sizes, cfg.method, ref, threads=args.threads,
                                bootstrap_fraction=cfg.bootstrap_fraction)
    print(format_table(reports))
    path = _output(args, cfg, "table", f"convergence_{cfg.problem.name}_{cfg.method}.csv")
    write_table(reports, path)
    print(f"wrote {path}")
    return EXIT_OK


def cmd_validate(args) -> int:
    ok = True
    for name in PROBLEM_NAMES:
        rep = validate_bounds(make_problem(ProblemSpec(name)))
        ok &= rep.ok
        print(f"bounds {name:9s} observed [{rep.observed_min:.6g}, {rep.observed_max:.6g}] "
              f"declared [{rep.declared_min:.6g}, {rep.declared_max:.6g}] "
              f"{'ok' if rep.ok else 'FAIL'}")
    oracle = exponent_oracle()
    for e, r in oracle.residuals.items():
        print(f"hjb1 exponent {e:+.1f}: mean residual {r:.3e} (bound {oracle.bound:.3e})")
    print(f"hjb1 exponent oracle: shipped {oracle.shipped:+.1f} "
          f"{'ok' if oracle.ok else 'FAIL'}")
    ok &= oracle.ok
    for (cross, e), r in hjb1_sign_table().items():
        print(f"hjb1 closed form with {'+' if cross > 0 else '-'}2*lambda*mu*x*y, "
              f"exponent {e:+.1f}: mean residual {r:.3e}")
    return EXIT_OK if ok else EXIT_RUNTIME


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ngsp", description=__doc__)
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("--config", help="JSON run configuration")
    ap.add_argument("--out", default=".", help="output directory (default: current)")
    ap.add_argument("--threads", type=int, default=1, help="parallel solves in convergence studies")
    ap.add_argument("--backend", choices=("auto", "core", "python"), default="auto")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve and export the value field")
    p.add_argument("--method", choices=METHODS)
    p.add_argument("--size", type=int)
    p.add_argument("--raw", action="store_true", help="also write float64 payload + sidecar")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("contour", help="write an SVG contour plot")
    p.add_argument("--method", choices=METHODS)
    p.add_argument("--size", type=int)
    p.add_argument("--field", help="plot a previously written CSV instead of solving")
    p.add_argument("--overlay", choices=("none", "exact") + METHODS, default="none")
    p.set_defaults(func=cmd_contour)

    p = sub.add_parser("converge", help="error table over the configured sizes")
    p.add_argument("--method", choices=METHODS)
    p.add_argument("--reference-size", type=int, help="use an OUM reference of this size")
    p.set_defaults(func=cmd_converge)

    p = sub.add_parser("validate", help="speed-bound and HJB-1 exponent oracles")
    p.set_defaults(func=cmd_validate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, RuntimeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
