"""Command-line entry point: ``oplmf {run,compare,theory,moments,catalog}``."""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import noise as nz
from .core import to_db
from .engine import OplmfConfig
from .harness import (
    REPORTED_MSD_DB,
    ConfigError,
    catalog_entry,
    dump_config,
    experiment_catalog,
    format_summary,
    load_config,
    run_experiment,
    theory_trace,
    traces_to_csv,
)
from .svg import experiment_svg

log = logging.getLogger("oplmf")

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _add_experiment_args(p, required=False):
    g = p.add_mutually_exclusive_group(required=required)
    g.add_argument("--experiment", type=int, choices=range(1, 8), metavar="{1..7}",
                   help="catalog experiment id")
    g.add_argument("--config", type=Path, help="experiment config file (YAML)")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--runs", type=int, help="override the number of Monte Carlo runs")
    p.add_argument("--iterations", type=int, help="override the number of iterations")
    p.add_argument("--msd-mode", choices=("oracle", "model"), help="OPLMF MSD source")
    p.add_argument("--no-stability-clamp", action="store_true",
                   help="do not clamp the OPLMF step to the stability bound")


def _add_output_args(p):
    p.add_argument("--out", type=Path, default=Path("results"), help="output directory")
    p.add_argument("--format", choices=("csv", "csv+svg"), default="csv")
    p.add_argument("--overwrite", action="store_true", help="replace existing output files")


def build_parser():
    parser = _Parser(prog="oplmf", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="run one experiment and write its learning curves")
    _add_experiment_args(p, required=True)
    _add_output_args(p)

    p = sub.add_parser("compare", help="run several catalog experiments, print a summary table")
    p.add_argument("--experiments", type=int, nargs="+", choices=range(1, 8),
                   default=list(range(1, 8)), metavar="ID")
    p.add_argument("--seed", type=int)
    p.add_argument("--runs", type=int)
    p.add_argument("--iterations", type=int)
    p.add_argument("--msd-mode", choices=("oracle", "model"))
    p.add_argument("--no-stability-clamp", action="store_true")
    p.add_argument("--out", type=Path, help="also write per-experiment CSVs here")
    p.add_argument("--format", choices=("csv", "csv+svg"), default="csv")
    p.add_argument("--overwrite", action="store_true")

    p = sub.add_parser("theory", help="theoretical OPLMF learning curve without simulation")
    _add_experiment_args(p)
    p.add_argument("--family", choices=nz.FAMILIES, help="noise family (instead of a config)")
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--centered", action="store_true")
    p.add_argument("--length", type=int, default=5)
    p.add_argument("--sigma-x-sq", type=float, default=1.0, help="per-tap input power")
    p.add_argument("--msd0", type=float, help="initial MSD (default ||w_base||^2 or L)")
    p.add_argument("--mu", type=float, help="fixed step size instead of the optimal one")
    _add_output_args(p)

    p = sub.add_parser("moments", help="closed-form vs Monte Carlo noise moments")
    p.add_argument("--family", choices=nz.FAMILIES, nargs="+", default=list(nz.FAMILIES))
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--centered", action="store_true")
    p.add_argument("--samples", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("catalog", help="list the catalog or write its config files")
    p.add_argument("--write", type=Path, metavar="DIR", help="write experiment_<id>.yaml files")
    p.add_argument("--overwrite", action="store_true")
    return parser


def _resolve(args):
    if getattr(args, "config", None) is not None:
        cfg = load_config(args.config)
    elif getattr(args, "experiment", None) is not None:
        cfg = catalog_entry(args.experiment)
    else:
        return None
    return _apply_overrides(cfg, args)


def _apply_overrides(cfg, args):
    changes = {k: getattr(args, k) for k in ("seed", "runs", "iterations")
               if getattr(args, k, None) is not None}
    if changes:
        cfg = replace(cfg, **changes)
    algs = []
    for alg in cfg.algorithms:
        if isinstance(alg, OplmfConfig):
            if getattr(args, "msd_mode", None):
                alg = replace(alg, msd_mode=args.msd_mode)
            if getattr(args, "no_stability_clamp", False):
                alg = replace(alg, clamp_to_stability=False)
        algs.append(alg)
    return replace(cfg, algorithms=tuple(algs))


def _write(path: Path, text: str, overwrite: bool):
    if path.exists() and not overwrite:
        raise FileExistsError(f"{path} exists; pass --overwrite to replace it")
    path.write_text(text)
    return path


def _stem(cfg, args):
    if getattr(args, "config", None) is not None:
        return Path(args.config).stem
    return f"experiment_{cfg.id}"


def _targets(out: Path, stem: str, fmt: str):
    suffixes = [".csv", "_summary.txt"] + ([".svg"] if fmt == "csv+svg" else [])
    return [out / f"{stem}{sfx}" for sfx in suffixes]


def _refuse_existing(paths, overwrite: bool):
    """Fail before any simulation work if an output would be clobbered."""
    if overwrite:
        return
    for path in paths:
        if path.exists():
            raise FileExistsError(f"{path} exists; pass --overwrite to replace it")


def _emit(cfg, traces, out: Path, stem: str, fmt: str, overwrite: bool):
    out.mkdir(parents=True, exist_ok=True)
    written = [_write(out / f"{stem}.csv", traces_to_csv(traces), overwrite),
               _write(out / f"{stem}_summary.txt", format_summary(cfg, traces) + "\n", overwrite)]
    if fmt == "csv+svg":
        try:
            written.append(_write(out / f"{stem}.svg", experiment_svg(traces, stem), overwrite))
        except FileExistsError:
            raise
        except Exception as exc:  # charts are optional output
            log.warning("SVG output failed (%s); CSV only", exc)
    return written


def cmd_run(args) -> int:
    cfg = _resolve(args)
    _refuse_existing(_targets(args.out, _stem(cfg, args), args.format), args.overwrite)
    traces = run_experiment(cfg)
    print(format_summary(cfg, traces))
    for path in _emit(cfg, traces, args.out, _stem(cfg, args), args.format, args.overwrite):
        print(f"wrote {path}")
    return EXIT_OK


def cmd_compare(args) -> int:
    names = ("NLMF", "VSSLMFQ", "OPLMF")
    header = f"{'':<14}" + "".join(f"{n:>18}" for n in names)
    lines = ["MSD / dB  (measured | reported)", header]
    if args.out is not None:
        _refuse_existing([p for i in args.experiments
                          for p in _targets(args.out, f"experiment_{i}", args.format)],
                         args.overwrite)
    any_partial = False
    for exp_id in args.experiments:
        cfg = _apply_overrides(catalog_entry(exp_id), args)
        traces = run_experiment(cfg)
        cells = []
        for n in names:
            tr = traces.get(n)
            if tr is None:
                cells.append(f"{'-':>18}")
                continue
            m = "divergence" if tr.all_diverged else f"{tr.steady_state:.2f}"
            if tr.divergence_count and not tr.all_diverged:
                m += "*"
                any_partial = True
            p = REPORTED_MSD_DB[exp_id][n]
            cells.append(f"{m + ' | ' + ('divergence' if p is None else f'{p:.2f}'):>18}")
        lines.append(f"Experiment {exp_id:<3}" + "".join(cells))
        if args.out is not None:
            _emit(cfg, traces, args.out, f"experiment_{exp_id}", args.format, args.overwrite)
    if any_partial:
        lines.append("* some runs diverged and were excluded from the average")
    print("\n".join(lines))
    return EXIT_OK


def cmd_theory(args) -> int:
    cfg = _resolve(args)
    if cfg is not None:
        L = cfg.length
        moments = cfg.moments()
        sx = cfg.input.power
        msd0 = float(np.sum(np.square(cfg.system.w_base)))
        iterations = cfg.iterations
        clamp = not args.no_stability_clamp
        stem = f"theory_{_stem(cfg, args)}"
    elif args.family is not None:
        L = args.length
        moments = nz.moments(nz.NoiseSpec(args.family, args.scale, args.centered))
        sx = args.sigma_x_sq
        msd0 = float(L)
        iterations = args.iterations or 5000
        clamp = not args.no_stability_clamp
        stem = f"theory_{args.family}"
    else:
        raise ConfigError("theory needs --experiment, --config or --family")
    if args.msd0 is not None:
        msd0 = args.msd0
    if msd0 < 0:
        raise ConfigError("--msd0 must be non-negative")
    msd, mu = theory_trace(L, msd0, sx, moments, iterations, clamp, args.mu)

    args.out.mkdir(parents=True, exist_ok=True)
    rows = ["iteration,msd_db_theory,mu"]
    db = to_db(msd)
    rows += [f"{n + 1},{db[n]:.12g},{mu[n]:.12g}" for n in range(iterations)]
    path = _write(args.out / f"{stem}.csv", "\n".join(rows) + "\n", args.overwrite)
    print(f"L={L} sigma_x^2={sx:g} moments=({moments.sigma_rho_sq:.6g}, {moments.m4:.6g}, "
          f"{moments.m6:.6g}) MSD(0)={msd0:g}")
    print(f"final theoretical MSD {db[-1]:.2f} dB, final mu {mu[-1]:.3g}")
    print(f"wrote {path}")
    return EXIT_OK


def cmd_moments(args) -> int:
    rng = np.random.default_rng(args.seed)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["family", "scale", "moment", "closed_form", "monte_carlo", "rel_error"])
    for fam in args.family:
        spec = nz.NoiseSpec(fam, args.scale, args.centered)
        exact = nz.moments(spec).as_tuple()
        est = nz.monte_carlo_moments(spec, args.samples, rng)
        for label, a, b in zip(("E[rho^2]", "E[rho^4]", "E[rho^6]"), exact, est):
            rel = abs(b - a) / a if a else float("nan")
            w.writerow([fam, f"{args.scale:g}", label, f"{a:.6g}", f"{b:.6g}", f"{rel:.3g}"])
    return EXIT_OK


def cmd_catalog(args) -> int:
    for cfg in experiment_catalog():
        snr = "" if cfg.snr_db is None else f"SNR={cfg.snr_db:g} dB"
        print(f"{cfg.id}: {cfg.description} {snr}")
    if args.write is not None:
        args.write.mkdir(parents=True, exist_ok=True)
        for cfg in experiment_catalog():
            path = _write(args.write / f"experiment_{cfg.id}.yaml", dump_config(cfg),
                          args.overwrite)
            print(f"wrote {path}")
    return EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "compare": cmd_compare,
    "theory": cmd_theory,
    "moments": cmd_moments,
    "catalog": cmd_catalog,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # usage errors and --help
        return exc.code if isinstance(exc.code, int) else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, ValueError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
