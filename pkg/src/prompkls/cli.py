"""Command-line interface.

Usage:
    prompkls synth --scenario study.json --out data/
    prompkls segment --manifest data/manifest.json --out sets/
    prompkls fit --set sets/p01_Sham_prae_e1_inward.csv --out model.json
    prompkls compare --a A.csv --b B.csv
    prompkls batch --manifest data/manifest.json --out report.json
    prompkls window --a A.csv --b B.csv --fraction 0.1 --out curve.csv
    prompkls recon-loss --manifest data/manifest.json --m 5,10,15,20 --out table.csv

Every subcommand accepts ``--config FILE`` (``key = value`` lines) and flag
overrides for the individual settings. Exit codes: 0 success, 1 usage or
configuration error, 2 data or parse error, 3 pipeline error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import formats
from .analysis import fitted_series, hyperparameter_sweep
from .config import RunConfig, load_config
from .divergence import channel_kls, sliding_window_kls, trajectory_set_kls
from .errors import ConfigError, ParseError, PrompError
from .phase_basis import make_basis_config
from .pipeline import PipelineSettings, load_source, run_batch
from .promp import fit_promp
from .segmentation import build_trajectory_sets
from .synth import study_scenarios, generate_recording

log = logging.getLogger("prompkls")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_PIPELINE = 0, 1, 2, 3

_OVERRIDES = [
    ("--num-basis", "num_basis", int),
    ("--ridge-lambda", "ridge_lambda", float),
    ("--phase-points", "phase_points", int),
    ("--strokes", "strokes_per_set", int),
    ("--window-fraction", "window_fraction", float),
    ("--filter-cutoff", "filter_cutoff_hz", float),
    ("--outlier-sigma", "outlier_sigma", float),
    ("--variance-floor", "variance_floor", float),
    ("--seed", "rng_seed", int),
    ("--workers", "workers", int),
]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _config(args) -> RunConfig:
    config = load_config(args.config) if args.config else RunConfig()
    overrides = {dest: getattr(args, dest) for _, dest, _ in _OVERRIDES
                 if getattr(args, dest, None) is not None}
    return config.with_overrides(**overrides).validate()


def cmd_synth(args, config):
    design = formats.read_scenario(args.scenario, default_seed=config.rng_seed)
    out = Path(args.out)
    entries = []
    for scenario in study_scenarios(design):
        meta = scenario.meta
        rel = Path("recordings") / f"{meta.participant}_{meta.stimulus}_{meta.session_phase}_e{meta.experiment}.csv"
        formats.write_recording(generate_recording(scenario), out / rel)
        entries.append((rel, meta, scenario.sample_rate_hz))
    formats.write_manifest(entries, out / "manifest.json")
    print(f"wrote {len(entries)} recordings and {out / 'manifest.json'}")
    return EXIT_OK


def _segment_manifest(path, config):
    """Yield (entry, sets-or-None, error-or-None) per manifest recording."""
    manifest = formats.read_manifest(path)
    settings = PipelineSettings.from_config(config)
    for entry in manifest.recordings:
        rec = load_source(entry)
        try:
            yield entry, build_trajectory_sets(rec, settings.grid, settings.segmentation), None
        except PrompError as exc:
            yield entry, None, exc


def cmd_segment(args, config):
    out = Path(args.out)
    failures = 0
    written = 0
    for entry, sets, error in _segment_manifest(args.manifest, config):
        if error is not None:
            failures += 1
            print(f"{entry.path}: {error}", file=sys.stderr)
            continue
        for data in sets.values():
            formats.write_trajectory_set(data, out / (formats.trajectory_set_stem(data.metadata) + ".csv"))
            written += 1
    print(f"wrote {written} trajectory sets to {out}")
    return EXIT_PIPELINE if failures else EXIT_OK


def cmd_fit(args, config):
    data = formats.read_trajectory_set(args.set)
    model = fit_promp(data, make_basis_config(config.num_basis, config.ridge_lambda))
    formats.write_model(model, args.out)
    print(f"fitted {data.num_demos} demonstrations -> {args.out}")
    return EXIT_OK


def _fitted_pair(args, config):
    basis = make_basis_config(config.num_basis, config.ridge_lambda)
    a = fitted_series(formats.read_trajectory_set(args.a), basis, config.variance_floor)
    b = fitted_series(formats.read_trajectory_set(args.b), basis, config.variance_floor)
    return a, b


def cmd_compare(args, config):
    a, b = _fitted_pair(args, config)
    print(f"D_KLS = {trajectory_set_kls(a, b):.10g}")
    for name, value in zip(a.channels, channel_kls(a, b)):
        print(f"  {name:8s} {value:.10g}")
    return EXIT_OK


def cmd_batch(args, config):
    manifest = formats.read_manifest(args.manifest)
    report = run_batch(manifest.recordings, config, {"manifest": Path(args.manifest).name})
    formats.write_report(report, args.out, args.summary)
    flagged = sum(e.outlier for e in report.entries)
    print(f"{len(report.entries)} comparisons, {flagged} outliers, "
          f"{len(report.corrupted)} corrupted recordings -> {args.out}")
    return EXIT_OK


def cmd_window(args, config):
    a, b = _fitted_pair(args, config)
    fraction = args.fraction if args.fraction is not None else config.window_fraction
    curve = sliding_window_kls(a, b, fraction, args.stride)
    formats.write_curve_csv(curve, args.out)
    peak = int(curve.values.argmax())
    print(f"{len(curve.values)} windows, peak {curve.values[peak]:.6g} at phase {curve.centers[peak]:.4f}")
    return EXIT_OK


def cmd_recon_loss(args, config):
    try:
        m_values = [int(m) for m in args.m.split(",") if m.strip()]
    except ValueError:
        raise UsageError(f"--m expects comma-separated integers, got {args.m!r}") from None
    if any(m > config.phase_points for m in m_values):
        raise ConfigError(f"M values must not exceed phase_points={config.phase_points}")
    sets = []
    for entry, by_direction, error in _segment_manifest(args.manifest, config):
        if error is not None:
            print(f"{entry.path}: {error} (skipped)", file=sys.stderr)
            continue
        sets.extend(by_direction.values())
    rows = hyperparameter_sweep(sets, m_values, config.ridge_lambda)
    formats.write_sweep_csv(rows, args.out)
    for row in rows:
        print(f"M={row.num_basis:3d}  L_rec = {row.loss_mean:.4f} +/- {row.loss_std:.4f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="key = value configuration file")
    for flag, dest, kind in _OVERRIDES:
        common.add_argument(flag, dest=dest, type=kind)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="prompkls", description="ProMP fitting and symmetric-KL comparison of stroke sets")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic study")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("segment", parents=[common], help="segment recordings into trajectory sets")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("fit", parents=[common], help="fit a ProMP to one trajectory set")
    p.add_argument("--set", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("compare", parents=[common], help="symmetric KL between two sets")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("batch", parents=[common], help="prae-vs-post report over a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--summary", help="summary CSV path (default: report path with .csv)")
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("window", parents=[common], help="sliding-window divergence curve")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--fraction", type=float)
    p.add_argument("--stride", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_window)

    p = sub.add_parser("recon-loss", parents=[common], help="reconstruction loss sweep over M")
    p.add_argument("--manifest", required=True)
    p.add_argument("--m", default="5,10,15,20")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_recon_loss)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = _config(args)
        return args.func(args, config)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except PrompError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_PIPELINE


if __name__ == "__main__":
    sys.exit(main())
