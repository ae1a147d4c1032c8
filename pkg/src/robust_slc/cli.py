"""Command-line front end.

    slc train --config exp.cfg [--out DIR]
    slc test --config exp.cfg --field DIR/field.csv
    slc sweep-bound --config exp.cfg
    slc sweep-nf --config exp.cfg
    slc reproduce {1,2,4,5,6} [--config overrides.cfg]

Exit status: 0 success (converged), 2 a training run stopped at
max_iterations, 3 configuration error, 4 I/O or field-file error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import evaluation as ev
from .config import ConfigError, ExperimentConfig, from_pairs, load_config
from .fieldfile import FieldFile, FieldFileError
from .models import build_model
from .optimizer import initial_field, train
from .sampling import random_samples, training_grid

EXIT_OK = 0
EXIT_MAX_ITER = 2
EXIT_CONFIG = 3
EXIT_IO = 4

FIGURES = (1, 2, 4, 5, 6)

log = logging.getLogger("robust_slc")


def _flag_overrides(args) -> dict[str, str]:
    out = {}
    for key in ("seed_train", "seed_test", "out", "threads"):
        value = getattr(args, key, None)
        if value is not None:
            out[key] = str(value)
    if getattr(args, "dump_samples", False):
        out["dump_samples"] = "true"
    return out


def _prepare_out(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config_effective.txt").write_text(cfg.to_text())
    return out


def _train_one(cfg: ExperimentConfig, out: Path, prefix: str = ""):
    model = cfg.build()
    ensemble = training_grid(model.fluctuations, cfg.group_nf())
    log.info("training %s on %d samples", model.name, len(ensemble))
    result = train(model, ensemble, initial_field(model), cfg.optimization())
    ff = FieldFile.from_field(result.field, cfg.model, cfg.seed_train, result.J_history[-1], result.converged)
    ff.write(out / f"{prefix}field.csv")
    ev.write_csv(out / f"{prefix}J_history.csv", ["iteration", "J"],
                 [[str(i), repr(j)] for i, j in enumerate(result.J_history)])
    print(f"{model.name}: iterations={result.iterations} final_J={result.J_history[-1]:.6f} "
          f"converged={'yes' if result.converged else 'no'} ({result.stop_reason})")
    return model, result


def cmd_train(cfg: ExperimentConfig) -> int:
    out = _prepare_out(cfg)
    _, result = _train_one(cfg, out)
    return EXIT_OK if result.converged else EXIT_MAX_ITER


def _write_report(out: Path, cfg: ExperimentConfig, model, report: ev.TestReport, prefix: str = "test") -> None:
    theta = cfg.theta if not cfg.theta_groups else max(cfg.group_bounds().values())
    row = [repr(float(theta)), repr(report.mean_fidelity), repr(report.std_fidelity),
           repr(report.min_fidelity), str(report.n_samples), str(report.seed)]
    ev.write_csv(out / f"{prefix}_report.csv", ev.SWEEP_COLUMNS, [row])
    edges = np.linspace(0.0, 1.0, ev.HIST_BINS + 1)
    ev.write_csv(out / f"{prefix}_histogram.csv", ["bin_lo", "bin_hi", "count"],
                 [[repr(float(edges[i])), repr(float(edges[i + 1])), str(int(c))]
                  for i, c in enumerate(report.histogram)])
    if cfg.dump_samples:
        samples = random_samples(model.fluctuations, cfg.n_test, cfg.seed_test, cfg.distribution())
        names = [p.name for p in model.fluctuations]
        ev.write_csv(out / f"{prefix}_samples.csv", ["index", *names, "fidelity"],
                     [[str(i), *(repr(float(x)) for x in s), repr(float(f))]
                      for i, (s, f) in enumerate(zip(samples, report.fidelities))])


def cmd_test(cfg: ExperimentConfig, field_path) -> int:
    ff = FieldFile.read(field_path)
    if ff.model != cfg.model:
        raise ConfigError("model", f"field file was trained for {ff.model!r}, config names {cfg.model!r}")
    model = cfg.build()
    field = ff.to_field()
    report = ev.monte_carlo_fidelity(field, model, cfg.n_test, cfg.seed_test, cfg.distribution(), cfg.threads)
    out = _prepare_out(cfg)
    _write_report(out, cfg, model, report)
    print(f"mean fidelity = {report.mean_fidelity:.6f} +/- {report.std_fidelity:.6f} "
          f"(min {report.min_fidelity:.6f}, n={report.n_samples}, seed={report.seed})")
    return EXIT_OK


def _status(tables) -> int:
    ok = all(r.training is None or r.training.converged for t in tables for r in t.rows)
    return EXIT_OK if ok else EXIT_MAX_ITER


def cmd_sweep_bound(cfg: ExperimentConfig, name: str = "sweep_bound.csv", model_ids=None, labels=None) -> int:
    out = _prepare_out(cfg)
    tables = []
    for i, model_id in enumerate(model_ids or [cfg.model]):
        table = ev.sweep_bound(model_id, cfg.bounds, cfg.n_test, cfg.seed_test, cfg.nf, cfg.optimization(),
                               cfg.distribution())
        if labels:
            table.label = labels[i]
        for row in table.rows:
            print(f"{table.label} theta={row.theta:g}: mean F={row.report.mean_fidelity:.6f}")
        tables.append(table)
    ev.write_sweep_csv(out / name, tables)
    return _status(tables)


def cmd_sweep_nf(cfg: ExperimentConfig, name: str = "sweep_nf.csv") -> int:
    out = _prepare_out(cfg)
    theta = cfg.theta if cfg.theta > 0 else 0.15
    table = ev.sweep_sample_count(cfg.nf_values, theta, cfg.model, cfg.n_test, cfg.seed_test, cfg.optimization())
    for row in table.rows:
        print(f"nf={row.key}: mean F={row.report.mean_fidelity:.6f}")
    ev.write_sweep_csv(out / name, [table])
    return _status([table])


def cmd_reproduce(figure: int, cfg: ExperimentConfig) -> int:
    """Run the preset experiment behind one figure; model and bound come from the preset."""
    if figure == 1:
        return cmd_sweep_bound(cfg, "fig1.csv", ["single_charge_excited", "single_charge_superposition"],
                               ["case1", "case2"])
    if figure == 2:
        cfg = from_pairs({"model": "single_charge_superposition", "theta": "0.15"}, cfg)
        return cmd_sweep_nf(cfg, "fig2.csv")
    if figure == 4:
        return cmd_sweep_bound(from_pairs({"model": "coupled_charge"}, cfg), "fig4.csv")
    if figure == 5:
        return cmd_sweep_bound(from_pairs({"model": "coupled_phase"}, cfg), "fig5.csv")
    if figure == 6:
        cfg = from_pairs({"model": "coupled_phase", "theta": "0.25"}, cfg)
        out = _prepare_out(cfg)
        model, result = _train_one(cfg, out, prefix="fig6_")
        t = model.midpoints()
        names = [c.name for c in model.channels]
        ev.write_csv(out / "fig6.csv", ["t", *names],
                     [[repr(float(t[k])), *(repr(float(v)) for v in result.field.values[:, k])]
                      for k in range(model.intervals)])
        return EXIT_OK if result.converged else EXIT_MAX_ITER
    raise ConfigError("figure", f"invalid figure {figure}; valid ids: {', '.join(map(str, FIGURES))}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="slc", description="Sampling-based learning control for "
                                     "superconducting qubit models.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="flat key = value config file")
        p.add_argument("--seed-train", type=int, dest="seed_train")
        p.add_argument("--seed-test", type=int, dest="seed_test")
        p.add_argument("--out", help="output directory")
        p.add_argument("--threads", type=int, help="worker threads (results do not depend on this)")
        p.add_argument("--dump-samples", action="store_true", dest="dump_samples",
                       help="write per-sample fidelities when testing")

    common(sub.add_parser("train", help="learn a robust field"))
    p = sub.add_parser("test", help="Monte-Carlo test of a stored field")
    common(p)
    p.add_argument("--field", required=True, help="field file written by 'train'")
    common(sub.add_parser("sweep-bound", help="average fidelity versus fluctuation bound"))
    common(sub.add_parser("sweep-nf", help="average fidelity versus grid size per parameter"))
    p = sub.add_parser("reproduce", help="preset experiment for one figure")
    p.add_argument("figure", type=int, help=f"one of {', '.join(map(str, FIGURES))}")
    common(p, config_required=False)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s", stream=sys.stderr)
    try:
        if args.command == "reproduce" and args.figure not in FIGURES:
            raise ConfigError("figure", f"invalid figure {args.figure}; valid ids: {', '.join(map(str, FIGURES))}")
        overrides = _flag_overrides(args)
        if args.command == "reproduce" and args.out is None and args.config is None:
            overrides.setdefault("out", f"out/fig{args.figure}")
        cfg = load_config(args.config, overrides)
        if args.command == "train":
            return cmd_train(cfg)
        if args.command == "test":
            return cmd_test(cfg, args.field)
        if args.command == "sweep-bound":
            return cmd_sweep_bound(cfg)
        if args.command == "sweep-nf":
            return cmd_sweep_nf(cfg)
        return cmd_reproduce(args.figure, cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FieldFileError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
