"""Monte-Carlo testing of trained fields and fluctuation-bound sweeps."""

from __future__ import annotations

import io
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .models import QubitModel, build_model
from .optimizer import ControlField, OptimizationConfig, TrainingResult, initial_field, sample_overlaps, train
from .sampling import BLOCK_SIZE, draw_block, training_grid

log = logging.getLogger(__name__)

HIST_BINS = 100
DEFAULT_BOUNDS = (0.05, 0.10, 0.15, 0.20, 0.25)
SWEEP_COLUMNS = ("theta", "mean_fidelity", "std_fidelity", "min_fidelity", "n", "seed")


@dataclass
class TestReport:
    __test__ = False

    n_samples: int
    mean_fidelity: float
    std_fidelity: float
    min_fidelity: float
    histogram: np.ndarray
    seed: int
    fidelities: np.ndarray | None = field(default=None, repr=False)

    @classmethod
    def from_fidelities(cls, fidelities: np.ndarray, seed: int, keep: bool = True) -> "TestReport":
        fid = np.asarray(fidelities, dtype=float)
        if fid.size == 0:
            raise ValueError("no fidelities to report")
        total = 0.0
        for f in fid:
            total += f
        mean = total / fid.size
        std = math.sqrt(float(np.sum((fid - mean) ** 2)) / fid.size)
        hist, _ = np.histogram(fid, bins=HIST_BINS, range=(0.0, 1.0))
        return cls(int(fid.size), float(mean), std, float(fid.min()), hist, seed, fid if keep else None)


def monte_carlo_fidelity(field: ControlField, model: QubitModel, n: int, seed: int,
                         distribution: str | None = None, threads: int = 1) -> TestReport:
    """Fidelity |<psi(T)|target>| over ``n`` random fluctuation samples.

    Samples come in seeded blocks (see ``sampling``); each block is drawn and
    propagated independently so the report does not depend on ``threads``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if field.values.shape != (model.n_channels, model.intervals):
        raise ValueError(f"field shape {field.values.shape} does not match model {model.name}")

    def block(b: int) -> np.ndarray:
        size = min(BLOCK_SIZE, n - b * BLOCK_SIZE)
        samples = draw_block(model.fluctuations, seed, b, size, distribution)
        return np.minimum(np.abs(sample_overlaps(field, model, samples, chunk=256)), 1.0)

    blocks = range(math.ceil(n / BLOCK_SIZE))
    if threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(block, blocks))
    else:
        parts = [block(b) for b in blocks]
    return TestReport.from_fidelities(np.concatenate(parts), seed)


@dataclass
class SweepRow:
    key: float
    theta: float
    report: TestReport
    training: TrainingResult | None = None


@dataclass
class SweepTable:
    """Rows keyed by the swept quantity (``theta`` or ``nf``), strictly increasing."""

    key_name: str
    rows: list[SweepRow]
    label: str = ""

    def __post_init__(self):
        keys = [r.key for r in self.rows]
        if any(b <= a for a, b in zip(keys, keys[1:])):
            raise ValueError("swept values must be strictly increasing")

    def header(self) -> list[str]:
        cols = list(SWEEP_COLUMNS)
        return cols if self.key_name == "theta" else [self.key_name] + cols

    def csv_rows(self) -> list[list[str]]:
        out = []
        for r in self.rows:
            rep = r.report
            cells = [_fmt(r.theta), _fmt(rep.mean_fidelity), _fmt(rep.std_fidelity),
                     _fmt(rep.min_fidelity), str(rep.n_samples), str(rep.seed)]
            if self.key_name != "theta":
                cells = [_fmt(r.key)] + cells
            out.append(cells)
        return out


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_csv(path, header: Sequence[str], rows: Sequence[Sequence[str]]) -> None:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(row) + "\n")
    with open(path, "w", newline="") as fh:
        fh.write(buf.getvalue())


def write_sweep_csv(path, tables: Sequence[SweepTable]) -> None:
    """One CSV; a leading ``case`` column is added when several curves share the file."""
    header = tables[0].header()
    if len(tables) == 1:
        write_csv(path, header, tables[0].csv_rows())
        return
    rows = [[t.label] + cells for t in tables for cells in t.csv_rows()]
    write_csv(path, ["case"] + header, rows)


def train_and_test(model: QubitModel, nf: int | dict[str, int], n_test: int, seed_test: int,
                   config: OptimizationConfig | None = None,
                   distribution: str | None = None) -> tuple[TrainingResult, TestReport]:
    """One training run on the uniform grid followed by a Monte-Carlo test."""
    config = config or OptimizationConfig()
    ensemble = training_grid(model.fluctuations, nf)
    result = train(model, ensemble, initial_field(model), config)
    report = monte_carlo_fidelity(result.field, model, n_test, seed_test, distribution, config.threads)
    return result, report


def sweep_bound(model_id: str, bounds: Sequence[float] = DEFAULT_BOUNDS, n: int = 5000,
                seed_test: int = 1, nf: int = 5, config: OptimizationConfig | None = None,
                distribution: str | None = None) -> SweepTable:
    """Train from the model's starting field at every bound and test each result."""
    if not bounds:
        raise ValueError("bounds must be non-empty")
    base = build_model(model_id)
    rows = []
    for theta in bounds:
        if not 0 <= theta < 1:
            raise ValueError(f"bound {theta!r} outside [0, 1)")
        model = base.with_bound(theta)
        result, report = train_and_test(model, nf, n, seed_test, config, distribution)
        log.info("%s theta=%g: J=%.6f mean F=%.6f", model_id, theta, result.J_history[-1], report.mean_fidelity)
        rows.append(SweepRow(float(theta), float(theta), report, result))
    return SweepTable("theta", rows, label=model_id)


def sweep_sample_count(nf_values: Sequence[int], theta: float = 0.15,
                       model_id: str = "single_charge_superposition", n: int = 5000, seed_test: int = 1,
                       config: OptimizationConfig | None = None) -> SweepTable:
    """Average fidelity against the per-parameter grid size at a fixed bound."""
    model = build_model(model_id).with_bound(theta)
    rows = []
    for nf in nf_values:
        if nf < 1:
            raise ValueError("grid sizes must be >= 1")
        result, report = train_and_test(model, int(nf), n, seed_test, config)
        log.info("%s nf=%d: J=%.6f mean F=%.6f", model_id, nf, result.J_history[-1], report.mean_fidelity)
        rows.append(SweepRow(int(nf), theta, report, result))
    return SweepTable("nf", rows, label=model_id)
