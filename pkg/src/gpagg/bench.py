"""Synthetic benchmark harness: generate data, train shared experts, run
every aggregation method, and report MAE/RMSE/time/storage per method.

The 1-D test function is

    f(x) = 5 x^2 sin(12 x) + (x^3 - 0.5) sin(3 x - 0.5) + 4 cos(2 x) + eps,
    eps ~ N(0, noise_sd^2),

with training inputs uniform on ``train_range`` and test inputs on
``test_range`` (an extrapolating superset by default). Data is
standardized by training statistics before fitting; errors are reported
in original units.

Timing is split into the shared training cost (hyperparameter fit plus
expert factorization, identical for every method in a cell) and the
per-method prediction cost. For methods consuming stacked expert
predictions, the shared per-expert predict time is included in their
prediction cost so the comparison against self-contained methods (NPAE,
GRBCM) stays fair. ``peak_matrix_bytes`` is the largest dense matrix a
method materializes: n^2 entries for the full GP and for NPAE's joint
observation covariance, the largest merged-expert covariance for GRBCM,
and the stacked prediction/precision matrices for the rest.
"""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .baselines import bcm, collect_predictions, gpoe, grbcm_aggregate, grbcm_base_index, poe, rbcm
from .emggm import EmggmConfig, emggm_aggregate
from .errors import DimensionError
from .gp import Dataset, FitOptions, Hyperparameters, NormalizationState, fit_shared_hyperparameters, predict, train_expert
from .npae import npae_aggregate
from .partition import kmeans_partition, random_partition
from .svg import render_line_chart

log = logging.getLogger(__name__)

METHODS = ("full_gp", "poe", "gpoe", "bcm", "rbcm", "grbcm", "npae", "emggm")
PARTITIONERS = ("kmeans", "random")

CSV_HEADER = "method,M,seed,mae,rmse,train_time_s,predict_time_s,peak_matrix_bytes"

# Offset separating the test-set random stream from the training stream.
_TEST_SEED_OFFSET = 10_000_019


def latent_function(x: np.ndarray) -> np.ndarray:
    """Noiseless benchmark function on 1-D inputs."""
    return (
        5.0 * x**2 * np.sin(12.0 * x)
        + (x**3 - 0.5) * np.sin(3.0 * x - 0.5)
        + 4.0 * np.cos(2.0 * x)
    )


def generate_synthetic(n: int, value_range: tuple[float, float], noise_sd: float, seed: int) -> Dataset:
    """Draw x uniform on the range and y = f(x) + noise, deterministically per seed."""
    if n < 1:
        raise ValueError("n must be >= 1")
    lo, hi = value_range
    if not lo < hi:
        raise ValueError(f"range must be increasing, got ({lo}, {hi})")
    rng = np.random.default_rng(seed)
    x = rng.uniform(lo, hi, size=n)
    y = latent_function(x) + noise_sd * rng.standard_normal(n)
    return Dataset(x[:, None], y)


def normalize(train: Dataset, test: Dataset) -> tuple[Dataset, Dataset, NormalizationState]:
    """Standardize both sets by the training mean/std, column-wise."""
    if train.n == 0:
        raise ValueError("training set is empty")
    x_mean = train.X.mean(axis=0)
    x_scale = train.X.std(axis=0)
    y_mean = float(train.y.mean())
    y_scale = float(train.y.std())
    if np.any(x_scale <= 0) or y_scale <= 0:
        raise ValueError("cannot normalize a constant column")
    state = NormalizationState(x_mean=x_mean, x_scale=x_scale, y_mean=y_mean, y_scale=y_scale)
    train_n = Dataset((train.X - x_mean) / x_scale, (train.y - y_mean) / y_scale, state)
    test_n = Dataset((test.X - x_mean) / x_scale, (test.y - y_mean) / y_scale, state)
    return train_n, test_n, state


def denormalize_y(y: np.ndarray, state: NormalizationState) -> np.ndarray:
    return y * state.y_scale + state.y_mean


def metrics(pred: np.ndarray, truth: np.ndarray) -> tuple[float, float]:
    """(MAE, RMSE) of a prediction against the truth."""
    pred = np.asarray(pred, dtype=float).ravel()
    truth = np.asarray(truth, dtype=float).ravel()
    if pred.size != truth.size:
        raise DimensionError(f"prediction has {pred.size} entries, truth has {truth.size}")
    delta = pred - truth
    return float(np.mean(np.abs(delta))), float(math.sqrt(np.mean(delta**2)))


@dataclass(frozen=True)
class BenchmarkConfig:
    """One benchmark campaign; JSON config files mirror these field names."""

    n: int = 2000
    n_t: int = 200
    train_range: tuple[float, float] = (0.0, 1.0)
    test_range: tuple[float, float] = (-0.2, 1.2)
    noise_sd: float = 0.2
    M_list: tuple[int, ...] = (5, 10)
    methods: tuple[str, ...] = METHODS
    seeds: tuple[int, ...] = (0,)
    partitioner: str = "kmeans"
    emggm: EmggmConfig = field(default_factory=EmggmConfig)
    output_dir: str = "bench_out"
    make_svg: bool = False

    def __post_init__(self):
        if self.n < 1 or self.n_t < 1:
            raise ValueError("n and n_t must be >= 1")
        for rng in (self.train_range, self.test_range):
            if not rng[0] < rng[1]:
                raise ValueError(f"range must be increasing, got {rng}")
        if not self.methods:
            raise ValueError("methods must be non-empty")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ValueError(f"unknown methods {sorted(unknown)}; choose from {METHODS}")
        if self.partitioner not in PARTITIONERS:
            raise ValueError(f"unknown partitioner {self.partitioner!r}")
        object.__setattr__(self, "M_list", tuple(int(m) for m in self.M_list))
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        object.__setattr__(self, "train_range", tuple(float(v) for v in self.train_range))
        object.__setattr__(self, "test_range", tuple(float(v) for v in self.test_range))

    @classmethod
    def from_dict(cls, obj: dict) -> "BenchmarkConfig":
        obj = dict(obj)
        if "emggm" in obj and isinstance(obj["emggm"], dict):
            obj["emggm"] = EmggmConfig(**obj["emggm"])
        return cls(**obj)

    @classmethod
    def from_json(cls, path: str | Path) -> "BenchmarkConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def to_dict(self) -> dict:
        obj = asdict(self)
        return obj


@dataclass(eq=False)
class BenchmarkRow:
    """One CSV line: a method's accuracy, timing, and storage in one cell."""

    method: str
    M: int
    seed: int
    mae: float
    rmse: float
    train_time_s: float
    predict_time_s: float
    peak_matrix_bytes: int

    def to_csv(self) -> str:
        return (
            f"{self.method},{self.M},{self.seed},{self.mae!r},{self.rmse!r},"
            f"{self.train_time_s!r},{self.predict_time_s!r},{self.peak_matrix_bytes}"
        )

    def __eq__(self, other):
        if not isinstance(other, BenchmarkRow):
            return NotImplemented

        def feq(a, b):
            return a == b or (math.isnan(a) and math.isnan(b))

        return (
            self.method == other.method
            and self.M == other.M
            and self.seed == other.seed
            and feq(self.mae, other.mae)
            and feq(self.rmse, other.rmse)
            and feq(self.train_time_s, other.train_time_s)
            and feq(self.predict_time_s, other.predict_time_s)
            and self.peak_matrix_bytes == other.peak_matrix_bytes
        )


def emit_csv(rows: list[BenchmarkRow], path: str | Path) -> Path:
    path = Path(path)
    lines = [CSV_HEADER] + [row.to_csv() for row in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def parse_csv(path: str | Path) -> list[BenchmarkRow]:
    lines = Path(path).read_text(encoding="utf-8").strip().splitlines()
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError(f"unexpected CSV header in {path}")
    rows = []
    for line in lines[1:]:
        parts = line.split(",")
        rows.append(
            BenchmarkRow(
                method=parts[0],
                M=int(parts[1]),
                seed=int(parts[2]),
                mae=float(parts[3]),
                rmse=float(parts[4]),
                train_time_s=float(parts[5]),
                predict_time_s=float(parts[6]),
                peak_matrix_bytes=int(parts[7]),
            )
        )
    return rows


def write_dataset_csv(data: Dataset, path: str | Path) -> Path:
    """Dataset as CSV: header row, '.' decimals, one x column per dimension."""
    path = Path(path)
    if data.d == 1:
        header = "x,y"
    else:
        header = ",".join(f"x{j + 1}" for j in range(data.d)) + ",y"
    lines = [header]
    for i in range(data.n):
        lines.append(",".join(repr(float(v)) for v in data.X[i]) + f",{float(data.y[i])!r}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def load_dataset_csv(path: str | Path) -> Dataset:
    """Read a dataset written by ``write_dataset_csv`` (or shaped like it)."""
    lines = Path(path).read_text(encoding="utf-8").strip().splitlines()
    if len(lines) < 2:
        raise ValueError(f"{path} has no data rows")
    values = np.array([[float(v) for v in line.split(",")] for line in lines[1:]])
    return Dataset(values[:, :-1], values[:, -1])


def _default_init(train: Dataset) -> Hyperparameters:
    spread = float(np.mean(train.X.std(axis=0)))
    var_y = float(train.y.var())
    return Hyperparameters(
        lengthscale=np.array([0.3 * spread]),
        signal_variance=var_y,
        noise_variance=0.05 * var_y,
    )


def _bytes(*entries: int) -> int:
    return 8 * max(entries)


def run_benchmark(cfg: BenchmarkConfig) -> list[BenchmarkRow]:
    """Run every (seed, M, method) cell and write results.csv (plus
    emggm_diagnostics.json and optional SVG charts) to the output dir.

    A method failure is logged and recorded as a NaN row; the run
    continues. The full GP ignores partitioning, so its row is computed
    once per seed and repeated for every M.
    """
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows: list[BenchmarkRow] = []
    emggm_log: list[dict] = []

    for seed in cfg.seeds:
        train_raw = generate_synthetic(cfg.n, cfg.train_range, cfg.noise_sd, seed)
        test_raw = generate_synthetic(cfg.n_t, cfg.test_range, cfg.noise_sd, seed + _TEST_SEED_OFFSET)
        train, test, state = normalize(train_raw, test_raw)
        fit_opts = FitOptions(seed=seed)

        full_gp_result = None
        if "full_gp" in cfg.methods:
            try:
                tic = time.perf_counter()
                hp_full = fit_shared_hyperparameters([train], _default_init(train), fit_opts)
                expert = train_expert(train, hp_full)
                t_train = time.perf_counter() - tic
                tic = time.perf_counter()
                mean_n, _ = predict(expert, test.X)
                t_pred = time.perf_counter() - tic
                mae, rmse = metrics(denormalize_y(mean_n, state), test_raw.y)
                full_gp_result = (mae, rmse, t_train, t_pred, _bytes(cfg.n * cfg.n))
            except Exception as exc:  # noqa: BLE001 - a failed cell must not kill the run
                log.warning("full_gp failed (seed=%d): %s", seed, exc)
                full_gp_result = (math.nan, math.nan, math.nan, math.nan, 0)

        for M in cfg.M_list:
            partition = kmeans_partition if cfg.partitioner == "kmeans" else random_partition
            parts = partition(train, M, seed)
            tic = time.perf_counter()
            hp = fit_shared_hyperparameters(parts.subsets, _default_init(train), fit_opts)
            experts = [train_expert(s, hp) for s in parts.subsets]
            train_time = time.perf_counter() - tic
            tic = time.perf_counter()
            preds = collect_predictions(experts, test.X, hp)
            t_shared_pred = time.perf_counter() - tic
            max_n_i = max(s.n for s in parts.subsets)

            for method in cfg.methods:
                if method == "full_gp":
                    mae, rmse, t_tr, t_pr, peak = full_gp_result
                    rows.append(BenchmarkRow("full_gp", M, seed, mae, rmse, t_tr, t_pr, peak))
                    continue
                try:
                    tic = time.perf_counter()
                    if method == "poe":
                        mean_n, _ = poe(preds)
                        t_pred = t_shared_pred + time.perf_counter() - tic
                        peak = _bytes(cfg.n_t * M, max_n_i * cfg.n_t)
                    elif method == "gpoe":
                        mean_n, _ = gpoe(preds)
                        t_pred = t_shared_pred + time.perf_counter() - tic
                        peak = _bytes(cfg.n_t * M, max_n_i * cfg.n_t)
                    elif method == "bcm":
                        mean_n, _ = bcm(preds)
                        t_pred = t_shared_pred + time.perf_counter() - tic
                        peak = _bytes(cfg.n_t * M, max_n_i * cfg.n_t)
                    elif method == "rbcm":
                        mean_n, _ = rbcm(preds)
                        t_pred = t_shared_pred + time.perf_counter() - tic
                        peak = _bytes(cfg.n_t * M, max_n_i * cfg.n_t)
                    elif method == "grbcm":
                        mean_n, _ = grbcm_aggregate(parts, hp, test.X, seed)
                        t_pred = time.perf_counter() - tic
                        base_n = parts.subsets[grbcm_base_index(M, seed)].n
                        peak = _bytes((base_n + max_n_i) ** 2)
                    elif method == "npae":
                        mean_n = npae_aggregate(experts, hp, test.X)
                        t_pred = time.perf_counter() - tic
                        peak = _bytes(cfg.n * cfg.n)
                    elif method == "emggm":
                        mean_n, diag = emggm_aggregate(preds, cfg.emggm)
                        t_pred = t_shared_pred + time.perf_counter() - tic
                        peak = _bytes(cfg.n_t * (M + 1), (M + 1) ** 2, max_n_i * cfg.n_t)
                        emggm_log.append({"seed": seed, "M": M, **diag})
                    mae, rmse = metrics(denormalize_y(mean_n, state), test_raw.y)
                    rows.append(
                        BenchmarkRow(method, M, seed, mae, rmse, train_time, t_pred, peak)
                    )
                except Exception as exc:  # noqa: BLE001
                    log.warning("method %s failed (M=%d seed=%d): %s", method, M, seed, exc)
                    rows.append(
                        BenchmarkRow(method, M, seed, math.nan, math.nan, train_time, math.nan, 0)
                    )

    emit_csv(rows, out / "results.csv")
    if emggm_log:
        (out / "emggm_diagnostics.json").write_text(
            json.dumps(emggm_log, indent=2), encoding="utf-8"
        )
    if cfg.make_svg:
        render_benchmark_charts(rows, out)
    return rows


def _median_series(rows: list[BenchmarkRow], value) -> list[tuple[str, list[tuple[float, float]]]]:
    series = []
    methods = []
    for row in rows:
        if row.method not in methods:
            methods.append(row.method)
    for method in methods:
        pts = []
        for M in sorted({r.M for r in rows if r.method == method}):
            vals = [value(r) for r in rows if r.method == method and r.M == M]
            vals = [v for v in vals if math.isfinite(v)]
            if vals:
                pts.append((float(M), float(np.median(vals))))
        if pts:
            series.append((method, pts))
    return series


def render_benchmark_charts(rows: list[BenchmarkRow], out_dir: str | Path) -> list[Path]:
    """MAE, RMSE, and log10 prediction-time line charts (median over seeds)."""
    out_dir = Path(out_dir)
    written = []
    written.append(
        render_line_chart(
            _median_series(rows, lambda r: r.mae),
            out_dir / "mae_vs_M.svg",
            title="MAE vs number of experts",
            x_label="number of experts M",
            y_label="MAE",
        )
    )
    written.append(
        render_line_chart(
            _median_series(rows, lambda r: r.rmse),
            out_dir / "rmse_vs_M.svg",
            title="RMSE vs number of experts",
            x_label="number of experts M",
            y_label="RMSE",
        )
    )
    written.append(
        render_line_chart(
            _median_series(
                rows, lambda r: math.log10(r.predict_time_s) if r.predict_time_s > 0 else math.nan
            ),
            out_dir / "time_vs_M.svg",
            title="Prediction time vs number of experts",
            x_label="number of experts M",
            y_label="log10(seconds)",
        )
    )
    return written
