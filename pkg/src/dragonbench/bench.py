"""Replication harness: run methods over seeded replications and compare.

A replication draws a dataset, splits it, trains one method, trims on the
estimated propensity and applies the estimator suite.  Per-replication
seeds derive from SeedSequence([base_seed, replication]) spawned into
four independent child streams (data, split, training, subsampling), so
results are reproducible run-to-run and identical whether replications
execute serially or in a process pool.  Wall-clock time is recorded per
run but is the one field excluded from determinism claims.

Absolute errors are measured against the dataset's sample average effect
(mean(mu1 - mu0)) when the generating process provides it, else against
the configured population effect.  Estimates are computed over three row
scopes: "in" (train plus validation), "out" (test) and "all"; summary
tables aggregate the "all" scope.  Replications whose heldout treatment
accuracy exceeds 0.90 are flagged as near-overlap-violations and excluded
from summaries while staying in the raw results.
"""

from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .datagen import (
    Dataset,
    SplitIndices,
    SplitSpec,
    gen_dgp_ihdp_like,
    gen_dgp_irrelevant,
    gen_dgp_lin,
    load_csv,
    split,
)
from .errors import ConfigError, EstimationError, TrainingDivergedError
from .estimators import (
    TAG_Q,
    TAG_TMLE,
    TAG_TREG,
    ESTIMATOR_TAGS,
    EstimateReport,
    apply_estimators,
    diff_in_means,
    overlap_flag,
    propensity_accuracy,
)
from .models import ARCHITECTURES, FittedModel
from .objectives import select_observed
from .train import TrainConfig, train_architecture

ARCH_ORACLE = "oracle"
MIN_SUBSAMPLE_ROWS = 50
DEFAULT_TRUNCATION_LEVELS = ((0.01, 0.99), (0.03, 0.97), (0.1, 0.9))
SUMMARY_SCOPE = "all"
SUMMARY_COLUMNS = ("method", "estimator", "mean_abs_err", "std_err", "n_runs")

# (label, architecture, treg) for the default comparison grid.
DEFAULT_GRID = (
    ("tarnet", "tarnet", False),
    ("tarnet+treg", "tarnet", True),
    ("dragonnet", "dragonnet", False),
    ("dragonnet+treg", "dragonnet", True),
)
DEFAULT_BASELINE = "tarnet"


@dataclass(frozen=True)
class ExperimentConfig:
    """One method's run settings; `dgp` names the data source.

    dgp kinds: {"kind": "lin", n, p, tau, confounding_strength, noise_sd},
    {"kind": "irrelevant", n, p_confound, p_outcome_only, tau, ...},
    {"kind": "ihdp_like", n, p, ...} and {"kind": "csv", "paths": [...]}
    where replication i reads paths[i].
    """

    dgp: dict
    architecture: str = "dragonnet"
    treg: bool = False
    alpha: float = 1.0
    beta: float = 1.0
    trim: tuple[float, float] = (0.01, 0.99)
    split: tuple[float, float, float] = (1.0, 0.0, 0.0)
    replications: int = 25
    base_seed: int = 0
    train: TrainConfig = field(default_factory=TrainConfig)
    estimators: "tuple[str, ...] | None" = None
    workers: int = 1

    def __post_init__(self):
        if not isinstance(self.dgp, dict) or "kind" not in self.dgp:
            raise ConfigError("dgp must be a dict with a 'kind' entry")
        if self.architecture not in (*ARCHITECTURES, ARCH_ORACLE):
            raise ConfigError(f"unknown architecture {self.architecture!r}")
        if self.architecture == "nednet" and self.treg:
            raise ConfigError("nednet does not take the targeted-regularization term")
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if self.base_seed < 0:
            raise ConfigError("base_seed must be >= 0")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        object.__setattr__(self, "trim", (float(self.trim[0]), float(self.trim[1])))
        if not 0.0 <= self.trim[0] < self.trim[1] <= 1.0:
            raise ConfigError(f"trim bounds must satisfy 0 <= low < high <= 1, got {self.trim}")
        object.__setattr__(self, "split", tuple(float(q) for q in self.split))
        if len(self.split) != 3:
            raise ConfigError("split needs (train, validation, test) proportions")
        if self.estimators is not None:
            object.__setattr__(self, "estimators", tuple(self.estimators))
            unknown = set(self.estimators) - set(ESTIMATOR_TAGS)
            if unknown:
                raise ConfigError(f"unknown estimator tags {sorted(unknown)}")

    @property
    def method_label(self) -> str:
        return self.architecture + ("+treg" if self.treg else "")

    def estimator_tags(self) -> tuple[str, ...]:
        if self.estimators is not None:
            return self.estimators
        return ((TAG_TREG if self.treg else TAG_Q), TAG_TMLE)

    def headline_tag(self) -> str:
        return TAG_TREG if self.treg else TAG_Q

    def effective_train_config(self) -> TrainConfig:
        return replace(
            self.train, alpha=self.alpha, beta=self.beta if self.treg else 0.0
        )

    def to_dict(self) -> dict:
        return {
            "dgp": dict(self.dgp),
            "architecture": self.architecture,
            "treg": self.treg,
            "alpha": self.alpha,
            "beta": self.beta,
            "trim": list(self.trim),
            "split": list(self.split),
            "replications": self.replications,
            "base_seed": self.base_seed,
            "train": self.train.to_dict(),
            "estimators": None if self.estimators is None else list(self.estimators),
            "workers": self.workers,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        d["trim"] = tuple(d.get("trim", (0.01, 0.99)))
        d["split"] = tuple(d.get("split", (1.0, 0.0, 0.0)))
        if "train" in d and isinstance(d["train"], dict):
            d["train"] = TrainConfig.from_dict(d["train"])
        if d.get("estimators") is not None:
            d["estimators"] = tuple(d["estimators"])
        return cls(**d)


@dataclass(frozen=True)
class RunResult:
    """Everything one replication produced, before any aggregation."""

    replication: int
    method: str
    trim_bounds: tuple[float, float]
    truth: "float | None"
    reports: dict  # scope -> {tag: EstimateReport}
    abs_errors: dict  # scope -> {tag: float}
    estimation_errors: dict  # scope -> message, when estimation failed
    dim: "float | None"
    dim_abs_error: "float | None"
    heldout_mse: "float | None"
    heldout_accuracy: "float | None"
    overlap: bool
    diverged: "str | None"
    wall_time: float

    def to_dict(self) -> dict:
        return {
            "replication": self.replication,
            "method": self.method,
            "trim_bounds": list(self.trim_bounds),
            "truth": self.truth,
            "reports": {
                scope: {tag: rep.to_dict() for tag, rep in by_tag.items()}
                for scope, by_tag in self.reports.items()
            },
            "abs_errors": {s: dict(v) for s, v in self.abs_errors.items()},
            "estimation_errors": dict(self.estimation_errors),
            "dim": self.dim,
            "dim_abs_error": self.dim_abs_error,
            "heldout_mse": self.heldout_mse,
            "heldout_accuracy": self.heldout_accuracy,
            "overlap": self.overlap,
            "diverged": self.diverged,
            "wall_time": self.wall_time,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunResult":
        return cls(
            replication=d["replication"],
            method=d["method"],
            trim_bounds=tuple(d["trim_bounds"]),
            truth=d["truth"],
            reports={
                scope: {tag: EstimateReport.from_dict(r) for tag, r in by_tag.items()}
                for scope, by_tag in d["reports"].items()
            },
            abs_errors={s: dict(v) for s, v in d["abs_errors"].items()},
            estimation_errors=dict(d["estimation_errors"]),
            dim=d["dim"],
            dim_abs_error=d["dim_abs_error"],
            heldout_mse=d["heldout_mse"],
            heldout_accuracy=d["heldout_accuracy"],
            overlap=d["overlap"],
            diverged=d["diverged"],
            wall_time=d["wall_time"],
        )

    def usable(self) -> bool:
        return self.diverged is None and not self.overlap and self.truth is not None


@dataclass(frozen=True)
class SummaryRow:
    method: str
    estimator: str
    mean_abs_err: float
    std_err: float
    n_runs: int


@dataclass(frozen=True)
class SummaryTable:
    rows: tuple[SummaryRow, ...]


@dataclass(frozen=True)
class ImprovementStats:
    """Share and size of paired improvements of a method over a baseline.

    A pair counts as improved when the method's absolute error is strictly
    below the baseline's; ties count as neither improved nor degraded.
    up_avg is the mean error reduction over improved pairs, down_avg the
    mean increase over degraded ones; both are 0 when their set is empty.
    """

    pct_improved: float
    up_avg: float
    down_avg: float
    n_pairs: int


@dataclass(frozen=True)
class ExperimentResult:
    config: ExperimentConfig
    runs: tuple[RunResult, ...]
    summary: SummaryTable


@dataclass(frozen=True)
class GridResult:
    results: dict  # label -> ExperimentResult
    comparisons: dict  # label -> ImprovementStats vs baseline (headline errors)
    baseline: str


def make_dataset(dgp: dict, rng: np.random.Generator, replication: int) -> Dataset:
    kind = dgp.get("kind")
    if kind == "lin":
        return gen_dgp_lin(
            n=int(dgp["n"]),
            p=int(dgp["p"]),
            tau=float(dgp.get("tau", 1.0)),
            confounding_strength=float(dgp.get("confounding_strength", 1.0)),
            noise_sd=float(dgp.get("noise_sd", 1.0)),
            rng=rng,
        )
    if kind == "irrelevant":
        kwargs = {}
        for key in ("confounding_strength", "outcome_scale", "noise_sd"):
            if key in dgp:
                kwargs[key] = float(dgp[key])
        return gen_dgp_irrelevant(
            n=int(dgp["n"]),
            p_confound=int(dgp["p_confound"]),
            p_outcome_only=int(dgp["p_outcome_only"]),
            tau=float(dgp.get("tau", 1.0)),
            rng=rng,
            **kwargs,
        )
    if kind == "ihdp_like":
        return gen_dgp_ihdp_like(
            n=int(dgp.get("n", 747)),
            p=int(dgp.get("p", 25)),
            rng=rng,
            target_sample_ate=float(dgp.get("target_sample_ate", 4.0)),
            noise_sd=float(dgp.get("noise_sd", 1.0)),
        )
    if kind == "csv":
        paths = dgp.get("paths")
        if not paths:
            raise ConfigError("csv dgp needs a nonempty 'paths' list")
        if replication >= len(paths):
            raise ConfigError(
                f"replication {replication} has no csv file: only {len(paths)} paths"
            )
        return load_csv(paths[replication])
    raise ConfigError(f"unknown dgp kind {kind!r}")


def _replication_streams(base_seed: int, replication: int):
    ss = np.random.SeedSequence([base_seed, replication])
    data_c, split_c, train_c, sub_c = ss.spawn(4)
    return (
        np.random.default_rng(data_c),
        int(split_c.generate_state(1, np.uint64)[0]),
        np.random.default_rng(train_c),
        np.random.default_rng(sub_c),
    )


def _scope_indices(n: int, idx: SplitIndices) -> dict[str, np.ndarray]:
    scopes = {
        SUMMARY_SCOPE: np.arange(n),
        "in": np.sort(np.concatenate([idx.train, idx.validation])),
    }
    if idx.test.size:
        scopes["out"] = idx.test
    return scopes


def _oracle_model(dataset: Dataset) -> FittedModel:
    if dataset.mu0 is None:
        raise ConfigError("oracle mode needs a dataset with mu0/mu1")
    return FittedModel.from_values(
        dataset.X,
        dataset.mu0,
        dataset.mu1,
        np.full(dataset.n, 0.5),
    )


def run_replication(
    config: ExperimentConfig,
    replication: int,
    subsample_rate: "float | None" = None,
    bounds_list: "tuple | None" = None,
) -> list[RunResult]:
    """Run one replication; returns one RunResult per trim level.

    `bounds_list` defaults to (config.trim,).  Training happens once; only
    the trimming/estimation stage repeats per level.
    """
    levels = tuple(bounds_list) if bounds_list else (config.trim,)
    started = time.perf_counter()
    data_rng, split_seed, train_rng, sub_rng = _replication_streams(
        config.base_seed, replication
    )
    dataset = make_dataset(config.dgp, data_rng, replication)
    if subsample_rate is not None:
        if not 0.0 < subsample_rate <= 1.0:
            raise ConfigError(f"subsample rate must be in (0, 1], got {subsample_rate}")
        k = int(round(subsample_rate * dataset.n))
        if k < MIN_SUBSAMPLE_ROWS:
            raise ConfigError(
                f"subsample rate {subsample_rate} keeps {k} rows; need >= {MIN_SUBSAMPLE_ROWS}"
            )
        perm = sub_rng.permutation(dataset.n)
        dataset = dataset.subset(np.sort(perm[:k]))
    idx = split(dataset, SplitSpec(*config.split, seed=split_seed))
    scopes = _scope_indices(dataset.n, idx)
    truth = dataset.ground_truth()
    label = config.method_label

    def finished(model: "FittedModel | None", diverged: "str | None") -> list[RunResult]:
        wall = time.perf_counter() - started
        out = []
        t_float = dataset.t.astype(np.float64)
        if model is not None:
            held = scopes.get("out")
            if held is None or held.size == 0:
                held = idx.validation if idx.validation.size else np.arange(dataset.n)
            Xh, th, yh = dataset.X[held], t_float[held], dataset.y[held]
            q_at_t = select_observed(model.q0(Xh), model.q1(Xh), th)
            heldout_mse = float(np.mean((q_at_t - yh) ** 2))
            heldout_acc = propensity_accuracy(model.g(Xh), th)
            flagged = overlap_flag(heldout_acc)
        else:
            heldout_mse = heldout_acc = None
            flagged = False
        both_groups = 0 < dataset.t.sum() < dataset.n
        dim = diff_in_means(t_float, dataset.y) if both_groups else None
        dim_err = abs(dim - truth) if (dim is not None and truth is not None) else None
        for bounds in levels:
            reports: dict = {}
            errors: dict = {}
            abs_errors: dict = {}
            if model is not None:
                for scope, rows in scopes.items():
                    try:
                        by_tag = apply_estimators(
                            model,
                            dataset.X[rows],
                            t_float[rows],
                            dataset.y[rows],
                            bounds,
                            config.estimator_tags(),
                        )
                    except EstimationError as err:
                        errors[scope] = str(err)
                        continue
                    reports[scope] = by_tag
                    if truth is not None:
                        abs_errors[scope] = {
                            tag: abs(rep.psi_hat - truth) for tag, rep in by_tag.items()
                        }
            out.append(
                RunResult(
                    replication=replication,
                    method=label,
                    trim_bounds=bounds,
                    truth=truth,
                    reports=reports,
                    abs_errors=abs_errors,
                    estimation_errors=errors,
                    dim=dim,
                    dim_abs_error=dim_err,
                    heldout_mse=heldout_mse,
                    heldout_accuracy=heldout_acc,
                    overlap=flagged,
                    diverged=diverged,
                    wall_time=wall,
                )
            )
        return out

    if config.architecture == ARCH_ORACLE:
        return finished(_oracle_model(dataset), None)
    train_data = dataset.subset(idx.train)
    val_data = dataset.subset(idx.validation) if idx.validation.size else None
    try:
        model = train_architecture(
            config.architecture,
            train_data,
            config.effective_train_config(),
            rng=train_rng,
            val_data=val_data,
        )
    except TrainingDivergedError as err:
        return finished(None, str(err))
    return finished(model, None)


def summarize(
    config: ExperimentConfig, runs, scope: str = SUMMARY_SCOPE
) -> SummaryTable:
    """Mean absolute error per estimator over usable runs, in seed order."""
    rows = []
    for tag in config.estimator_tags():
        errs = [
            r.abs_errors[scope][tag]
            for r in runs
            if r.usable() and tag in r.abs_errors.get(scope, {})
        ]
        k = len(errs)
        if k == 0:
            continue
        arr = np.asarray(errs)
        std_err = float(arr.std(ddof=1) / np.sqrt(k)) if k > 1 else 0.0
        rows.append(
            SummaryRow(
                method=config.method_label,
                estimator=tag,
                mean_abs_err=float(arr.mean()),
                std_err=std_err,
                n_runs=k,
            )
        )
    return SummaryTable(rows=tuple(rows))


def _worker(config: ExperimentConfig, replication: int, rate, bounds_list):
    return replication, run_replication(config, replication, rate, bounds_list)


def _run_all_replications(
    config: ExperimentConfig, subsample_rate=None, bounds_list=None
) -> list[list[RunResult]]:
    reps = range(config.replications)
    if config.workers == 1:
        return [run_replication(config, r, subsample_rate, bounds_list) for r in reps]
    results: dict[int, list[RunResult]] = {}
    with ProcessPoolExecutor(max_workers=config.workers) as pool:
        futures = [
            pool.submit(_worker, config, r, subsample_rate, bounds_list) for r in reps
        ]
        for fut in futures:
            rep, run_list = fut.result()
            results[rep] = run_list
    return [results[r] for r in reps]


def run_experiment(
    config: ExperimentConfig, subsample_rate: "float | None" = None
) -> ExperimentResult:
    per_rep = _run_all_replications(config, subsample_rate)
    runs = tuple(lists[0] for lists in per_rep)
    return ExperimentResult(config=config, runs=runs, summary=summarize(config, runs))


def compare_methods(method_errors, baseline_errors) -> ImprovementStats:
    """Paired comparison of per-replication absolute errors vs a baseline."""
    a = np.asarray(method_errors, dtype=np.float64)
    b = np.asarray(baseline_errors, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ConfigError(
            f"error lists must be aligned 1-d sequences, got {a.shape} vs {b.shape}"
        )
    if a.size == 0:
        raise ConfigError("no pairs to compare")
    improved = a < b
    degraded = a > b
    up = float(np.mean(b[improved] - a[improved])) if improved.any() else 0.0
    down = float(np.mean(a[degraded] - b[degraded])) if degraded.any() else 0.0
    return ImprovementStats(
        pct_improved=100.0 * float(improved.mean()),
        up_avg=up,
        down_avg=down,
        n_pairs=int(a.size),
    )


def stratified_comparison(
    method_errors, baseline_errors, threshold: float = 1.0
) -> dict[str, "ImprovementStats | None"]:
    """compare_methods split by baseline quality: pairs whose baseline error
    is below `threshold` ("good") vs the rest ("bad")."""
    a = np.asarray(method_errors, dtype=np.float64)
    b = np.asarray(baseline_errors, dtype=np.float64)
    if a.shape != b.shape:
        raise ConfigError("error lists must be aligned")
    good = b < threshold
    out: dict[str, "ImprovementStats | None"] = {}
    for name, mask in (("good", good), ("bad", ~good)):
        out[name] = compare_methods(a[mask], b[mask]) if mask.any() else None
    return out


def paired_headline_errors(
    result_a: ExperimentResult, result_b: ExperimentResult, scope: str = SUMMARY_SCOPE
) -> tuple[list[float], list[float]]:
    """Headline-estimator errors aligned by replication, keeping pairs where
    both runs are usable."""
    tag_a = result_a.config.headline_tag()
    tag_b = result_b.config.headline_tag()
    by_rep_b = {r.replication: r for r in result_b.runs}
    errs_a, errs_b = [], []
    for ra in result_a.runs:
        rb = by_rep_b.get(ra.replication)
        if rb is None or not (ra.usable() and rb.usable()):
            continue
        ea = ra.abs_errors.get(scope, {}).get(tag_a)
        eb = rb.abs_errors.get(scope, {}).get(tag_b)
        if ea is None or eb is None:
            continue
        errs_a.append(ea)
        errs_b.append(eb)
    return errs_a, errs_b


def run_grid(
    config: ExperimentConfig, methods=DEFAULT_GRID, baseline: str = DEFAULT_BASELINE
) -> GridResult:
    """Run several methods on shared per-replication datasets.

    The data/split/train seeds depend only on (base_seed, replication), so
    every method sees the same drawn datasets and the comparisons pair up.
    """
    labels = [m[0] for m in methods]
    if baseline not in labels:
        raise ConfigError(f"baseline {baseline!r} is not in the method grid {labels}")
    results = {}
    for label, arch, treg in methods:
        cfg = replace(config, architecture=arch, treg=treg)
        results[label] = run_experiment(cfg)
    comparisons = {}
    base_result = results[baseline]
    for label in labels:
        errs_m, errs_b = paired_headline_errors(results[label], base_result)
        if errs_m:
            comparisons[label] = compare_methods(errs_m, errs_b)
    return GridResult(results=results, comparisons=comparisons, baseline=baseline)


def subsample_sweep(config: ExperimentConfig, rates) -> dict[float, ExperimentResult]:
    """Re-run the experiment on nested seeded subsamples of each dataset.

    Subset selection uses a dedicated per-replication stream: one
    permutation is drawn and rate r keeps its first round(r * n) entries
    (sorted), so smaller rates are subsets of larger ones and rate 1.0
    reproduces run_experiment exactly.
    """
    rates = [float(r) for r in rates]
    for r in rates:
        if not 0.0 < r <= 1.0:
            raise ConfigError(f"subsample rates must be in (0, 1], got {r}")
    return {r: run_experiment(config, subsample_rate=r) for r in rates}


def truncation_sweep(
    config: ExperimentConfig, levels=DEFAULT_TRUNCATION_LEVELS
) -> dict[tuple[float, float], ExperimentResult]:
    """Estimate under several trim levels without retraining.

    Each replication trains once; the trimming/estimation stage reruns per
    level.  A level that trims away every row is recorded per run in
    `estimation_errors` rather than raising.
    """
    levels = tuple((float(lo), float(hi)) for lo, hi in levels)
    for lo, hi in levels:
        if not 0.0 <= lo < hi <= 1.0:
            raise ConfigError(f"invalid trim level ({lo}, {hi})")
    per_rep = _run_all_replications(config, bounds_list=levels)
    out = {}
    for i, level in enumerate(levels):
        cfg = replace(config, trim=level)
        runs = tuple(lists[i] for lists in per_rep)
        out[level] = ExperimentResult(config=cfg, runs=runs, summary=summarize(cfg, runs))
    return out


# --- reporting ---------------------------------------------------------------

def _summary_rows(results: "ExperimentResult | GridResult") -> list[SummaryRow]:
    if isinstance(results, ExperimentResult):
        return list(results.summary.rows)
    rows: list[SummaryRow] = []
    for label in results.results:
        rows.extend(results.results[label].summary.rows)
    return rows


def emit_report(results: "ExperimentResult | GridResult", out_dir) -> dict[str, Path]:
    """Write summary.csv and runs.json under out_dir; returns the paths.

    Refuses to write anything when there are no summary rows, so a failed
    experiment never leaves a half-report behind.
    """
    rows = _summary_rows(results)
    if not rows:
        raise ConfigError("nothing to report: no usable runs")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary_path = out_dir / "summary.csv"
    with summary_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_COLUMNS)
        for row in rows:
            writer.writerow(
                [row.method, row.estimator, repr(row.mean_abs_err), repr(row.std_err), row.n_runs]
            )
    if isinstance(results, ExperimentResult):
        methods = {results.config.method_label: results}
        extra = {}
    else:
        methods = results.results
        extra = {
            "baseline": results.baseline,
            "comparisons": {
                label: {
                    "pct_improved": st.pct_improved,
                    "up_avg": st.up_avg,
                    "down_avg": st.down_avg,
                    "n_pairs": st.n_pairs,
                }
                for label, st in results.comparisons.items()
            },
        }
    bundle = {
        "methods": {
            label: {
                "config": res.config.to_dict(),
                "runs": [r.to_dict() for r in res.runs],
            }
            for label, res in methods.items()
        },
        **extra,
    }
    runs_path = out_dir / "runs.json"
    runs_path.write_text(json.dumps(bundle))
    return {"summary": summary_path, "runs": runs_path}


def load_report(runs_path) -> dict[str, ExperimentResult]:
    """Rebuild per-method ExperimentResults (summaries recomputed) from runs.json."""
    bundle = json.loads(Path(runs_path).read_text())
    out = {}
    for label, entry in bundle["methods"].items():
        cfg = ExperimentConfig.from_dict(entry["config"])
        runs = tuple(RunResult.from_dict(d) for d in entry["runs"])
        out[label] = ExperimentResult(config=cfg, runs=runs, summary=summarize(cfg, runs))
    return out


def emit_sweep_report(sweep: dict, out_dir, kind: str) -> dict[str, Path]:
    """Long-format CSV + JSON bundle for a sweep keyed by rate or trim level."""
    if not sweep:
        raise ConfigError("empty sweep")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{kind}_sweep.csv"
    with csv_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("sweep",) + SUMMARY_COLUMNS)
        for key in sweep:
            label = f"{key[0]}:{key[1]}" if isinstance(key, tuple) else repr(float(key))
            for row in sweep[key].summary.rows:
                writer.writerow(
                    [label, row.method, row.estimator, repr(row.mean_abs_err), repr(row.std_err), row.n_runs]
                )
    bundle = {
        "kind": kind,
        "levels": {
            (f"{k[0]}:{k[1]}" if isinstance(k, tuple) else repr(float(k))): {
                "config": res.config.to_dict(),
                "runs": [r.to_dict() for r in res.runs],
            }
            for k, res in sweep.items()
        },
    }
    json_path = out_dir / f"{kind}_sweep.json"
    json_path.write_text(json.dumps(bundle))
    return {"csv": csv_path, "json": json_path}


def format_summary(results: "ExperimentResult | GridResult") -> str:
    """Plain-text table: one row per method x estimator, plus comparisons."""
    rows = _summary_rows(results)
    lines = [f"{'method':<18} {'estimator':<10} {'mean_abs_err':>12} {'std_err':>10} {'n':>4}"]
    for r in rows:
        lines.append(
            f"{r.method:<18} {r.estimator:<10} {r.mean_abs_err:>12.4f} {r.std_err:>10.4f} {r.n_runs:>4d}"
        )
    if isinstance(results, GridResult):
        lines.append("")
        lines.append(f"paired comparison vs {results.baseline} (headline estimators):")
        for label, st in results.comparisons.items():
            lines.append(
                f"  {label:<18} improved {st.pct_improved:5.1f}%  "
                f"up_avg {st.up_avg:.4f}  down_avg {st.down_avg:.4f}  pairs {st.n_pairs}"
            )
    return "\n".join(lines)


def format_truncation_table(sweep: dict) -> str:
    """Rows = method/estimator, columns = trim levels, cells = mean (se)."""
    levels = list(sweep.keys())
    keys = []
    for res in sweep.values():
        for row in res.summary.rows:
            k = (row.method, row.estimator)
            if k not in keys:
                keys.append(k)
    header = f"{'method':<18} {'estimator':<10}" + "".join(
        f" {f'[{lo},{hi}]':>18}" for lo, hi in levels
    )
    lines = [header]
    for method, tag in keys:
        cells = []
        for level in levels:
            row = next(
                (
                    r
                    for r in sweep[level].summary.rows
                    if r.method == method and r.estimator == tag
                ),
                None,
            )
            cells.append(
                f" {'-':>18}"
                if row is None
                else f" {f'{row.mean_abs_err:.4f} ({row.std_err:.4f})':>18}"
            )
        lines.append(f"{method:<18} {tag:<10}" + "".join(cells))
    return "\n".join(lines)
