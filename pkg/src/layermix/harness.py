"""Training/evaluation orchestration and scheme comparison.

A run trains the tagger on one (scheme, seed) pair: every epoch shuffles the
sentence order, averages per-sentence CRF gradients over each batch, applies
Adam, then scores the dev split; the parameters from the best dev epoch (ties
to the earliest) are restored before the single test evaluation.  Everything
random flows from one generator seeded per run, so a run is a pure function of
(config, seed).

Comparisons train every scheme with the same seed list, take the scheme with
the best mean test score as the reference, and mark each other scheme
significantly worse when a two-sided Welch t-test against the reference gives
p < 0.01.  Seeds produce independent (not paired) samples across schemes,
hence the unequal-variance test.
"""

from __future__ import annotations

import concurrent.futures
import json
import time
from dataclasses import dataclass, field, fields, replace
from statistics import mean

import numpy as np
from scipy.special import stdtr

from . import jsonfmt, metrics
from .embedstore import AlignedDataset, align, load_conll, load_embeddings
from .errors import ConfigError, NumericalError
from .mixer import MixScheme, logit_penalty, softmax
from .model import TaggerConfig, TaggerModel
from .optim import AdamState, adam_step

ACCURACY = "accuracy"
CHUNK_F1 = "chunk_f1"

SIGNIFICANCE_LEVEL = 0.01


def _default_seeds() -> list[int]:
    return list(range(1, 11))


@dataclass
class ExperimentConfig:
    train_embeddings: str = ""
    train_labels: str = ""
    dev_embeddings: str = ""
    dev_labels: str = ""
    test_embeddings: str = ""
    test_labels: str = ""
    scheme: str = "wavg:0,1,2"
    hidden_size: int = 100
    dropout: float = 0.5
    logit_penalty: float = 0.0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    clip_norm: float | None = None
    batch_size: int = 32
    max_epochs: int = 50
    seeds: list[int] = field(default_factory=_default_seeds)
    metric: str = ACCURACY
    tag_scheme: str = "PLAIN"

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        config = cls(**data)
        config.validate()
        return config

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        return cls.from_dict(data)

    def validate(self) -> None:
        MixScheme.parse(self.scheme)
        if self.hidden_size < 1:
            raise ConfigError("hidden_size must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must be in [0, 1)")
        if self.logit_penalty < 0:
            raise ConfigError("logit_penalty must be >= 0")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.max_epochs < 1:
            raise ConfigError("max_epochs must be >= 1")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if self.metric not in (ACCURACY, CHUNK_F1):
            raise ConfigError(f"metric must be {ACCURACY!r} or {CHUNK_F1!r}")
        if self.tag_scheme not in ("PLAIN", "BIO"):
            raise ConfigError("tag_scheme must be PLAIN or BIO")


@dataclass
class ExperimentData:
    train: AlignedDataset
    dev: AlignedDataset
    test: AlignedDataset
    tagset: list[str]
    num_layers: int
    dim: int


def load_experiment_data(config: ExperimentConfig) -> ExperimentData:
    """Load and align all three splits under one shared tag index mapping."""
    corpora = [
        load_conll(path, scheme=config.tag_scheme)
        for path in (config.train_labels, config.dev_labels, config.test_labels)
    ]
    tagset: list[str] = []
    seen: set[str] = set()
    for corpus in corpora:
        for tag in corpus.tagset:
            if tag not in seen:
                seen.add(tag)
                tagset.append(tag)
    embeddings = [
        load_embeddings(path)
        for path in (config.train_embeddings, config.dev_embeddings, config.test_embeddings)
    ]
    for ds in embeddings[1:]:
        if ds.num_layers != embeddings[0].num_layers or ds.dim != embeddings[0].dim:
            raise ConfigError("train/dev/test embeddings disagree on L or D")
    aligned = [align(ds, corpus, tagset=tagset) for ds, corpus in zip(embeddings, corpora)]
    return ExperimentData(
        train=aligned[0],
        dev=aligned[1],
        test=aligned[2],
        tagset=tagset,
        num_layers=embeddings[0].num_layers,
        dim=embeddings[0].dim,
    )


@dataclass
class RunResult:
    seed: int
    scheme: str
    metric: str
    dev_scores: list[float]
    selected_epoch: int
    test_score: float
    epoch_seconds: list[float]
    mix_weights: list[float] | None
    gamma: float | None

    def to_json_obj(self) -> dict:
        return {
            "seed": self.seed,
            "scheme": self.scheme,
            "metric": self.metric,
            "dev_scores": self.dev_scores,
            "selected_epoch": self.selected_epoch,
            "test_score": self.test_score,
            "epoch_seconds": self.epoch_seconds,
            "mix_weights": self.mix_weights,
            "gamma": self.gamma,
        }


def evaluate(model: TaggerModel, data: AlignedDataset, metric: str, tagset: list[str]) -> float:
    """Decode every sentence (eval mode) and score against the gold tags."""
    gold = []
    predicted = []
    for sent, tag_ids in data.pairs:
        gold.append(tag_ids)
        predicted.append(model.predict(sent.layers))
    if metric == ACCURACY:
        return metrics.token_accuracy(gold, predicted)
    gold_tags = [[tagset[t] for t in seq] for seq in gold]
    pred_tags = [[tagset[t] for t in seq] for seq in predicted]
    return metrics.chunk_f1(gold_tags, pred_tags).f1


def train_one(
    config: ExperimentConfig, seed: int, data: ExperimentData | None = None
) -> RunResult:
    """Train one (scheme, seed) pair; deterministic given the pair."""
    config.validate()
    if data is None:
        data = load_experiment_data(config)
    scheme = MixScheme.parse(config.scheme)
    scheme.validate(data.num_layers)
    rng = np.random.default_rng(seed)
    model = TaggerModel(
        TaggerConfig(
            num_layers=data.num_layers,
            dim=data.dim,
            num_tags=len(data.tagset),
            hidden_size=config.hidden_size,
            scheme=scheme,
            dropout=config.dropout,
        ),
        rng,
    )
    params = model.parameters()
    state = AdamState(
        lr=config.lr,
        beta1=config.beta1,
        beta2=config.beta2,
        eps=config.eps,
        clip_norm=config.clip_norm,
    )

    order = np.arange(len(data.train))
    best_score = -np.inf
    best_epoch = -1
    best_snapshot = model.snapshot()
    dev_scores: list[float] = []
    epoch_seconds: list[float] = []
    for epoch in range(config.max_epochs):
        started = time.perf_counter()
        rng.shuffle(order)
        for batch_no, batch_start in enumerate(range(0, len(order), config.batch_size)):
            batch = order[batch_start : batch_start + config.batch_size]
            total: dict[str, np.ndarray] = {}
            for i in batch:
                sent, tag_ids = data.train.pairs[i]
                masks = model.sample_masks(rng) if config.dropout > 0 else None
                loss, grads = model.loss_and_grads(sent.layers, tag_ids, masks)
                if not np.isfinite(loss):
                    raise NumericalError(
                        f"non-finite loss at epoch {epoch}, batch {batch_no}",
                        epoch=epoch,
                        batch=batch_no,
                    )
                for key, grad in grads.items():
                    if key in total:
                        total[key] += grad
                    else:
                        total[key] = np.asarray(grad, dtype=np.float64).copy()
            for grad in total.values():
                grad /= len(batch)
            if model.mix is not None and config.logit_penalty > 0:
                _, penalty_grad = logit_penalty(model.mix, config.logit_penalty)
                total["mix.logits"] += penalty_grad
            adam_step(params, total, state)
        score = evaluate(model, data.dev, config.metric, data.tagset)
        dev_scores.append(score)
        if score > best_score:
            best_score = score
            best_epoch = epoch
            best_snapshot = model.snapshot()
        epoch_seconds.append(time.perf_counter() - started)

    model.load_snapshot(best_snapshot)
    test_score = evaluate(model, data.test, config.metric, data.tagset)
    if model.mix is not None:
        weights = softmax(best_snapshot["mix.logits"])
        mix_weights = [float(w) for w in weights]
        gamma = float(best_snapshot["mix.gamma"])
    else:
        mix_weights = None
        gamma = None
    return RunResult(
        seed=seed,
        scheme=str(scheme),
        metric=config.metric,
        dev_scores=dev_scores,
        selected_epoch=best_epoch,
        test_score=test_score,
        epoch_seconds=epoch_seconds,
        mix_weights=mix_weights,
        gamma=gamma,
    )


class MultiSeedError(RuntimeError):
    """One or more seed runs failed; completed results are preserved in order."""

    def __init__(self, failures: list[tuple[int, str]], results: list[RunResult]):
        names = ", ".join(str(seed) for seed, _ in failures)
        super().__init__(f"seed run(s) failed: {names}")
        self.failures = failures
        self.results = results


def _train_job(config: ExperimentConfig, seed: int) -> RunResult:
    return train_one(config, seed)


def run_multi_seed(config: ExperimentConfig, jobs: int = 1) -> list[RunResult]:
    """One run per seed; results come back in seed order regardless of scheduling."""
    config.validate()
    if jobs < 1:
        raise ConfigError("jobs must be >= 1")
    results: list[RunResult] = []
    failures: list[tuple[int, str]] = []
    if jobs == 1:
        data = load_experiment_data(config)
        for seed in config.seeds:
            try:
                results.append(train_one(config, seed, data))
            except (NumericalError, ValueError) as exc:
                failures.append((seed, str(exc)))
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [(seed, pool.submit(_train_job, config, seed)) for seed in config.seeds]
            for seed, future in futures:
                try:
                    results.append(future.result())
                except Exception as exc:  # worker exceptions cross the pickle boundary
                    failures.append((seed, str(exc)))
    if failures:
        raise MultiSeedError(failures, results)
    return results


def welch_t_test(a, b) -> float:
    """Two-sided Welch unequal-variance t-test p-value.

    Degenerate variances: two identical constant samples give p = 1; zero
    variance with different means gives p = 0.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size < 2 or b.size < 2:
        raise ValueError("each sample needs at least two observations")
    var_a = a.var(ddof=1)
    var_b = b.var(ddof=1)
    mean_diff = a.mean() - b.mean()
    if var_a == 0.0 and var_b == 0.0:
        return 1.0 if mean_diff == 0.0 else 0.0
    sq_a = var_a / a.size
    sq_b = var_b / b.size
    t_stat = mean_diff / np.sqrt(sq_a + sq_b)
    df = (sq_a + sq_b) ** 2 / (sq_a**2 / (a.size - 1) + sq_b**2 / (b.size - 1))
    return float(2.0 * stdtr(df, -abs(t_stat)))


@dataclass
class SchemeResult:
    scheme: str
    runs: list[RunResult]
    p_vs_best: float | None = None
    significantly_worse: bool = False

    @property
    def test_scores(self) -> list[float]:
        return [run.test_score for run in self.runs]

    @property
    def mean(self) -> float:
        return mean(self.test_scores)

    @property
    def std(self) -> float:
        scores = self.test_scores
        if len(scores) < 2:
            return 0.0
        return float(np.std(scores, ddof=1))

    @property
    def spread(self) -> float:
        scores = self.test_scores
        return max(scores) - min(scores)

    @property
    def epoch_seconds_mean(self) -> float:
        per_run = [mean(run.epoch_seconds) for run in self.runs if run.epoch_seconds]
        return mean(per_run) if per_run else 0.0

    def mean_mix_weights(self) -> list[float] | None:
        if any(run.mix_weights is None for run in self.runs):
            return None
        stacked = np.array([run.mix_weights for run in self.runs])
        return [float(w) for w in stacked.mean(axis=0)]

    def mean_gamma(self) -> float | None:
        if any(run.gamma is None for run in self.runs):
            return None
        return mean(run.gamma for run in self.runs)


@dataclass
class ComparisonReport:
    dataset: str
    metric: str
    schemes: list[SchemeResult]

    @property
    def best_index(self) -> int:
        best = 0
        for i, scheme in enumerate(self.schemes):
            if scheme.mean > self.schemes[best].mean:
                best = i
        return best

    def to_json_obj(self) -> dict:
        blocks = []
        for scheme in self.schemes:
            blocks.append(
                {
                    "scheme": scheme.scheme,
                    "seeds": [run.seed for run in scheme.runs],
                    "test_scores": scheme.test_scores,
                    "mean": scheme.mean,
                    "std": scheme.std,
                    "spread": scheme.spread,
                    "epoch_seconds_mean": scheme.epoch_seconds_mean,
                    "p_vs_best": scheme.p_vs_best,
                    "significantly_worse": scheme.significantly_worse,
                    "mix_weights": scheme.mean_mix_weights(),
                    "gamma": scheme.mean_gamma(),
                }
            )
        return {"dataset": self.dataset, "metric": self.metric, "schemes": blocks}

    def to_json(self) -> str:
        return jsonfmt.dumps(self.to_json_obj())


def parse_report(text: str) -> dict:
    """Parse a serialized report back into its JSON object form."""
    data = json.loads(text)
    required = {"dataset", "metric", "schemes"}
    if not isinstance(data, dict) or not required <= set(data):
        raise ValueError("not a comparison report")
    return data


def _check_shared_dataset(configs: list[ExperimentConfig]) -> None:
    reference = configs[0]
    shared = (
        "train_embeddings",
        "train_labels",
        "dev_embeddings",
        "dev_labels",
        "test_embeddings",
        "test_labels",
        "metric",
        "tag_scheme",
    )
    for config in configs[1:]:
        for name in shared:
            if getattr(config, name) != getattr(reference, name):
                raise ConfigError(f"compared configs disagree on {name}")
        if config.seeds != reference.seeds:
            raise ConfigError("compared configs must share one seed list")


def compare_schemes(configs: list[ExperimentConfig], jobs: int = 1) -> ComparisonReport:
    """Train every scheme over the shared seed list and flag significance.

    The scheme with the highest mean test score (ties to the first config) is
    the reference; every other scheme is Welch-tested against it and flagged
    iff p < 0.01.  If any seed run fails, a MultiSeedError carrying the partial
    report (fully completed schemes only) is raised.
    """
    if len(configs) < 2:
        raise ConfigError("need at least two schemes to compare")
    for config in configs:
        config.validate()
    _check_shared_dataset(configs)
    if len(configs[0].seeds) < 2:
        raise ConfigError("comparisons need at least two seeds for the significance test")

    schemes: list[SchemeResult] = []
    failures: list[tuple[int, str]] = []
    for config in configs:
        try:
            runs = run_multi_seed(config, jobs=jobs)
        except MultiSeedError as exc:
            failures.extend(exc.failures)
            continue
        schemes.append(SchemeResult(scheme=str(MixScheme.parse(config.scheme)), runs=runs))

    report = ComparisonReport(
        dataset=configs[0].train_embeddings, metric=configs[0].metric, schemes=schemes
    )
    if schemes:
        best = report.best_index
        best_scores = schemes[best].test_scores
        for i, scheme in enumerate(schemes):
            if i == best:
                scheme.p_vs_best = None
                scheme.significantly_worse = False
            else:
                scheme.p_vs_best = welch_t_test(best_scores, scheme.test_scores)
                scheme.significantly_worse = scheme.p_vs_best < SIGNIFICANCE_LEVEL
    if failures:
        error = MultiSeedError(failures, [])
        error.partial_report = report
        raise error
    return report


def scheme_config(base: ExperimentConfig, scheme: str) -> ExperimentConfig:
    """The same experiment with a different mixing scheme."""
    config = replace(base, scheme=scheme, seeds=list(base.seeds))
    config.validate()
    return config
