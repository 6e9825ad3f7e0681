"""Ground-truth model builders, seeded samplers, text ingestion, and the
experiment harness that reproduces the headline experiments at desk scale.

All randomness flows through numpy Generators keyed by structured seeds
(seed, trial, population), so every experiment is reproducible and trials
are independent streams.
"""

from __future__ import annotations

import math
import string
from dataclasses import dataclass, field, replace

import numpy as np

from .core import (
    Fingerprint,
    Histogram,
    PopulationModel,
    SampleSet,
    build_fingerprint,
    empirical_histogram,
)
from .linear import ExtrapolationPlan, WeightConfig, unbiased_estimate, weighted_estimate


@dataclass(frozen=True)
class ModelSpec:
    """Recipe for a synthetic multi-population model."""

    kind: str
    m: int
    total_elements: int = 3000
    support_per_pop: int = 100
    dirichlet_alpha: float = 1.0
    geometric_p: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("uniform", "dirichlet", "geometric"):
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.m < 1 or self.total_elements < 1:
            raise ValueError("m and total_elements must be positive")
        if self.kind != "geometric" and self.support_per_pop > self.total_elements:
            # geometric spans the whole domain and ignores support_per_pop
            raise ValueError("support_per_pop exceeds total_elements")
        if not 0.0 < self.geometric_p < 1.0:
            raise ValueError("geometric_p must lie in (0, 1)")
        if not self.dirichlet_alpha > 0:
            raise ValueError("dirichlet_alpha must be positive")


def make_model(spec: ModelSpec) -> PopulationModel:
    """Instantiate the model; deterministic given spec.seed."""
    probs = []
    for j in range(spec.m):
        rng = np.random.default_rng([spec.seed, j])
        if spec.kind == "uniform":
            support = rng.choice(spec.total_elements, size=spec.support_per_pop, replace=False)
            w = np.full(spec.support_per_pop, 1.0 / spec.support_per_pop)
        elif spec.kind == "dirichlet":
            support = rng.choice(spec.total_elements, size=spec.support_per_pop, replace=False)
            w = rng.dirichlet(np.full(spec.support_per_pop, spec.dirichlet_alpha))
        else:  # geometric
            support = rng.permutation(spec.total_elements)
            ranks = np.arange(1, spec.total_elements + 1, dtype=float)
            w = (1.0 - spec.geometric_p) ** ranks * spec.geometric_p
            w /= w.sum()
        probs.append({int(x): float(p) for x, p in zip(support, w) if p > 0})
    return PopulationModel(tuple(probs))


def draw_samples(
    model: PopulationModel,
    n: tuple[int, ...],
    scheme: str = "multinomial",
    seed: int = 0,
) -> SampleSet:
    """Draw per-population samples; multinomial fixes sizes, poissonized draws
    each label's count from Poisson(n_j * p).  Deterministic given seed."""
    if len(n) != model.m:
        raise ValueError("sizes length does not match model")
    counts = []
    for j, pj in enumerate(model.probs):
        rng = np.random.default_rng([seed, j])
        labels = sorted(pj)
        p = np.array([pj[x] for x in labels])
        if scheme == "multinomial":
            if n[j] == 0:
                counts.append({})
                continue
            # guard tiny float drift off the simplex
            c = rng.multinomial(n[j], p / p.sum())
        elif scheme == "poissonized":
            c = rng.poisson(n[j] * p)
        else:
            raise ValueError(f"unknown scheme {scheme!r}")
        counts.append({x: int(ci) for x, ci in zip(labels, c) if ci > 0})
    return SampleSet(model.m, tuple(counts))


# ---------------------------------------------------------------------------
# Text ingestion

_STRIP = string.punctuation + "‘’“”—–«»"


def tokenize(text: str) -> list[str]:
    """Whitespace split, lowercase, strip surrounding punctuation."""
    out = []
    for raw in text.split():
        tok = raw.strip(_STRIP).lower()
        if tok:
            out.append(tok)
    return out


def ingest_text(
    corpus: str | bytes, n_words: int, mode: str = "random", seed: int = 0
) -> tuple[SampleSet, Histogram]:
    """Sample words from a text without replacement.

    ``random`` picks n_words distinct positions; ``contiguous`` takes a
    uniformly placed block of consecutive tokens.  Also returns the
    histogram of full-text word frequencies as ground truth.
    """
    if isinstance(corpus, bytes):
        corpus = corpus.decode("utf-8")
    tokens = tokenize(corpus)
    total = len(tokens)
    if n_words > total:
        raise ValueError(f"corpus has {total} words, need {n_words}")
    rng = np.random.default_rng([seed])
    if mode == "random":
        positions = rng.choice(total, size=n_words, replace=False)
    elif mode == "contiguous":
        start = int(rng.integers(0, total - n_words + 1))
        positions = np.arange(start, start + n_words)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    sample_counts: dict = {}
    for pos in positions:
        w = tokens[int(pos)]
        sample_counts[w] = sample_counts.get(w, 0) + 1
    samples = SampleSet(1, (sample_counts,))

    full_counts: dict = {}
    for w in tokens:
        full_counts[w] = full_counts.get(w, 0) + 1
    truth = Histogram.from_pairs(
        1, [((c / total,), 1.0) for c in full_counts.values()]
    )
    return samples, truth


# ---------------------------------------------------------------------------
# Extrapolation experiment harness

@dataclass(frozen=True)
class ExperimentPoint:
    """Aggregates for one extrapolation grid point."""

    t_max: float
    true_values: tuple[float, ...]
    estimates: tuple[float, ...]
    rel_errors: tuple[float, ...]

    @property
    def mean_true(self) -> float:
        return float(np.mean(self.true_values))

    @property
    def mean_estimate(self) -> float:
        return float(np.mean(self.estimates))

    @property
    def sd_estimate(self) -> float:
        return float(np.std(self.estimates, ddof=1)) if len(self.estimates) > 1 else 0.0

    @property
    def mean_rel_err(self) -> float:
        return float(np.mean(self.rel_errors))


@dataclass(frozen=True)
class ExperimentReport:
    points: tuple[ExperimentPoint, ...]
    trials: int
    estimator: str
    meta: dict = field(default_factory=dict)

    CSV_HEADER = "t_max,mean_true_U,mean_estimate,sd_estimate,mean_rel_err"

    def to_csv(self) -> str:
        lines = [self.CSV_HEADER]
        for p in self.points:
            lines.append(
                "%g,%.6f,%.6f,%.6f,%.6f"
                % (p.t_max, p.mean_true, p.mean_estimate, p.sd_estimate, p.mean_rel_err)
            )
        return "\n".join(lines) + "\n"


def split_factors(
    m: int, t: float, fraction: float = 0.95, multiplier: float = 10.0, seed: int = 0
) -> tuple[float, ...]:
    """Assign factor t to a random ``fraction`` of populations and
    ``multiplier * t`` to the rest (default: 95% at t, 5% at 10t)."""
    rng = np.random.default_rng([seed])
    n_low = int(round(fraction * m))
    boosted = set(rng.choice(m, size=m - n_low, replace=False).tolist())
    return tuple(multiplier * t if j in boosted else t for j in range(m))


def count_new_distinct(period_one: SampleSet, period_two: SampleSet) -> int:
    seen = set(period_one.labels)
    return sum(1 for x in period_two.labels if x not in seen)


def run_extrapolation_experiment(
    spec: ModelSpec,
    n: tuple[int, ...],
    plans: list[ExtrapolationPlan],
    trials: int,
    estimator: str = "weighted",
    seed: int = 0,
) -> ExperimentReport:
    """Per trial: fresh model, period-one draw, then for every plan a fresh
    period-two draw; records estimates and relative squared errors."""
    if estimator not in ("unbiased", "weighted"):
        raise ValueError(f"unknown estimator {estimator!r}")
    acc = [([], [], []) for _ in plans]  # (true, est, rel_err) per plan
    for trial in range(trials):
        model = make_model(replace(spec, seed=_mix(spec.seed, trial)))
        one = draw_samples(model, n, "multinomial", seed=_mix(seed, trial, 0))
        fp = build_fingerprint(one)
        for k, plan in enumerate(plans):
            b = plan.b
            two = draw_samples(model, b, "multinomial", seed=_mix(seed, trial, k + 1))
            true_u = count_new_distinct(one, two)
            if estimator == "unbiased":
                est = unbiased_estimate(fp, plan)
            else:
                est = weighted_estimate(fp, plan, WeightConfig())
            denom = math.fsum(nj * tj for nj, tj in zip(plan.n, plan.t))
            rel = ((est - true_u) / denom) ** 2 if denom > 0 else 0.0
            acc[k][0].append(float(true_u))
            acc[k][1].append(float(est))
            acc[k][2].append(rel)
    points = tuple(
        ExperimentPoint(
            t_max=max(plan.t),
            true_values=tuple(a[0]),
            estimates=tuple(a[1]),
            rel_errors=tuple(a[2]),
        )
        for plan, a in zip(plans, acc)
    )
    return ExperimentReport(points=points, trials=trials, estimator=estimator)


def _mix(*parts: int) -> int:
    """Stable scalar seed from components for per-trial RNG streams."""
    h = 0x9E3779B97F4A7C15
    for p in parts:
        h = (h ^ (p + 0x9E3779B97F4A7C15)) * 0xBF58476D1CE4E5B9 % 2**64
    return h


def extrapolation_preset_plans(
    m: int, n_j: int, t_grid: tuple[float, ...], seed: int = 0
) -> list[ExtrapolationPlan]:
    """Plans for the 100-population experiments: 95% of populations at t,
    5% at 10t, over a grid of base factors."""
    n = (n_j,) * m
    return [
        ExtrapolationPlan(n=n, t=split_factors(m, t, seed=seed)) for t in t_grid
    ]


def make_heterogeneous_model(
    m: int = 4,
    total_elements: int = 3000,
    ps: tuple[float, ...] = (0.004, 0.008, 0.016, 0.032),
    seed: int = 0,
) -> PopulationModel:
    """Populations with geometric frequency profiles of different decay
    rates over independently shuffled orderings of a shared domain; used by
    the budget-allocation experiments, where discovery potential differs
    strongly across populations."""
    if len(ps) < m:
        raise ValueError("need a decay rate per population")
    probs = []
    for j in range(m):
        rng = np.random.default_rng([seed, j])
        order = rng.permutation(total_elements)
        ranks = np.arange(1, total_elements + 1, dtype=float)
        w = (1.0 - ps[j]) ** ranks * ps[j]
        w /= w.sum()
        probs.append({int(x): float(p) for x, p in zip(order, w) if p > 0})
    return PopulationModel(tuple(probs))


# ---------------------------------------------------------------------------
# Histogram-recovery experiment (shared-plus-unique uniform populations)

def make_shared_unique_model(
    m: int, shared: int, unique_per_pop: int, seed: int = 0
) -> PopulationModel:
    """m uniform populations: ``shared`` common elements plus
    ``unique_per_pop`` private ones each; uniform over each support."""
    probs = []
    support_size = shared + unique_per_pop
    for j in range(m):
        p = 1.0 / support_size
        pj = {int(x): p for x in range(shared)}
        base = shared + j * unique_per_pop
        for x in range(base, base + unique_per_pop):
            pj[int(x)] = p
        probs.append(pj)
    return PopulationModel(tuple(probs))


def run_recovery_experiment(
    sizes: tuple[int, ...],
    runs: int,
    m: int = 3,
    shared: int = 1000,
    unique_per_pop: int = 333,
    fit_config_factory=None,
    seed: int = 0,
):
    """EMD of fitted vs empirical histograms to the truth, per sample size.

    Returns rows: dict with n, per-run EMDs for empirical and both
    objectives.  fit_config_factory(objective, run) supplies FitConfigs.
    """
    from .histfit import FitConfig, fit_histogram
    from .histstat import emd

    if fit_config_factory is None:
        def fit_config_factory(objective, run):
            # Small support keeps the fit identifiable in the deep-sampling
            # regime; larger s trades extrapolation accuracy for nothing here.
            return FitConfig(s=4, objective=objective, restarts=4, max_evals=6000, seed=run)

    model = make_shared_unique_model(m, shared, unique_per_pop, seed=seed)
    truth = model.true_histogram()
    rows = []
    fits = {}
    for n_j in sizes:
        n = (n_j,) * m
        e_emp, e_counts, e_ll = [], [], []
        for run in range(runs):
            samples = draw_samples(model, n, "multinomial", seed=_mix(seed, n_j, run))
            fp = build_fingerprint(samples)
            e_emp.append(emd(empirical_histogram(fp, n), truth))
            for objective, sink in (("counts", e_counts), ("loglik", e_ll)):
                res = fit_histogram(fp, n, fit_config_factory(objective, run))
                sink.append(emd(res.histogram, truth))
                fits[(n_j, objective, run)] = res
        rows.append(
            {
                "n": n_j,
                "emd_empirical": e_emp,
                "emd_counts": e_counts,
                "emd_loglik": e_ll,
            }
        )
    return rows, fits, model


def recovery_rows_to_csv(rows) -> str:
    lines = ["n,emd_empirical_mean,emd_empirical_sd,emd_counts_mean,emd_counts_sd,emd_loglik_mean,emd_loglik_sd"]
    for row in rows:
        vals = [row["n"]]
        for key in ("emd_empirical", "emd_counts", "emd_loglik"):
            arr = np.asarray(row[key])
            vals += [arr.mean(), arr.std(ddof=1) if arr.size > 1 else 0.0]
        lines.append("%d,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f" % tuple(vals))
    return "\n".join(lines) + "\n"
