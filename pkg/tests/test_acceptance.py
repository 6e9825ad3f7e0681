"""Acceptance suite: one test per release criterion, in order.

Run with `pytest tests/test_acceptance.py -v` to get one pass/fail line per
criterion.  Each test also prints a `criterion N PASS` line with the
measured values (visible with -s or on failure).  Criteria 7 and 8 share
one histogram-recovery experiment through a module-scoped fixture.
"""

import itertools
import math
import time

import numpy as np
import pytest

from unseen.alloc import AllocationProblem, exhaustive_allocation, optimize_allocation
from unseen.core import (
    Fingerprint,
    Histogram,
    SampleSet,
    build_fingerprint,
)
from unseen.histfit import FitConfig, fit_histogram, objective_counts, split_ones
from unseen.histstat import (
    emd,
    expected_distinct,
    expected_fingerprint,
    expected_new_distinct,
    expected_new_seen_at_least,
)
from unseen.linear import (
    ExtrapolationPlan,
    WeightConfig,
    default_rate,
    exact_expected_new,
    unbiased_estimate,
    weighted_estimate,
)
from unseen.synth import (
    ModelSpec,
    count_new_distinct,
    draw_samples,
    ingest_text,
    make_heterogeneous_model,
    make_model,
    run_extrapolation_experiment,
    run_recovery_experiment,
    split_factors,
    tokenize,
)

from conftest import WORKED_MATRIX, WORKED_OBSERVATIONS, make_bursty_corpus
from oracles import alternating_sum_by_total, emd_lp, random_fingerprint, random_histogram

# Shared small three-population test model: uniform supports of 30 labels
# drawn from a 50-label domain, one support per population.
SMALL_MODEL_SPEC = ModelSpec(
    kind="uniform", m=3, total_elements=50, support_per_pop=30, seed=21
)


@pytest.fixture(scope="module")
def recovery_experiment():
    """Three uniform populations, 1000 shared + 333 unique elements each,
    sample sizes 250..2000, five runs, both fit objectives."""
    start = time.time()
    rows, fits, model = run_recovery_experiment(
        sizes=(250, 500, 1000, 2000), runs=5, seed=7
    )
    return rows, fits, model, time.time() - start


def test_criterion_01_worked_fingerprint():
    samples = SampleSet.from_observations(2, WORKED_OBSERVATIONS)
    fp = build_fingerprint(samples)
    assert dict(fp.entries) == WORKED_MATRIX
    print(f"criterion 1 PASS: worked fingerprint matrix {dict(fp.entries)}")


def test_criterion_02_alternating_sum_reduction():
    rng = np.random.default_rng(1001)
    worst = 0.0
    for _ in range(200):
        m = int(rng.integers(1, 4))
        fp = random_fingerprint(rng, m, keys=int(rng.integers(1, 12)), max_index=5)
        plan = ExtrapolationPlan(n=(50,) * m, t=(1.0,) * m)
        got = unbiased_estimate(fp, plan)
        want = alternating_sum_by_total(fp)
        tol = 1e-9 * max(1.0, abs(want))
        assert abs(got - want) <= tol
        worst = max(worst, abs(got - want))
    butterflies = Fingerprint(1, {(1,): 118, (2,): 74, (3,): 44})
    est = unbiased_estimate(butterflies, ExtrapolationPlan(n=(1000,), t=(1.0,)))
    assert est == 88.0
    print(
        "criterion 2 PASS: 200 random reductions (worst dev "
        f"{worst:.2e}), 118-74+44 -> {est}"
    )


def test_criterion_03_unbiasedness():
    model = make_model(SMALL_MODEL_SPEC)
    plan = ExtrapolationPlan(n=(20, 20, 20), t=(1.0, 1.0, 1.0))
    exact = exact_expected_new(model, plan, "poissonized")
    trials = 20_000
    start = time.time()
    estimates = np.empty(trials)
    for trial in range(trials):
        samples = draw_samples(model, plan.n, "poissonized", seed=trial)
        estimates[trial] = unbiased_estimate(build_fingerprint(samples), plan)
    elapsed = time.time() - start
    mean = estimates.mean()
    se = estimates.std(ddof=1) / math.sqrt(trials)
    assert abs(mean - exact) <= 4.0 * se
    assert elapsed < 60.0
    print(
        f"criterion 3 PASS: exact {exact:.4f}, Monte Carlo {mean:.4f} "
        f"(|dev| = {abs(mean - exact) / se:.2f} SE), {elapsed:.1f} s"
    )


def test_criterion_04_extrapolation_families():
    families = {
        "uniform": {},
        "dirichlet": {"dirichlet_alpha": 1.0},
        "geometric": {"geometric_p": 0.05},
    }
    start = time.time()
    results = {}
    for kind, extra in families.items():
        spec = ModelSpec(
            kind=kind, m=100, total_elements=3000, support_per_pop=100, seed=1, **extra
        )
        # 95 populations extrapolate by 1, five by 10
        plans = [
            ExtrapolationPlan(n=(10,) * 100, t=split_factors(100, 1.0, seed=1))
        ]
        report = run_extrapolation_experiment(
            spec, (10,) * 100, plans, trials=100, estimator="weighted", seed=1
        )
        point = report.points[0]
        assert point.t_max == 10.0
        results[kind] = point.mean_rel_err
        assert point.mean_rel_err <= 0.15
    elapsed = time.time() - start
    assert elapsed < 300.0
    summary = ", ".join(f"{k} {v:.4f}" for k, v in results.items())
    print(f"criterion 4 PASS: mean relative squared errors {summary}, {elapsed:.1f} s")


def test_criterion_05_bias_and_variance_bounds():
    model = make_model(SMALL_MODEL_SPEC)
    plan = ExtrapolationPlan(n=(20, 20, 20), t=(3.0, 3.0, 3.0))
    r = default_rate(plan)
    bias_bound = sum(nj * (tj + 1) for nj, tj in zip(plan.n, plan.t)) * math.exp(-r)
    t_max = max(plan.t)
    var_bound = sum(plan.n) * math.exp(2.0 * r * (t_max - 1.0)) + sum(
        nj * tj for nj, tj in zip(plan.n, plan.t)
    )
    trials = 3000
    diffs = np.empty(trials)
    for trial in range(trials):
        one = draw_samples(model, plan.n, "poissonized", seed=trial)
        two = draw_samples(model, plan.b, "poissonized", seed=1_000_000 + trial)
        est = weighted_estimate(build_fingerprint(one), plan, WeightConfig())
        diffs[trial] = est - count_new_distinct(one, two)
    bias = abs(diffs.mean())
    se_mean = diffs.std(ddof=1) / math.sqrt(trials)
    variance = diffs.var(ddof=1)
    se_var = variance * math.sqrt(2.0 / (trials - 1))
    assert bias <= bias_bound + 4.0 * se_mean
    assert variance <= var_bound + 4.0 * se_var
    print(
        f"criterion 5 PASS: |bias| {bias:.3f} <= {bias_bound:.1f}, "
        f"variance {variance:.1f} <= {var_bound:.1f} (rate {r:.4f})"
    )


def test_criterion_06_emd_worked_example_and_axioms():
    q = 0.25
    h1 = Histogram(
        3,
        {
            (q, q, q): 2.0,
            (q, 0.0, 0.0): 2.0,
            (0.0, q, 0.0): 2.0,
            (0.0, 0.0, q): 2.0,
        },
    )
    h2 = Histogram(3, {(0.5, 0.5, 0.5): 2.0})
    worked = emd(h1, h2)
    assert worked == pytest.approx(0.5, abs=1e-9)

    rng = np.random.default_rng(606)
    worst_lp = 0.0
    for _ in range(100):
        m = int(rng.integers(1, 4))
        triple = [random_histogram(rng, m, int(rng.integers(1, 5))) for _ in range(3)]
        d = {}
        for i, j in itertools.combinations(range(3), 2):
            dij = emd(triple[i], triple[j])
            assert 0.0 <= dij <= 1.0 + 1e-12
            assert dij == pytest.approx(emd(triple[j], triple[i]), abs=1e-9)
            worst_lp = max(worst_lp, abs(dij - emd_lp(triple[i], triple[j])))
            assert worst_lp <= 1e-9
            d[(i, j)] = d[(j, i)] = dij
        for h in triple:
            assert emd(h, h) == pytest.approx(0.0, abs=1e-12)
        assert d[(0, 2)] <= d[(0, 1)] + d[(1, 2)] + 1e-9
    print(
        f"criterion 6 PASS: worked example {worked:.6f}, 100 triples vs LP "
        f"oracle (worst dev {worst_lp:.2e})"
    )


def test_criterion_07_histogram_recovery(recovery_experiment):
    rows, _, model, elapsed = recovery_experiment
    truth = model.true_histogram()
    assert truth.total_mass() == pytest.approx(1999.0)
    lines = []
    for row in rows:
        emp = float(np.mean(row["emd_empirical"]))
        counts = float(np.mean(row["emd_counts"]))
        ll = float(np.mean(row["emd_loglik"]))
        lines.append(f"n={row['n']}: empirical {emp:.3f}, counts {counts:.3f}, loglik {ll:.3f}")
        if row["n"] <= 1000:
            assert counts < emp
            assert ll < emp
    assert elapsed < 1200.0
    print(
        "criterion 7 PASS: fitted histograms beat the empirical baseline "
        f"({'; '.join(lines)}; {elapsed:.0f} s)"
    )


def test_criterion_08_extrapolation_predictions(recovery_experiment):
    _, fits, model, _ = recovery_experiment
    truth = model.true_histogram()
    n = (2000, 2000, 2000)
    total_new = 2 * sum(n)
    followups = {
        "equal": (total_new // 3,) * 3,
        "skewed": (
            total_new * 5 // 6,
            total_new // 12,
            total_new // 12,
        ),
    }
    details = []
    for objective in ("counts", "loglik"):
        for name, b in followups.items():
            true_value = expected_new_distinct(truth, n, b)
            preds = [
                expected_new_distinct(fits[(2000, objective, run)].histogram, n, b)
                for run in range(5)
            ]
            rel = (float(np.mean(preds)) - true_value) / true_value
            details.append(f"{objective}/{name} {rel:+.3f}")
            assert abs(rel) <= 0.10
    print(
        "criterion 8 PASS: follow-up predictions within 10% of the exact "
        f"oracle (mean rel errors {', '.join(details)})"
    )


def test_criterion_09_allocation_dominance():
    model = make_heterogeneous_model(seed=0)
    truth = model.true_histogram()
    m = model.m
    n_old = (500,) * m
    budget = 10 * sum(n_old)
    problem = AllocationProblem(h=truth, n_old=n_old, budget=budget, step=budget // 100)
    result = optimize_allocation(problem, objective="distinct")
    optimized = expected_new_distinct(truth, n_old, result.b)
    even = tuple(budget // m for _ in range(m))
    even_gain = expected_new_distinct(truth, n_old, even)
    single_gains = []
    for j in range(m):
        single = tuple(budget if i == j else 0 for i in range(m))
        single_gains.append(expected_new_distinct(truth, n_old, single))
    assert optimized >= even_gain - 1e-9
    assert all(optimized >= g - 1e-9 for g in single_gains)

    rng = np.random.default_rng(909)
    for _ in range(20):
        mm = int(rng.integers(2, 4))
        h = random_histogram(rng, mm, int(rng.integers(1, 5)))
        p = AllocationProblem(
            h, tuple(int(x) for x in rng.integers(0, 6, size=mm)),
            budget=int(rng.integers(4, 13)), step=1,
        )
        greedy = optimize_allocation(p, "distinct")
        _, best = exhaustive_allocation(p, "distinct")
        assert greedy.predicted_gain == pytest.approx(best, abs=1e-9)
    print(
        f"criterion 9 PASS: optimized {optimized:.1f} >= even split {even_gain:.1f} "
        f">= singles (max {max(single_gains):.1f}); greedy == exhaustive on 20 grids"
    )


def _planted_instances(count: int):
    """Planted histograms with exact unit mass and their rounded fingerprints."""
    rng = np.random.default_rng(2024)
    made = 0
    while made < count:
        m = 1 if made % 2 == 0 else 2
        n = (40,) if m == 1 else (30, 40)
        if m == 1:
            a1, a2 = sorted(rng.uniform(0.02, 0.2, size=2))
            h1 = rng.uniform(0.2, 0.7) / a1
            planted = Histogram.from_pairs(
                1, [((a1,), h1), ((a2,), (1.0 - h1 * a1) / a2)]
            )
            s = 2
        else:
            a = rng.uniform(0.03, 0.2, size=2)
            h = rng.uniform(2.0, 6.0)
            b1, b2 = rng.uniform(0.03, 0.2, size=2)
            if min(1.0 - h * a[0], 1.0 - h * a[1]) <= 0.05:
                continue
            planted = Histogram.from_pairs(
                2,
                [
                    (tuple(a), h),
                    ((b1, 0.0), (1.0 - h * a[0]) / b1),
                    ((0.0, b2), (1.0 - h * a[1]) / b2),
                ],
            )
            s = 3
        keys = [k for k in itertools.product(*(range(nj + 1) for nj in n)) if any(k)]
        expected = expected_fingerprint(planted, n, keys)
        entries = {k: int(round(v)) for k, v in expected.items() if round(v) >= 2}
        if len(entries) < 3:
            continue
        made += 1
        yield planted, Fingerprint(m, entries), n, s, made


def test_criterion_10_planted_solution_fit():
    worst_gap = -math.inf
    worst_resid = 0.0
    for planted, fp, n, s, case in _planted_instances(20):
        cfg = FitConfig(s=s, restarts=6, max_evals=4000, seed=case)
        res = fit_histogram(fp, n, cfg)
        _, rest = split_ones(fp, n)
        planted_obj = objective_counts(planted, rest, n)
        gap = res.objective_value - planted_obj
        resid = max(abs(mj - 1.0) for mj in res.histogram.per_population_mass())
        worst_gap = max(worst_gap, gap)
        worst_resid = max(worst_resid, resid)
        assert res.objective_value <= planted_obj + 1e-6
        assert resid < cfg.mass_tolerance
    print(
        f"criterion 10 PASS: 20 planted fits, worst objective gap {worst_gap:.3e}, "
        f"worst mass residual {worst_resid:.2e}"
    )


def test_criterion_11_seen_at_least_two():
    h = Histogram(
        2, {(0.3, 0.1): 3.0, (0.05, 0.2): 4.0, (0.15, 0.0): 2.0}
    )
    n_old = (8, 6)
    b = (10, 12)
    expected = expected_new_seen_at_least(h, n_old, b, 2)
    rng = np.random.default_rng(1111)
    trials = 20_000
    totals = np.zeros(trials)
    for alpha, mass in h:
        copies = int(round(mass))
        for _ in range(copies):
            old = sum(
                rng.binomial(nj, aj, size=trials) for nj, aj in zip(n_old, alpha)
            )
            new = sum(rng.binomial(bj, aj, size=trials) for bj, aj in zip(b, alpha))
            totals += (old == 0) & (new >= 2)
    mean = totals.mean()
    se = totals.std(ddof=1) / math.sqrt(trials)
    assert abs(mean - expected) <= 4.0 * se

    rng = np.random.default_rng(1112)
    for _ in range(1000):
        m = int(rng.integers(1, 4))
        hh = random_histogram(rng, m, int(rng.integers(1, 5)))
        nn = tuple(int(x) for x in rng.integers(0, 8, size=m))
        bb = tuple(int(x) for x in rng.integers(0, 8, size=m))
        assert (
            expected_new_seen_at_least(hh, nn, bb, 2)
            <= expected_new_distinct(hh, nn, bb) + 1e-12
        )
    print(
        f"criterion 11 PASS: exact {expected:.4f} vs Monte Carlo {mean:.4f} "
        f"(|dev| = {abs(mean - expected) / se:.2f} SE); dominated on 1000 inputs"
    )


def test_criterion_12_text_pipeline():
    corpus = make_bursty_corpus(seed=5)
    tokens = tokenize(corpus)
    total = len(tokens)
    true_distinct = len(set(tokens))
    n_words = total // 4
    preds = {"random": [], "contiguous": []}
    for mode in preds:
        for run in range(10):
            samples, _ = ingest_text(corpus, n_words, mode=mode, seed=100 + run)
            fp = build_fingerprint(samples)
            res = fit_histogram(
                fp,
                samples.sizes,
                FitConfig(s=8, restarts=3, max_evals=3000, seed=run),
            )
            preds[mode].append(expected_distinct(res.histogram, (total,)))
    random_rel = (float(np.mean(preds["random"])) - true_distinct) / true_distinct
    errors = {
        mode: float(np.mean([abs(p - true_distinct) / true_distinct for p in values]))
        for mode, values in preds.items()
    }
    assert abs(random_rel) <= 0.15
    assert errors["random"] <= errors["contiguous"]
    print(
        f"criterion 12 PASS: random-sample prediction {random_rel:+.3f} of "
        f"{true_distinct} distinct words; mean |error| random {errors['random']:.3f} "
        f"<= contiguous {errors['contiguous']:.3f}"
    )
