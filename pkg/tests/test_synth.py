"""Synthetic models, seeded sampling, text ingestion, experiment harness."""

import math

import numpy as np
import pytest

from unseen.core import build_fingerprint
from unseen.linear import ExtrapolationPlan
from unseen.synth import (
    ExperimentReport,
    ModelSpec,
    count_new_distinct,
    draw_samples,
    extrapolation_preset_plans,
    ingest_text,
    make_heterogeneous_model,
    make_model,
    make_shared_unique_model,
    run_extrapolation_experiment,
    split_factors,
    tokenize,
)


class TestMakeModel:
    def test_uniform_probabilities(self):
        model = make_model(ModelSpec(kind="uniform", m=2, total_elements=500, support_per_pop=100))
        for pj in model.probs:
            assert len(pj) == 100
            assert all(p == pytest.approx(0.01) for p in pj.values())

    def test_geometric_three_elements(self):
        model = make_model(
            ModelSpec(kind="geometric", m=1, total_elements=3, geometric_p=0.5)
        )
        got = sorted(model.probs[0].values())
        assert got == pytest.approx([1 / 7, 2 / 7, 4 / 7])

    def test_dirichlet_normalized(self):
        model = make_model(ModelSpec(kind="dirichlet", m=3, total_elements=200, support_per_pop=50))
        for pj in model.probs:
            assert math.fsum(pj.values()) == pytest.approx(1.0, abs=1e-12)

    def test_deterministic_given_seed(self):
        spec = ModelSpec(kind="dirichlet", m=2, total_elements=100, support_per_pop=20, seed=4)
        assert make_model(spec).probs == make_model(spec).probs

    def test_invalid_spec(self):
        with pytest.raises(ValueError):
            ModelSpec(kind="zipf", m=1)
        with pytest.raises(ValueError):
            ModelSpec(kind="uniform", m=1, total_elements=10, support_per_pop=20)

    def test_shared_unique_model(self):
        model = make_shared_unique_model(3, shared=10, unique_per_pop=4)
        truth = model.true_histogram()
        # 10 shared + 3*4 unique elements
        assert truth.total_mass() == pytest.approx(22.0)
        for pj in model.probs:
            assert math.fsum(pj.values()) == pytest.approx(1.0, abs=1e-12)

    def test_heterogeneous_model_valid(self):
        model = make_heterogeneous_model(m=4, total_elements=300, seed=1)
        assert model.m == 4
        for pj in model.probs:
            assert math.fsum(pj.values()) == pytest.approx(1.0, abs=1e-9)


class TestDrawSamples:
    def test_reproducible(self):
        model = make_model(ModelSpec(kind="uniform", m=2, total_elements=50, support_per_pop=20))
        a = draw_samples(model, (30, 30), "multinomial", seed=8)
        b = draw_samples(model, (30, 30), "multinomial", seed=8)
        assert a == b

    def test_multinomial_exact_sizes(self):
        model = make_model(ModelSpec(kind="dirichlet", m=2, total_elements=50, support_per_pop=20))
        samples = draw_samples(model, (40, 25), "multinomial", seed=0)
        assert samples.sizes == (40, 25)

    def test_zero_sizes(self):
        model = make_model(ModelSpec(kind="uniform", m=2, total_elements=50, support_per_pop=20))
        samples = draw_samples(model, (0, 0), "multinomial", seed=0)
        assert samples.sizes == (0, 0)

    def test_forced_single_element(self):
        from unseen.core import PopulationModel

        model = PopulationModel(({"x": 1.0},))
        samples = draw_samples(model, (5,), "multinomial", seed=0)
        assert samples.counts[0] == {"x": 5}

    def test_poissonized_mean(self):
        from unseen.core import PopulationModel

        model = PopulationModel(({"x": 0.3, "y": 0.7},))
        counts = []
        for trial in range(10_000):
            s = draw_samples(model, (10,), "poissonized", seed=trial)
            counts.append(s.counts[0].get("x", 0))
        mean = float(np.mean(counts))
        se = float(np.std(counts, ddof=1)) / math.sqrt(len(counts))
        assert abs(mean - 3.0) <= 4.0 * se

    def test_unknown_scheme(self):
        model = make_model(ModelSpec(kind="uniform", m=1, total_elements=50, support_per_pop=20))
        with pytest.raises(ValueError):
            draw_samples(model, (5,), "bootstrap", seed=0)


class TestTextIngestion:
    def test_tokenize(self):
        assert tokenize('One, two -- "three"!') == ["one", "two", "three"]

    def test_full_text_sample(self):
        samples, truth = ingest_text("a a b", 3, mode="random", seed=0)
        assert samples.counts[0] == {"a": 2, "b": 1}
        assert dict(truth.entries) == pytest.approx(
            {(round(2 / 3, 12),): 1.0, (round(1 / 3, 12),): 1.0}
        )

    def test_contiguous_single_token(self):
        samples, _ = ingest_text("a b c d", 1, mode="contiguous", seed=3)
        assert sum(samples.counts[0].values()) == 1

    def test_corpus_too_short(self):
        with pytest.raises(ValueError):
            ingest_text("a b", 3)

    def test_random_sample_reproducible(self):
        corpus = "the quick brown fox jumps over the lazy dog " * 20
        a, _ = ingest_text(corpus, 50, mode="random", seed=1)
        b, _ = ingest_text(corpus, 50, mode="random", seed=1)
        assert a == b

    def test_bytes_accepted(self):
        samples, _ = ingest_text(b"x y z", 2, seed=0)
        assert sum(samples.counts[0].values()) == 2


class TestExperimentHarness:
    def test_split_factors_partition(self):
        t = split_factors(100, 0.5, seed=0)
        low = sum(1 for x in t if x == pytest.approx(0.5))
        high = sum(1 for x in t if x == pytest.approx(5.0))
        assert (low, high) == (95, 5)

    def test_count_new_distinct(self):
        from unseen.core import SampleSet

        one = SampleSet.from_observations(1, [(1, "a"), (1, "b")])
        two = SampleSet.from_observations(1, [(1, "b"), (1, "c"), (1, "d")])
        assert count_new_distinct(one, two) == 2

    def test_zero_factors_give_zero(self):
        spec = ModelSpec(kind="uniform", m=2, total_elements=60, support_per_pop=20)
        plans = [ExtrapolationPlan(n=(10, 10), t=(0.0, 0.0))]
        report = run_extrapolation_experiment(spec, (10, 10), plans, trials=5, seed=0)
        point = report.points[0]
        assert all(v == 0.0 for v in point.true_values)
        assert all(v == 0.0 for v in point.estimates)

    def test_report_csv_shape(self):
        spec = ModelSpec(kind="uniform", m=2, total_elements=60, support_per_pop=20)
        plans = extrapolation_preset_plans(2, 10, (0.5, 1.0), seed=0)
        report = run_extrapolation_experiment(spec, (10, 10), plans, trials=3, seed=0)
        lines = report.to_csv().strip().splitlines()
        assert lines[0] == ExperimentReport.CSV_HEADER
        assert len(lines) == 3

    def test_deterministic(self):
        spec = ModelSpec(kind="dirichlet", m=2, total_elements=60, support_per_pop=20)
        plans = [ExtrapolationPlan(n=(10, 10), t=(1.0, 1.0))]
        a = run_extrapolation_experiment(spec, (10, 10), plans, trials=4, seed=9)
        b = run_extrapolation_experiment(spec, (10, 10), plans, trials=4, seed=9)
        assert a.points[0].estimates == b.points[0].estimates
