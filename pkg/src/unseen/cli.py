"""Command-line interface.

Subcommands cover the full pipeline: sample ingestion, fingerprinting,
estimation, histogram fitting, statistics, allocation, simulation, and the
desk-scale experiment presets.  Report-producing commands write CSV and
render a matching figure next to it (suppress with --no-plot).  All
randomness is controlled by --seed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import alloc, core, histfit, histstat, linear, synth

DEFAULT_SEED = 20170301


def worker_limit() -> int:
    """Parallelism cap from UNSEEN_THREADS; computation is sequential today,
    so any positive value is honored trivially."""
    try:
        return max(1, int(os.environ.get("UNSEEN_THREADS", "1")))
    except ValueError:
        return 1


class CliError(Exception):
    def __init__(self, message: str, code: int = 1):
        super().__init__(message)
        self.code = code


def _read_samples_tsv(path: str) -> core.SampleSet:
    """Rows of `population_index<TAB>label`, one observation per row."""
    obs = []
    max_pop = 0
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot read samples file {path}: {exc}")
    for ln, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise CliError(f"{path}:{ln}: expected 2 tab-separated columns")
        try:
            j = int(parts[0])
        except ValueError:
            raise CliError(f"{path}:{ln}: bad population index {parts[0]!r}")
        if j < 1:
            raise CliError(f"{path}:{ln}: population index must be >= 1")
        max_pop = max(max_pop, j)
        obs.append((j, parts[1]))
    if not obs:
        raise CliError(f"{path}: no observations")
    return core.SampleSet.from_observations(max_pop, obs)


def _write_samples_tsv(samples: core.SampleSet, path: str) -> None:
    lines = []
    for j, cj in enumerate(samples.counts, start=1):
        for label in sorted(cj, key=str):
            lines.extend(f"{j}\t{label}" for _ in range(cj[label]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _load_fingerprint(path: str):
    try:
        return core.fingerprint_from_tsv(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError, KeyError) as exc:
        raise CliError(f"cannot read fingerprint {path}: {exc}")


def _load_histogram(path: str) -> core.Histogram:
    try:
        return core.histogram_from_json(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError, KeyError) as exc:
        raise CliError(f"cannot read histogram {path}: {exc}")


def _parse_floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(","))
    except ValueError:
        raise CliError(f"bad comma-separated numbers: {text!r}")


def _parse_ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(","))
    except ValueError:
        raise CliError(f"bad comma-separated integers: {text!r}")


# ---------------------------------------------------------------------------
# Subcommand implementations

def cmd_fingerprint(args) -> int:
    samples = _read_samples_tsv(args.samples)
    fp = core.build_fingerprint(samples)
    text = core.fingerprint_to_tsv(fp, samples.sizes)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def cmd_estimate(args) -> int:
    fp, n = _load_fingerprint(args.fingerprint)
    t = _parse_floats(args.t)
    if len(t) != fp.m:
        raise CliError(f"need {fp.m} extrapolation factors, got {len(t)}")
    if not n:
        raise CliError("fingerprint header lacks sample sizes")
    plan = linear.ExtrapolationPlan(n=n, t=t)
    cfg = linear.WeightConfig(r="auto" if args.rate == "auto" else float(args.rate))
    result = {
        "unbiased": linear.unbiased_estimate(fp, plan),
        "weighted": linear.weighted_estimate(fp, plan, cfg),
        "rate": linear.resolve_rate(plan, cfg),
    }
    _emit(result, args)
    return 0


def cmd_fit(args) -> int:
    fp, n = _load_fingerprint(args.fingerprint)
    if not n:
        raise CliError("fingerprint header lacks sample sizes")
    if args.config:
        try:
            raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise CliError(f"cannot read fit config {args.config}: {exc}")
        cfg = histfit.FitConfig(**raw)
    else:
        cfg = histfit.FitConfig(
            s=args.s,
            objective=args.objective,
            restarts=args.restarts,
            max_evals=args.max_evals,
            seed=args.seed,
        )
    try:
        result = histfit.fit_histogram(fp, n, cfg)
    except histfit.InfeasibleMassError as exc:
        raise CliError(f"infeasible fit: {exc}", code=2)
    payload = json.loads(core.histogram_to_json(result.histogram))
    payload["diagnostics"] = {
        "objective": cfg.objective,
        "objective_value": result.objective_value,
        **{k: _jsonable(v) for k, v in result.diagnostics.items()},
    }
    text = json.dumps(payload, indent=2)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text + "\n")
    return 0


def cmd_stats(args) -> int:
    h = _load_histogram(args.histogram)
    n = _parse_ints(args.n)
    if len(n) != h.m:
        raise CliError(f"need {h.m} sizes, got {len(n)}")
    result = {"expected_distinct": histstat.expected_distinct(h, n)}
    if args.new is not None:
        b = _parse_ints(args.new)
        if len(b) != h.m:
            raise CliError(f"need {h.m} new sizes, got {len(b)}")
        result["expected_new_distinct"] = histstat.expected_new_distinct(h, n, b)
        result["expected_new_seen_at_least_2"] = histstat.expected_new_seen_at_least(
            h, n, b, 2
        )
    if args.emd_against:
        other = _load_histogram(args.emd_against)
        result["emd"] = histstat.emd(h, other)
    _emit(result, args)
    return 0


def cmd_allocate(args) -> int:
    h = _load_histogram(args.histogram)
    n_old = _parse_ints(args.n_old)
    if len(n_old) != h.m:
        raise CliError(f"need {h.m} old sizes, got {len(n_old)}")
    problem = alloc.AllocationProblem(h=h, n_old=n_old, budget=args.budget, step=args.step)
    result = alloc.optimize_allocation(problem, objective=args.objective)
    payload = {
        "b": list(result.b),
        "predicted_gain": result.predicted_gain,
        "baseline_gains": result.baseline_gains,
        "exact": result.exact,
    }
    _emit(payload, args)
    if args.curve_out:
        m = h.m
        fractions = [k / 10 for k in range(11)]
        scenarios = {
            "optimized": [
                tuple(int(f * bj) for bj in result.b) for f in fractions
            ],
            "even_split": [
                tuple(int(f * args.budget / m) for _ in range(m)) for f in fractions
            ],
            "single_population_1": [
                (int(f * args.budget),) + (0,) * (m - 1) for f in fractions
            ],
        }
        curves = alloc.allocation_curve(h, n_old, scenarios)
        Path(args.curve_out).write_text(alloc.curve_to_csv(curves), encoding="utf-8")
        if not args.no_plot:
            from . import plots

            plots.plot_allocation_curves(
                curves, str(Path(args.curve_out).with_suffix(".png"))
            )
    return 0


def cmd_simulate(args) -> int:
    spec = synth.ModelSpec(
        kind=args.kind,
        m=args.m,
        total_elements=args.total_elements,
        support_per_pop=args.support_per_pop,
        dirichlet_alpha=args.dirichlet_alpha,
        geometric_p=args.geometric_p,
        seed=args.seed,
    )
    model = synth.make_model(spec)
    n = _parse_ints(args.n)
    if len(n) != args.m:
        raise CliError(f"need {args.m} sizes, got {len(n)}")
    samples = synth.draw_samples(model, n, scheme=args.scheme, seed=args.seed)
    _write_samples_tsv(samples, args.out)
    return 0


def cmd_ingest_text(args) -> int:
    try:
        corpus = Path(args.input).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot read corpus {args.input}: {exc}")
    try:
        samples, truth = synth.ingest_text(
            corpus, args.n_words, mode=args.mode, seed=args.seed
        )
    except ValueError as exc:
        raise CliError(str(exc))
    _write_samples_tsv(samples, args.out)
    if args.truth_out:
        Path(args.truth_out).write_text(core.histogram_to_json(truth), encoding="utf-8")
    return 0


# ---------------------------------------------------------------------------
# Experiment presets

EXTRAPOLATION_PRESETS = {
    "extrap-uniform": "uniform",
    "extrap-dirichlet": "dirichlet",
    "extrap-geometric": "geometric",
}

T_GRID = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)


def _preset_extrapolation(kind: str, trials: int, seed: int, outdir: Path, no_plot: bool):
    from . import plots

    spec = synth.ModelSpec(kind=kind, m=100, total_elements=3000, support_per_pop=100, seed=seed)
    plans = synth.extrapolation_preset_plans(100, 10, T_GRID, seed=seed)
    report = synth.run_extrapolation_experiment(
        spec, (10,) * 100, plans, trials=trials, estimator="weighted", seed=seed
    )
    csv_path = outdir / f"extrapolation_{kind}.csv"
    csv_path.write_text(report.to_csv(), encoding="utf-8")
    if not no_plot:
        plots.plot_extrapolation_report(
            report, str(csv_path.with_suffix(".png")), title=kind
        )
    return csv_path


def _preset_recovery(trials: int, seed: int, outdir: Path, no_plot: bool):
    from . import plots

    rows, _, _ = synth.run_recovery_experiment(
        sizes=(250, 500, 1000, 2000), runs=trials, seed=seed
    )
    csv_path = outdir / "recovery_emd.csv"
    csv_path.write_text(synth.recovery_rows_to_csv(rows), encoding="utf-8")
    if not no_plot:
        plots.plot_recovery_rows(rows, str(csv_path.with_suffix(".png")))
    return csv_path


def _preset_extrapolation_predictions(trials: int, seed: int, outdir: Path, no_plot: bool):
    """Follow-up discovery predictions from a fitted histogram vs the true model."""
    model = synth.make_shared_unique_model(3, 1000, 333, seed=seed)
    truth = model.true_histogram()
    n = (2000, 2000, 2000)
    samples = synth.draw_samples(model, n, "multinomial", seed=seed)
    fp = core.build_fingerprint(samples)
    res = histfit.fit_histogram(
        fp, n, histfit.FitConfig(s=4, restarts=4, max_evals=6000, seed=seed)
    )
    total_new = 2 * sum(n)
    scenarios = {
        "equal": tuple(total_new // 3 for _ in range(3)),
        "skewed": (
            int(total_new * 5 / 6),
            int(total_new * 1 / 12),
            int(total_new * 1 / 12),
        ),
    }
    lines = ["scenario,predicted_new_distinct,true_new_distinct"]
    for name, b in scenarios.items():
        pred = histstat.expected_new_distinct(res.histogram, n, b)
        true = histstat.expected_new_distinct(truth, n, b)
        lines.append("%s,%.6f,%.6f" % (name, pred, true))
    csv_path = outdir / "extrapolation_predictions.csv"
    csv_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return csv_path


def _preset_text(trials: int, seed: int, outdir: Path, no_plot: bool, corpus_path: str | None):
    if not corpus_path:
        raise CliError("the text preset requires --input <text file>")
    corpus = Path(corpus_path).read_text(encoding="utf-8")
    total = len(synth.tokenize(corpus))
    true_distinct = len(set(synth.tokenize(corpus)))
    n_words = total // 4
    lines = ["mode,run,predicted_distinct,true_distinct"]
    for mode in ("random", "contiguous"):
        for run in range(trials):
            samples, _ = synth.ingest_text(corpus, n_words, mode=mode, seed=seed + run)
            fp = core.build_fingerprint(samples)
            res = histfit.fit_histogram(
                fp,
                samples.sizes,
                histfit.FitConfig(s=12, restarts=3, max_evals=4000, seed=seed + run),
            )
            pred = histstat.expected_distinct(res.histogram, (total,))
            lines.append("%s,%d,%.2f,%d" % (mode, run, pred, true_distinct))
    csv_path = outdir / "text_predictions.csv"
    csv_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return csv_path


def _preset_allocation(trials: int, seed: int, outdir: Path, no_plot: bool, statistic: str):
    from . import plots

    model = synth.make_heterogeneous_model(seed=seed)
    truth = model.true_histogram()
    m = model.m
    n_old = (500,) * m
    budget = 10 * sum(n_old)
    problem = alloc.AllocationProblem(h=truth, n_old=n_old, budget=budget, step=budget // 100)
    objective = "distinct" if statistic == "distinct" else "seen_at_least_2"
    result = alloc.optimize_allocation(problem, objective=objective)
    fractions = [k / 10 for k in range(11)]
    scenarios = {
        "optimized": [tuple(int(f * bj) for bj in result.b) for f in fractions],
        "even_split": [tuple(int(f * budget / m) for _ in range(m)) for f in fractions],
        "single_population_1": [(int(f * budget),) + (0,) * (m - 1) for f in fractions],
    }
    curves = alloc.allocation_curve(truth, n_old, scenarios)
    name = "allocation" if statistic == "distinct" else "allocation_seen2"
    csv_path = outdir / f"{name}.csv"
    csv_path.write_text(alloc.curve_to_csv(curves), encoding="utf-8")
    if not no_plot:
        plots.plot_allocation_curves(curves, str(csv_path.with_suffix(".png")))
    return csv_path


def cmd_experiment(args) -> int:
    outdir = Path(args.out or ".")
    outdir.mkdir(parents=True, exist_ok=True)
    preset = args.preset
    if preset in EXTRAPOLATION_PRESETS:
        path = _preset_extrapolation(
            EXTRAPOLATION_PRESETS[preset], args.trials or 100, args.seed, outdir, args.no_plot
        )
    elif preset == "recovery":
        path = _preset_recovery(args.trials or 5, args.seed, outdir, args.no_plot)
    elif preset == "predictions":
        path = _preset_extrapolation_predictions(args.trials or 1, args.seed, outdir, args.no_plot)
    elif preset == "text":
        path = _preset_text(args.trials or 10, args.seed, outdir, args.no_plot, args.input)
    elif preset == "allocation":
        path = _preset_allocation(args.trials or 1, args.seed, outdir, args.no_plot, "distinct")
    elif preset == "allocation-seen2":
        path = _preset_allocation(args.trials or 1, args.seed, outdir, args.no_plot, "seen2")
    else:
        raise CliError(f"unknown preset {preset!r}")
    print(path)
    return 0


# ---------------------------------------------------------------------------

def _jsonable(v):
    if isinstance(v, tuple):
        return [float(x) for x in v]
    if hasattr(v, "item"):
        return v.item()
    return v


def _emit(result: dict, args) -> None:
    if getattr(args, "format", "json") == "csv":
        lines = [",".join(result), ",".join(str(v) for v in result.values())]
        text = "\n".join(lines) + "\n"
    else:
        text = json.dumps(result, indent=2) + "\n"
    if getattr(args, "out", None):
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="unseen",
        description="Multi-population unseen-element estimation toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--seed", type=int, default=DEFAULT_SEED)
        p.add_argument("--out", default=None, help="output path (default: stdout)")
        p.add_argument("--format", choices=("json", "csv"), default="json")

    p = sub.add_parser("fingerprint", help="samples TSV -> fingerprint TSV")
    p.add_argument("--samples", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_fingerprint)

    p = sub.add_parser("estimate", help="fingerprint + factors -> estimates")
    p.add_argument("--fingerprint", required=True)
    p.add_argument("--t", required=True, help="comma-separated extrapolation factors")
    p.add_argument("--rate", default="auto")
    add_common(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("fit", help="fingerprint -> fitted histogram JSON")
    p.add_argument("--fingerprint", required=True)
    p.add_argument("--config", default=None, help="FitConfig as JSON file")
    p.add_argument("--s", type=int, default=None)
    p.add_argument("--objective", choices=("counts", "loglik"), default="counts")
    p.add_argument("--restarts", type=int, default=5)
    p.add_argument("--max-evals", type=int, default=4000)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("stats", help="histogram statistics and EMD")
    p.add_argument("--histogram", required=True)
    p.add_argument("--n", required=True, help="comma-separated sample sizes")
    p.add_argument("--new", default=None, help="comma-separated new sample counts")
    p.add_argument("--emd-against", default=None, help="second histogram JSON")
    add_common(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("allocate", help="optimize a new-sample budget")
    p.add_argument("--histogram", required=True)
    p.add_argument("--n-old", required=True)
    p.add_argument("--budget", type=int, required=True)
    p.add_argument("--step", type=int, default=None)
    p.add_argument("--objective", choices=("distinct", "seen_at_least_2"), default="distinct")
    p.add_argument("--curve-out", default=None, help="also write scenario curves CSV")
    p.add_argument("--no-plot", action="store_true")
    add_common(p)
    p.set_defaults(func=cmd_allocate)

    p = sub.add_parser("simulate", help="synthetic model -> samples TSV")
    p.add_argument("--kind", choices=("uniform", "dirichlet", "geometric"), required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--n", required=True, help="comma-separated sample sizes")
    p.add_argument("--total-elements", type=int, default=3000)
    p.add_argument("--support-per-pop", type=int, default=100)
    p.add_argument("--dirichlet-alpha", type=float, default=1.0)
    p.add_argument("--geometric-p", type=float, default=0.05)
    p.add_argument("--scheme", choices=("multinomial", "poissonized"), default="multinomial")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("ingest-text", help="text corpus -> samples TSV + truth JSON")
    p.add_argument("--input", required=True)
    p.add_argument("--n-words", type=int, required=True)
    p.add_argument("--mode", choices=("random", "contiguous"), default="random")
    p.add_argument("--truth-out", default=None)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest_text)

    p = sub.add_parser("experiment", help="run a desk-scale preset experiment")
    p.add_argument(
        "--preset",
        required=True,
        choices=(
            "extrap-uniform",
            "extrap-dirichlet",
            "extrap-geometric",
            "recovery",
            "predictions",
            "text",
            "allocation",
            "allocation-seen2",
        ),
    )
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--input", default=None, help="text corpus (text preset)")
    p.add_argument("--no-plot", action="store_true")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out", default=None, help="output directory")
    p.set_defaults(func=cmd_experiment)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
