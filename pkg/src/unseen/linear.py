"""Linear estimators of the number of new elements in future samples.

The unbiased estimator is an alternating sum over fingerprint entries with
weights determined by the per-population extrapolation factors.  The
weighted variant damps high-order terms with Poisson tail probabilities,
trading a controlled amount of bias for much lower variance whenever some
extrapolation factor exceeds 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import DimensionMismatchError, Fingerprint, IndexVector, PopulationModel

# Above this tail index the direct pmf summation is replaced by scipy's
# survival function; never reached at desk scale.
_DIRECT_TAIL_LIMIT = 10_000


class RateNotApplicableError(ValueError):
    """No population extrapolates beyond its sample, so no rate is needed."""


@dataclass(frozen=True)
class ExtrapolationPlan:
    """Period-one sizes n_j and extrapolation factors t_j per population."""

    n: tuple[int, ...]
    t: tuple[float, ...]

    def __post_init__(self):
        if len(self.n) != len(self.t):
            raise DimensionMismatchError("n and t lengths differ")
        if any(nj < 1 for nj in self.n):
            raise ValueError("sizes must be positive integers")
        if any(tj < 0 for tj in self.t):
            raise ValueError("extrapolation factors must be nonnegative")

    @property
    def m(self) -> int:
        return len(self.n)

    @property
    def b(self) -> tuple[int, ...]:
        """Integer period-two sample counts, round-half-to-even of t_j*n_j."""
        return tuple(int(round(tj * nj)) for tj, nj in zip(self.t, self.n))

    @property
    def beyond(self) -> frozenset[int]:
        """Populations (0-based) extrapolating beyond their sample: t_j > 1."""
        return frozenset(j for j, tj in enumerate(self.t) if tj > 1)


@dataclass(frozen=True)
class WeightConfig:
    """Poisson smoothing configuration; rate "auto" resolves via default_rate."""

    r: float | str = "auto"

    def __post_init__(self):
        if self.r != "auto" and not self.r > 0:
            raise ValueError("explicit rate must be positive")


def _signed_terms(fp: Fingerprint, plan: ExtrapolationPlan):
    """Eq-style terms -(prod_j (-t_j)^{i_j}) * count, ascending in sum(i)."""
    if fp.m != plan.m:
        raise DimensionMismatchError("fingerprint and plan dimensions differ")
    for key in sorted(fp.entries, key=sum):
        count = fp.entries[key]
        prod = 1.0
        for i, tj in zip(key, plan.t):
            prod *= (-tj) ** i
        yield key, -prod * count


def unbiased_estimate(fp: Fingerprint, plan: ExtrapolationPlan) -> float:
    """Alternating-sum estimate of the number of new distinct elements.

    Terms are accumulated in ascending total-count order with exact
    compensated summation to limit cancellation.
    """
    return math.fsum(term for _, term in _signed_terms(fp, plan))


def poisson_tail_weight(i: IndexVector, beyond: frozenset[int], r: float) -> float:
    """P(L >= sum of i_j over the extrapolating populations), L ~ Poisson(r)."""
    if not r > 0:
        raise ValueError("rate must be positive")
    k = sum(i[j] for j in beyond)
    return _poisson_tail(k, r)


def _poisson_tail(k: int, r: float) -> float:
    if k <= 0:
        return 1.0
    if k > _DIRECT_TAIL_LIMIT:
        from scipy import stats

        return float(stats.poisson.sf(k - 1, r))
    # P(L >= k) = 1 - sum_{i<k} pmf(i), direct compensated summation
    pmf = math.exp(-r)
    terms = [pmf]
    for i in range(1, k):
        pmf *= r / i
        terms.append(pmf)
    tail = 1.0 - math.fsum(terms)
    return min(1.0, max(0.0, tail))


def default_rate(plan: ExtrapolationPlan) -> float:
    """Rate balancing squared bias against variance: ln(sum n_j(t_j+1)) / (2 max t_j)."""
    t_max = max(plan.t)
    if t_max < 1:
        raise RateNotApplicableError(
            "all extrapolation factors are below 1; weights are identically 1"
        )
    total = math.fsum(nj * (tj + 1) for nj, tj in zip(plan.n, plan.t))
    return math.log(total) / (2.0 * t_max)


def resolve_rate(plan: ExtrapolationPlan, cfg: WeightConfig) -> float | None:
    """Concrete Poisson rate, or None when no weighting applies."""
    if cfg.r != "auto":
        return float(cfg.r)
    if not plan.beyond:
        return None
    return default_rate(plan)


def weighted_estimate(
    fp: Fingerprint, plan: ExtrapolationPlan, cfg: WeightConfig = WeightConfig()
) -> float:
    """Poisson-smoothed estimate; equals the unbiased one when all t_j <= 1."""
    beyond = plan.beyond
    if not beyond:
        return unbiased_estimate(fp, plan)
    r = resolve_rate(plan, cfg)
    tails: dict[int, float] = {}
    parts = []
    for key, term in _signed_terms(fp, plan):
        k = sum(key[j] for j in beyond)
        if k not in tails:
            tails[k] = _poisson_tail(k, r)
        parts.append(term * tails[k])
    return math.fsum(parts)


def exact_expected_new(
    model: PopulationModel, plan: ExtrapolationPlan, scheme: str = "poissonized"
) -> float:
    """Exact E[number of period-two elements unseen in period one].

    Poissonized: per-element counts are independent Poissons with means
    n_j*p and b_j*p.  Multinomial: fixed sample sizes n_j and b_j.
    This is the validation oracle for both linear estimators.
    """
    if model.m != plan.m:
        raise DimensionMismatchError("model and plan dimensions differ")
    rows = (model.prob_vector(x) for x in model.labels)
    return exact_expected_new_from_probs(rows, plan, scheme)


def exact_expected_new_from_probs(prob_rows, plan: ExtrapolationPlan, scheme: str) -> float:
    """Same oracle over raw per-element probability vectors (no normalization check)."""
    terms = []
    if scheme == "poissonized":
        for p in prob_rows:
            lam = [nj * pj for nj, pj in zip(plan.n, p)]
            lam_new = math.fsum(tj * lj for tj, lj in zip(plan.t, lam))
            terms.append(math.exp(-math.fsum(lam)) * -math.expm1(-lam_new))
    elif scheme == "multinomial":
        b = plan.b
        for p in prob_rows:
            p_unseen = math.prod(_pow1m(pj, nj) for pj, nj in zip(p, plan.n))
            p_missed = math.prod(_pow1m(pj, bj) for pj, bj in zip(p, b))
            terms.append(p_unseen * (1.0 - p_missed))
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    return math.fsum(terms)


def _pow1m(p: float, n: int) -> float:
    """(1-p)^n, stable for tiny p and large n."""
    if p >= 1.0:
        return 0.0 if n > 0 else 1.0
    if n == 0:
        return 1.0
    return math.exp(n * math.log1p(-p))
