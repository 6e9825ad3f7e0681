"""Core domain types: population models, samples, fingerprints and histograms.

Everything here is sparse.  A fingerprint maps per-population count vectors
to the number of distinct elements with those counts; a histogram maps
per-population probability vectors to (real-valued) element mass.  Dense
tensors are never materialized: key counts stay proportional to the number
of samples, not to the product of the sample sizes.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from collections.abc import Hashable, Iterable, Mapping
from dataclasses import dataclass, field

Label = Hashable
IndexVector = tuple[int, ...]
ProbVector = tuple[float, ...]

# Histogram keys are rounded to this many decimals for map identity only;
# stored coordinate values are the quantized ones and are used as-is by
# every downstream statistic.
KEY_DECIMALS = 12

PROB_SUM_TOL = 1e-9
MASS_TOL = 1e-6


class DimensionMismatchError(ValueError):
    """Operands describe different numbers of populations."""


def quantize(alpha: Iterable[float]) -> ProbVector:
    """Round a probability vector for use as a histogram key."""
    return tuple(round(float(a), KEY_DECIMALS) for a in alpha)


@dataclass(frozen=True)
class PopulationModel:
    """Ground-truth distributions over a shared label domain.

    ``probs[j]`` maps a label to its probability in population ``j``.
    Used only for simulation and exact oracles; estimators never see it.
    """

    probs: tuple[Mapping[Label, float], ...]

    def __post_init__(self):
        if len(self.probs) < 1:
            raise ValueError("need at least one population")
        for j, pj in enumerate(self.probs):
            if any(p < 0 for p in pj.values()):
                raise ValueError(f"negative probability in population {j}")
            total = math.fsum(pj.values())
            if abs(total - 1.0) > PROB_SUM_TOL:
                raise ValueError(
                    f"population {j} probabilities sum to {total!r}, not 1"
                )

    @property
    def m(self) -> int:
        return len(self.probs)

    @property
    def labels(self) -> list[Label]:
        seen: dict[Label, None] = {}
        for pj in self.probs:
            for x in pj:
                seen.setdefault(x)
        return list(seen)

    def prob_vector(self, label: Label) -> ProbVector:
        return tuple(pj.get(label, 0.0) for pj in self.probs)

    def true_histogram(self) -> "Histogram":
        """Histogram of the model itself: integer mass per probability vector."""
        acc: Counter[ProbVector] = Counter()
        for x in self.labels:
            v = self.prob_vector(x)
            if any(p > 0 for p in v):
                acc[quantize(v)] += 1
        return Histogram(self.m, dict(acc))


@dataclass(frozen=True)
class SampleSet:
    """Observed multiplicities per population.  Labels seen nowhere are not stored."""

    m: int
    counts: tuple[Mapping[Label, int], ...]

    def __post_init__(self):
        if self.m != len(self.counts):
            raise DimensionMismatchError("m does not match counts")
        for cj in self.counts:
            if any((not isinstance(c, int)) or c < 0 for c in cj.values()):
                raise ValueError("multiplicities must be nonnegative integers")

    @classmethod
    def from_observations(cls, m: int, obs: Iterable[tuple[int, Label]]) -> "SampleSet":
        """Build from (population_index, label) pairs, population indices 1-based."""
        counters: list[Counter] = [Counter() for _ in range(m)]
        for j, label in obs:
            if not 1 <= j <= m:
                raise ValueError(f"population index {j} out of range 1..{m}")
            counters[j - 1][label] += 1
        return cls(m, tuple({x: c for x, c in cj.items() if c > 0} for cj in counters))

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(sum(cj.values()) for cj in self.counts)

    @property
    def labels(self) -> list[Label]:
        seen: dict[Label, None] = {}
        for cj in self.counts:
            for x in cj:
                seen.setdefault(x)
        return list(seen)

    def count_vector(self, label: Label) -> IndexVector:
        return tuple(cj.get(label, 0) for cj in self.counts)


@dataclass(frozen=True)
class Fingerprint:
    """Sparse count-of-counts tensor.  The all-zero key is never stored."""

    m: int
    entries: Mapping[IndexVector, int]
    dims: tuple[int, ...] = field(default=())

    def __post_init__(self):
        for key in self.entries:
            if len(key) != self.m:
                raise DimensionMismatchError(f"key {key} has wrong length")
        dims = self.dims
        if not dims:
            dims = tuple(
                max((key[j] for key in self.entries), default=0) for j in range(self.m)
            )
            object.__setattr__(self, "dims", dims)
        for key, count in self.entries.items():
            if all(i == 0 for i in key):
                raise ValueError("the all-zero index vector may not be a key")
            if any(i < 0 for i in key) or count <= 0:
                raise ValueError(f"bad entry {key} -> {count}")
            if any(i > d for i, d in zip(key, dims)):
                raise ValueError(f"key {key} exceeds dims {dims}")

    def __iter__(self):
        return iter(self.entries.items())


def build_fingerprint(samples: SampleSet) -> Fingerprint:
    """Count, for each multiplicity vector, the distinct labels attaining it."""
    acc: Counter[IndexVector] = Counter()
    for label in samples.labels:
        key = samples.count_vector(label)
        if any(i > 0 for i in key):
            acc[key] += 1
    return Fingerprint(samples.m, dict(acc))


def marginal_fingerprint(fp: Fingerprint, j: int) -> Fingerprint:
    """Single-population fingerprint of population ``j`` (1-based)."""
    if not 1 <= j <= fp.m:
        raise IndexError(f"population index {j} out of range 1..{fp.m}")
    acc: Counter[IndexVector] = Counter()
    for key, count in fp:
        i = key[j - 1]
        if i > 0:
            acc[(i,)] += count
    return Fingerprint(1, dict(acc))


def observed_distinct(fp: Fingerprint) -> int:
    """Total number of distinct elements the fingerprint accounts for."""
    return sum(fp.entries.values())


@dataclass(frozen=True)
class Histogram:
    """Sparse map from probability vectors to positive element mass.

    Masses are real: histograms of a true model carry integer masses,
    fitted histograms carry fractional ones.  Keys are quantized to
    KEY_DECIMALS decimals; the all-zero vector is never a key.
    """

    m: int
    entries: Mapping[ProbVector, float]

    def __post_init__(self):
        for key, mass in self.entries.items():
            if len(key) != self.m:
                raise DimensionMismatchError(f"key {key} has wrong length")
            if all(a == 0 for a in key):
                raise ValueError("the all-zero probability vector may not be a key")
            if any(a < 0 or a > 1 for a in key):
                raise ValueError(f"key {key} outside [0,1]^m")
            if not mass > 0:
                raise ValueError(f"nonpositive mass at {key}")

    def validate_mass(self, tol: float = MASS_TOL) -> None:
        """Check the per-population mass bound M_j <= 1 + tol.

        Not enforced at construction: optimizer iterates and worked
        objective examples legitimately carry excess mass.
        """
        for j, mj in enumerate(self.per_population_mass()):
            if mj > 1.0 + tol:
                raise ValueError(f"population {j + 1} mass {mj} exceeds 1")

    @classmethod
    def from_pairs(cls, m: int, pairs: Iterable[tuple[Iterable[float], float]]) -> "Histogram":
        """Accumulate (alpha, mass) pairs; masses at coinciding keys add up."""
        acc: dict[ProbVector, float] = {}
        for alpha, mass in pairs:
            key = quantize(alpha)
            acc[key] = acc.get(key, 0.0) + mass
        return cls(m, {k: v for k, v in acc.items() if v > 0})

    def per_population_mass(self) -> tuple[float, ...]:
        return tuple(
            math.fsum(key[j] * mass for key, mass in self.entries.items())
            for j in range(self.m)
        )

    def total_mass(self) -> float:
        return math.fsum(self.entries.values())

    def combine(self, other: "Histogram") -> "Histogram":
        """Disjoint union of element masses (masses at shared keys add)."""
        if self.m != other.m:
            raise DimensionMismatchError("histogram dimensions differ")
        return Histogram.from_pairs(
            self.m,
            list(self.entries.items()) + list(other.entries.items()),
        )

    def __iter__(self):
        return iter(self.entries.items())


def empirical_histogram(fp: Fingerprint, n: tuple[int, ...]) -> Histogram:
    """Place each fingerprint entry at its empirical frequency vector i/n."""
    if len(n) != fp.m:
        raise DimensionMismatchError("sizes length does not match fingerprint")
    if any(nj < 1 for nj in n):
        raise ValueError("sample sizes must be positive")
    pairs = []
    for key, count in fp:
        alpha = tuple(i / nj for i, nj in zip(key, n))
        pairs.append((alpha, float(count)))
    return Histogram.from_pairs(fp.m, pairs)


# ---------------------------------------------------------------------------
# Serialization: fingerprint TSV and histogram JSON.

def fingerprint_to_tsv(fp: Fingerprint, n: tuple[int, ...] | None = None) -> str:
    """One row per key: m index columns then the count.  Header carries m and n."""
    sizes = n if n is not None else fp.dims
    lines = ["# m=%d n=%s" % (fp.m, ",".join(str(s) for s in sizes))]
    for key in sorted(fp.entries):
        lines.append("\t".join(str(i) for i in key) + "\t" + str(fp.entries[key]))
    return "\n".join(lines) + "\n"


def fingerprint_from_tsv(text: str) -> tuple[Fingerprint, tuple[int, ...]]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("#"):
        raise ValueError("missing fingerprint header")
    header = lines[0].lstrip("# ").split()
    fields = dict(part.split("=", 1) for part in header)
    m = int(fields["m"])
    n = tuple(int(s) for s in fields["n"].split(",")) if fields["n"] else ()
    entries: dict[IndexVector, int] = {}
    for ln in lines[1:]:
        cols = ln.split("\t")
        if len(cols) != m + 1:
            raise ValueError(f"expected {m + 1} columns, got {len(cols)}: {ln!r}")
        key = tuple(int(c) for c in cols[:m])
        entries[key] = int(cols[m])
    dims = n if n else tuple(max((k[j] for k in entries), default=0) for j in range(m))
    return Fingerprint(m, entries, dims), n


def histogram_to_json(h: Histogram) -> str:
    payload = {
        "m": h.m,
        "entries": [
            {"alpha": list(key), "mass": mass} for key, mass in sorted(h.entries.items())
        ],
    }
    return json.dumps(payload, indent=2)


def histogram_from_json(text: str) -> Histogram:
    payload = json.loads(text)
    return Histogram.from_pairs(
        payload["m"], [(e["alpha"], e["mass"]) for e in payload["entries"]]
    )
