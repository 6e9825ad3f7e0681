"""Histogram recovery from a fingerprint by derivative-free optimization.

Singleton fingerprint entries are split off into an empirical portion of
the histogram; the remaining entries (counts >= 2) drive a black-box fit
of up to ``s`` support points, constrained so that together with the
empirical portion every population carries unit probability mass.  The
constraint is enforced by an escalating quadratic penalty around a
Nelder-Mead inner solver, with multiple seeded restarts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .core import KEY_DECIMALS, Fingerprint, Histogram
from .histstat import binom_pmf

_LOGLIK_FLOOR = 1e-12
_PENALTY_ROUNDS = 8


class InfeasibleMassError(ValueError):
    """The empirical histogram portion alone already exceeds unit mass."""


@dataclass(frozen=True)
class FitConfig:
    """Hyperparameters of the histogram fit.

    ``s`` is the number of fitted support points; None means
    max(10, number of fingerprint keys with count >= 2).  ``max_evals``
    budgets the inner solver per penalty round.
    """

    s: int | None = None
    objective: str = "counts"
    restarts: int = 5
    max_evals: int = 4000
    penalty_weight: float = 1e3
    seed: int = 0
    mass_tolerance: float = 1e-4

    def __post_init__(self):
        if self.s is not None and self.s < 1:
            raise ValueError("s must be >= 1")
        if self.objective not in ("counts", "loglik"):
            raise ValueError(f"unknown objective {self.objective!r}")
        if self.restarts < 1 or self.max_evals < 1:
            raise ValueError("restarts and max_evals must be positive")
        if not 0 < self.mass_tolerance <= 1e-3:
            raise ValueError("mass_tolerance must be in (0, 1e-3]")
        if not self.penalty_weight > 0:
            raise ValueError("penalty_weight must be positive")


@dataclass(frozen=True)
class FitResult:
    histogram: Histogram
    objective_value: float
    emp_part: Histogram
    fitted_part: Histogram
    diagnostics: dict = field(default_factory=dict)


def split_ones(fp: Fingerprint, n: tuple[int, ...]) -> tuple[Histogram, Fingerprint]:
    """Move count-1 fingerprint keys into an empirical histogram at i/n."""
    emp_pairs = []
    rest: dict = {}
    for key, count in fp:
        if count == 1:
            emp_pairs.append((tuple(i / nj for i, nj in zip(key, n)), 1.0))
        else:
            rest[key] = count
    return (
        Histogram.from_pairs(fp.m, emp_pairs),
        Fingerprint(fp.m, rest, fp.dims),
    )


def objective_counts(h: Histogram, fp_rest: Fingerprint, n: tuple[int, ...]) -> float:
    """Weighted L1 discrepancy between observed and expected fingerprint entries."""
    parts = []
    for key, count in fp_rest:
        expected = math.fsum(
            mass * math.prod(binom_pmf(aj, nj, ij) for aj, nj, ij in zip(alpha, n, key))
            for alpha, mass in h
        )
        parts.append(abs(count - expected) / math.sqrt(1.0 + count))
    return math.fsum(parts)


def objective_loglik(h: Histogram, fp_rest: Fingerprint, n: tuple[int, ...]) -> float:
    """Poisson proxy log-likelihood of the observed fingerprint entries."""
    parts = []
    for key, count in fp_rest:
        expected = math.fsum(
            mass * math.prod(binom_pmf(aj, nj, ij) for aj, nj, ij in zip(alpha, n, key))
            for alpha, mass in h
        )
        expected = max(expected, _LOGLIK_FLOOR)
        parts.append(count * math.log(expected) - expected - math.lgamma(count + 1))
    return math.fsum(parts)


class _FitProblem:
    """Vectorized objective over (mass, alpha) arrays for fixed fp_rest keys."""

    def __init__(self, fp_rest: Fingerprint, n: tuple[int, ...], objective: str):
        self.m = fp_rest.m
        self.n = np.asarray(n, dtype=float)
        keys = sorted(fp_rest.entries)
        self.keys = np.asarray(keys, dtype=float).reshape(len(keys), self.m)
        self.counts = np.asarray([fp_rest.entries[k] for k in keys], dtype=float)
        self.logcomb = np.array(
            [[_log_comb(nj, ij) for nj, ij in zip(n, key)] for key in keys]
        ).reshape(len(keys), self.m)
        self.weights = 1.0 / np.sqrt(1.0 + self.counts)
        self.objective = objective
        self.log_fact = np.array([math.lgamma(c + 1) for c in self.counts])
        self.evals = 0

    def expected(self, masses: np.ndarray, alphas: np.ndarray) -> np.ndarray:
        """Expected fingerprint entries: (K,) from masses (S,) and alphas (S, m)."""
        K = self.keys.shape[0]
        if K == 0:
            return np.zeros(0)
        a = alphas[:, None, :]  # (S, 1, m)
        i = self.keys[None, :, :]  # (1, K, m)
        nmi = self.n[None, None, :] - i
        with np.errstate(divide="ignore", invalid="ignore"):
            logf = i * np.log(a) + nmi * np.log1p(-a) + self.logcomb[None, :, :]
        # alpha == 0: contributes 1 when i == 0, else 0
        zero_a = a == 0.0
        logf = np.where(zero_a & (i == 0), 0.0, logf)
        logf = np.where(zero_a & (i > 0), -np.inf, logf)
        one_a = a >= 1.0
        logf = np.where(one_a & (nmi == 0), self.logcomb[None, :, :], logf)
        logf = np.where(one_a & (nmi > 0), -np.inf, logf)
        logprod = logf.sum(axis=2)  # (S, K)
        return masses @ np.exp(logprod)

    def value(self, masses: np.ndarray, alphas: np.ndarray) -> float:
        """Minimization objective: counts discrepancy or negative log-likelihood."""
        self.evals += 1
        expected = self.expected(masses, alphas)
        if self.objective == "counts":
            return float(np.sum(self.weights * np.abs(self.counts - expected)))
        expected = np.maximum(expected, _LOGLIK_FLOOR)
        ll = np.sum(self.counts * np.log(expected) - expected - self.log_fact)
        return -float(ll)


def _log_comb(n: float, i: float) -> float:
    return math.lgamma(n + 1) - math.lgamma(i + 1) - math.lgamma(n - i + 1)


def fit_histogram(fp: Fingerprint, n: tuple[int, ...], cfg: FitConfig = FitConfig()) -> FitResult:
    """Fit the multi-population histogram underlying a fingerprint.

    Deterministic given (fp, n, cfg).  Raises InfeasibleMassError when the
    empirical portion alone exceeds unit mass on some population.
    """
    m = fp.m
    emp, fp_rest = split_ones(fp, n)
    emp_mass = np.array(emp.per_population_mass()) if emp.entries else np.zeros(m)
    if np.any(emp_mass > 1.0 + cfg.mass_tolerance):
        raise InfeasibleMassError(
            "empirical histogram portion exceeds unit mass: %s" % (tuple(emp_mass),)
        )
    residual_target = np.maximum(1.0 - emp_mass, 0.0)

    if not fp_rest.entries:
        fitted = _degenerate_fit(m, n, residual_target)
        hist = emp.combine(fitted) if fitted.entries else emp
        obj = 0.0 if cfg.objective == "counts" else 0.0
        return FitResult(
            histogram=hist,
            objective_value=obj,
            emp_part=emp,
            fitted_part=fitted,
            diagnostics={
                "degenerate": True,
                "evaluations": 0,
                "mass_residuals": tuple(np.array(hist.per_population_mass()) - 1.0),
            },
        )

    problem = _FitProblem(fp_rest, n, cfg.objective)
    s = cfg.s if cfg.s is not None else max(10, len(fp_rest.entries))

    best = None
    for restart in range(cfg.restarts):
        rng = np.random.default_rng([cfg.seed, restart])
        masses0, alphas0, mask = _initialize(fp_rest, n, s, residual_target, restart, rng)
        masses, alphas, obj_min, feasible, resid = _solve_restart(
            problem, masses0, alphas0, mask, emp_mass, cfg
        )
        cand = (not feasible, obj_min, restart, masses, alphas, resid)
        if best is None or cand[:3] < best[:3]:
            best = cand

    _, obj_min, _, masses, alphas, resid = best
    # A point needs positive mass and a probability vector that survives key
    # quantization; one pinned to zero carries no mass and cannot be a key.
    keep = (masses > 0.0) & (alphas.max(axis=1) >= 0.5 * 10.0 ** -KEY_DECIMALS)
    fitted = Histogram.from_pairs(
        m, [(tuple(alphas[k]), float(masses[k])) for k in np.nonzero(keep)[0]]
    )
    hist = emp.combine(fitted) if fitted.entries else emp
    objective_value = obj_min if cfg.objective == "counts" else -obj_min
    return FitResult(
        histogram=hist,
        objective_value=float(objective_value),
        emp_part=emp,
        fitted_part=fitted,
        diagnostics={
            "degenerate": False,
            "evaluations": problem.evals,
            "mass_residuals": tuple(resid),
            "restarts": cfg.restarts,
            "support_points": int(keep.sum()),
        },
    )


def _degenerate_fit(m: int, n: tuple[int, ...], residual: np.ndarray) -> Histogram:
    """Nothing to optimize: park the leftover mass below the detection scale."""
    if np.all(residual <= 0.0):
        return Histogram(m, {})
    R = float(max(n))
    alpha = tuple(float(rj) / R for rj in residual)
    return Histogram.from_pairs(m, [(alpha, R)])


def _initialize(fp_rest, n, s, residual_target, restart, rng):
    """Support-point seeds: heaviest fingerprint keys at i/n, plus a tail point."""
    m = fp_rest.m
    n_arr = np.asarray(n, dtype=float)
    keys = sorted(fp_rest.entries, key=lambda k: (-fp_rest.entries[k], k))
    pts = []
    for key in keys[: max(1, s - 1)]:
        alpha = np.asarray(key, dtype=float) / n_arr
        pts.append((float(fp_rest.entries[key]), alpha))
    # tail point active on all axes, far below the smallest observable rate
    tail_alpha = np.full(m, 0.5 / float(np.max(n_arr)))
    tail_mass = float(max(np.max(residual_target) / np.max(tail_alpha), 1.0))
    pts.append((tail_mass, tail_alpha))
    while len(pts) < s:
        key = keys[rng.integers(len(keys))]
        alpha = np.asarray(key, dtype=float) / n_arr
        pts.append((float(fp_rest.entries[key]), alpha))
    pts = pts[:s]
    masses = np.array([p[0] for p in pts])
    alphas = np.array([p[1] for p in pts])
    mask = alphas > 0.0
    if restart > 0:
        masses = masses * np.exp(rng.uniform(-1.0, 1.0, size=masses.shape))
        alphas = np.where(
            mask, np.clip(alphas * np.exp(rng.uniform(-1.0, 1.0, size=alphas.shape)), 1e-12, 1 - 1e-9), 0.0
        )
    return masses, alphas, mask


def _pack(masses, alphas, mask):
    z = np.log(np.maximum(masses, 1e-300))
    logits = np.log(alphas[mask]) - np.log1p(-alphas[mask])
    return np.concatenate([z, logits])


def _unpack(theta, mask):
    s = mask.shape[0]
    z = np.clip(theta[:s], -60.0, 60.0)
    masses = np.exp(z)
    alphas = np.zeros(mask.shape)
    logits = np.clip(theta[s:], -60.0, 60.0)
    alphas[mask] = 1.0 / (1.0 + np.exp(-logits))
    return masses, alphas


def _solve_restart(problem, masses0, alphas0, mask, emp_mass, cfg):
    """Penalty-escalated Nelder-Mead from one initialization."""

    def penalized(theta, weight):
        masses, alphas = _unpack(theta, mask)
        resid = masses @ alphas + emp_mass - 1.0
        return problem.value(masses, alphas) + weight * float(np.sum(resid**2))

    theta = _pack(masses0, alphas0, mask)
    weight = cfg.penalty_weight
    masses, alphas = _unpack(theta, mask)
    for round_idx in range(_PENALTY_ROUNDS):
        res = minimize(
            penalized,
            theta,
            args=(weight,),
            method="Nelder-Mead",
            options={
                "maxfev": cfg.max_evals,
                "xatol": 1e-8,
                "fatol": 1e-10,
                "adaptive": True,
            },
        )
        theta = res.x
        masses, alphas = _unpack(theta, mask)
        resid = masses @ alphas + emp_mass - 1.0
        if np.max(np.abs(resid)) < cfg.mass_tolerance:
            break
        weight *= 10.0
    masses, alphas = _unpack(theta, mask)
    masses = _repair_masses(masses, alphas, emp_mass, cfg.mass_tolerance)
    resid = masses @ alphas + emp_mass - 1.0
    feasible = bool(np.max(np.abs(resid)) < cfg.mass_tolerance)
    obj = problem.value(masses, alphas)
    return masses, alphas, obj, feasible, resid


def _repair_masses(masses, alphas, emp_mass, tol):
    """Nudge masses onto the unit-mass constraint, staying close to the fit.

    Least squares on the active constraint with a small proximity term,
    nonnegative masses.  Applied only when it actually reduces the residual.
    """
    from scipy.optimize import lsq_linear

    resid = masses @ alphas + emp_mass - 1.0
    if np.max(np.abs(resid)) < tol:
        return masses
    target = 1.0 - emp_mass
    A = alphas.T  # (m, S)
    prox = 1e-6 * np.eye(masses.shape[0]) * np.maximum(np.abs(masses), 1.0).mean()
    A_aug = np.vstack([A, prox])
    b_aug = np.concatenate([target, prox @ masses])
    try:
        sol = lsq_linear(A_aug, b_aug, bounds=(0.0, np.inf))
    except ValueError:
        return masses
    new_resid = sol.x @ alphas + emp_mass - 1.0
    if np.max(np.abs(new_resid)) < np.max(np.abs(resid)):
        return sol.x
    return masses
