"""Seeded statistical test harness.

Every randomized procedure in the package draws from one of two sources:

* bulk sampling uses numpy's PCG64 keyed by (seed, stream), so parallel
  fan-out gets independent, reproducible streams;
* per-item draws (fresh marks and the like) use a counter-based splitmix64
  hash of an integer key tuple, so a value is a pure function of its key
  and survives reordering, resampling, and parallel evaluation.

Test verdicts are reported, never printed: a TestReport records the
statistic, the p-value, and whether the outcome is a pass under the
declared design (goodness-of-fit tests pass on p >= alpha, tests designed
to reject pass on p < alpha).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sps

from .errors import InsufficientDataError

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(state: int) -> int:
    """One splitmix64 step: advance the state by the golden gamma and mix."""
    x = (state + _GOLDEN) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (x ^ (x >> 31)) & _MASK64


class KeyedStream:
    """Deterministic per-key randomness: a value is a function of (seed, key)."""

    def __init__(self, seed: int):
        self.seed = seed & _MASK64

    def _state(self, key: tuple[int, ...]) -> int:
        h = splitmix64(self.seed)
        for part in key:
            h = splitmix64(h ^ (int(part) & _MASK64))
        return h

    def uniform(self, *key: int) -> float:
        return self._state(key) / 2.0**64

    def integer(self, upper: int, *key: int) -> int:
        # modulo bias is < upper / 2**64, irrelevant for small alphabets
        return self._state(key) % upper


@dataclass(frozen=True)
class DiscreteLaw:
    """Finite alphabet with positive integer weights (exact probabilities)."""

    symbols: tuple
    weights: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "symbols", tuple(self.symbols))
        object.__setattr__(self, "weights", tuple(int(w) for w in self.weights))
        if len(self.symbols) != len(self.weights) or not self.symbols:
            raise ValueError("need one positive weight per symbol")
        if any(w <= 0 for w in self.weights):
            raise ValueError("weights must be positive")
        if len(set(self.symbols)) != len(self.symbols):
            raise ValueError("symbols must be distinct")

    @property
    def total(self) -> int:
        return sum(self.weights)

    def prob(self, symbol) -> float:
        return self.weights[self.symbols.index(symbol)] / self.total

    def draw(self, stream: KeyedStream, *key: int):
        u = stream.integer(self.total, *key)
        acc = 0
        for s, w in zip(self.symbols, self.weights):
            acc += w
            if u < acc:
                return s
        raise AssertionError("unreachable")


def uniform_law(k: int) -> DiscreteLaw:
    return DiscreteLaw(tuple(range(k)), (1,) * k)


@dataclass(frozen=True)
class RngSpec:
    """Names one reproducible bulk stream: algorithm, 64-bit seed, stream id."""

    seed: int
    stream: int = 0
    algorithm: str = "pcg64"

    def to_jsonable(self) -> dict:
        return {"algorithm": self.algorithm, "seed": self.seed, "stream": self.stream}


def make_rng(spec: RngSpec) -> np.random.Generator:
    if spec.algorithm != "pcg64":
        raise ValueError(f"unknown rng algorithm {spec.algorithm!r}")
    ss = np.random.SeedSequence(spec.seed, spawn_key=(spec.stream,))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class TestReport:
    name: str
    statistic: float
    p_value: float
    n: int
    alpha: float
    expect_reject: bool
    passed: bool
    params: dict = field(default_factory=dict, compare=False)

    def to_jsonable(self) -> dict:
        return {
            "name": self.name,
            "statistic": self.statistic,
            "p_value": self.p_value,
            "n": self.n,
            "alpha": self.alpha,
            "expect_reject": self.expect_reject,
            "passed": self.passed,
            "params": self.params,
        }


def _report(name, statistic, p_value, n, alpha, expect_reject, params=None) -> TestReport:
    passed = (p_value < alpha) if expect_reject else (p_value >= alpha)
    return TestReport(
        name=name,
        statistic=float(statistic),
        p_value=float(p_value),
        n=int(n),
        alpha=float(alpha),
        expect_reject=bool(expect_reject),
        passed=bool(passed),
        params=params or {},
    )


def ks_exponential(samples, alpha: float = 0.01, name: str = "ks_exponential") -> TestReport:
    """Kolmogorov-Smirnov against the unit exponential, asymptotic p-value."""
    arr = np.asarray(samples, dtype=float)
    if arr.size < 8:
        raise InsufficientDataError(f"{name}: need at least 8 samples, got {arr.size}")
    res = sps.kstest(arr, "expon", method="asymp")
    return _report(name, res.statistic, res.pvalue, arr.size, alpha, expect_reject=False)


def chi2_poisson(
    counts,
    mean: float,
    alpha: float = 0.01,
    min_expected: float = 5.0,
    name: str = "chi2_poisson",
) -> TestReport:
    """Chi-square goodness of fit of integer draws against Poisson(mean).

    Consecutive count values are merged left to right until every bin's
    expectation reaches min_expected; the right tail is one merged bin.
    """
    arr = np.asarray(counts, dtype=int)
    n = arr.size
    if n == 0:
        raise InsufficientDataError(f"{name}: no samples")
    if mean <= 0:
        raise ValueError("mean must be positive")
    kmax = int(sps.poisson.ppf(1 - 1e-9, mean)) + 1
    probs = sps.poisson.pmf(np.arange(kmax), mean)
    probs = np.append(probs, max(1.0 - probs.sum(), 0.0))  # tail bin [kmax, inf)

    edges = []  # inclusive upper count value per bin; last bin catches the rest
    acc = 0.0
    for k in range(kmax + 1):
        acc += probs[k]
        if acc * n >= min_expected:
            edges.append(k)
            acc = 0.0
    if not edges or len(edges) < 2:
        raise InsufficientDataError(f"{name}: too few samples to form two bins")
    if acc > 0:  # leftover tail probability folds into the final bin
        edges[-1] = kmax

    expected = []
    observed = []
    lo = 0
    for j, hi in enumerate(edges):
        last = j == len(edges) - 1
        if last:
            p = 1.0 - sps.poisson.cdf(lo - 1, mean) if lo > 0 else 1.0
            obs = int(np.sum(arr >= lo))
        else:
            p = sps.poisson.cdf(hi, mean) - sps.poisson.cdf(lo - 1, mean)
            obs = int(np.sum((arr >= lo) & (arr <= hi)))
        expected.append(p * n)
        observed.append(obs)
        lo = hi + 1
    expected = np.asarray(expected)
    expected *= n / expected.sum()
    stat, p_value = sps.chisquare(observed, expected)
    return _report(
        name, stat, p_value, n, alpha, expect_reject=False,
        params={"bins": len(edges), "mean": mean},
    )


def chi2_gof(
    observed,
    probs,
    alpha: float = 0.01,
    min_expected: float = 5.0,
    name: str = "chi2_gof",
) -> TestReport:
    """Chi-square goodness of fit of symbol counts against given probabilities."""
    obs = np.asarray(observed, dtype=float)
    p = np.asarray(probs, dtype=float)
    if obs.ndim != 1 or obs.shape != p.shape or obs.size < 2:
        raise InsufficientDataError(f"{name}: need matching 1-d counts and probabilities")
    n = obs.sum()
    expected = p * n
    if n == 0 or expected.min() < min_expected:
        raise InsufficientDataError(f"{name}: expected cell count below {min_expected}")
    expected *= n / expected.sum()
    stat, p_value = sps.chisquare(obs, expected)
    return _report(name, stat, p_value, int(n), alpha, expect_reject=False,
                   params={"cells": int(obs.size)})


def chi2_independence(
    table,
    alpha: float = 0.01,
    expect_reject: bool = False,
    name: str = "chi2_independence",
) -> TestReport:
    """Pearson chi-square on a contingency table, no continuity correction."""
    arr = np.asarray(table, dtype=float)
    if arr.ndim != 2:
        raise InsufficientDataError(f"{name}: need a 2-d table")
    arr = arr[arr.sum(axis=1) > 0][:, arr.sum(axis=0) > 0]
    if arr.shape[0] < 2 or arr.shape[1] < 2:
        raise InsufficientDataError(f"{name}: table degenerates below 2x2")
    stat, p_value, dof, _ = sps.chi2_contingency(arr, correction=False)
    return _report(
        name, stat, p_value, int(arr.sum()), alpha, expect_reject,
        params={"shape": list(arr.shape), "dof": int(dof)},
    )


def mc_mean(
    values,
    target: float,
    tol_sigmas: float = 3.0,
    name: str = "mc_mean",
) -> TestReport:
    """Monte-Carlo mean against a target, pass iff |z| <= tol_sigmas."""
    arr = np.asarray(values, dtype=float)
    if arr.size < 2:
        raise InsufficientDataError(f"{name}: need at least 2 samples")
    mean = math.fsum(arr) / arr.size
    sd = float(np.std(arr, ddof=1))
    se = sd / math.sqrt(arr.size)
    if se == 0:
        z = 0.0 if mean == target else math.inf
    else:
        z = (mean - target) / se
    p_value = float(2 * sps.norm.sf(abs(z)))
    alpha = float(2 * sps.norm.sf(tol_sigmas))
    rep = _report(
        name, z, p_value, arr.size, alpha, expect_reject=False,
        params={"target": target, "mean": mean, "se": se, "tol_sigmas": tol_sigmas},
    )
    return rep


def binom_interval(n: int, p: float, conf: float = 0.99) -> tuple[int, int]:
    """Central exact-binomial interval, used to calibrate rejection rates."""
    lo = int(sps.binom.ppf((1 - conf) / 2, n, p))
    hi = int(sps.binom.ppf(1 - (1 - conf) / 2, n, p))
    return lo, hi
