"""Monte-Carlo verification suites over the sampler and the suspension.

Each suite is a pure function of its configuration: per-sample randomness
is keyed by (seed, sample index), samples fan out across workers as
contiguous ranges, and partial results merge by concatenation or
summation, so reports are identical for any worker count.

The ``poisson`` suite checks the sampler's distributional contract: the
first atom is Exp(1), early inter-atom gaps are Exp(1) (early ones, so
window truncation cannot length-bias them), superposed pairs have
Poisson(2·width) counts, and E[t_1^k/k!] = 1 for small k.

The ``suspension`` suite checks the induced-map conjugacy exactly, sample
by sample: splitting off the k lowest atoms, advancing by the induced
first-return map, and recombining must equal advancing the whole
configuration by its rank-prefix return time — and the two return times
must agree.  Accumulated group marks are checked against the k-vector of
cocycle sums, and mark uniformity is tested statistically.  Samples whose
orbits outrun the truncation depth or the step budget are censored and
reported, never silently dropped.
"""

from __future__ import annotations

import math
from fractions import Fraction

from .chacon import ChaconSystem, Interval, build_system
from .cocycle import CocycleSpec, single_spacer_indicator
from .errors import CensoredError, InsufficientDataError
from .parallel import fan_out
from .stats import (
    KeyedStream,
    chi2_gof,
    chi2_independence,
    chi2_poisson,
    ks_exponential,
    mc_mean,
    uniform_law,
)
from .suspension import (
    MarkedConfig,
    distinguish_k,
    induced_return,
    phi_k_vector,
    push_forward,
    recombine,
    return_time_N_k,
    sample_poisson,
    skew_apply_group,
)

GAPS_PER_CONFIG = 5


def collect_poisson(start: int, stop: int, seed: int, window_hi: int, sup_hi: int) -> dict:
    """Raw draws for the distributional suite, three streams per sample."""
    window = Interval(Fraction(0), Fraction(window_hi))
    sup_window = Interval(Fraction(0), Fraction(sup_hi))
    t1: list[float] = []
    gaps: list[float] = []
    sup_counts: list[int] = []
    skipped_empty = skipped_short = 0
    for i in range(start, stop):
        config = sample_poisson(window, seed, stream=3 * i)
        if config.count == 0:
            skipped_empty += 1
        else:
            t1.append(float(config.t(1)))
            if config.count > GAPS_PER_CONFIG:
                pos = config.positions()
                gaps.extend(
                    float(pos[j + 1] - pos[j]) for j in range(GAPS_PER_CONFIG)
                )
            else:
                skipped_short += 1
        a = sample_poisson(sup_window, seed, stream=3 * i + 1)
        b = sample_poisson(sup_window, seed, stream=3 * i + 2)
        sup_counts.append(a.count + b.count)
    return {
        "t1": t1,
        "gaps": gaps,
        "sup_counts": sup_counts,
        "skipped_empty": skipped_empty,
        "skipped_short": skipped_short,
    }


def run_poisson_suite(
    n_samples: int = 10_000,
    seed: int = 0,
    alpha: float = 0.01,
    window_hi: int = 30,
    sup_hi: int = 10,
    workers: int = 1,
) -> dict:
    parts = fan_out(collect_poisson, n_samples, workers, seed, window_hi, sup_hi)
    t1: list[float] = []
    gaps: list[float] = []
    sup_counts: list[int] = []
    skipped_empty = skipped_short = 0
    for p in parts:
        t1.extend(p["t1"])
        gaps.extend(p["gaps"])
        sup_counts.extend(p["sup_counts"])
        skipped_empty += p["skipped_empty"]
        skipped_short += p["skipped_short"]

    tests = {
        "t1_exponential": ks_exponential(t1, alpha=alpha, name="t1_exponential"),
        "gaps_exponential": ks_exponential(gaps, alpha=alpha, name="gaps_exponential"),
        "superposition_counts": chi2_poisson(
            sup_counts, mean=2.0 * sup_hi, alpha=alpha, name="superposition_counts"
        ),
    }
    for k in range(1, 6):
        fact = math.factorial(k)
        tests[f"moment_k{k}"] = mc_mean(
            [t**k / fact for t in t1], target=1.0, tol_sigmas=3.0, name=f"moment_k{k}"
        )
    holds = all(r.passed for r in tests.values())
    return {
        "suite": "poisson",
        "samples": n_samples,
        "seed": seed,
        "alpha": alpha,
        "window": [0, window_hi],
        "superposition_window": [0, sup_hi],
        "skipped": {"empty": skipped_empty, "too_short_for_gaps": skipped_short},
        "tests": {k: v.to_jsonable() for k, v in tests.items()},
        "holds": bool(holds),
    }


def _advance(system: ChaconSystem, config, steps: int):
    for _ in range(steps):
        config, _, _ = push_forward(system, config)
    return config


def collect_suspension(
    start: int,
    stop: int,
    seed: int,
    n_max: int,
    p_max: int,
    window_hi: Fraction,
    k_values: tuple[int, ...],
    spec: CocycleSpec,
    mark_steps: int,
) -> dict:
    """Exact conjugacy/return-time/cocycle checks plus mark draws per sample."""
    system = build_system(n_max)
    window = Interval(Fraction(0), Fraction(window_hi))
    group = spec.group
    stream = KeyedStream(seed)
    law = uniform_law(group.order)
    elements = list(group.elements())
    sym = {g: j for j, g in enumerate(elements)}

    per_k = {
        k: {
            "uncensored": 0,
            "conjugacy_failures": 0,
            "return_time_mismatches": 0,
            "phi_transport_failures": 0,
            "censored": {},
        }
        for k in k_values
    }
    mark_counts = [0] * group.order
    mark_pairs = [[0] * group.order for _ in range(group.order)]
    mark_censored = 0

    for i in range(start, stop):
        config = sample_poisson(window, seed, stream=i)
        for k in k_values:
            tally = per_k[k]
            if config.count < k:
                tally["censored"]["TooFewAtoms"] = (
                    tally["censored"].get("TooFewAtoms", 0) + 1
                )
                continue
            try:
                points, remainder = distinguish_k(config, k)
                m_steps, adv_pts, adv_rem = induced_return(
                    system, points, remainder, p_max
                )
                route_a = recombine(adv_pts, adv_rem)
                n_steps = return_time_N_k(system, config, k, p_max)
                route_b = _advance(system, config, n_steps)
                vec = phi_k_vector(system, spec, config, k, p_max)
                zero_marks = MarkedConfig(
                    config, (group.identity(),) * config.count
                )
                marked = zero_marks
                for _ in range(n_steps):
                    marked, _, _ = skew_apply_group(system, spec, marked)
            except CensoredError as exc:
                reason = max(exc.report.reasons, key=exc.report.reasons.get) if (
                    exc.report and exc.report.reasons
                ) else "DepthExceeded"
                tally["censored"][reason] = tally["censored"].get(reason, 0) + 1
                continue
            tally["uncensored"] += 1
            if m_steps != n_steps:
                tally["return_time_mismatches"] += 1
            if not route_a.same_positions(route_b):
                tally["conjugacy_failures"] += 1
            if tuple(marked.marks[:k]) != vec:
                tally["phi_transport_failures"] += 1

        # mark invariance: uniform starting marks stay uniform and pairwise
        # independent after a few skew steps
        if config.count >= 2:
            start_marks = tuple(
                elements[law.draw(stream, i, 9, atom.id)] for atom in config.atoms
            )
            marked = MarkedConfig(config, start_marks)
            try:
                for _ in range(mark_steps):
                    marked, _, _ = skew_apply_group(system, spec, marked)
            except CensoredError:
                mark_censored += 1
            else:
                for g in marked.marks:
                    mark_counts[sym[g]] += 1
                mark_pairs[sym[marked.marks[0]]][sym[marked.marks[1]]] += 1
    return {
        "per_k": per_k,
        "mark_counts": mark_counts,
        "mark_pairs": mark_pairs,
        "mark_censored": mark_censored,
    }


def run_suspension_suite(
    n_samples: int = 1200,
    seed: int = 0,
    n_max: int = 5,
    p_max: int = 10_000,
    window_hi: Fraction | int | str = 4,
    k_values: tuple[int, ...] = (1, 2),
    alpha: float = 0.01,
    spec: CocycleSpec | None = None,
    mark_steps: int = 3,
    min_uncensored: int = 500,
    workers: int = 1,
) -> dict:
    if spec is None:
        spec = single_spacer_indicator(1)
    window_hi = Fraction(window_hi)
    covered_hi = build_system(n_max).covered.hi
    if window_hi > covered_hi:
        raise ValueError(f"window must fit inside [0, {covered_hi})")
    parts = fan_out(
        collect_suspension,
        n_samples,
        workers,
        seed,
        n_max,
        p_max,
        window_hi,
        tuple(k_values),
        spec,
        mark_steps,
    )
    tot = parts[0]
    for p in parts[1:]:
        for k in k_values:
            dst, src = tot["per_k"][k], p["per_k"][k]
            for key in (
                "uncensored",
                "conjugacy_failures",
                "return_time_mismatches",
                "phi_transport_failures",
            ):
                dst[key] += src[key]
            for reason, cnt in src["censored"].items():
                dst["censored"][reason] = dst["censored"].get(reason, 0) + cnt
        tot["mark_counts"] = [a + b for a, b in zip(tot["mark_counts"], p["mark_counts"])]
        tot["mark_pairs"] = [
            [a + b for a, b in zip(ra, rb)]
            for ra, rb in zip(tot["mark_pairs"], p["mark_pairs"])
        ]
        tot["mark_censored"] += p["mark_censored"]

    group = spec.group
    per_k_report = {}
    exact_ok = True
    for k in k_values:
        t = tot["per_k"][k]
        censored = sum(t["censored"].values())
        fraction = censored / n_samples
        ok = (
            t["uncensored"] >= min_uncensored
            and fraction < 0.5
            and t["conjugacy_failures"] == 0
            and t["return_time_mismatches"] == 0
            and t["phi_transport_failures"] == 0
        )
        exact_ok = exact_ok and ok
        per_k_report[str(k)] = {
            **{key: t[key] for key in (
                "uncensored",
                "conjugacy_failures",
                "return_time_mismatches",
                "phi_transport_failures",
            )},
            "censored": dict(sorted(t["censored"].items())),
            "censored_fraction": fraction,
            "holds": ok,
        }

    probs = [1.0 / group.order] * group.order
    try:
        uniformity = chi2_gof(
            tot["mark_counts"], probs, alpha=alpha, name="mark_uniformity"
        ).to_jsonable()
    except InsufficientDataError as exc:
        uniformity = {"name": "mark_uniformity", "verdict": "insufficient data",
                      "reason": str(exc)}
    try:
        pair_indep = chi2_independence(
            tot["mark_pairs"], alpha=alpha, name="mark_pair_independence"
        ).to_jsonable()
    except InsufficientDataError as exc:
        pair_indep = {"name": "mark_pair_independence", "verdict": "insufficient data",
                      "reason": str(exc)}
    marks_ok = uniformity.get("passed", False) and pair_indep.get("passed", False)

    return {
        "suite": "suspension",
        "samples": n_samples,
        "seed": seed,
        "n_max": n_max,
        "p_max": p_max,
        "window": [0, str(Fraction(window_hi))],
        "k_values": list(k_values),
        "alpha": alpha,
        "per_k": per_k_report,
        "mark_tests": {
            "uniformity": uniformity,
            "pair_independence": pair_indep,
            "censored": tot["mark_censored"],
            "steps": mark_steps,
        },
        "holds": bool(exact_ok and marks_ok),
    }
