"""Finite point configurations driven by the tower map.

A configuration is a finite, strictly increasing list of atoms with
permanent integer ids, standing in for one sample of a unit-intensity
point process restricted to a window inside the covered set.  Pushing a
configuration forward applies the tower map to every atom; since the map
is only piecewise order-preserving the atoms get re-ranked, and the
induced rank permutation is the combinatorial shadow of the dynamics.

Everything here is exact except sampling itself: exponential gaps are
drawn in double precision and snapped to rationals with denominator 2**53,
after which the whole pipeline is integer arithmetic on Fractions, so
rank comparisons and permutation identities hold exactly, never up to
floating error.

Whole-configuration censoring: the tower map is partial (depth-bounded),
so any atom running off the top censors the entire configuration for the
step; a CensorReport says how many atoms survived and why the rest did
not.  Budget exhaustion in search loops is reported the same way.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterable, NamedTuple, Sequence

from . import chacon
from .chacon import ChaconSystem, Interval
from .cocycle import CocycleSpec, GroupElem, eval_phi, phi_iter
from .errors import CensoredError, DepthExceededError, InsufficientDataError
from .ratio import format_ratio, parse_ratio
from .stats import RngSpec, make_rng

SNAP_DENOM = 2**53


class Atom(NamedTuple):
    id: int
    pos: Fraction


@dataclass(frozen=True)
class PointConfig:
    """Strictly increasing atoms with unique permanent ids inside a window."""

    window: Interval
    atoms: tuple[Atom, ...]
    provenance: tuple | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        ids = set()
        prev = None
        for a in self.atoms:
            if a.id in ids:
                raise ValueError(f"duplicate atom id {a.id}")
            ids.add(a.id)
            if not (self.window.lo <= a.pos < self.window.hi):
                raise ValueError(f"atom {a.id} at {a.pos} is outside the window")
            if prev is not None and a.pos <= prev:
                raise ValueError("atom positions must be strictly increasing")
            prev = a.pos

    @property
    def count(self) -> int:
        return len(self.atoms)

    def positions(self) -> tuple[Fraction, ...]:
        return tuple(a.pos for a in self.atoms)

    def t(self, n: int) -> Fraction:
        """Position of the rank-n atom, 1-based."""
        if not 1 <= n <= self.count:
            raise IndexError(f"rank {n} not in 1..{self.count}")
        return self.atoms[n - 1].pos

    def same_positions(self, other: "PointConfig") -> bool:
        return self.positions() == other.positions()


@dataclass(frozen=True)
class RankPermutation:
    """Bijection of 1..size; images[i-1] is the image of rank i."""

    images: tuple[int, ...]

    def __post_init__(self):
        if sorted(self.images) != list(range(1, len(self.images) + 1)):
            raise ValueError(f"not a permutation of 1..{len(self.images)}: {self.images}")

    @classmethod
    def identity(cls, size: int) -> "RankPermutation":
        return cls(tuple(range(1, size + 1)))

    @property
    def size(self) -> int:
        return len(self.images)

    def __call__(self, n: int) -> int:
        return self.images[n - 1]

    def inverse(self) -> "RankPermutation":
        inv = [0] * self.size
        for i, img in enumerate(self.images, start=1):
            inv[img - 1] = i
        return RankPermutation(tuple(inv))

    def after(self, other: "RankPermutation") -> "RankPermutation":
        """self composed after other: (self.after(other))(n) == self(other(n))."""
        if other.size != self.size:
            raise ValueError("size mismatch")
        return RankPermutation(tuple(self.images[other.images[i] - 1] for i in range(self.size)))

    def is_identity(self) -> bool:
        return all(img == i for i, img in enumerate(self.images, start=1))

    def fixes_prefix(self, k: int) -> bool:
        return all(self.images[i] == i + 1 for i in range(k))


@dataclass(frozen=True)
class CensorReport:
    survived: int
    censored: int
    reasons: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.survived < 0 or self.censored < 0:
            raise ValueError("counts must be nonnegative")

    @property
    def total(self) -> int:
        return self.survived + self.censored

    def to_jsonable(self) -> dict:
        return {"survived": self.survived, "censored": self.censored, "reasons": dict(self.reasons)}


@dataclass(frozen=True)
class MarkedConfig:
    """A configuration with one mark per rank (group elements or plain symbols)."""

    config: PointConfig
    marks: tuple

    def __post_init__(self):
        if len(self.marks) != self.config.count:
            raise ValueError("need exactly one mark per atom")


def sample_poisson(window: Interval, seed: int, stream: int = 0) -> PointConfig:
    """Unit-intensity sample on the window via cumulative exponential gaps.

    Gaps are snapped to multiples of 1/2**53 (and floored at one step so
    order stays strict); positions are exact sums of snapped gaps.
    """
    rng = make_rng(RngSpec(seed=seed, stream=stream))
    width = window.width
    cum = Fraction(0)
    atoms = []
    next_id = 1
    while True:
        for g in rng.exponential(1.0, size=max(16, int(float(width)) + 8)):
            num = max(1, round(g * SNAP_DENOM))
            cum += Fraction(num, SNAP_DENOM)
            if cum >= width:
                return PointConfig(window=window, atoms=tuple(atoms))
            atoms.append(Atom(next_id, window.lo + cum))
            next_id += 1


def push_forward(
    system: ChaconSystem, config: PointConfig
) -> tuple[PointConfig, RankPermutation, CensorReport]:
    """Apply the tower map to every atom and re-rank.

    The permutation sends old ranks to new ranks.  Any atom without an
    image censors the whole configuration: raises CensoredError carrying
    the tally.
    """
    mapped = []
    failed = 0
    for a in config.atoms:
        try:
            mapped.append(Atom(a.id, chacon.apply_T(system, a.pos)))
        except DepthExceededError:
            failed += 1
    if failed:
        raise CensoredError(
            f"{failed} atom(s) ran out of depth",
            report=CensorReport(
                survived=config.count - failed,
                censored=failed,
                reasons={"DepthExceeded": failed},
            ),
        )
    order = sorted(range(len(mapped)), key=lambda i: mapped[i].pos)
    for i, j in zip(order, order[1:]):
        if mapped[i].pos == mapped[j].pos:
            raise AssertionError("map collision: two atoms landed on one position")
    images = [0] * len(mapped)
    for new_rank, old_idx in enumerate(order, start=1):
        images[old_idx] = new_rank
    out = PointConfig(
        window=Interval(Fraction(0), system.high_water),
        atoms=tuple(mapped[i] for i in order),
    )
    report = CensorReport(survived=config.count, censored=0, reasons={})
    return out, RankPermutation(tuple(images)), report


def psi_iter(system: ChaconSystem, config: PointConfig, p: int) -> RankPermutation:
    """Rank permutation accumulated over p pushforward steps (identity at p == 0)."""
    if p < 0:
        raise ValueError("p must be >= 0")
    total = RankPermutation.identity(config.count)
    cur = config
    for _ in range(p):
        cur, step, _ = push_forward(system, cur)
        total = step.after(total)
    return total


def _advance_with_perm(system, config, total):
    cur, step, _ = push_forward(system, config)
    return cur, step.after(total)


def return_time_N_k(system: ChaconSystem, config: PointConfig, k: int, p_max: int) -> int:
    """Least p in 1..p_max whose accumulated permutation fixes ranks 1..k.

    k == 0 is vacuous, so the answer is 1.  Depth censoring propagates;
    budget exhaustion raises CensoredError with a PMaxExceeded tally.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    if k > config.count:
        raise InsufficientDataError(f"k={k} exceeds the atom count {config.count}")
    total = RankPermutation.identity(config.count)
    cur = config
    for p in range(1, p_max + 1):
        cur, total = _advance_with_perm(system, cur, total)
        if total.fixes_prefix(k):
            return p
    raise CensoredError(
        f"no prefix-fixing time within {p_max} steps",
        report=CensorReport(survived=config.count, censored=0, reasons={"PMaxExceeded": 1}),
    )


def distinguish_k(config: PointConfig, k: int) -> tuple[tuple[Fraction, ...], PointConfig]:
    """Split off the k lowest atoms as bare positions; keep the rest."""
    if not 0 <= k <= config.count:
        raise InsufficientDataError(f"k={k} not in 0..{config.count}")
    points = tuple(a.pos for a in config.atoms[:k])
    remainder = PointConfig(window=config.window, atoms=config.atoms[k:])
    return points, remainder


def recombine(points: Sequence[Fraction], remainder: PointConfig) -> PointConfig:
    """Inverse of distinguish_k on positions: re-adjoin the points as atoms.

    Ids are relabeled 1..n in rank order, so equality with an original
    configuration is equality of positions.
    """
    pts = [Fraction(p) for p in points]
    if any(b <= a for a, b in zip(pts, pts[1:])):
        raise ValueError("points must be strictly increasing")
    if pts and remainder.count and pts[-1] >= remainder.t(1):
        raise ValueError("points must sit strictly below the remainder")
    merged = pts + list(remainder.positions())
    return PointConfig(
        window=remainder.window,
        atoms=tuple(Atom(i + 1, p) for i, p in enumerate(merged)),
    )


def in_split_order(points: Sequence[Fraction], remainder: PointConfig) -> bool:
    """Are the points strictly increasing and strictly below the remainder?"""
    pts = list(points)
    if any(b <= a for a, b in zip(pts, pts[1:])):
        return False
    return not (pts and remainder.count and pts[-1] >= remainder.t(1))


def induced_return(
    system: ChaconSystem,
    points: Sequence[Fraction],
    remainder: PointConfig,
    p_max: int,
) -> tuple[int, tuple[Fraction, ...], PointConfig]:
    """First return of (map x ... x map, pushforward) to the split-order set.

    Advances the distinguished points and the remainder in lockstep and
    returns (steps, advanced points, advanced remainder) at the first
    p >= 1 where the split order x_1 < ... < x_k < min(remainder) holds
    again.  Censoring mirrors return_time_N_k.
    """
    pts = [Fraction(p) for p in points]
    cur = remainder
    for p in range(1, p_max + 1):
        nxt_pts = []
        failed = 0
        for x in pts:
            try:
                nxt_pts.append(chacon.apply_T(system, x))
            except DepthExceededError:
                failed += 1
        if failed:
            raise CensoredError(
                f"{failed} distinguished point(s) ran out of depth",
                report=CensorReport(
                    survived=len(pts) - failed + cur.count,
                    censored=failed,
                    reasons={"DepthExceeded": failed},
                ),
            )
        try:
            cur, _, _ = push_forward(system, cur)
        except CensoredError as exc:
            rep = exc.report
            raise CensoredError(
                str(exc),
                report=CensorReport(
                    survived=rep.survived + len(nxt_pts),
                    censored=rep.censored,
                    reasons=dict(rep.reasons),
                ),
            ) from None
        pts = nxt_pts
        if in_split_order(pts, cur):
            return p, tuple(pts), cur
    raise CensoredError(
        f"no return within {p_max} steps",
        report=CensorReport(
            survived=len(pts) + cur.count, censored=0, reasons={"PMaxExceeded": 1}
        ),
    )


def superpose(c1: PointConfig, c2: PointConfig) -> PointConfig:
    """Merge two configurations on one window; fresh ids, provenance kept.

    Exact rational positions make collisions a hard error rather than a
    silent tie-break; they have probability zero under sampling.
    """
    if c1.window != c2.window:
        raise ValueError("superposition needs a common window")
    tagged = [(a.pos, 1, a.id) for a in c1.atoms] + [(a.pos, 2, a.id) for a in c2.atoms]
    tagged.sort(key=lambda t: t[0])
    for (p1, _, _), (p2, _, _) in zip(tagged, tagged[1:]):
        if p1 == p2:
            raise AssertionError("superposition collision at identical positions")
    atoms = tuple(Atom(i + 1, pos) for i, (pos, _, _) in enumerate(tagged))
    provenance = tuple((src, old) for _, src, old in tagged)
    return PointConfig(window=c1.window, atoms=atoms, provenance=provenance)


def skew_apply_perm(perm: RankPermutation, marks: Sequence[Any]) -> tuple:
    """Permutation action on mark sequences: output rank n takes the mark
    of the rank that was sent to n."""
    if len(marks) != perm.size:
        raise ValueError("marks and permutation size differ")
    inv = perm.inverse()
    return tuple(marks[inv(n) - 1] for n in range(1, perm.size + 1))


def skew_apply_group(
    system: ChaconSystem, spec: CocycleSpec, marked: MarkedConfig
) -> tuple[MarkedConfig, RankPermutation, CensorReport]:
    """One step of the group-marked skew product.

    The base configuration moves by the pushforward; the mark arriving at
    new rank n is the old mark of the originating rank plus the level
    function at that atom's old position.
    """
    out, perm, report = push_forward(system, marked.config)
    inv = perm.inverse()
    new_marks = []
    for n in range(1, out.count + 1):
        m = inv(n)
        increment = eval_phi(spec, system, marked.config.t(m))
        new_marks.append(increment + marked.marks[m - 1])
    return MarkedConfig(config=out, marks=tuple(new_marks)), perm, report


def phi_k_vector(
    system: ChaconSystem,
    spec: CocycleSpec,
    config: PointConfig,
    k: int,
    p_max: int,
) -> tuple[GroupElem, ...]:
    """Cocycle sums at the first k atoms over the prefix-fixing return time."""
    n_steps = return_time_N_k(system, config, k, p_max)
    return tuple(phi_iter(spec, system, config.t(i), n_steps) for i in range(1, k + 1))


def config_to_json(config: PointConfig, marks: Sequence[Any] | None = None) -> dict:
    atoms = []
    for i, a in enumerate(config.atoms):
        entry = {"id": a.id, "pos": format_ratio(a.pos)}
        if marks is not None:
            m = marks[i]
            entry["mark"] = list(m.coords) if isinstance(m, GroupElem) else m
        atoms.append(entry)
    return {
        "window": [format_ratio(config.window.lo), format_ratio(config.window.hi)],
        "atoms": atoms,
    }


def config_from_json(payload: dict) -> PointConfig:
    window = Interval(parse_ratio(payload["window"][0]), parse_ratio(payload["window"][1]))
    atoms = tuple(Atom(int(a["id"]), parse_ratio(a["pos"])) for a in payload["atoms"])
    return PointConfig(window=window, atoms=atoms)
