"""Finite abelian group data attached to the tower construction.

A level function assigns one group element to every level of every tower:
the base interval carries a chosen value, refined thirds inherit their
parent's value, and each spacer carries the value assigned at the stage
that created it (zero beyond a declared cutoff stage).  Summing the
function along orbits of the point map gives a cocycle; the two checkable
criteria below control how rich that cocycle is.

* generation: the values {level_sum(n), 2*level_sum(n) + middle(n)}
  taken over all stages must generate the whole group;
* unit span: for each stage n, the pair (1, 0) must lie in the integer
  span, inside Z x G, of the climb vectors
  (h_n, level_sum(n)), (h_n + 1, level_sum(n) + middle(n)) together with
  the tail family (3*h_M + 1, right_sum(M)),
  (3*h_M + 2, middle(M+1) + right_sum(M)) over stages M.

Span questions are decided exactly by integer row reduction over a lift
of Z x G to Z^(1+m), with Bezout bookkeeping so that membership comes
with a recombination certificate.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

from .chacon import ChaconSystem, tower_heights
from .errors import DepthExceededError, OutOfDomainError
from . import chacon


@dataclass(frozen=True)
class FinAbGroup:
    """Direct product of cyclic groups Z_{d_1} x ... x Z_{d_m}, written additively."""

    invariant_factors: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "invariant_factors", tuple(int(d) for d in self.invariant_factors))
        if any(d < 1 for d in self.invariant_factors):
            raise ValueError("cyclic factors must be >= 1")

    @property
    def rank(self) -> int:
        return len(self.invariant_factors)

    @property
    def order(self) -> int:
        out = 1
        for d in self.invariant_factors:
            out *= d
        return out

    @property
    def exponent(self) -> int:
        from math import lcm

        return lcm(1, *self.invariant_factors)

    def element(self, coords) -> "GroupElem":
        return GroupElem(tuple(coords), self)

    def identity(self) -> "GroupElem":
        return self.element((0,) * self.rank)

    def elements(self):
        for coords in itertools.product(*(range(d) for d in self.invariant_factors)):
            yield self.element(coords)

    def sample(self, rng) -> "GroupElem":
        return self.element(int(rng.integers(0, d)) for d in self.invariant_factors)


@dataclass(frozen=True)
class GroupElem:
    coords: tuple[int, ...]
    group: FinAbGroup

    def __post_init__(self):
        d = self.group.invariant_factors
        if len(self.coords) != len(d):
            raise ValueError("coordinate count does not match the group rank")
        object.__setattr__(self, "coords", tuple(int(c) % di for c, di in zip(self.coords, d)))

    def __add__(self, other: "GroupElem") -> "GroupElem":
        if other.group != self.group:
            raise ValueError("elements of different groups")
        return GroupElem(tuple(a + b for a, b in zip(self.coords, other.coords)), self.group)

    def __neg__(self) -> "GroupElem":
        return GroupElem(tuple(-c for c in self.coords), self.group)

    def __sub__(self, other: "GroupElem") -> "GroupElem":
        return self + (-other)

    def __rmul__(self, k: int) -> "GroupElem":
        return GroupElem(tuple(k * c for c in self.coords), self.group)

    def is_zero(self) -> bool:
        return all(c == 0 for c in self.coords)


@dataclass(frozen=True)
class StageValues:
    """Spacer values assigned at one stage: the middle spacer and the 3*h + 1 right spacers."""

    stage: int
    middle: GroupElem
    right: tuple[GroupElem, ...]


@dataclass(frozen=True)
class CocycleSpec:
    """Level-function data: base value, per-stage spacer values, zero beyond a cutoff.

    ``stages`` may be sparse; an undeclared stage at or below the cutoff
    carries all-zero spacers, and every stage past ``zero_beyond`` must.
    """

    group: FinAbGroup
    base_value: GroupElem
    stages: tuple[StageValues, ...]
    zero_beyond: int
    _by_stage: dict = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        if self.base_value.group != self.group:
            raise ValueError("base value belongs to a different group")
        if self.zero_beyond < 0:
            raise ValueError("zero_beyond must be >= 0")
        seen = {}
        max_stage = max((s.stage for s in self.stages), default=0)
        heights = tower_heights(max_stage) if max_stage >= 1 else []
        for s in self.stages:
            if s.stage < 1:
                raise ValueError("stage numbers start at 1")
            if s.stage in seen:
                raise ValueError(f"duplicate stage {s.stage}")
            if s.stage > self.zero_beyond:
                raise ValueError(f"stage {s.stage} declared past the zero cutoff {self.zero_beyond}")
            if s.middle.group != self.group or any(r.group != self.group for r in s.right):
                raise ValueError("stage values belong to a different group")
            expected = 3 * heights[s.stage - 1] + 1
            if len(s.right) != expected:
                raise ValueError(
                    f"stage {s.stage} needs {expected} right-spacer values, got {len(s.right)}"
                )
            seen[s.stage] = s
        object.__setattr__(self, "stages", tuple(sorted(self.stages, key=lambda s: s.stage)))
        object.__setattr__(self, "_by_stage", seen)

    def middle_value(self, n: int) -> GroupElem:
        s = self._by_stage.get(n)
        return s.middle if s is not None else self.group.identity()

    def right_value(self, n: int, j: int) -> GroupElem:
        s = self._by_stage.get(n)
        return s.right[j] if s is not None else self.group.identity()

    def right_sum(self, n: int) -> GroupElem:
        s = self._by_stage.get(n)
        if s is None:
            return self.group.identity()
        total = self.group.identity()
        for r in s.right:
            total = total + r
        return total


@dataclass(frozen=True)
class StageRow:
    """Derived per-stage data: height, level sum, and the two stage spacer terms."""

    n: int
    height: int
    level_sum: GroupElem
    middle: GroupElem
    right_sum: GroupElem


def derived_sequence(spec: CocycleSpec, count: int) -> list[StageRow]:
    """Rows for stages 1..count.

    level_sum(1) is the base value (a single level) and
    level_sum(n+1) = 3*level_sum(n) + middle(n) + right_sum(n): the next
    tower stacks three copies of every level plus that stage's spacers.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    heights = tower_heights(count)
    rows = []
    f = spec.base_value
    for n in range(1, count + 1):
        rows.append(
            StageRow(
                n=n,
                height=heights[n - 1],
                level_sum=f,
                middle=spec.middle_value(n),
                right_sum=spec.right_sum(n),
            )
        )
        f = 3 * f + spec.middle_value(n) + spec.right_sum(n)
    return rows


def eval_phi(spec: CocycleSpec, system: ChaconSystem, x: Fraction) -> GroupElem:
    """Level-function value at x: constant on the level that first contained x."""
    x = Fraction(x)
    if x < 0 or x >= system.high_water:
        raise OutOfDomainError(f"{x} is outside [0, {system.high_water})")
    if x < 1:
        return spec.base_value
    for st in system.spacer_stages:
        lo = st.middle.lo
        hi = st.right[-1].hi
        if lo <= x < hi:
            j = int((x - lo) / st.middle.width)
            if j == 0:
                return spec.middle_value(st.stage)
            return spec.right_value(st.stage, j - 1)
    raise OutOfDomainError(f"{x} is not covered by any stage of this system")


def phi_iter(spec: CocycleSpec, system: ChaconSystem, x: Fraction, p: int) -> GroupElem:
    """Sum of the level function along x, Tx, ..., T^(p-1)x (identity when p == 0)."""
    if p < 0:
        raise ValueError("p must be >= 0")
    total = spec.group.identity()
    cur = Fraction(x)
    for i in range(p):
        total = total + eval_phi(spec, system, cur)
        if i + 1 < p:
            try:
                cur = chacon.apply_T(system, cur)
            except DepthExceededError as exc:
                raise DepthExceededError(str(exc), steps_completed=i + 1) from None
    return total


def subgroup_closure(group: FinAbGroup, gens) -> set[GroupElem]:
    """All elements reachable from the generators (additive closure)."""
    closure = {group.identity()}
    frontier = [group.identity()]
    gens = [g for g in gens]
    while frontier:
        nxt = []
        for a in frontier:
            for g in gens:
                b = a + g
                if b not in closure:
                    closure.add(b)
                    nxt.append(b)
        frontier = nxt
    return closure


@dataclass(frozen=True)
class GenerationReport:
    holds: bool
    generators_found: tuple[tuple[int, tuple[int, ...]], ...]
    subgroup_order: int
    group_order: int
    n_scanned: int

    def to_jsonable(self) -> dict:
        return {
            "holds": self.holds,
            "generators_found": [[n, list(c)] for n, c in self.generators_found],
            "subgroup_order": self.subgroup_order,
            "group_order": self.group_order,
            "n_scanned": self.n_scanned,
        }


def check_condition_i(spec: CocycleSpec, n_scan: int | None = None) -> GenerationReport:
    """Do the stage values generate the whole group?

    Each stage n contributes level_sum(n) and 2*level_sum(n) + middle(n).
    Past the zero cutoff the level sums evolve by f -> 3f, which is
    eventually periodic in a finite group, so scanning stops once the
    tail revisits a level sum (or at an explicit n_scan).
    """
    group = spec.group
    cutoff = spec.zero_beyond
    gens: list[tuple[int, GroupElem]] = []
    f = spec.base_value
    n = 1
    tail_seen: set[GroupElem] = set()
    while True:
        for cand in (f, 2 * f + spec.middle_value(n)):
            if not cand.is_zero():
                gens.append((n, cand))
        if n_scan is not None:
            if n >= n_scan:
                break
        elif n > cutoff:
            if f in tail_seen:
                break
            tail_seen.add(f)
        f = 3 * f + spec.middle_value(n) + spec.right_sum(n)
        n += 1
    closure = subgroup_closure(group, [g for _, g in gens])
    dedup = []
    seen_vals = set()
    for stage_n, g in gens:
        if g not in seen_vals:
            seen_vals.add(g)
            dedup.append((stage_n, g.coords))
    return GenerationReport(
        holds=len(closure) == group.order,
        generators_found=tuple(dedup),
        subgroup_order=len(closure),
        group_order=group.order,
        n_scanned=n,
    )


def _xgcd(a: int, b: int) -> tuple[int, int, int]:
    """g, x, y with x*a + y*b == g == gcd(a, b), g >= 0."""
    old_r, r = a, b
    old_x, x = 1, 0
    old_y, y = 0, 1
    while r != 0:
        q = old_r // r
        old_r, r = r, old_r - q * r
        old_x, x = x, old_x - q * x
        old_y, y = y, old_y - q * y
    if old_r < 0:
        old_r, old_x, old_y = -old_r, -old_x, -old_y
    return old_r, old_x, old_y


class _ZSpan:
    """Integer row span with combination tracking.

    Rows are reduced to an echelon basis by unimodular two-row moves;
    each basis row drags along the integer combination of the original
    inputs that produced it, so membership tests can emit certificates.
    """

    def __init__(self, dim: int):
        self.dim = dim
        self.pivot_row: dict[int, tuple[list[int], list[int]]] = {}
        self.n_inputs = 0

    def add(self, vec) -> None:
        v = list(vec)
        if len(v) != self.dim:
            raise ValueError("wrong dimension")
        comb = [0] * self.n_inputs + [1]
        self.n_inputs += 1
        for row in self.pivot_row.values():
            row[1].append(0)
        for c in range(self.dim):
            if v[c] == 0:
                continue
            if c not in self.pivot_row:
                if v[c] < 0:
                    v = [-t for t in v]
                    comb = [-t for t in comb]
                self.pivot_row[c] = (v, comb)
                return
            r, rcomb = self.pivot_row[c]
            a, b = r[c], v[c]
            if b % a == 0:
                q = b // a
                v = [vi - q * ri for vi, ri in zip(v, r)]
                comb = [vi - q * ri for vi, ri in zip(comb, rcomb)]
            else:
                g, xx, yy = _xgcd(a, b)
                new_r = [xx * ri + yy * vi for ri, vi in zip(r, v)]
                new_rcomb = [xx * ri + yy * vi for ri, vi in zip(rcomb, comb)]
                v, comb = (
                    [(a // g) * vi - (b // g) * ri for vi, ri in zip(v, r)],
                    [(a // g) * vi - (b // g) * ri for vi, ri in zip(comb, rcomb)],
                )
                self.pivot_row[c] = (new_r, new_rcomb)

    def reduce(self, vec) -> tuple[bool, list[int] | None]:
        t = list(vec)
        comb = [0] * self.n_inputs
        for c in range(self.dim):
            if t[c] == 0:
                continue
            if c not in self.pivot_row:
                return False, None
            r, rcomb = self.pivot_row[c]
            if t[c] % r[c] != 0:
                return False, None
            q = t[c] // r[c]
            t = [ti - q * ri for ti, ri in zip(t, r)]
            comb = [ci + q * ri for ci, ri in zip(comb, rcomb)]
        return True, comb


@dataclass(frozen=True)
class MembershipResult:
    member: bool
    certificate: tuple[int, ...] | None

    def to_jsonable(self) -> dict:
        return {
            "member": self.member,
            "certificate": list(self.certificate) if self.certificate is not None else None,
        }


def combine_pairs(coeffs, pairs, group: FinAbGroup) -> tuple[int, GroupElem]:
    z = 0
    g = group.identity()
    for c, (zi, gi) in zip(coeffs, pairs):
        z += c * zi
        g = g + c * gi
    return z, g


def span_membership(
    target: tuple[int, GroupElem],
    generators: list[tuple[int, GroupElem]],
) -> MembershipResult:
    """Is the target in the subgroup of Z x G generated by the given pairs?

    G is lifted to Z^m modulo its factor relations, turning the question
    into exact integer lattice membership.  When the answer is yes, the
    certificate lists one integer coefficient per generator such that the
    combination reproduces the target exactly (the relation coefficients
    are internal and dropped; they only shift G coordinates by multiples
    of the factors).
    """
    z_t, g_t = target
    group = g_t.group
    m = group.rank
    span = _ZSpan(1 + m)
    for z, g in generators:
        if g.group != group:
            raise ValueError("generator from a different group")
        span.add([z, *g.coords])
    for i, d in enumerate(group.invariant_factors):
        rel = [0] * (1 + m)
        rel[1 + i] = d
        span.add(rel)
    ok, comb = span.reduce([z_t, *g_t.coords])
    if not ok:
        return MembershipResult(member=False, certificate=None)
    cert = tuple(comb[: len(generators)])
    z_chk, g_chk = combine_pairs(cert, generators, group)
    assert z_chk == z_t and g_chk == g_t, "internal error: certificate failed to recombine"
    return MembershipResult(member=True, certificate=cert)


@dataclass(frozen=True)
class UnitSpanReport:
    holds: bool
    n: int
    generators: tuple[tuple[int, tuple[int, ...]], ...]
    certificate: tuple[int, ...] | None
    m_max: int

    def to_jsonable(self) -> dict:
        return {
            "holds": self.holds,
            "n": self.n,
            "generators": [[z, list(c)] for z, c in self.generators],
            "certificate": list(self.certificate) if self.certificate is not None else None,
            "m_max": self.m_max,
        }


def condition_ii_generators(
    spec: CocycleSpec, n: int, m_max: int
) -> list[tuple[int, GroupElem]]:
    heights = tower_heights(max(n, m_max) + 1)
    rows = derived_sequence(spec, max(n, m_max) + 1)
    f = {row.n: row.level_sum for row in rows}
    gens = [
        (heights[n - 1], f[n]),
        (heights[n - 1] + 1, f[n] + spec.middle_value(n)),
    ]
    for M in range(1, m_max + 1):
        gens.append((3 * heights[M - 1] + 1, spec.right_sum(M)))
        gens.append((3 * heights[M - 1] + 2, spec.middle_value(M + 1) + spec.right_sum(M)))
    return gens


def check_condition_ii(spec: CocycleSpec, n: int, m_max: int | None = None) -> UnitSpanReport:
    """Is (1, 0) in the integer span of the stage-n climb vectors?

    Truncating the tail family at m_max >= zero_beyond + 1 loses nothing:
    for M past the cutoff both tail vectors have zero group part and
    consecutive integer parts, so their difference is already (1, 0).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if m_max is None:
        m_max = spec.zero_beyond + 1
    if m_max < spec.zero_beyond + 1:
        raise ValueError("m_max must reach past the zero cutoff to be conclusive")
    gens = condition_ii_generators(spec, n, m_max)
    target = (1, spec.group.identity())
    res = span_membership(target, gens)
    return UnitSpanReport(
        holds=res.member,
        n=n,
        generators=tuple((z, g.coords) for z, g in gens),
        certificate=res.certificate,
        m_max=m_max,
    )


def single_spacer_indicator(stage: int = 1) -> CocycleSpec:
    """Order-two level function that is 1 exactly on one construction spacer.

    The marked spacer is the middle spacer of the given stage; everything
    else, including all later stages, carries 0.
    """
    group = FinAbGroup((2,))
    heights = tower_heights(stage)
    zeros = tuple(group.identity() for _ in range(3 * heights[stage - 1] + 1))
    return CocycleSpec(
        group=group,
        base_value=group.identity(),
        stages=(StageValues(stage=stage, middle=group.element((1,)), right=zeros),),
        zero_beyond=stage,
    )


def zero_cocycle(group: FinAbGroup) -> CocycleSpec:
    return CocycleSpec(group=group, base_value=group.identity(), stages=(), zero_beyond=0)


def cocycle_spec_to_json(spec: CocycleSpec) -> dict:
    return {
        "group": list(spec.group.invariant_factors),
        "base_value": list(spec.base_value.coords),
        "stages": [
            {
                "n": s.stage,
                "middle": list(s.middle.coords),
                "right": [list(r.coords) for r in s.right],
            }
            for s in spec.stages
        ],
        "zero_beyond": spec.zero_beyond,
    }


def cocycle_spec_from_json(payload: dict) -> CocycleSpec:
    group = FinAbGroup(tuple(payload["group"]))
    stages = tuple(
        StageValues(
            stage=int(item["n"]),
            middle=group.element(item["middle"]),
            right=tuple(group.element(r) for r in item["right"]),
        )
        for item in payload["stages"]
    )
    return CocycleSpec(
        group=group,
        base_value=group.element(payload["base_value"]),
        stages=stages,
        zero_beyond=int(payload["zero_beyond"]),
    )
