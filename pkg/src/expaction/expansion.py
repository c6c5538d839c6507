"""Expansion data: finite covers with margins, Lebesgue bounds, Lipschitz and
expansion constants, and their verification.

A datum records, for every generator label s, a (possibly empty) region on
which the inverse rho(s^-1) expands distances by at least lam, together with
a Lebesgue bound delta for eta-balls and a Lipschitz constant lip valid on
the delta-neighborhood of the limit set.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import groups, zoo
from .geometry import (
    TAU,
    ArcRegion,
    BallRegion,
    Circle,
    ComponentRegion,
    CoveredCircle,
    CylinderRegion,
    DisjointUnion,
    EmptyRegion,
    FreeBoundary,
    Point,
    ProjectiveSpace,
    Region,
    lebesgue_number,
)
from .groups import Word
from .zoo import ActionSystem

GRID_SIZE = 20000
SAFETY = 0.9
LIP_SAFETY = 1.01


class UncoverableError(ValueError):
    """A net point admits no expanding generator at the requested rate."""

    def __init__(self, witness: Point, best_factor: float, lam_target: float):
        self.witness = witness
        self.best_factor = best_factor
        super().__init__(
            f"no cover member for {witness}: best expansion factor "
            f"{best_factor:.6g} < target {lam_target:.6g}"
        )


class RefinementError(ValueError):
    pass


@dataclass(frozen=True)
class CoverEntry:
    index: str
    symbol: Word  # label s_alpha; rho(symbol^-1) expands on the region
    region: Region


@dataclass(frozen=True)
class ExpansionDatum:
    entries: tuple
    delta: float
    lam: float  # expansion rate, > 1
    lip: float  # Lipschitz constant on the delta-neighborhood, >= lam
    net: tuple  # limit-set sample the datum was certified on
    refined_from: Optional["ExpansionDatum"] = None

    def __post_init__(self):
        if not self.lam > 1.0:
            raise ValueError("expansion rate must exceed 1")
        if self.lip < self.lam:
            raise ValueError("Lipschitz constant must dominate the expansion rate")
        if not self.delta > 0.0:
            raise ValueError("delta must be positive")

    def entry(self, index: str) -> CoverEntry:
        for e in self.entries:
            if e.index == index:
                return e
        raise KeyError(index)

    def nonempty_entries(self) -> list:
        return [e for e in self.entries if not e.region.is_empty()]

    def symbols(self) -> list:
        out = []
        for e in self.entries:
            if e.symbol not in out:
                out.append(e.symbol)
        return out

    def is_symmetric(self) -> bool:
        syms = self.symbols()
        return all(groups.inverse(s) in syms for s in syms)


def refine_datum(datum: ExpansionDatum, delta_new: float) -> ExpansionDatum:
    """Trivial refinement: same cover and constants, strictly smaller delta."""
    if not 0.0 < delta_new < datum.delta:
        raise RefinementError(
            f"refinement needs 0 < delta_new < {datum.delta}, got {delta_new}"
        )
    return replace(datum, delta=delta_new, refined_from=datum)


def refinement_chain(datum: ExpansionDatum) -> list:
    out = [datum]
    while out[-1].refined_from is not None:
        out.append(out[-1].refined_from)
    return out


# ---------------------------------------------------------------------------
# action views (base or perturbed maps behind one call surface)


class ActionView:
    """Uniform evaluation surface over base or perturbed generator maps."""

    def __init__(self, system: ActionSystem, perturbed: "zoo.PerturbedMaps | None" = None):
        self.system = system
        self.perturbed = perturbed
        self.space = system.space
        self.alphabet = system.alphabet

    def apply_letter(self, letter, x: Point) -> Point:
        if self.perturbed is None:
            return self.system.apply_letter(letter, x)
        return self.perturbed.apply_letter(self.system, letter, x)

    def apply_word(self, g: Word, x: Point) -> Point:
        if self.perturbed is None:
            return self.system.apply(g, x)
        letters = groups.letters_of(g)
        if len(letters) > 1 and all(
            isinstance(self.perturbed.letter_maps[l], zoo.MoebiusMap) for l in set(letters)
        ):
            import numpy as np

            mat = np.eye(2)
            for l in letters:
                mat = mat @ self.perturbed.letter_maps[l].np_matrix
                scale = np.max(np.abs(mat))
                if scale > 1e100:
                    mat = mat / scale
            return self.space.point(zoo.MoebiusMap.apply_matrix_angle(mat, x.value))
        for letter in reversed(letters):
            x = self.apply_letter(letter, x)
        return x

    def letters(self) -> list:
        out = []
        for i in range(self.alphabet.rank):
            if (
                self.alphabet.kind == groups.PRODUCT_SWAP
                and self.alphabet.has_swap
                and i == self.alphabet.rank - 1
            ):
                out.append((i, 1))
            else:
                out.extend([(i, 1), (i, -1)])
        return out


# ---------------------------------------------------------------------------
# neighborhood sampling


def neighborhood_samples(space, net: Sequence[Point], delta: float) -> list:
    """Deterministic sample of the closed delta-neighborhood of the net."""
    pts = list(net)
    if isinstance(space, (Circle, CoveredCircle)):
        for x in net:
            for f in (-1.0, -0.5, 0.5, 1.0):
                pts.append(space.point(x.value + f * delta))
    elif isinstance(space, ProjectiveSpace):
        for x in net:
            v = np.asarray(x.value)
            basis = []
            for e in np.eye(len(v)):
                u = e - (e @ v) * v
                for b in basis:
                    u = u - (u @ b) * b
                if np.linalg.norm(u) > 1e-9:
                    basis.append(u / np.linalg.norm(u))
            for w in basis:
                for f in (-1.0, -0.5, 0.5, 1.0):
                    r = f * delta
                    pts.append(space.point(tuple(math.cos(r) * v + math.sin(r) * w)))
    elif isinstance(space, FreeBoundary):
        pass  # the whole boundary is the limit set; the net already samples it
    elif isinstance(space, DisjointUnion):
        for idx, comp in enumerate(space.components):
            inner_net = [space.component_point(x) for x in net if x.value[0] == idx]
            pts.extend(
                space.embed(idx, p)
                for p in neighborhood_samples(comp, inner_net, delta)
            )
    return pts


# ---------------------------------------------------------------------------
# datum construction


def build_expansion_datum(
    system: ActionSystem,
    lam_target: float,
    net_depth: int | None = None,
    grid_size: int = GRID_SIZE,
) -> ExpansionDatum:
    """Cover construction at the requested expansion rate.

    Circle systems take connected sublevel components of the expansion-factor
    field on a uniform grid; free-group boundaries use the exact depth-1
    cylinders; projective systems grow metric balls around the fixed points by
    bisection; products lift the component data.
    """
    if not lam_target > 1.0:
        raise ValueError("lam_target must exceed 1")
    net = system.limit_net(net_depth)
    style = system.cover_style
    if style == "circle-grid":
        return _build_circle(system, lam_target, net, grid_size)
    if style == "cylinders":
        return _build_cylinders(system, lam_target, net)
    if style == "projective-balls":
        return _build_projective(system, lam_target, net)
    if style == "product":
        return _build_product(system, lam_target, net_depth)
    raise ValueError(f"unknown cover style {style!r}")


def _fail_uncoverable(system, net, lam_target):
    # witness = net point with the weakest best expansion factor
    witness, best_factor = None, math.inf
    for x in net:
        best = max(
            zoo.expansion_factor(system, system.alphabet.generator(i, s), x)
            for i in range(system.alphabet.rank)
            for s in (1, -1)
        )
        if best < best_factor:
            witness, best_factor = x, best
    raise UncoverableError(witness, best_factor, lam_target)


def _circular_runs(mask: np.ndarray) -> list:
    """Maximal runs of True in circular order, as (start, length) pairs."""
    n = len(mask)
    if mask.all():
        return [(0, n)]
    if not mask.any():
        return []
    # rotate so index 0 is False, then split linearly
    off = int(np.argmin(mask))
    rolled = np.roll(mask, -off)
    runs, start = [], None
    for i, m in enumerate(rolled):
        if m and start is None:
            start = i
        elif not m and start is not None:
            runs.append(((start + off) % n, i - start))
            start = None
    if start is not None:
        runs.append(((start + off) % n, n - start))
    return runs


def _build_circle(system, lam_target, net, grid_size):
    space = system.space
    step = TAU / grid_size
    thetas = np.arange(grid_size) * step
    entries = []
    pos = 0
    for i in range(system.alphabet.rank):
        for s in (1, -1):
            label = system.alphabet.generator(i, s)
            expanding = system.letter_maps[(i, -s)]  # rho(label^-1)
            derivs = expanding.deriv_angles(thetas)
            mask = derivs > lam_target
            made = 0
            for start, length in _circular_runs(mask):
                half = float((length - 1) * step / 2.0 - step)
                if half <= 0:
                    continue
                center = float((thetas[start] + (length - 1) * step / 2.0) % TAU)
                region = ArcRegion(
                    label=str(label), space=space, center=center, half_width=half
                )
                if not any(region.margin(x) > 0 for x in net):
                    continue
                entries.append(CoverEntry(f"{pos:02d}:{label}", label, region))
                pos += 1
                made += 1
            if made == 0:
                entries.append(
                    CoverEntry(
                        f"{pos:02d}:{label}",
                        label,
                        EmptyRegion(label=str(label), space=space),
                    )
                )
                pos += 1
    regions = [e.region for e in entries]
    # probe a deeper net than the working one: the working net under-samples
    # fractal limit sets whose extreme points pin the true Lebesgue number
    probe = system.limit_net(min(system.default_depth + 5, 10)) if len(net) > 2 else net
    leb, witness = lebesgue_number(regions, list(net) + list(probe))
    if leb <= 0:
        _fail_uncoverable(system, net, lam_target)
    delta = float(SAFETY * leb)
    samples = neighborhood_samples(space, net, delta)
    lip_raw = max(
        system.letter_maps[letter].deriv_angle(x.value)
        for letter in system.letter_maps
        for x in samples
    )
    lip = float(LIP_SAFETY * max(lip_raw, lam_target))
    return ExpansionDatum(tuple(entries), delta, lam_target, lip, tuple(net))


def _build_cylinders(system, lam_target, net):
    space = system.space
    a = space.a
    if lam_target > a:
        _fail_uncoverable(system, net, lam_target)
    entries = []
    chars = space.letters + space.letters.upper()
    for pos, ch in enumerate(chars):
        idx = space.letters.index(ch.lower())
        sign = 1 if ch.islower() else -1
        label = system.alphabet.generator(idx, sign)
        region = CylinderRegion(label=str(label), space=space, prefix=ch)
        entries.append(CoverEntry(f"{pos:02d}:{label}", label, region))
    regions = [e.region for e in entries]
    leb, _ = lebesgue_number(regions, net)
    # distances are quantized by powers of a, so ball images match ball
    # targets only one scale down: the usable delta gains a factor 1/lam
    delta = SAFETY * leb / a
    return ExpansionDatum(tuple(entries), delta, a, a, tuple(net))


def _ring_points(space: ProjectiveSpace, center: Point, r: float, k: int = 24) -> list:
    v = np.asarray(center.value)
    basis = []
    for e in np.eye(len(v)):
        u = e - (e @ v) * v
        for b in basis:
            u = u - (u @ b) * b
        if np.linalg.norm(u) > 1e-9:
            basis.append(u / np.linalg.norm(u))
    pts = []
    for t in range(k):
        ang = TAU * t / k
        w = basis[0] * math.cos(ang) + (basis[1] * math.sin(ang) if len(basis) > 1 else 0)
        if len(basis) == 1 and t >= 2:
            break
        pts.append(space.point(tuple(math.cos(r) * v + math.sin(r) * w)))
    return pts


def _build_projective(system, lam_target, net):
    space = system.space
    n = system.alphabet.rank
    e = [space.point(tuple(1.0 if i == k else 0.0 for i in range(n + 1))) for k in range(n + 1)]
    min_sep = min(
        space.raw_distance(e[i].value, e[j].value)
        for i in range(n + 1)
        for j in range(i + 1, n + 1)
    )
    r_cap = 0.45 * min_sep

    def ball_for(expanding_letter, center: Point, label: Word, pos: int):
        m = system.letter_maps[expanding_letter]

        def ok(r: float) -> bool:
            pts = _ring_points(space, center, r) + _ring_points(space, center, r / 2) + [center]
            return all(m.min_stretch(p.value) > lam_target for p in pts)

        if not ok(r_cap * 1e-3):
            _fail_uncoverable(system, net, lam_target)
        lo, hi = r_cap * 1e-3, r_cap
        if ok(hi):
            lo = hi
        else:
            for _ in range(48):
                mid = (lo + hi) / 2.0
                if ok(mid):
                    lo = mid
                else:
                    hi = mid
        radius = 0.98 * lo
        region = BallRegion(label=str(label), space=space, center=center, radius=radius)
        return CoverEntry(f"{pos:02d}:{label}", label, region)

    entries = []
    pos = 0
    # e_0 is expanded by g_1^-1, so its ball is labeled g_1
    entries.append(ball_for((0, -1), e[0], system.alphabet.generator(0, 1), pos))
    pos += 1
    for j in range(n):
        entries.append(ball_for((j, 1), e[j + 1], system.alphabet.generator(j, -1), pos))
        pos += 1
    for j in range(1, n):
        label = system.alphabet.generator(j, 1)
        entries.append(
            CoverEntry(f"{pos:02d}:{label}", label, EmptyRegion(label=str(label), space=space))
        )
        pos += 1
    regions = [x.region for x in entries]
    leb, witness = lebesgue_number(regions, net)
    if leb <= 0:
        _fail_uncoverable(system, net, lam_target)
    delta = float(SAFETY * leb)
    samples = neighborhood_samples(space, net, delta)
    lip_raw = max(
        float(system.letter_maps[letter].max_stretch(x.value))
        for letter in system.letter_maps
        for x in samples
    )
    lip = float(LIP_SAFETY * max(lip_raw, lam_target))
    return ExpansionDatum(tuple(entries), delta, lam_target, lip, tuple(net))


def _build_product(system, lam_target, net_depth):
    first, second = system.meta["components"]
    d1 = build_expansion_datum(first, lam_target, net_depth)
    d2 = build_expansion_datum(second, lam_target, net_depth)
    space = system.space
    alphabet = system.alphabet
    id1, id2 = first.alphabet.identity(), second.alphabet.identity()
    entries = []
    pos = 0
    for comp, datum, ident_other in ((0, d1, id2), (1, d2, id1)):
        for entry in datum.entries:
            inner_label = entry.symbol
            if comp == 0:
                label = groups.Word(alphabet, (inner_label, id2, 0))
            else:
                label = groups.Word(alphabet, (id1, inner_label, 0))
            region = ComponentRegion(
                label=str(label), space=space, component=comp, inner=entry.region
            )
            entries.append(CoverEntry(f"{pos:02d}:{label}", label, region))
            pos += 1
    if system.meta.get("with_swap"):
        label = alphabet.generator(alphabet.rank - 1, 1)
        entries.append(
            CoverEntry(f"{pos:02d}:swap", label, EmptyRegion(label="swap", space=space))
        )
    net = system.limit_net(net_depth)
    delta = min(d1.delta, d2.delta, 0.9 * space.separation)
    return ExpansionDatum(
        tuple(entries),
        delta,
        min(d1.lam, d2.lam),
        max(d1.lip, d2.lip),
        tuple(net),
    )


# ---------------------------------------------------------------------------
# verification


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    worst_slack: float
    samples: int
    witness: str = ""
    note: str = ""


@dataclass(frozen=True)
class VerificationReport:
    checks: tuple

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def rows(self) -> list:
        return [
            {
                "check": c.name,
                "passed": c.passed,
                "worst_slack": c.worst_slack,
                "samples": c.samples,
                "witness": c.witness,
                "note": c.note,
            }
            for c in self.checks
        ]

    def summary(self) -> str:
        lines = []
        for c in self.checks:
            status = "pass" if c.passed else "FAIL"
            lines.append(
                f"[{status}] {c.name}: slack={c.worst_slack:.3e} over {c.samples} samples"
                + (f" witness={c.witness}" if c.witness else "")
                + (f" ({c.note})" if c.note else "")
            )
        return "\n".join(lines)


def _sample_pairs(points: list, count: int) -> list:
    pts = points
    n = len(pts)
    if n < 2:
        return []
    pairs = []
    stride = max(1, (n * (n - 1) // 2) // max(count, 1))
    k = 0
    for i in range(n):
        for j in range(i + 1, n):
            if k % stride == 0:
                pairs.append((pts[i], pts[j]))
            k += 1
    return pairs[: max(count, 1)]


def verify_expansion(
    view: ActionView | ActionSystem,
    datum: ExpansionDatum,
    pair_count: int = 400,
    tol: float = 1e-9,
) -> VerificationReport:
    """Sampled verification of the datum's defining inequalities.

    Failures are recorded as report rows, never raised.
    """
    if isinstance(view, ActionSystem):
        view = ActionView(view)
    space = view.space
    checks = []

    syms = datum.symbols()
    sym_ok = all(groups.inverse(s) in syms for s in syms)
    checks.append(
        CheckResult("generator-symmetry", sym_ok, 0.0, len(syms))
    )

    regions = [e.region for e in datum.entries]
    leb, witness = lebesgue_number(regions, datum.net)
    checks.append(
        CheckResult(
            "lebesgue",
            leb >= datum.delta - tol,
            leb - datum.delta,
            len(datum.net),
            witness=str(witness) if leb < datum.delta - tol else "",
        )
    )

    samples = neighborhood_samples(space, datum.net, datum.delta)
    for e in datum.nonempty_entries():
        samples.extend(e.region.sample(8))
    pairs = _sample_pairs(samples, pair_count)
    worst_lip, lip_witness = math.inf, ""
    for letter in view.letters():
        for x, y in pairs:
            d0 = space.raw_distance(x.value, y.value)
            if d0 < 1e-13:
                continue
            fx, fy = view.apply_letter(letter, x), view.apply_letter(letter, y)
            slack = datum.lip * d0 - space.raw_distance(fx.value, fy.value)
            if slack < worst_lip:
                worst_lip, lip_witness = slack, f"letter={letter} x={x.value} y={y.value}"
    checks.append(
        CheckResult(
            "lipschitz",
            worst_lip >= -tol,
            worst_lip,
            len(pairs) * len(view.letters()),
            witness=lip_witness if worst_lip < -tol else "",
        )
    )

    worst_exp, exp_witness, n_exp = math.inf, "", 0
    for e in datum.nonempty_entries():
        inv_word = groups.inverse(e.symbol)
        inside = [p for p in samples if e.region.margin(p) > 0]
        inside.extend(e.region.sample(12))
        for x, y in _sample_pairs(inside, pair_count // 2):
            d0 = space.raw_distance(x.value, y.value)
            if d0 < 1e-13:
                continue
            fx = view.apply_word(inv_word, x)
            fy = view.apply_word(inv_word, y)
            slack = space.raw_distance(fx.value, fy.value) - datum.lam * d0
            n_exp += 1
            if slack < worst_exp:
                worst_exp, exp_witness = slack, f"entry={e.index} x={x.value} y={y.value}"
    checks.append(
        CheckResult(
            "expansion",
            worst_exp >= -tol,
            worst_exp if n_exp else 0.0,
            n_exp,
            witness=exp_witness if worst_exp < -tol else "",
        )
    )

    if space.is_geodesic():
        checks.append(
            CheckResult(
                "ball-condition",
                True,
                0.0,
                0,
                note="geodesic space: distance expansion implies the ball condition",
            )
        )
    else:
        worst_ball, ball_witness, n_ball = math.inf, "", 0
        for eta in (datum.delta, datum.delta / 2, datum.delta / 4):
            for e in datum.nonempty_entries():
                inv_word = groups.inverse(e.symbol)
                centers = [p for p in datum.net if e.region.margin(p) >= eta][:10]
                for x in centers:
                    fx = view.apply_word(inv_word, x)
                    for z in samples:
                        dz = space.raw_distance(z.value, fx.value)
                        if dz >= datum.lam * eta:
                            continue
                        back = view.apply_word(e.symbol, z)
                        slack = eta - space.raw_distance(back.value, x.value)
                        n_ball += 1
                        if slack < worst_ball:
                            worst_ball, ball_witness = slack, f"entry={e.index} x={x.value} z={z.value}"
        checks.append(
            CheckResult(
                "ball-condition",
                worst_ball >= -tol if n_ball else True,
                worst_ball if n_ball else 0.0,
                n_ball,
                witness=ball_witness if n_ball and worst_ball < -tol else "",
            )
        )

    return VerificationReport(tuple(checks))
