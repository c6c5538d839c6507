"""Conjugacy construction for perturbed actions.

Given an expanding action with datum (cover, delta, lip, lam) and a
fellow-travel constant N, perturbations within

    eps = (lam - 1)/2 * min(delta / ((N + 1) * lip**N), 1)

in the Lipschitz distance on K (the closed delta-neighborhood of the limit
set) admit a conjugating map phi: each phi(x) is the limit of the perturbed
nested images z_i = rho'(c_i)(p_{i+1}) along a special code for x.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

from . import groups
from .coding import CodingError, _greedy_entry, expansivity_witness
from .expansion import (
    ActionView,
    CoverEntry,
    ExpansionDatum,
    UncoverableError,
    neighborhood_samples,
)
from .geometry import ClippedRegion, Point, lebesgue_number
from .zoo import ActionSystem, PerturbedMaps


class AdmissibilityError(ValueError):
    """Perturbation too large for the stability construction."""


class ConvergenceError(RuntimeError):
    """Nested intersection did not reach tolerance within the depth budget."""

    def __init__(self, x, achieved, max_depth):
        self.x, self.achieved, self.max_depth = x, achieved, max_depth
        super().__init__(
            f"phi({x}) not resolved: diameter bound {achieved:.3e} after {max_depth} steps"
        )


def perturbation_epsilon(datum: ExpansionDatum, n_const: int) -> float:
    """Admissible perturbation radius for a fellow-travel constant n_const."""
    if n_const < 1:
        raise ValueError("the fellow-travel constant must be >= 1")
    lam, lip, delta = datum.lam, datum.lip, datum.delta
    return (lam - 1.0) / 2.0 * min(delta / ((n_const + 1) * lip**n_const), 1.0)


def lipschitz_distance(
    space,
    map_a: Callable[[Point], Point],
    map_b: Callable[[Point], Point],
    net: Sequence[Point],
    max_pairs: int = 10000,
) -> float:
    """Sampled Lipschitz distance: sup displacement plus sup difference of
    stretch quotients over distinct net pairs."""
    net = list(net)
    if len(net) < 2:
        raise ValueError("lipschitz_distance needs at least two net points")
    imgs_a = [map_a(x) for x in net]
    imgs_b = [map_b(x) for x in net]
    sup_disp = max(
        space.raw_distance(p.value, q.value) for p, q in zip(imgs_a, imgs_b)
    )
    n = len(net)
    total = n * (n - 1) // 2
    stride = max(1, total // max_pairs)
    sup_quot, k = 0.0, 0
    for i in range(n):
        for j in range(i + 1, n):
            if k % stride:
                k += 1
                continue
            k += 1
            d0 = space.raw_distance(net[i].value, net[j].value)
            if d0 < 1e-13:
                continue
            qa = space.raw_distance(imgs_a[i].value, imgs_a[j].value) / d0
            qb = space.raw_distance(imgs_b[i].value, imgs_b[j].value) / d0
            sup_quot = max(sup_quot, abs(qa - qb))
    return sup_disp + sup_quot


@dataclass
class PerturbedSystem:
    """A perturbed action together with its admissibility bookkeeping."""

    base: ActionSystem
    datum: ExpansionDatum
    maps: PerturbedMaps
    n_const: int
    k_net: tuple
    realized: Mapping[str, float]
    epsilon: float

    def view(self) -> ActionView:
        return ActionView(self.base, self.maps)

    def base_view(self) -> ActionView:
        return ActionView(self.base)

    def violations(self) -> list:
        return [name for name, d in self.realized.items() if d >= self.epsilon]

    def is_admissible(self) -> bool:
        return not self.violations()

    def require_admissible(self) -> None:
        bad = self.violations()
        if bad:
            worst = max(self.realized[name] for name in bad)
            raise AdmissibilityError(
                f"perturbation of {', '.join(bad)} reaches Lipschitz distance "
                f"{worst:.3e} >= eps = {self.epsilon:.3e}"
            )


def make_perturbed(
    system: ActionSystem,
    datum: ExpansionDatum,
    maps: PerturbedMaps,
    n_const: int,
    k_net: Sequence[Point] | None = None,
) -> PerturbedSystem:
    """Wrap perturbed maps with realized Lipschitz distances over the closed
    delta-neighborhood net K."""
    if k_net is None:
        k_net = neighborhood_samples(system.space, datum.net, datum.delta)
    k_net = tuple(k_net)
    eps = perturbation_epsilon(datum, n_const)
    realized = {}
    for letter in maps.letter_maps:
        name = str(system.alphabet.generator(letter[0], letter[1]))
        base_fn = lambda x, lt=letter: system.apply_letter(lt, x)
        pert_fn = lambda x, lt=letter: maps.apply_letter(system, lt, x)
        realized[name] = lipschitz_distance(system.space, base_fn, pert_fn, k_net)
    return PerturbedSystem(system, datum, maps, n_const, k_net, realized, eps)


# ---------------------------------------------------------------------------
# the conjugacy


@dataclass(frozen=True)
class PointDiagnostics:
    iterations: int
    stop_bound: float  # contraction bound at the stopping index
    last_step: float  # distance between the final two iterates


def conjugacy_point(
    ps: PerturbedSystem,
    x: Point,
    tol: float = 1e-9,
    max_depth: int = 200,
) -> tuple:
    """phi(x): limit of z_i = rho'(c_i)(p_{i+1}) along a special delta-code.

    Stops once the measured diameter of the pushed ball rho'(c_i)[B_delta]
    drops below tol (the conservative bound 2*delta*(lip+eps)/(lam-eps)**i is
    a secondary stop).  Measuring the actual image matters twice over: the
    true contraction is usually much faster than lam-eps, and the backward
    orbit loses float accuracy at exactly the measured rate, so stopping on
    the measurement always resolves phi before the orbit degrades.
    """
    import numpy as np

    from . import zoo as _zoo
    from .coding import _set_diameter, greedy_step

    ps.require_admissible()
    datum, space = ps.datum, ps.base.space
    base_view, pert_view = ps.base_view(), ps.view()
    eps = ps.epsilon
    lam_p, lip_p = datum.lam - eps, datum.lip + eps
    delta = datum.delta

    all_moebius = all(
        isinstance(m, _zoo.MoebiusMap) for m in ps.maps.letter_maps.values()
    )
    mat = np.eye(2) if all_moebius else None
    point = x
    symbols = []
    z_prev = None
    for i in range(max_depth):
        e, point = greedy_step(datum, base_view, point, delta)

        def push(q: Point):
            if mat is not None:
                return space.point(_zoo.MoebiusMap.apply_matrix_angle(mat, q.value))
            out = q
            for sym in reversed(symbols):
                out = pert_view.apply_word(sym, out)
            return out

        if mat is not None:
            for letter in groups.letters_of(e.symbol):
                mat = mat @ ps.maps.letter_maps[letter].np_matrix
            scale = float(np.max(np.abs(mat)))
            if scale > 1e100:
                mat = mat / scale
        else:
            symbols.append(e.symbol)
        z = push(point)
        from .coding import ball_net

        probes = [push(q) for q in ball_net(space, point, delta, 6)]
        diam = _set_diameter(space, probes)
        bound = 2.0 * delta * lip_p / lam_p**i
        step = space.raw_distance(z.value, z_prev.value) if z_prev is not None else math.inf
        if diam < tol or bound < tol:
            return z, PointDiagnostics(i + 1, min(diam, bound), step)
        z_prev = z
    raise ConvergenceError(x, 2.0 * delta * lip_p / lam_p**max_depth, max_depth)


@dataclass(frozen=True)
class TableEntry:
    x: Point
    phi: Point
    iterations: int
    stop_diameter: float


@dataclass
class ConjugacyTable:
    """phi tabulated over the limit-set net, with diagnostics and residuals."""

    entries: list
    extra: dict  # phi at one-step generator images, keyed by the image point
    displacement: float
    residuals: dict = field(default_factory=dict)  # generator -> equivariance residual
    failures: list = field(default_factory=list)

    def phi_of(self, x: Point) -> Optional[Point]:
        for e in self.entries:
            if e.x == x:
                return e.phi
        return self.extra.get(x)

    def image_net(self) -> list:
        return [e.phi for e in self.entries]

    def rows(self) -> list:
        return [
            {
                "x": repr(e.x.value),
                "phi": repr(e.phi.value),
                "iterations": e.iterations,
                "stop_diameter": e.stop_diameter,
            }
            for e in self.entries
        ]


def conjugacy_map(
    ps: PerturbedSystem,
    net: Sequence[Point] | None = None,
    tol: float = 1e-9,
    max_depth: int = 200,
    with_images: bool = True,
) -> ConjugacyTable:
    """Tabulate phi over the net and (optionally) over one-step generator
    images so equivariance can be checked without interpolation."""
    ps.require_admissible()
    base = ps.base
    net = list(ps.datum.net if net is None else net)
    entries, failures = [], []
    for x in net:
        try:
            phi, diag = conjugacy_point(ps, x, tol, max_depth)
            entries.append(TableEntry(x, phi, diag.iterations, diag.stop_bound))
        except (ConvergenceError, CodingError) as err:  # per-point granularity
            failures.append((x, str(err)))
    extra = {}
    if with_images:
        for s in base.generators():
            for x in net:
                y = base.apply(s, x)
                if y in extra or any(e.x == y for e in entries):
                    continue
                try:
                    phi, _ = conjugacy_point(ps, y, tol, max_depth)
                    extra[y] = phi
                except (ConvergenceError, CodingError) as err:
                    failures.append((y, str(err)))
    space = base.space
    displacement = max(
        (space.raw_distance(e.x.value, e.phi.value) for e in entries), default=0.0
    )
    table = ConjugacyTable(entries, extra, displacement, failures=failures)
    if not failures:
        check_equivariance(table, ps)
    return table


def check_equivariance(table: ConjugacyTable, ps: PerturbedSystem) -> float:
    """Max over generators s and net points x of
    d(rho'(s)(phi(x)), phi(rho(s)(x)))."""
    base, space = ps.base, ps.base.space
    pert_view = ps.view()
    worst_overall = 0.0
    for s in base.generators():
        worst = 0.0
        for e in table.entries:
            lhs = pert_view.apply_word(s, e.phi)
            rhs = table.phi_of(base.apply(s, e.x))
            if rhs is None:
                continue
            worst = max(worst, space.raw_distance(lhs.value, rhs.value))
        table.residuals[str(s)] = worst
        worst_overall = max(worst_overall, worst)
    return worst_overall


@dataclass(frozen=True)
class InjectivityReport:
    ok: bool
    min_image_distance: float
    worst_pair: Optional[tuple]
    expansivity_note: str = ""


def check_injectivity(table: ConjugacyTable, ps: PerturbedSystem) -> InjectivityReport:
    """Distinct net points must have distinct images; a collapsed pair is
    replayed through the expansivity witness to exhibit the contradiction."""
    space = ps.base.space
    entries = table.entries
    worst, pair = math.inf, None
    for i in range(len(entries)):
        for j in range(i + 1, len(entries)):
            d = space.raw_distance(entries[i].phi.value, entries[j].phi.value)
            if d < worst:
                worst, pair = d, (entries[i], entries[j])
    if pair is None:
        return InjectivityReport(True, math.inf, None)
    ok = worst > 0.0
    note = ""
    if not ok:
        w = expansivity_witness(ps.datum, ps.base, pair[0].x, pair[1].x)
        if hasattr(w, "separation"):
            note = (
                f"collapsed pair is {w.separation:.3e}-separated by a word of "
                f"length {w.n}, contradicting displacement < delta/2"
            )
    return InjectivityReport(ok, worst, (pair[0].x, pair[1].x), note)


@dataclass(frozen=True)
class DisplacementReport:
    max_displacement: float
    below_eps: bool
    below_delta_fifth: bool


def check_displacement(table: ConjugacyTable, ps: PerturbedSystem) -> DisplacementReport:
    d = table.displacement
    return DisplacementReport(d, d < ps.epsilon, d < ps.datum.delta / 5.0)


def check_code_independence(ps: PerturbedSystem, x: Point, tol: float = 1e-9) -> float:
    """phi(x) recomputed from an alternative (non-greedy) initial code; the
    two limits must agree within 2*tol."""
    from .coding import _step, greedy_step

    phi_a, _ = conjugacy_point(ps, x, tol)
    datum = ps.datum
    base_view, pert_view = ps.base_view(), ps.view()
    space = ps.base.space
    first = _greedy_entry(datum, x, datum.delta)
    others = [e for e in datum.entries if e.index != first.index]
    if not others:
        return 0.0
    alt0 = others[0]
    symbols = [alt0.symbol]
    point = _step(base_view, alt0, x)
    eps = ps.epsilon
    lam_p, lip_p = datum.lam - eps, datum.lip + eps
    z = None
    for i in range(200):
        z = point
        for sym in reversed(symbols):
            z = pert_view.apply_word(sym, z)
        if 2.0 * datum.delta * lip_p / lam_p**i < tol:
            break
        e, point = greedy_step(datum, base_view, point, datum.delta)
        symbols.append(e.symbol)
    return space.raw_distance(z.value, phi_a.value)


def check_continuity_modulus(
    table: ConjugacyTable,
    ps: PerturbedSystem,
    ks: Sequence[int] = (5, 10),
) -> list:
    """Net-pair modulus witnesses: for each k, pairs closer than
    (delta0 - delta)/lip**(k+1) must have phi-images within
    2*delta0*(lip+eps)/(lam-eps)**k (delta0 is the pre-safety Lebesgue bound)."""
    datum, space = ps.datum, ps.base.space
    delta0 = datum.delta / 0.9
    eps = ps.epsilon
    rows = []
    for k in ks:
        eps_k = 2.0 * delta0 * (datum.lip + eps) / (datum.lam - eps) ** k
        delta_k = (delta0 - datum.delta) / datum.lip ** (k + 1)
        worst, pairs = 0.0, 0
        for i in range(len(table.entries)):
            for j in range(i + 1, len(table.entries)):
                a, b = table.entries[i], table.entries[j]
                if space.raw_distance(a.x.value, b.x.value) < delta_k:
                    pairs += 1
                    worst = max(worst, space.raw_distance(a.phi.value, b.phi.value))
        rows.append(
            {"k": k, "pairs": pairs, "modulus": eps_k, "worst": worst, "ok": worst < eps_k}
        )
    return rows


# ---------------------------------------------------------------------------
# the perturbed expansion datum


def perturbed_datum(
    datum: ExpansionDatum,
    ps: PerturbedSystem,
    r: float,
    table: ConjugacyTable | None = None,
) -> ExpansionDatum:
    """Expansion datum for the perturbed action: regions shrunk by r and
    clipped to the (delta - r)-neighborhood of the limit set, with
    lam' = lam - eps and lip' = lip + eps.

    The new delta is kept below both 4*delta/5 and the Lebesgue bound of the
    shrunk cover over the perturbed net (the phi-image of the base net).
    """
    ps.require_admissible()
    if not 0.0 < r < 0.8 * datum.delta:
        raise ValueError(f"r must lie in (0, 4*delta/5 = {0.8 * datum.delta:.6g})")
    space = ps.base.space
    new_entries = []
    for e in datum.entries:
        if e.region.is_empty():
            new_entries.append(e)
            continue
        clipped = ClippedRegion(
            label=e.region.label,
            space=space,
            inner=e.region.shrunk(r),
            net=tuple(datum.net),
            radius=datum.delta - r,
        )
        new_entries.append(CoverEntry(e.index, e.symbol, clipped))
    net_p = tuple(table.image_net()) if table is not None else datum.net
    regions = [e.region for e in new_entries]
    leb, witness = lebesgue_number(regions, net_p)
    if leb <= 0:
        raise UncoverableError(witness, leb, datum.lam)
    # the realized Lipschitz distance is a valid (and sharper) stand-in for
    # the admissibility threshold; an unperturbed action keeps its constants
    eps = max(ps.realized.values())
    delta_new = 0.9 * min(leb, 0.8 * datum.delta / 0.9)
    return ExpansionDatum(
        tuple(new_entries),
        delta_new,
        datum.lam - eps,
        datum.lip + eps,
        net_p,
    )
