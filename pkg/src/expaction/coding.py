"""Symbolic codes and rays, nested image neighborhoods, expansivity and
quasigeodesic witnesses, hyperbolicity certificates, and the coding map to
the boundary.

A code (alpha, p) tracks a limit point x = p_0 through the cover: at every
step the inverse of the chosen label is applied, p_{i+1} = rho(s^-1)(p_i),
and for i >= 1 the eta-ball at p_i must sit inside the chosen region.  The
initial label is free, so rays for the same point may disagree in their
first letter.  Rays are read as edge paths in the Cayley graph starting at
the identity; fellow-travel distances compare those vertex sets.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

from . import groups, zoo
from .expansion import ActionView, CoverEntry, ExpansionDatum
from .geometry import (
    Circle,
    CoveredCircle,
    DisjointUnion,
    FreeBoundary,
    Point,
    ProjectiveSpace,
    TAU,
)
from .groups import BoundaryWord, Word, boundary_prefix
from .zoo import ActionSystem


class CodingError(ValueError):
    """No admissible cover member at a code step (datum/net inconsistency)."""


@dataclass(frozen=True)
class Code:
    """Itinerary (alpha, p): entry indices and the tracked backward orbit."""

    alphas: tuple  # entry indices, length n+1
    points: tuple  # p_0..p_{n+1}, length n+2
    eta: float
    special: bool

    @property
    def depth(self) -> int:
        return len(self.alphas)


@dataclass(frozen=True)
class Ray:
    """Group-element sequence c_i = s_{alpha(0)} ... s_{alpha(i)}."""

    words: tuple

    def __len__(self) -> int:
        return len(self.words)


def _entry_map(datum: ExpansionDatum) -> dict:
    return {e.index: e for e in datum.entries}


def _admissible_entries(datum: ExpansionDatum, x: Point, eta: float) -> list:
    return [e for e in datum.entries if e.region.margin(x) >= eta]


def _greedy_entry(datum: ExpansionDatum, x: Point, eta: float, reverse_ties: bool = False):
    best, best_margin = None, -math.inf
    entries = datum.entries if not reverse_ties else tuple(reversed(datum.entries))
    for e in entries:
        m = e.region.margin(x)
        if m > best_margin + 1e-15:
            best, best_margin = e, m
    if best is None or best_margin < eta:
        raise CodingError(
            f"no cover member admits an eta-ball at {x} (best margin {best_margin:.3e}, eta {eta:.3e})"
        )
    return best


def _step(view: ActionView, entry: CoverEntry, x: Point) -> Point:
    inv = groups.inverse(entry.symbol)
    y = view.apply_word(inv, x)
    # stabilize backward orbits: expanding steps amplify float noise, so
    # points that reached a fixed angle of the applied map are pinned there
    if view.perturbed is None and isinstance(view.space, (Circle, CoveredCircle)):
        letters = groups.letters_of(inv)
        if len(letters) == 1:
            m = view.system.letter_maps[letters[0]]
            snapped = zoo.snap_angle(m, x.value, y.value)
            if snapped != y.value:
                return view.space.point(snapped)
    return y


def greedy_step(
    datum: ExpansionDatum, view: ActionView, x: Point, eta: float, reverse_ties: bool = False
) -> tuple:
    """One greedy code step: (chosen entry, next point)."""
    e = _greedy_entry(datum, x, eta, reverse_ties)
    return e, _step(view, e, x)


def make_code(
    datum: ExpansionDatum,
    system: ActionSystem | ActionView,
    eta: float,
    x: Point,
    depth: int,
    policy: str | tuple = "special",
    reverse_ties: bool = False,
) -> Code:
    """Greedy code for x: maximal margin at every step, smallest entry index
    on ties.  policy='special' also constrains the initial label;
    policy=('initial', index) starts from an arbitrary given entry."""
    view = system if isinstance(system, ActionView) else ActionView(system)
    if not 0.0 < eta <= datum.delta:
        raise CodingError(f"eta must lie in (0, delta={datum.delta}], got {eta}")
    entry_map = _entry_map(datum)
    if policy == "special":
        first = _greedy_entry(datum, x, eta, reverse_ties)
        special = True
    else:
        kind, index = policy
        if kind != "initial":
            raise ValueError(f"unknown policy {policy!r}")
        first = entry_map[index]
        special = first.region.margin(x) >= eta
    alphas, points = [first.index], [x, _step(view, first, x)]
    for _ in range(depth - 1):
        e = _greedy_entry(datum, points[-1], eta, reverse_ties)
        alphas.append(e.index)
        points.append(_step(view, e, points[-1]))
    return Code(tuple(alphas), tuple(points), eta, special)


def enumerate_codes(
    datum: ExpansionDatum,
    system: ActionSystem | ActionView,
    eta: float,
    x: Point,
    depth: int,
    cap: int,
) -> tuple:
    """All admissible codes to the given depth, breadth-first; every entry is
    allowed as the initial label.  Returns (codes, truncated)."""
    view = system if isinstance(system, ActionView) else ActionView(system)
    if cap < 1:
        raise ValueError("cap must be >= 1")
    if not 0.0 < eta <= datum.delta:
        raise CodingError(f"eta must lie in (0, delta={datum.delta}], got {eta}")
    truncated = False
    branches = []
    for e in datum.entries:
        branches.append(([e.index], [x, _step(view, e, x)]))
    if len(branches) > cap:
        branches, truncated = branches[:cap], True
    for _ in range(depth - 1):
        nxt = []
        for alphas, points in branches:
            for e in _admissible_entries(datum, points[-1], eta):
                nxt.append((alphas + [e.index], points + [_step(view, e, points[-1])]))
        if len(nxt) > cap:
            nxt, truncated = nxt[:cap], True
        branches = nxt
    codes = [
        Code(tuple(a), tuple(p), eta, _entry_map(datum)[a[0]].region.margin(x) >= eta)
        for a, p in branches
    ]
    return codes, truncated


def revalidate_code(datum: ExpansionDatum, code: Code, eta: float) -> bool:
    """True iff the code is also an eta-code (needs eta <= code.eta)."""
    entry_map = _entry_map(datum)
    for i in range(1, len(code.alphas)):
        if entry_map[code.alphas[i]].region.margin(code.points[i]) < eta:
            return False
    return True


def code_ray(datum: ExpansionDatum, code: Code) -> Ray:
    entry_map = _entry_map(datum)
    words = []
    current = None
    for i, a in enumerate(code.alphas):
        sym = entry_map[a].symbol
        nxt = sym if current is None else groups.multiply(current, sym)
        # letters past the free initial one never cancel; a violation here
        # means the datum pairs a region with the wrong generator label
        if i >= 2 and groups.word_length(nxt) != groups.word_length(current) + groups.word_length(sym):
            raise CodingError(f"ray letter {sym} cancels at step {i}")
        current = nxt
        words.append(current)
    return Ray(tuple(words))


def ray_tail_reduced(datum: ExpansionDatum, code: Code) -> bool:
    """Letters from index 1 on never cancel (the free initial letter may)."""
    entry_map = _entry_map(datum)
    syms = [entry_map[a].symbol for a in code.alphas]
    tail = None
    for s in syms[1:]:
        nxt = s if tail is None else groups.multiply(tail, s)
        if tail is not None and groups.word_length(nxt) != groups.word_length(tail) + groups.word_length(s):
            return False
        tail = nxt
    return True


# ---------------------------------------------------------------------------
# nested neighborhoods


def ball_net(space, center: Point, eta: float, k: int = 64) -> list:
    """Deterministic net of the open eta-ball at the center (center included)."""
    pts = [center]
    if isinstance(space, (Circle, CoveredCircle)):
        for t in range(k):
            f = -1.0 + 2.0 * (t + 0.5) / k
            pts.append(space.point(center.value + f * eta * (1 - 1e-12)))
    elif isinstance(space, FreeBoundary):
        j = math.floor(math.log(1.0 / eta) / math.log(space.a)) + 1
        prefix = center.value[:j]
        chars = space.letters + space.letters.upper()
        while len(prefix) < j:
            prefix += next(c for c in chars if not prefix or c != prefix[-1].swapcase())
        frontier = [prefix]
        while frontier and len(pts) < k:
            w = frontier.pop(0)
            pts.append(space.point(w))
            for c in chars:
                if c != w[-1].swapcase():
                    frontier.append(w + c)
        pts = pts[:k]
    elif isinstance(space, ProjectiveSpace):
        import numpy as np

        v = np.asarray(center.value)
        basis = []
        for e in np.eye(len(v)):
            u = e - (e @ v) * v
            for b in basis:
                u = u - (u @ b) * b
            if np.linalg.norm(u) > 1e-9:
                basis.append(u / np.linalg.norm(u))
        per_ring = max(4, k // 3)
        for frac in (0.33, 0.66, 0.999):
            r = frac * eta
            for t in range(per_ring):
                ang = TAU * t / per_ring
                w = basis[0] * math.cos(ang)
                if len(basis) > 1:
                    w = w + basis[1] * math.sin(ang)
                pts.append(space.point(tuple(math.cos(r) * v + math.sin(r) * w)))
    elif isinstance(space, DisjointUnion):
        idx, _ = center.value
        comp = space.components[idx]
        inner = ball_net(comp, space.component_point(center), eta, k)
        pts = [space.embed(idx, p) for p in inner]
    else:
        raise TypeError(f"ball nets unsupported on {space.kind}")
    return pts


def _set_diameter(space, pts: list) -> float:
    if isinstance(space, (Circle, CoveredCircle)):
        vals = sorted(p.value for p in pts)
        gaps = [vals[i + 1] - vals[i] for i in range(len(vals) - 1)]
        gaps.append(vals[0] + TAU - vals[-1])
        return TAU - max(gaps)
    best = 0.0
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            best = max(best, space.raw_distance(pts[i].value, pts[j].value))
    return best


@dataclass(frozen=True)
class NestedStep:
    i: int
    diameter: float
    bound: float
    nesting_slack: float  # max(0, one-step image overshoot beyond the eta-ball)
    contains_x_error: float


def _word_pushers(view: ActionView, datum: ExpansionDatum, code: Code) -> list:
    """Per-depth evaluators z -> rho(c_i)(z), sharing composed matrices for
    Moebius systems so pushing many ball points stays cheap."""
    entry_map = _entry_map(datum)
    symbols = [entry_map[a].symbol for a in code.alphas]
    maps = view.system.letter_maps if view.perturbed is None else view.perturbed.letter_maps
    letters = []
    for sym in symbols:
        letters.append(groups.letters_of(sym))
    flat = [l for ls in letters for l in ls]
    if flat and all(isinstance(maps[l], zoo.MoebiusMap) for l in set(flat)):
        import numpy as np

        pushers, mat = [], np.eye(2)
        for ls in letters:
            for l in ls:
                mat = mat @ maps[l].np_matrix
                scale = float(np.max(np.abs(mat)))
                if scale > 1e100:
                    mat = mat / scale
            frozen = mat.copy()
            pushers.append(
                lambda z, m=frozen: view.space.point(
                    zoo.MoebiusMap.apply_matrix_angle(m, z.value)
                )
            )
        return pushers
    ray = code_ray(datum, code)
    return [lambda z, w=w: view.apply_word(w, z) for w in ray.words]


def nested_images(
    system: ActionSystem | ActionView,
    datum: ExpansionDatum,
    code: Code,
    eta: float,
    boundary_points: int = 64,
) -> list:
    """Image neighborhoods rho(c_i)[B_eta(p_{i+1})]: diameters against the
    contraction bound 2*lip*eta/lam^i and the one-step nesting certificate
    rho(s_{alpha(i)})[B_eta(p_{i+1})] inside B_eta(p_i)."""
    view = system if isinstance(system, ActionView) else ActionView(system)
    space = view.space
    entry_map = _entry_map(datum)
    ray = code_ray(datum, code)
    pushers = _word_pushers(view, datum, code)
    steps = []
    for i in range(len(code.alphas)):
        p_next = code.points[i + 1]
        net = ball_net(space, p_next, eta, boundary_points)
        pushed = [pushers[i](z) for z in net]
        diam = _set_diameter(space, pushed)
        bound = 2.0 * datum.lip * eta / datum.lam**i
        if i >= 1:
            sym = entry_map[code.alphas[i]].symbol
            one_step = [view.apply_word(sym, z) for z in net]
            overshoot = max(
                space.raw_distance(z.value, code.points[i].value) for z in one_step
            )
            nest_slack = max(0.0, overshoot - eta)
        else:
            nest_slack = 0.0
        cx = space.raw_distance(pushers[i](p_next).value, code.points[0].value)
        steps.append(NestedStep(i, diam, bound, nest_slack, cx))
    return steps


# ---------------------------------------------------------------------------
# expansivity and recurrence


@dataclass(frozen=True)
class ExpansivityWitness:
    n: int
    separation: float
    word: Word  # group element realizing the separation (identity for n = 0)


@dataclass(frozen=True)
class NotFound:
    depth: int
    best: float


def expansivity_witness(
    datum: ExpansionDatum,
    system: ActionSystem | ActionView,
    x: Point,
    y: Point,
    max_depth: int = 200,
    slack: float = 1e-6,
) -> ExpansivityWitness | NotFound:
    """Smallest number of steps along a greedy code for x after which x and y
    are delta-separated; n counts applied letters (0 = already separated)."""
    view = system if isinstance(system, ActionView) else ActionView(system)
    space = view.space
    threshold = datum.delta * (1.0 - slack)
    d0 = space.raw_distance(x.value, y.value)
    if d0 <= 0.0:
        raise ValueError("expansivity witness needs distinct points")
    ident = datum.entries[0].symbol.alphabet.identity()
    if d0 >= threshold:
        return ExpansivityWitness(0, d0, ident)
    xi, yi = x, y
    word = ident
    best = d0
    for n in range(1, max_depth + 1):
        e = _greedy_entry(datum, xi, datum.delta)
        inv = groups.inverse(e.symbol)
        xi = _step(view, e, xi)
        yi = view.apply_word(inv, yi)
        word = groups.multiply(word, inv)
        sep = space.raw_distance(xi.value, yi.value)
        best = max(best, sep)
        if sep >= threshold:
            return ExpansivityWitness(n, sep, word)
    return NotFound(max_depth, best)


@dataclass(frozen=True)
class RecurrenceReport:
    base_index: int
    elements: tuple  # h_j words
    residuals: tuple  # d(rho(h_j) x, x), expected to decrease


def recurrence_witness(
    system: ActionSystem | ActionView,
    datum: ExpansionDatum,
    x: Point,
    eta: float,
    depth: int,
    max_elements: int = 8,
) -> RecurrenceReport | NotFound:
    """Return elements h_j = c_{i_j} c_{i_1}^{-1} built from near-returns of
    the code orbit, with residuals d(rho(h_j)(x), x)."""
    view = system if isinstance(system, ActionView) else ActionView(system)
    if not 0.0 < eta <= datum.delta:
        raise ValueError(f"eta must lie in (0, delta={datum.delta}]")
    space = view.space
    code = make_code(datum, view, eta, x, depth)
    ray = code_ray(datum, code)
    pts = code.points
    best_pair = None
    for i1 in range(0, depth // 3):
        returns = [
            j
            for j in range(i1 + 1, depth)
            if space.raw_distance(pts[j + 1].value, pts[i1 + 1].value) < eta / 2.0
        ]
        if len(returns) >= 2:
            best_pair = (i1, returns)
            break
    if best_pair is None:
        return NotFound(depth, math.inf)
    i1, returns = best_pair
    inv_c1 = groups.inverse(ray.words[i1])
    elements, residuals = [], []
    for j in returns[:max_elements]:
        h = groups.multiply(ray.words[j], inv_c1)
        hx = view.apply_word(h, x)
        elements.append(h)
        residuals.append(space.raw_distance(hx.value, x.value))
    return RecurrenceReport(i1, tuple(elements), tuple(residuals))


# ---------------------------------------------------------------------------
# quasigeodesics and fellow traveling


@dataclass(frozen=True)
class QuasigeodesicReport:
    lower_slope: float
    ok: bool
    worst_lower_slack: float
    worst_upper_slack: float
    unknown_pairs: int


def quasigeodesic_check(datum: ExpansionDatum, ray: Ray, cap: int = 64) -> QuasigeodesicReport:
    """Sandwich (log lam / log lip)*(i-j) <= d(c_i, c_j) <= i-j on all pairs."""
    slope = math.log(datum.lam) / math.log(datum.lip)
    worst_lower, worst_upper, unknown = math.inf, math.inf, 0
    for j in range(len(ray.words)):
        for i in range(j + 1, len(ray.words)):
            m = groups.word_metric(ray.words[i], ray.words[j], cap)
            if m is None:
                unknown += 1
                continue
            worst_lower = min(worst_lower, m - slope * (i - j))
            worst_upper = min(worst_upper, (i - j) - m)
    ok = worst_lower >= -1e-9 and worst_upper >= 0
    return QuasigeodesicReport(slope, ok, worst_lower, worst_upper, unknown)


def _path_vertices(ray: Ray) -> list:
    # the ray's edge path in the Cayley graph starts at the identity
    return [ray.words[0].alphabet.identity()] + list(ray.words)


def _directed_ok(required: list, pool: list, n: int, cap: int) -> Optional[bool]:
    """Every required word has a pool word within n; None = metric unknown."""
    for a in required:
        best = None
        for b in pool:
            m = groups.word_metric(a, b, cap)
            if m is not None and (best is None or m < best):
                best = m
                if best <= n:
                    break
        if best is None:
            return None
        if best > n:
            return False
    return True


def fellow_travel_distance(rayA: Ray, rayB: Ray, cap: int = 64) -> Optional[int]:
    """Fellow-travel constant of the two edge paths (identity included).

    Finite truncations need care at the far end: the smallest N is returned
    such that every vertex of word length at most (common horizon - N) has a
    partner within N on the other path.  The N-margin keeps the extra
    progress of a longer truncation from registering as divergence; on
    genuinely fellow-traveling rays this agrees with the Hausdorff distance
    of the full paths.  None when a needed word metric exceeds the cap.
    """
    A, B = _path_vertices(rayA), _path_vertices(rayB)
    horizon = min(
        max(groups.word_length(w) for w in A), max(groups.word_length(w) for w in B)
    )
    for n in range(horizon + 2):
        ok = True
        for S, T in ((A, B), (B, A)):
            req = [w for w in S if groups.word_length(w) <= horizon - n]
            verdict = _directed_ok(req, T, n, cap)
            if verdict is None:
                return None
            if not verdict:
                ok = False
                break
        if ok:
            return n
    return None


def _tail_close(rayA: Ray, rayB: Ray, n: int, cap: int = 64) -> bool:
    """Closeness at scale n over the tail halves (the infinite-subset
    surrogate: indices >= depth/2).  Words within n of the common word-length
    window boundary are exempt, again discounting truncation ends."""
    A = list(rayA.words[len(rayA.words) // 2 :])
    B = list(rayB.words[len(rayB.words) // 2 :])
    lo = max(min(groups.word_length(w) for w in S) for S in (A, B))
    hi = min(max(groups.word_length(w) for w in S) for S in (A, B))
    req_a = [w for w in A if lo + n <= groups.word_length(w) <= hi - n]
    req_b = [w for w in B if lo + n <= groups.word_length(w) <= hi - n]
    if not req_a or not req_b:
        return False
    return bool(_directed_ok(req_a, B, n, cap)) and bool(_directed_ok(req_b, A, n, cap))


def n_equivalence(
    rayA: Ray,
    rayB: Ray,
    pool: Sequence[Ray],
    n: int,
    max_chain: int = 3,
    cap: int = 64,
) -> tuple:
    """Chain of tail-close steps from rayA to rayB through the pool.

    Returns (found, chain) where the chain lists the interpolating rays
    inclusive of both ends.
    """
    pool = list(pool)
    if not any(r.words == rayA.words for r in pool) or not any(
        r.words == rayB.words for r in pool
    ):
        raise ValueError("pool must contain both rays")
    if rayA.words == rayB.words:
        return True, (rayA,)
    frontier = [(rayA, (rayA,))]
    seen = {rayA.words}
    for _ in range(max_chain):
        nxt = []
        for current, chain in frontier:
            for cand in pool:
                if cand.words in seen:
                    continue
                if _tail_close(current, cand, n, cap):
                    new_chain = chain + (cand,)
                    if cand.words == rayB.words:
                        return True, new_chain
                    seen.add(cand.words)
                    nxt.append((cand, new_chain))
        frontier = nxt
        if not frontier:
            break
    return False, None


# ---------------------------------------------------------------------------
# certificates


@dataclass(frozen=True)
class Certificate:
    """Desk-scale hyperbolicity certificate over a sampled net.

    fellow_constant: max Hausdorff distance between same-point rays;
    chain_constant: least N at which all same-point ray pairs connect by
    tail-close chains (with the recorded max chain steps); both None when the
    bound could not be established within n_max.
    """

    fellow_constant: Optional[int]
    chain_constant: Optional[int]
    chain_steps: int
    n_max: int
    truncated: bool
    points_checked: int
    rays_per_point: tuple
    worst_pair: Optional[tuple]  # (point, ray index, ray index, distance)

    @property
    def fellow_ok(self) -> bool:
        return self.fellow_constant is not None and self.fellow_constant <= self.n_max

    @property
    def chain_ok(self) -> bool:
        return self.chain_constant is not None


def shyp_certificate(
    system: ActionSystem | ActionView,
    datum: ExpansionDatum,
    net: Sequence[Point] | None = None,
    depth: int = 20,
    cap: int = 200,
    n_max: int = 8,
    max_chain: int = 3,
    metric_cap: int = 64,
) -> Certificate:
    """Enumerate all codes at each net point and certify the fellow-travel
    constant, falling back to chain equivalence when plain fellow traveling
    exceeds the requested bound."""
    view = system if isinstance(system, ActionView) else ActionView(system)
    net = list(datum.net if net is None else net)
    truncated = False
    all_rays = []
    for x in net:
        codes, trunc = enumerate_codes(datum, view, datum.delta, x, depth, cap)
        truncated = truncated or trunc
        all_rays.append([code_ray(datum, c) for c in codes])

    fellow, worst_pair = 0, None
    fellow_known = True
    for x, rays in zip(net, all_rays):
        for i in range(len(rays)):
            for j in range(i + 1, len(rays)):
                d = fellow_travel_distance(rays[i], rays[j], metric_cap)
                if d is None:
                    fellow_known = False
                    continue
                if d > fellow:
                    fellow, worst_pair = d, (x, i, j, d)

    chain_constant = None
    if fellow_known and fellow <= n_max:
        chain_candidates = range(0, fellow + 1)
    else:
        chain_candidates = range(0, n_max + 1)
    for n in chain_candidates:
        ok = True
        for rays in all_rays:
            for i in range(len(rays)):
                for j in range(i + 1, len(rays)):
                    found, _ = n_equivalence(rays[i], rays[j], rays, n, max_chain, metric_cap)
                    if not found:
                        ok = False
                        break
                if not ok:
                    break
            if not ok:
                break
        if ok:
            chain_constant = n
            break

    return Certificate(
        fellow_constant=fellow if fellow_known else None,
        chain_constant=chain_constant,
        chain_steps=max_chain,
        n_max=n_max,
        truncated=truncated,
        points_checked=len(net),
        rays_per_point=tuple(len(r) for r in all_rays),
        worst_pair=worst_pair,
    )


# ---------------------------------------------------------------------------
# the coding map


def coding_map(
    system: ActionSystem | ActionView,
    datum: ExpansionDatum,
    x: Point,
    prefix_depth: int,
) -> BoundaryWord:
    """Boundary point of the greedy special ray for x, as a reduced prefix.

    Only free and cyclic presentations carry a boundary here; the result is
    cross-checked against the reversed-tie greedy code and flagged
    unstabilized if the two prefixes disagree.
    """
    view = system if isinstance(system, ActionView) else ActionView(system)
    kind = view.alphabet.kind
    if kind not in (groups.FREE, groups.CYCLIC):
        raise ValueError(
            f"coding map needs a free or cyclic presentation, not {kind}"
        )
    depth = prefix_depth + 8
    code = make_code(datum, view, datum.delta, x, depth)
    ray = code_ray(datum, code)
    primary = boundary_prefix(ray.words, prefix_depth)
    alt_code = make_code(datum, view, datum.delta, x, depth, reverse_ties=True)
    alt = boundary_prefix(code_ray(datum, alt_code).words, prefix_depth)
    if alt.prefix != primary.prefix:
        import dataclasses

        return dataclasses.replace(primary, stabilized=False)
    return primary
