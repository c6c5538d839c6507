"""Concrete group actions: generators as invertible self-maps with analytic
derivatives, limit-set samplers, and perturbation families.

Circle actions use homogeneous coordinates for the boundary chart
theta = 2*arctan(x) of the upper half-plane, so the point at infinity needs
no special casing and derivatives stay finite everywhere.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Sequence

import numpy as np

from . import groups
from .geometry import (
    TAU,
    Circle,
    CoveredCircle,
    DisjointUnion,
    FreeBoundary,
    Point,
    ProjectiveSpace,
    Space,
    circle_dist,
    letter_inverse,
    wrap_angle,
)
from .groups import Alphabet, Word

Letter = tuple  # (generator index, +1 | -1)


class ConstructionError(ValueError):
    """Raised when a zoo constructor's validation fails."""


# ---------------------------------------------------------------------------
# self-maps


@dataclass(frozen=True)
class MoebiusMap:
    """Real 2x2 matrix acting on the boundary circle of the upper half-plane.

    The chart is theta = 2*arctan(x); in homogeneous coordinates
    [u : v] = [sin(theta/2) : cos(theta/2)] the action is linear and the
    arc-length derivative is 1/(u'^2 + v'^2).
    """

    matrix: tuple  # ((a, b), (c, d)) with determinant 1

    @staticmethod
    def from_matrix(m) -> "MoebiusMap":
        m = np.asarray(m, dtype=float)
        det = float(np.linalg.det(m))
        if det <= 0:
            raise ConstructionError("matrix must have positive determinant")
        m = m / math.sqrt(det)
        return MoebiusMap(((m[0, 0], m[0, 1]), (m[1, 0], m[1, 1])))

    @property
    def np_matrix(self) -> np.ndarray:
        return np.array(self.matrix, dtype=float)

    def apply_angle(self, theta: float) -> float:
        u, v = math.sin(theta / 2.0), math.cos(theta / 2.0)
        (a, b), (c, d) = self.matrix
        u2, v2 = a * u + b * v, c * u + d * v
        return wrap_angle(2.0 * math.atan2(u2, v2))

    def deriv_angle(self, theta: float) -> float:
        u, v = math.sin(theta / 2.0), math.cos(theta / 2.0)
        (a, b), (c, d) = self.matrix
        u2, v2 = a * u + b * v, c * u + d * v
        return 1.0 / (u2 * u2 + v2 * v2)

    def deriv_angles(self, thetas: np.ndarray) -> np.ndarray:
        u, v = np.sin(thetas / 2.0), np.cos(thetas / 2.0)
        (a, b), (c, d) = self.matrix
        u2, v2 = a * u + b * v, c * u + d * v
        return 1.0 / (u2 * u2 + v2 * v2)

    def inverse(self) -> "MoebiusMap":
        (a, b), (c, d) = self.matrix
        return MoebiusMap(((d, -b), (-c, a)))

    def trace(self) -> float:
        return self.matrix[0][0] + self.matrix[1][1]

    def fixed_angles(self) -> tuple:
        """(attracting, repelling) fixed angles of a hyperbolic element."""
        if abs(self.trace()) <= 2.0 + 1e-12:
            raise ConstructionError("matrix is not hyperbolic (|trace| <= 2)")
        vals, vecs = np.linalg.eig(self.np_matrix)
        order = np.argsort(-np.abs(vals))
        out = []
        for k in order:
            u, v = float(np.real(vecs[0, k])), float(np.real(vecs[1, k]))
            out.append(wrap_angle(2.0 * math.atan2(u, v)))
        return out[0], out[1]

    @staticmethod
    def apply_matrix_angle(mat, theta: float) -> float:
        """Evaluate a raw (possibly unnormalized) positive-determinant matrix;
        the homogeneous form is scaling invariant."""
        u, v = math.sin(theta / 2.0), math.cos(theta / 2.0)
        u2 = mat[0][0] * u + mat[0][1] * v
        v2 = mat[1][0] * u + mat[1][1] * v
        return wrap_angle(2.0 * math.atan2(u2, v2))

    def isometric_arc(self) -> tuple:
        """(center, half_width) of the circle arc where the map expands.

        Computed from the isometric circle of the conjugated disk-model
        matrix; the chart offset disk angle = theta + pi is accounted for.
        """
        C = np.array([[1.0, -1.0j], [1.0, 1.0j]])
        M = C @ self.np_matrix.astype(complex) @ np.linalg.inv(C)
        c, d = M[1, 0], M[1, 1]
        if abs(c) < 1e-12:
            raise ConstructionError("isometric circle undefined (c = 0 in disk chart)")
        u = -d / c
        rho = 1.0 / abs(c)
        mag = abs(u)
        cos_hw = (1.0 + mag * mag - rho * rho) / (2.0 * mag)
        if not -1.0 <= cos_hw <= 1.0:
            raise ConstructionError("isometric circle misses the boundary circle")
        half_width = math.acos(cos_hw)
        center = wrap_angle(float(np.angle(u)) - math.pi)
        return center, half_width


@dataclass(frozen=True)
class LiftedCircleMap:
    """Lift of x -> multiplier*x through the degree-k covering theta -> k*theta,
    pinned to fix every preimage of the base fixed points 0 and pi."""

    multiplier: float  # derivative at the base repelling point, > 0
    degree: int

    def _lift(self, y: float) -> float:
        # monotone branch on (-pi, pi], endpoints fixed
        if y >= math.pi:
            return math.pi
        if y <= -math.pi:
            return -math.pi
        return 2.0 * math.atan(self.multiplier * math.tan(y / 2.0))

    def apply_angle(self, theta: float) -> float:
        y = self.degree * theta
        j = math.floor((y + math.pi) / TAU)
        y0 = y - TAU * j
        return wrap_angle((self._lift(y0) + TAU * j) / self.degree)

    def deriv_angle(self, theta: float) -> float:
        y = self.degree * theta
        j = math.floor((y + math.pi) / TAU)
        y0 = y - TAU * j
        m = self.multiplier
        u, v = math.sin(y0 / 2.0), math.cos(y0 / 2.0)
        return m / (m * m * u * u + v * v)

    def deriv_angles(self, thetas: np.ndarray) -> np.ndarray:
        y = self.degree * np.asarray(thetas)
        y0 = y - TAU * np.floor((y + math.pi) / TAU)
        m = self.multiplier
        u, v = np.sin(y0 / 2.0), np.cos(y0 / 2.0)
        return m / (m * m * u * u + v * v)

    def inverse(self) -> "LiftedCircleMap":
        return LiftedCircleMap(1.0 / self.multiplier, self.degree)


@dataclass(frozen=True)
class BoundaryShiftMap:
    """Left multiplication by a single letter on a free-group boundary."""

    space: FreeBoundary
    letter: str

    def apply_word(self, w: str) -> str:
        inv = letter_inverse(self.letter)
        if w.startswith(inv):
            return w[1:]
        return (self.letter + w)[: self.space.depth]

    def expansion_at(self, w: str) -> float:
        inv = letter_inverse(self.letter)
        return self.space.a if w.startswith(inv) else 1.0 / self.space.a

    def inverse(self) -> "BoundaryShiftMap":
        return BoundaryShiftMap(self.space, letter_inverse(self.letter))


@dataclass(frozen=True)
class ProjectiveMap:
    """Projectivized invertible linear map with analytic stretch factors."""

    matrix: tuple

    @staticmethod
    def from_matrix(m) -> "ProjectiveMap":
        m = np.asarray(m, dtype=float)
        if abs(np.linalg.det(m)) < 1e-12:
            raise ConstructionError("projective matrix must be invertible")
        return ProjectiveMap(tuple(tuple(float(x) for x in row) for row in m))

    @property
    def np_matrix(self) -> np.ndarray:
        return np.array(self.matrix, dtype=float)

    def apply_vec(self, v: tuple) -> tuple:
        return tuple(self.np_matrix @ np.asarray(v))

    def _stretches(self, v: tuple) -> tuple:
        """(min, max) directional stretch of the projective action at [v]."""
        A = self.np_matrix
        v = np.asarray(v, dtype=float)
        v = v / np.linalg.norm(v)
        Av = A @ v
        n = np.linalg.norm(Av)
        w = Av / n
        # orthonormal basis of the tangent space v-perp
        basis = []
        for e in np.eye(len(v)):
            u = e - (e @ v) * v
            for b in basis:
                u = u - (u @ b) * b
            if np.linalg.norm(u) > 1e-9:
                basis.append(u / np.linalg.norm(u))
        W = np.column_stack(basis)
        M = (np.eye(len(v)) - np.outer(w, w)) @ A @ W / n
        sv = np.linalg.svd(M, compute_uv=False)
        return float(sv[-1]), float(sv[0])

    def min_stretch(self, v: tuple) -> float:
        return self._stretches(v)[0]

    def max_stretch(self, v: tuple) -> float:
        return self._stretches(v)[1]

    def inverse(self) -> "ProjectiveMap":
        return ProjectiveMap.from_matrix(np.linalg.inv(self.np_matrix))


@dataclass(frozen=True)
class BumpDiffeo:
    """Circle diffeomorphism theta -> theta + height*bump((theta-center)/width),
    smooth and compactly supported in (center-width, center+width)."""

    center: float
    width: float
    height: float

    MAX_SLOPE = 1.2910  # sup |bump'| of exp(1 - 1/(1-t^2))

    def __post_init__(self):
        if abs(self.height) * self.MAX_SLOPE / self.width >= 1.0:
            raise ConstructionError("bump too steep: composed map not injective")

    def _bump(self, t: float) -> float:
        if abs(t) >= 1.0:
            return 0.0
        return math.exp(1.0 - 1.0 / (1.0 - t * t))

    def _bump_deriv(self, t: float) -> float:
        if abs(t) >= 1.0:
            return 0.0
        s = 1.0 - t * t
        return self._bump(t) * (-2.0 * t / (s * s))

    def _signed_offset(self, theta: float) -> float:
        d = (theta - self.center + math.pi) % TAU - math.pi
        return d

    def apply_angle(self, theta: float) -> float:
        t = self._signed_offset(theta) / self.width
        return wrap_angle(theta + self.height * self._bump(t))

    def deriv_angle(self, theta: float) -> float:
        t = self._signed_offset(theta) / self.width
        return 1.0 + (self.height / self.width) * self._bump_deriv(t)

    def invert_angle(self, theta: float) -> float:
        # monotone in the lift; Newton from the identity guess with bisection
        lo, hi = theta - abs(self.height), theta + abs(self.height)
        x = theta
        for _ in range(80):
            fx = x + self.height * self._bump(self._signed_offset(x) / self.width)
            err = (fx - theta + math.pi) % TAU - math.pi
            if abs(err) < 1e-14:
                break
            d = self.deriv_angle(x)
            x = x - err / d
            x = min(max(x, lo), hi)
        return wrap_angle(x)


@dataclass(frozen=True)
class CirclePostComposeMap:
    """bump after a base circle map (a perturbation leaving the group)."""

    base: object
    bump: BumpDiffeo

    def apply_angle(self, theta: float) -> float:
        return self.bump.apply_angle(self.base.apply_angle(theta))

    def deriv_angle(self, theta: float) -> float:
        y = self.base.apply_angle(theta)
        return self.bump.deriv_angle(y) * self.base.deriv_angle(theta)

    def inverse(self) -> "CirclePreInverseMap":
        return CirclePreInverseMap(self.base.inverse(), self.bump)


@dataclass(frozen=True)
class CirclePreInverseMap:
    """Inverse of a post-composed map: base inverse after the bump inverse."""

    base_inv: object
    bump: BumpDiffeo

    def apply_angle(self, theta: float) -> float:
        return self.base_inv.apply_angle(self.bump.invert_angle(theta))

    def deriv_angle(self, theta: float) -> float:
        y = self.bump.invert_angle(theta)
        return self.base_inv.deriv_angle(y) / self.bump.deriv_angle(y)

    def inverse(self) -> CirclePostComposeMap:
        return CirclePostComposeMap(self.base_inv.inverse(), self.bump)


# ---------------------------------------------------------------------------
# numerically stable orbit helpers

_FIXED_ANGLE_CACHE: dict = {}


def fixed_angles_of(map_obj) -> tuple:
    """Known fixed angles of a circle self-map (empty when unavailable)."""
    if isinstance(map_obj, MoebiusMap):
        key = ("moebius", map_obj.matrix)
        if key not in _FIXED_ANGLE_CACHE:
            try:
                _FIXED_ANGLE_CACHE[key] = map_obj.fixed_angles()
            except ConstructionError:
                _FIXED_ANGLE_CACHE[key] = ()
        return _FIXED_ANGLE_CACHE[key]
    if isinstance(map_obj, LiftedCircleMap):
        key = ("lift", map_obj.degree)
        if key not in _FIXED_ANGLE_CACHE:
            k = map_obj.degree
            _FIXED_ANGLE_CACHE[key] = tuple(
                wrap_angle((base + TAU * j) / k) for base in (0.0, math.pi) for j in range(k)
            )
        return _FIXED_ANGLE_CACHE[key]
    return ()


def snap_angle(map_obj, theta_in: float, theta_out: float, tol: float = 5e-13) -> float:
    """Pin an orbit to a fixed point of the applied map.

    Backward orbits amplify float noise by the derivative at every step; a
    point within tol of a fixed angle is treated as exactly fixed so constant
    tails stay constant.  The perturbation of the code relation is at most
    the derivative times tol, far below the code tolerance.
    """
    for f in fixed_angles_of(map_obj):
        if circle_dist(theta_in, f) < tol:
            return f
    return theta_out


# ---------------------------------------------------------------------------
# action systems


@dataclass
class ActionSystem:
    """A finitely generated group acting on a metric space.

    `letter_maps` sends each signed generator (index, sign) to its self-map;
    values are immutable and all evaluation is pure.
    """

    name: str
    alphabet: Alphabet
    space: Space
    letter_maps: Mapping[Letter, object]
    net_fn: Callable[[int], list]
    default_depth: int
    cover_style: str
    meta: dict = field(default_factory=dict)

    def letter_map(self, letter: Letter):
        return self.letter_maps[letter]

    def apply_letter(self, letter: Letter, x: Point) -> Point:
        m = self.letter_maps[letter]
        if isinstance(self.space, (Circle, CoveredCircle)):
            return self.space.point(m.apply_angle(x.value))
        if isinstance(self.space, FreeBoundary):
            return self.space.point(m.apply_word(x.value))
        if isinstance(self.space, ProjectiveSpace):
            return self.space.point(m.apply_vec(x.value))
        if isinstance(self.space, DisjointUnion):
            return m.apply_union(self.space, x)
        raise TypeError(f"unsupported space {self.space.kind}")

    def apply(self, g: Word, x: Point) -> Point:
        """Evaluate rho(g) at x (the rightmost letter acts first).

        Moebius words go through the composed matrix: one exact-group
        composition instead of a letterwise orbit, which matters for long
        words whose intermediate points sit near fixed points.
        """
        if g.alphabet != self.alphabet:
            raise groups.AlphabetMismatchError("word over a different alphabet")
        if self.alphabet.kind == groups.PRODUCT_SWAP:
            return self._apply_product(g, x)
        letters = groups.letters_of(g)
        if len(letters) > 1 and all(
            isinstance(self.letter_maps[l], MoebiusMap) for l in set(letters)
        ):
            mat = np.eye(2)
            for l in letters:
                mat = mat @ self.letter_maps[l].np_matrix
                scale = np.max(np.abs(mat))
                if scale > 1e100:
                    mat = mat / scale
            return self.space.point(MoebiusMap.apply_matrix_angle(mat, x.value))
        for letter in reversed(letters):
            x = self.apply_letter(letter, x)
        return x

    def _apply_product(self, g: Word, x: Point) -> Point:
        w1, w2, bit = g.data
        first, second = self.meta["components"]
        idx, val = x.value
        if bit:
            idx = 1 - idx
        comp_sys = (first, second)[idx]
        inner = comp_sys.apply((w1, w2)[idx], Point(comp_sys.space, val))
        return self.space.point((idx, inner.value))

    def limit_net(self, depth: int | None = None) -> list:
        return self.net_fn(self.default_depth if depth is None else depth)

    def generators(self) -> list:
        return self.alphabet.symmetric_generators()


def apply(system: ActionSystem, g: Word, x: Point) -> Point:
    return system.apply(g, x)


def expansion_factor(system: ActionSystem, g: Word, x: Point) -> float:
    """Infimum directional stretch of rho(g) at x.

    Circle kinds multiply the analytic one-dimensional derivatives along the
    orbit; projective kinds evaluate the product matrix; boundary kinds use
    the exact cylinder scaling.  Falls back to finite differences when no
    analytic route exists.
    """
    letters = groups.letters_of(g)
    if isinstance(system.space, (Circle, CoveredCircle)):
        factor, y = 1.0, x
        for letter in reversed(letters):
            m = system.letter_maps[letter]
            factor *= m.deriv_angle(y.value)
            y = system.apply_letter(letter, y)
        return factor
    if isinstance(system.space, ProjectiveSpace):
        mat = np.eye(len(x.value))
        for letter in letters:
            mat = system.letter_maps[letter].np_matrix @ mat
        return ProjectiveMap.from_matrix(mat).min_stretch(x.value)
    if isinstance(system.space, FreeBoundary):
        probe_depth = min(system.space.depth - 2, max(len(x.value) + 2, 8))
        y = _flip_at_depth(system.space, x.value, probe_depth)
        d0 = system.space.raw_distance(x.value, y)
        gx, gy = system.apply(g, x), system.apply(g, system.space.point(y))
        return system.space.raw_distance(gx.value, gy.value) / d0
    return expansion_factor_fd(system, g, x)


def _flip_at_depth(space: FreeBoundary, w: str, depth: int) -> str:
    chars = space.letters + space.letters.upper()
    w = w[:depth]
    while len(w) < depth:
        cands = [c for c in chars if not w or c != letter_inverse(w[-1])]
        w += cands[0]
    prev = w[depth - 1]
    forbid = {prev}
    if depth >= 2:
        forbid.add(letter_inverse(w[depth - 2]))
    repl = next(c for c in chars if c not in forbid)
    return w[: depth - 1] + repl


def expansion_factor_fd(system: ActionSystem, g: Word, x: Point, h: float = 1e-6) -> float:
    """Central finite-difference stretch, minimized over probe directions."""
    space = system.space
    if isinstance(space, (Circle, CoveredCircle)):
        xp, xm = space.point(x.value + h), space.point(x.value - h)
        num = circle_dist(system.apply(g, xp).value, system.apply(g, xm).value)
        return num / (2.0 * h)
    if isinstance(space, ProjectiveSpace):
        v = np.asarray(x.value)
        best = math.inf
        for k in range(16):
            w = np.zeros(len(v))
            rng_dir = np.cos(2 * math.pi * k / 16), np.sin(2 * math.pi * k / 16)
            basis = [e - (e @ v) * v for e in np.eye(len(v))]
            basis = [b / np.linalg.norm(b) for b in basis if np.linalg.norm(b) > 1e-9][:2]
            if len(basis) == 1:
                w = basis[0]
            else:
                w = rng_dir[0] * basis[0] + rng_dir[1] * basis[1]
            xp = space.point(tuple(v + h * w))
            xm = space.point(tuple(v - h * w))
            num = space.raw_distance(system.apply(g, xp).value, system.apply(g, xm).value)
            den = space.raw_distance(xp.value, xm.value)
            best = min(best, num / den)
        return best
    raise TypeError(f"finite differences unsupported on {space.kind}")


def validate_inverses(system: ActionSystem, samples: Sequence[Point], tol: float = 1e-9) -> float:
    """Max round-trip error of s^-1(s(x)) over the samples."""
    worst = 0.0
    for i in range(system.alphabet.rank):
        g, ginv = system.alphabet.generator(i, 1), system.alphabet.generator(i, -1)
        for x in samples:
            y = system.apply(ginv, system.apply(g, x))
            worst = max(worst, system.space.raw_distance(x.value, y.value))
    if worst > tol:
        raise ConstructionError(f"inverse consistency violated: {worst:.3e}")
    return worst


def _construction_check(system: ActionSystem, samples: int = 64) -> ActionSystem:
    """Light construction-time sanity: inverse round trips on a seeded sample."""
    rng = np.random.default_rng(0)
    pts = [system.space.random_point(rng) for _ in range(samples)]
    validate_inverses(system, pts, tol=1e-9)
    return system


def net_resolution(space: Space, net: Sequence[Point]) -> float:
    """Largest nearest-neighbor distance within the net."""
    worst = 0.0
    for i, x in enumerate(net):
        best = min(
            space.raw_distance(x.value, y.value) for j, y in enumerate(net) if j != i
        )
        worst = max(worst, best)
    return worst


# ---------------------------------------------------------------------------
# constructors


def make_cyclic_hyperbolic(multiplier: float) -> ActionSystem:
    """Cyclic group of a hyperbolic Moebius map with fixed points at chart
    coordinates 0 and infinity and derivative multiplier**2 at the repelling
    point (angle 0)."""
    if multiplier <= 1.0:
        raise ConstructionError("multiplier must exceed 1")
    space = Circle()
    alphabet = Alphabet.cyclic("g")
    gamma = MoebiusMap.from_matrix([[multiplier, 0.0], [0.0, 1.0 / multiplier]])
    maps = {(0, 1): gamma, (0, -1): gamma.inverse()}
    fixed = [space.point(0.0), space.point(math.pi)]

    def net_fn(depth: int) -> list:
        return list(fixed)

    return _construction_check(ActionSystem(
        name=f"cyclic_hyperbolic(m={multiplier})",
        alphabet=alphabet,
        space=space,
        letter_maps=maps,
        net_fn=net_fn,
        default_depth=1,
        cover_style="circle-grid",
        meta={"multiplier": multiplier, "matrix": gamma.matrix},
    ))


def make_covered_cyclic(base: ActionSystem, k: int) -> ActionSystem:
    """Degree-k cover of a cyclic hyperbolic circle action; the lifted
    generator fixes all 2k preimages of the base fixed points."""
    if k < 2:
        raise ConstructionError("covering degree must be >= 2")
    if "multiplier" not in base.meta or not isinstance(base.space, Circle):
        raise ConstructionError("base must be a cyclic hyperbolic circle system")
    m2 = base.meta["multiplier"] ** 2
    space = CoveredCircle(degree=k)
    alphabet = Alphabet.cyclic("g")
    lifted = LiftedCircleMap(m2, k)
    maps = {(0, 1): lifted, (0, -1): lifted.inverse()}
    fixed = [space.point((base_angle + TAU * j) / k) for base_angle in (0.0, math.pi) for j in range(k)]

    def net_fn(depth: int) -> list:
        return list(fixed)

    return _construction_check(ActionSystem(
        name=f"covered_cyclic(k={k})",
        alphabet=alphabet,
        space=space,
        letter_maps=maps,
        net_fn=net_fn,
        default_depth=1,
        cover_style="circle-grid",
        meta={"multiplier": base.meta["multiplier"], "degree": k},
    ))


def default_schottky_matrices(multiplier: float = 3.0) -> list:
    """Two hyperbolic generators with perpendicular axes (fixed points at
    angles +-pi/2 and 0, pi); their four expanding arcs are disjoint."""
    m = multiplier
    c, s = (m + 1.0 / m) / 2.0, (m - 1.0 / m) / 2.0
    return [[[c, s], [s, c]], [[m, 0.0], [0.0, 1.0 / m]]]


def make_schottky(matrices: Sequence | None = None) -> ActionSystem:
    """Free group of hyperbolic Moebius maps validated by the ping-pong
    disjointness of the isometric-circle arcs; the limit set is sampled by
    backward iteration (one point per cutting cylinder)."""
    if matrices is None:
        matrices = default_schottky_matrices()
    rank = len(matrices)
    space = Circle()
    alphabet = Alphabet.free(rank)
    maps, arcs = {}, {}
    for i, m in enumerate(matrices):
        fwd = MoebiusMap.from_matrix(m)
        if abs(fwd.trace()) <= 2.0:
            raise ConstructionError(f"generator {i} is not hyperbolic")
        maps[(i, 1)] = fwd
        maps[(i, -1)] = fwd.inverse()
        arcs[(i, 1)] = fwd.isometric_arc()
        arcs[(i, -1)] = fwd.inverse().isometric_arc()
    if rank >= 2:
        keys = sorted(arcs)
        for a in range(len(keys)):
            for b in range(a + 1, len(keys)):
                (c1, h1), (c2, h2) = arcs[keys[a]], arcs[keys[b]]
                if circle_dist(c1, c2) < h1 + h2:
                    raise ConstructionError(
                        f"ping-pong failure: arcs of {keys[a]} and {keys[b]} overlap"
                    )

    chars = [(i, s) for i in range(rank) for s in (1, -1)]

    def attracting(letter: Letter) -> float:
        return maps[letter].fixed_angles()[0]

    def net_fn(depth: int) -> list:
        words = [[ch] for ch in chars]
        for _ in range(depth - 1):
            words = [w + [ch] for w in words for ch in chars if ch != (w[-1][0], -w[-1][1])]
        pts = []
        for w in words:
            theta = attracting(w[-1])
            for letter in reversed(w[:-1]):
                theta = maps[letter].apply_angle(theta)
            pts.append(space.point(theta))
        return pts

    return _construction_check(ActionSystem(
        name=f"schottky(rank={rank})",
        alphabet=alphabet,
        space=space,
        letter_maps=maps,
        net_fn=net_fn,
        default_depth=4,
        cover_style="circle-grid",
        meta={"arcs": arcs, "matrices": [tuple(map(tuple, np.asarray(m, float))) for m in matrices]},
    ))


def make_free_boundary(rank: int, a: float) -> ActionSystem:
    """Free group acting on its own boundary by left multiplication; each
    inverse generator scales its depth-1 cylinder exactly by a."""
    if rank < 2:
        raise ConstructionError("rank must be >= 2")
    if not 1.0 < a <= 2.0:
        raise ConstructionError("visual parameter must satisfy 1 < a <= 2")
    space = FreeBoundary(rank=rank, a=a)
    alphabet = Alphabet.free(rank, names=tuple(space.letters))
    maps = {}
    for i, name in enumerate(space.letters):
        maps[(i, 1)] = BoundaryShiftMap(space, name)
        maps[(i, -1)] = BoundaryShiftMap(space, name.upper())

    chars = space.letters + space.letters.upper()

    def net_fn(depth: int) -> list:
        words = [c for c in chars]
        for _ in range(depth - 1):
            words = [w + c for w in words for c in chars if c != letter_inverse(w[-1])]
        # pad by repeating the last letter (the word's own attracting tail),
        # so codes can shift well beyond the net depth
        return [space.point(w + w[-1] * (space.depth - len(w))) for w in words]

    return _construction_check(ActionSystem(
        name=f"free_boundary(rank={rank}, a={a})",
        alphabet=alphabet,
        space=space,
        letter_maps=maps,
        net_fn=net_fn,
        default_depth=4,
        cover_style="cylinders",
        meta={"a": a},
    ))


def make_zn_projective(diagonals: Sequence[Sequence[float]]) -> ActionSystem:
    """Z^n acting on P^n(R) by commuting diagonal matrices; each generator is
    bi-proximal with the top eigenvector at e_0 and the bottom at e_j."""
    n = len(diagonals)
    space = ProjectiveSpace(n=n)
    alphabet = Alphabet.free_abelian(n)
    maps = {}
    for j, diag in enumerate(diagonals):
        d = [float(x) for x in diag]
        if len(d) != n + 1:
            raise ConstructionError(f"generator {j}: expected {n + 1} diagonal entries")
        mags = [abs(x) for x in d]
        if mags.index(max(mags)) != 0 or mags.count(max(mags)) > 1:
            raise ConstructionError(f"generator {j}: top eigenvector is not e_0")
        if mags.index(min(mags)) != j + 1 or mags.count(min(mags)) > 1:
            raise ConstructionError(f"generator {j}: bottom eigenvector is not e_{j + 1}")
        mat = np.diag(d)
        maps[(j, 1)] = ProjectiveMap.from_matrix(mat)
        maps[(j, -1)] = ProjectiveMap.from_matrix(np.linalg.inv(mat))
    basis = [tuple(1.0 if i == k else 0.0 for i in range(n + 1)) for k in range(n + 1)]

    def net_fn(depth: int) -> list:
        return [space.point(v) for v in basis]

    return _construction_check(ActionSystem(
        name=f"zn_projective(n={n})",
        alphabet=alphabet,
        space=space,
        letter_maps=maps,
        net_fn=net_fn,
        default_depth=1,
        cover_style="projective-balls",
        meta={"diagonals": [tuple(float(x) for x in d) for d in diagonals]},
    ))


@dataclass(frozen=True)
class _ProductLetterMap:
    component: int  # 0 or 1, or -1 for the swap
    inner: object = None

    def apply_union(self, space: DisjointUnion, x: Point) -> Point:
        idx, val = x.value
        if self.component == -1:
            return space.point((1 - idx, val))
        if idx != self.component or self.inner is None:
            return x
        comp = space.components[idx]
        inner_sys, letter = self.inner
        moved = inner_sys.apply_letter(letter, Point(comp, val))
        return space.point((idx, moved.value))


def make_product(first: ActionSystem, second: ActionSystem, with_swap: bool = False) -> ActionSystem:
    """Product group acting componentwise on the disjoint union; the optional
    swap generator (components must match) exchanges the two copies and
    carries an empty expansion region."""
    if with_swap and (first.space != second.space or first.alphabet != second.alphabet):
        raise ConstructionError("swap requires identical component systems")
    space = DisjointUnion.of([first.space, second.space])
    alphabet = Alphabet.product(first.alphabet, second.alphabet, with_swap)
    maps = {}
    n1 = first.alphabet.rank
    for i in range(first.alphabet.rank):
        for s in (1, -1):
            maps[(i, s)] = _ProductLetterMap(0, (first, (i, s)))
    for i in range(second.alphabet.rank):
        for s in (1, -1):
            maps[(n1 + i, s)] = _ProductLetterMap(1, (second, (i, s)))
    if with_swap:
        maps[(alphabet.rank - 1, 1)] = _ProductLetterMap(-1)
        maps[(alphabet.rank - 1, -1)] = _ProductLetterMap(-1)

    def net_fn(depth: int) -> list:
        pts = [space.embed(0, p) for p in first.limit_net(depth)]
        pts += [space.embed(1, p) for p in second.limit_net(depth)]
        return pts

    return ActionSystem(
        name=f"product({first.name}, {second.name}, swap={with_swap})",
        alphabet=alphabet,
        space=space,
        letter_maps=maps,
        net_fn=net_fn,
        default_depth=min(first.default_depth, second.default_depth),
        cover_style="product",
        meta={"components": (first, second), "with_swap": with_swap},
    )


# ---------------------------------------------------------------------------
# perturbations


@dataclass(frozen=True)
class MatrixJitter:
    """Seeded uniform noise on matrix entries, renormalized to determinant 1.

    Diagonal systems (Z^n, covers) only jitter the diagonal so the perturbed
    generators still commute.
    """

    magnitude: float
    seed: int = 0
    diagonal_only: bool = False


@dataclass(frozen=True)
class BumpCompose:
    """Post-compose every generator with a compactly supported circle bump;
    the perturbation leaves the original transformation group."""

    center: float
    width: float
    height: float


@dataclass(frozen=True)
class PerturbedMaps:
    """Per-letter maps of a perturbed action, with the family that made them."""

    family: object
    letter_maps: Mapping[Letter, object]

    def apply_letter(self, system: ActionSystem, letter: Letter, x: Point) -> Point:
        m = self.letter_maps[letter]
        if isinstance(system.space, (Circle, CoveredCircle)):
            return system.space.point(m.apply_angle(x.value))
        if isinstance(system.space, ProjectiveSpace):
            return system.space.point(m.apply_vec(x.value))
        raise TypeError(f"perturbations unsupported on {system.space.kind}")


def perturb(system: ActionSystem, family) -> PerturbedMaps:
    """Perturbed generator maps for the given family.

    MatrixJitter requires matrix-backed generators; BumpCompose requires a
    circle system.  magnitude 0 (or height 0) reproduces the original maps.
    """
    if isinstance(family, MatrixJitter):
        rng = np.random.default_rng(family.seed)
        out = {}
        if family.magnitude == 0.0:
            return PerturbedMaps(family, dict(system.letter_maps))
        if "diagonals" in system.meta or "degree" in system.meta:
            family = replace(family, diagonal_only=True)
        for i in range(system.alphabet.rank):
            fwd = system.letter_maps[(i, 1)]
            if isinstance(fwd, MoebiusMap):
                m = fwd.np_matrix
                noise = rng.uniform(-family.magnitude, family.magnitude, size=(2, 2))
                if family.diagonal_only:
                    noise = np.diag(np.diag(noise))
                m2 = MoebiusMap.from_matrix(m + noise)
                out[(i, 1)], out[(i, -1)] = m2, m2.inverse()
            elif isinstance(fwd, LiftedCircleMap):
                noise = rng.uniform(-family.magnitude, family.magnitude)
                m2 = LiftedCircleMap(fwd.multiplier * (1.0 + noise), fwd.degree)
                out[(i, 1)], out[(i, -1)] = m2, m2.inverse()
            elif isinstance(fwd, ProjectiveMap):
                m = fwd.np_matrix
                noise = np.diag(rng.uniform(-family.magnitude, family.magnitude, size=len(m)))
                m2 = ProjectiveMap.from_matrix(m + noise)
                out[(i, 1)], out[(i, -1)] = m2, m2.inverse()
            else:
                raise ConstructionError(f"matrix jitter unsupported for {type(fwd).__name__}")
        return PerturbedMaps(family, out)
    if isinstance(family, BumpCompose):
        if not isinstance(system.space, (Circle, CoveredCircle)):
            raise ConstructionError("bump perturbations need a circle system")
        bump = BumpDiffeo(family.center, family.width, family.height)
        out = {}
        for i in range(system.alphabet.rank):
            fwd = CirclePostComposeMap(system.letter_maps[(i, 1)], bump)
            out[(i, 1)], out[(i, -1)] = fwd, fwd.inverse()
        return PerturbedMaps(family, out)
    raise ConstructionError(f"unknown perturbation family {family!r}")


def translation_conjugate(system: ActionSystem, t: float) -> PerturbedMaps:
    """Cyclic system conjugated by the chart translation x -> x + t; the
    perturbed generator has the closed-form fixed point at chart t."""
    if "matrix" not in system.meta:
        raise ConstructionError("translation conjugation needs a Moebius system")
    T = np.array([[1.0, t], [0.0, 1.0]])
    out = {}
    for i in range(system.alphabet.rank):
        m = system.letter_maps[(i, 1)].np_matrix
        conj = MoebiusMap.from_matrix(T @ m @ np.linalg.inv(T))
        out[(i, 1)], out[(i, -1)] = conj, conj.inverse()
    return PerturbedMaps(("translation_conjugate", t), out)


ZOO_KINDS = {
    "cyclic_hyperbolic": "multiplier m > 1; Moebius x -> m^2 x on the circle, limit set {0, pi}",
    "covered_cyclic": "degree k >= 2 cover of cyclic_hyperbolic; 2k lifted fixed points",
    "schottky": "hyperbolic SL(2,R) matrices with disjoint isometric arcs; Cantor limit set",
    "free_boundary": "rank k >= 2, visual parameter 1 < a <= 2; boundary shift action",
    "zn_projective": "n commuting bi-proximal diagonals acting on P^n(R); limit set {e_0..e_n}",
    "product": "disjoint-union action of two systems, optional swap generator",
}
