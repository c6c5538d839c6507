"""Metric substrate: spaces, points, regions with margins, Hausdorff distance.

Every space kind carries its own canonical point coordinates:

* circles: an angle in [0, 2*pi), arc-length metric;
* projective spaces: a unit vector with first nonzero coordinate positive,
  angle metric between lines;
* free-group boundaries: a reduced word prefix (lowercase letter = generator,
  uppercase = its inverse), visual metric a**(-common prefix length);
* disjoint unions: a (component index, inner point) pair, with a constant
  inter-component distance.

Regions are carried as 1-Lipschitz margin functions: margin(x) >= r certifies
that the open r-ball at x is contained in the region.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Iterable, Sequence

TAU = 2.0 * math.pi
DEFAULT_TOL = 1e-9


class SpaceMismatchError(ValueError):
    """Raised when two points do not live on the same space."""


class EmptySetError(ValueError):
    """Raised when an operation needs a non-empty point set."""


def circle_dist(a: float, b: float) -> float:
    d = abs(a - b) % TAU
    return min(d, TAU - d)


def wrap_angle(theta: float) -> float:
    t = theta % TAU
    if t >= TAU:  # guards the t == TAU float edge case
        t -= TAU
    return t


# letter helpers for free-group boundary prefixes ("a" is a generator,
# "A" its inverse); shared with the word layer in groups.py

def letter_inverse(ch: str) -> str:
    return ch.lower() if ch.isupper() else ch.upper()


def is_reduced(word: str) -> bool:
    return all(word[i] != letter_inverse(word[i + 1]) for i in range(len(word) - 1))


def common_prefix_len(u: str, v: str) -> int:
    n = min(len(u), len(v))
    for i in range(n):
        if u[i] != v[i]:
            return i
    return n


@dataclass(frozen=True)
class Point:
    space: "Space"
    value: Any

    def __repr__(self) -> str:  # keep reports readable
        return f"Point({self.space.kind}, {self.value!r})"


@dataclass(frozen=True)
class Space:
    """Base class; concrete kinds implement the raw metric and normalization."""

    @property
    def kind(self) -> str:
        return type(self).__name__

    @property
    def diameter(self) -> float:
        raise NotImplementedError

    def is_geodesic(self) -> bool:
        return False

    def normalize(self, value: Any) -> Any:
        raise NotImplementedError

    def point(self, value: Any) -> Point:
        return Point(self, self.normalize(value))

    def raw_distance(self, a: Any, b: Any) -> float:
        raise NotImplementedError

    def random_point(self, rng) -> Point:
        raise NotImplementedError


@dataclass(frozen=True)
class Circle(Space):
    """Circle of circumference 2*pi with the arc-length (geodesic) metric."""

    @property
    def diameter(self) -> float:
        return math.pi

    def is_geodesic(self) -> bool:
        return True

    def normalize(self, value: Any) -> float:
        return wrap_angle(float(value))

    def raw_distance(self, a: float, b: float) -> float:
        return circle_dist(a, b)

    def random_point(self, rng) -> Point:
        return self.point(rng.uniform(0.0, TAU))


@dataclass(frozen=True)
class CoveredCircle(Circle):
    """Degree-k covering circle; metrically a circle, the degree tags the
    covering map theta -> k*theta onto the base."""

    degree: int = 2

    def project(self, x: Point) -> float:
        return wrap_angle(self.degree * x.value)


@dataclass(frozen=True)
class ProjectiveSpace(Space):
    """P^n(R) with the angle metric between lines; geodesic, diameter pi/2."""

    n: int = 2

    @property
    def diameter(self) -> float:
        return math.pi / 2.0

    def is_geodesic(self) -> bool:
        return True

    def normalize(self, value: Any) -> tuple:
        v = [float(c) for c in value]
        if len(v) != self.n + 1:
            raise ValueError(f"expected {self.n + 1} coordinates, got {len(v)}")
        norm = math.sqrt(sum(c * c for c in v))
        if norm == 0.0:
            raise ValueError("zero vector does not define a line")
        v = [c / norm for c in v]
        for c in v:
            if abs(c) > 1e-14:
                if c < 0:
                    v = [-x for x in v]
                break
        return tuple(v)

    def raw_distance(self, a: tuple, b: tuple) -> float:
        # 2*asin(|u -+ v|/2) is well conditioned near zero, unlike acos
        dot = sum(x * y for x, y in zip(a, b))
        s = 1.0 if dot >= 0 else -1.0
        diff = math.sqrt(sum((x - s * y) ** 2 for x, y in zip(a, b)))
        return 2.0 * math.asin(min(1.0, diff / 2.0))

    def random_point(self, rng) -> Point:
        return self.point([rng.normal() for _ in range(self.n + 1)])


@dataclass(frozen=True)
class FreeBoundary(Space):
    """Boundary of a rank-k free group with the visual metric a**(-cpl).

    Points are reduced word prefixes of depth at most `depth`; two points
    closer than a**(-depth) are indistinguishable at this resolution.
    """

    rank: int = 2
    a: float = 2.0
    depth: int = 40

    def __post_init__(self):
        if self.rank < 1:
            raise ValueError("rank must be >= 1")
        if not self.a > 1.0:
            raise ValueError("visual parameter a must exceed 1")

    @property
    def diameter(self) -> float:
        return 1.0

    @property
    def letters(self) -> str:
        return "abcdefghijklmnopqrstuvwxyz"[: self.rank]

    def normalize(self, value: Any) -> str:
        w = str(value)
        for ch in w:
            if ch.lower() not in self.letters:
                raise ValueError(f"letter {ch!r} outside rank-{self.rank} alphabet")
        if not is_reduced(w):
            raise ValueError(f"word {w!r} is not reduced")
        return w[: self.depth]

    def raw_distance(self, a: str, b: str) -> float:
        if a == b:
            return 0.0
        return self.a ** (-common_prefix_len(a, b))

    def random_point(self, rng) -> Point:
        chars = self.letters + self.letters.upper()
        word = [chars[rng.integers(0, len(chars))]]
        while len(word) < self.depth:
            choices = [c for c in chars if c != letter_inverse(word[-1])]
            word.append(choices[rng.integers(0, len(choices))])
        return self.point("".join(word))


@dataclass(frozen=True)
class DisjointUnion(Space):
    """Disjoint union of spaces, distinct components at constant distance."""

    components: tuple = ()
    separation: float = 0.0

    @staticmethod
    def of(components: Sequence[Space], separation: float | None = None) -> "DisjointUnion":
        comps = tuple(components)
        if separation is None:
            separation = max(c.diameter for c in comps) + 1.0
        if any(c.diameter > 2.0 * separation for c in comps):
            raise ValueError("separation too small for the triangle inequality")
        return DisjointUnion(comps, float(separation))

    @property
    def diameter(self) -> float:
        return max(self.separation, max(c.diameter for c in self.components))

    def normalize(self, value: Any) -> tuple:
        idx, inner = value
        idx = int(idx)
        comp = self.components[idx]
        if isinstance(inner, Point):
            inner = inner.value
        return (idx, comp.normalize(inner))

    def raw_distance(self, a: tuple, b: tuple) -> float:
        if a[0] != b[0]:
            return self.separation
        return self.components[a[0]].raw_distance(a[1], b[1])

    def random_point(self, rng) -> Point:
        idx = int(rng.integers(0, len(self.components)))
        inner = self.components[idx].random_point(rng)
        return self.point((idx, inner.value))

    def embed(self, idx: int, inner: Point) -> Point:
        return self.point((idx, inner.value))

    def component_point(self, x: Point) -> Point:
        idx, inner = x.value
        return Point(self.components[idx], inner)


def distance(space: Space, x: Point, y: Point) -> float:
    """Metric of the given space; both points must carry its tag."""
    if x.space != space or y.space != space:
        raise SpaceMismatchError(
            f"points tagged {x.space.kind}/{y.space.kind} do not match {space.kind}"
        )
    return space.raw_distance(x.value, y.value)


# ---------------------------------------------------------------------------
# regions


@dataclass(frozen=True)
class Region:
    """A subset carried by its margin function.

    margin(x) >= r guarantees B_r(x) is inside the region; margin is
    nonpositive outside and 1-Lipschitz.  `offset` accumulates shrinking, so
    repeated shrinks compose exactly.
    """

    label: Any = None
    offset: float = 0.0

    def base_margin(self, x: Point) -> float:
        raise NotImplementedError

    def margin(self, x: Point) -> float:
        return self.base_margin(x) - self.offset

    def contains(self, x: Point) -> bool:
        return self.margin(x) > 0.0

    @property
    def peak(self) -> float:
        """Supremum of the margin; nonpositive means the region is empty."""
        raise NotImplementedError

    def shrunk(self, r: float) -> "Region":
        raise NotImplementedError

    def is_empty(self) -> bool:
        return self.peak <= 0.0

    def sample(self, k: int) -> list:
        """Deterministic interior sample points (may be empty)."""
        return []


def _replace_offset(region: Region, r: float):
    import dataclasses

    return dataclasses.replace(region, offset=region.offset + r)


@dataclass(frozen=True)
class ArcRegion(Region):
    """Open circular arc (center - half_width, center + half_width)."""

    space: Circle = None
    center: float = 0.0
    half_width: float = 0.0

    def base_margin(self, x: Point) -> float:
        return self.half_width - circle_dist(x.value, self.center)

    @property
    def peak(self) -> float:
        return self.half_width - self.offset

    def shrunk(self, r: float) -> "ArcRegion":
        return _replace_offset(self, r)

    def sample(self, k: int) -> list:
        hw = self.half_width - self.offset
        if hw <= 0 or k <= 0:
            return []
        step = 2.0 * hw / (k + 1)
        return [
            self.space.point(self.center - hw + step * (i + 1)) for i in range(k)
        ]


@dataclass(frozen=True)
class BallRegion(Region):
    """Open metric ball; margin is exact on geodesic spaces."""

    space: Space = None
    center: Point = None
    radius: float = 0.0

    def base_margin(self, x: Point) -> float:
        return self.radius - distance(self.space, x, self.center)

    @property
    def peak(self) -> float:
        return self.radius - self.offset

    def shrunk(self, r: float) -> "BallRegion":
        return _replace_offset(self, r)


@dataclass(frozen=True)
class CylinderRegion(Region):
    """Cylinder [w] of a free-group boundary: all points extending `prefix`.

    The margin is the cylinder diameter a**(-len(prefix)), constant on the
    cylinder.  This is conservative: margin >= r still certifies B_r(x) in
    the cylinder, while some larger balls also fit (distances are quantized).
    """

    space: FreeBoundary = None
    prefix: str = ""

    def __post_init__(self):
        if not is_reduced(self.prefix):
            raise ValueError(f"prefix {self.prefix!r} is not reduced")

    def base_margin(self, x: Point) -> float:
        m = len(self.prefix)
        inner = self.space.a ** (-m)
        c = common_prefix_len(x.value, self.prefix)
        if c == m:
            return inner
        return inner - self.space.a ** (-c)

    @property
    def peak(self) -> float:
        return self.space.a ** (-len(self.prefix)) - self.offset

    def shrunk(self, r: float) -> "CylinderRegion":
        return _replace_offset(self, r)

    def sample(self, k: int) -> list:
        if self.is_empty() or k <= 0:
            return []
        pts, stack = [], [self.prefix]
        chars = self.space.letters + self.space.letters.upper()
        while stack and len(pts) < k:
            w = stack.pop(0)
            pts.append(self.space.point(w))
            for ch in chars:
                if not w or ch != letter_inverse(w[-1]):
                    stack.append(w + ch)
        return pts[:k]


@dataclass(frozen=True)
class EmptyRegion(Region):
    """First-class empty region (margin constantly minus the diameter)."""

    space: Space = None

    def base_margin(self, x: Point) -> float:
        return -self.space.diameter

    @property
    def peak(self) -> float:
        return -self.space.diameter - self.offset

    def shrunk(self, r: float) -> "EmptyRegion":
        return _replace_offset(self, r)


@dataclass(frozen=True)
class ComponentRegion(Region):
    """A region living on one component of a disjoint union.

    On foreign components the margin is the constant inner peak minus the
    separation, the largest 1-Lipschitz-compatible nonpositive value.
    """

    space: DisjointUnion = None
    component: int = 0
    inner: Region = None

    def base_margin(self, x: Point) -> float:
        idx, val = x.value
        if idx == self.component:
            comp = self.space.components[idx]
            return self.inner.margin(Point(comp, val))
        return self.inner.peak - self.space.separation

    @property
    def peak(self) -> float:
        return self.inner.peak - self.offset

    def shrunk(self, r: float) -> "ComponentRegion":
        return _replace_offset(self, r)

    def sample(self, k: int) -> list:
        return [self.space.embed(self.component, p) for p in self.inner.sample(k)]


@dataclass(frozen=True)
class ClippedRegion(Region):
    """Intersection of a region with the open radius-neighborhood of a net."""

    space: Space = None
    inner: Region = None
    net: tuple = ()
    radius: float = 0.0

    def base_margin(self, x: Point) -> float:
        near = min(distance(self.space, x, p) for p in self.net)
        return min(self.inner.margin(x), self.radius - near)

    @property
    def peak(self) -> float:
        return min(self.inner.peak, self.radius) - self.offset

    def shrunk(self, r: float) -> "ClippedRegion":
        return _replace_offset(self, r)

    def sample(self, k: int) -> list:
        return [p for p in self.inner.sample(k) if self.margin(p) > 0]


def ball_contained(region: Region, x: Point, r: float) -> bool:
    """True iff the open r-ball at x is certified inside the region."""
    if r < 0:
        raise ValueError("radius must be nonnegative")
    return region.margin(x) >= r


def shrink_region(region: Region, r: float) -> Region:
    """Region of points whose r-ball fits in the original (margin drops by r)."""
    if r <= 0:
        raise ValueError("shrink radius must be positive")
    return region.shrunk(r)


def hausdorff_distance(space: Space, A: Iterable[Point], B: Iterable[Point]) -> float:
    """Hausdorff distance between two finite nonempty point sets."""
    A, B = list(A), list(B)
    if not A or not B:
        raise EmptySetError("hausdorff_distance needs non-empty sets")
    d_ab = max(min(distance(space, a, b) for b in B) for a in A)
    d_ba = max(min(distance(space, a, b) for a in A) for b in B)
    return max(d_ab, d_ba)


def lebesgue_number(regions: Sequence[Region], net: Sequence[Point]) -> tuple[float, Point | None]:
    """Margin-certified Lebesgue number of a cover over a finite net.

    Returns (value, witness) where witness is a worst point; value <= 0 means
    some net point is not certified inside any region.
    """
    worst, witness = math.inf, None
    for x in net:
        best = max((reg.margin(x) for reg in regions), default=-math.inf)
        if best < worst:
            worst, witness = best, x
    return worst, witness
