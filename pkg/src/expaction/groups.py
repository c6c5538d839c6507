"""Words over symmetric generating sets, word metrics, boundary prefixes.

Supported presentation kinds:

* ``free``: reduced letter sequences, exact word metric;
* ``free_abelian``: exponent vectors, L1 word metric;
* ``cyclic``: a single exponent;
* ``product_swap``: pairs of component words with an optional swap bit
  (the swap conjugates by exchanging the factors);
* ``generic``: free reduction for storage, breadth-first word metric up to a
  cap (Unknown beyond it).

Letters serialize as strings: "a" is a generator, "A" its inverse.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Any, Iterable, Optional, Sequence

FREE = "free"
FREE_ABELIAN = "free_abelian"
CYCLIC = "cyclic"
PRODUCT_SWAP = "product_swap"
GENERIC = "generic"

_EXACT_KINDS = {FREE, FREE_ABELIAN, CYCLIC, PRODUCT_SWAP}


class AlphabetMismatchError(ValueError):
    """Raised when combining words over different alphabets."""


@dataclass(frozen=True)
class Alphabet:
    """Symmetric generating set: each named generator comes with its inverse."""

    kind: str
    names: tuple
    parts: tuple = None  # (Alphabet, Alphabet) for product kinds
    has_swap: bool = False

    @staticmethod
    def free(rank: int, names: Sequence[str] | None = None) -> "Alphabet":
        names = tuple(names) if names else tuple("abcdefghijklmnopqrstuvwxyz"[:rank])
        return Alphabet(FREE, names)

    @staticmethod
    def free_abelian(rank: int, names: Sequence[str] | None = None) -> "Alphabet":
        names = tuple(names) if names else tuple(f"g{i + 1}" for i in range(rank))
        return Alphabet(FREE_ABELIAN, names)

    @staticmethod
    def cyclic(name: str = "g") -> "Alphabet":
        return Alphabet(CYCLIC, (name,))

    @staticmethod
    def product(first: "Alphabet", second: "Alphabet", with_swap: bool) -> "Alphabet":
        names = tuple(f"L.{n}" for n in first.names) + tuple(f"R.{n}" for n in second.names)
        if with_swap:
            names = names + ("swap",)
        return Alphabet(PRODUCT_SWAP, names, parts=(first, second), has_swap=with_swap)

    @staticmethod
    def generic(names: Sequence[str]) -> "Alphabet":
        return Alphabet(GENERIC, tuple(names))

    @property
    def rank(self) -> int:
        return len(self.names)

    def identity(self) -> "Word":
        if self.kind in (FREE, GENERIC):
            return Word(self, ())
        if self.kind == FREE_ABELIAN:
            return Word(self, (0,) * self.rank)
        if self.kind == CYCLIC:
            return Word(self, 0)
        if self.kind == PRODUCT_SWAP:
            return Word(self, (self.parts[0].identity(), self.parts[1].identity(), 0))
        raise ValueError(self.kind)

    def generator(self, index: int, sign: int = 1) -> "Word":
        if sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        if self.kind in (FREE, GENERIC):
            return Word(self, ((index, sign),))
        if self.kind == FREE_ABELIAN:
            vec = [0] * self.rank
            vec[index] = sign
            return Word(self, tuple(vec))
        if self.kind == CYCLIC:
            if index != 0:
                raise ValueError("cyclic groups have a single generator")
            return Word(self, sign)
        if self.kind == PRODUCT_SWAP:
            n1 = self.parts[0].rank
            if self.has_swap and index == self.rank - 1:
                return Word(self, (self.parts[0].identity(), self.parts[1].identity(), 1))
            if index < n1:
                return Word(self, (self.parts[0].generator(index, sign), self.parts[1].identity(), 0))
            return Word(self, (self.parts[0].identity(), self.parts[1].generator(index - n1, sign), 0))
        raise ValueError(self.kind)

    def symmetric_generators(self) -> list:
        """All generators and inverses (the swap is its own inverse)."""
        gens = []
        for i in range(self.rank):
            if self.kind == PRODUCT_SWAP and self.has_swap and i == self.rank - 1:
                gens.append(self.generator(i, 1))
            else:
                gens.append(self.generator(i, 1))
                gens.append(self.generator(i, -1))
        return gens


def _reduce_letters(letters: Iterable[tuple]) -> tuple:
    out = []
    for idx, sign in letters:
        if out and out[-1][0] == idx and out[-1][1] == -sign:
            out.pop()
        else:
            out.append((idx, sign))
    return tuple(out)


@dataclass(frozen=True)
class Word:
    """Group element in canonical form for its presentation kind."""

    alphabet: Alphabet
    data: Any

    def __post_init__(self):
        if self.alphabet.kind in (FREE, GENERIC):
            object.__setattr__(self, "data", _reduce_letters(self.data))

    def is_identity(self) -> bool:
        return self == self.alphabet.identity()

    def __str__(self) -> str:
        return to_str(self)


def _check_same_alphabet(u: Word, v: Word) -> None:
    if u.alphabet != v.alphabet:
        raise AlphabetMismatchError("words over different alphabets")


def multiply(u: Word, v: Word) -> Word:
    """Canonical form of the product u*v."""
    _check_same_alphabet(u, v)
    kind = u.alphabet.kind
    if kind in (FREE, GENERIC):
        return Word(u.alphabet, u.data + v.data)
    if kind == FREE_ABELIAN:
        return Word(u.alphabet, tuple(a + b for a, b in zip(u.data, v.data)))
    if kind == CYCLIC:
        return Word(u.alphabet, u.data + v.data)
    if kind == PRODUCT_SWAP:
        u1, u2, b = u.data
        v1, v2, c = v.data
        if b == 0:
            return Word(u.alphabet, (multiply(u1, v1), multiply(u2, v2), c))
        # a trailing swap conjugates the right factor pair
        return Word(u.alphabet, (multiply(u1, v2), multiply(u2, v1), 1 - c))
    raise ValueError(kind)


def inverse(u: Word) -> Word:
    kind = u.alphabet.kind
    if kind in (FREE, GENERIC):
        return Word(u.alphabet, tuple((i, -s) for i, s in reversed(u.data)))
    if kind == FREE_ABELIAN:
        return Word(u.alphabet, tuple(-a for a in u.data))
    if kind == CYCLIC:
        return Word(u.alphabet, -u.data)
    if kind == PRODUCT_SWAP:
        u1, u2, b = u.data
        if b == 0:
            return Word(u.alphabet, (inverse(u1), inverse(u2), 0))
        return Word(u.alphabet, (inverse(u2), inverse(u1), 1))
    raise ValueError(kind)


def word_length(u: Word) -> int:
    kind = u.alphabet.kind
    if kind in (FREE, GENERIC):
        return len(u.data)
    if kind == FREE_ABELIAN:
        return sum(abs(a) for a in u.data)
    if kind == CYCLIC:
        return abs(u.data)
    if kind == PRODUCT_SWAP:
        u1, u2, b = u.data
        return word_length(u1) + word_length(u2) + b
    raise ValueError(kind)


def word_metric(u: Word, v: Word, cap: int = 12) -> Optional[int]:
    """Exact word metric for exact kinds; BFS up to `cap` for generic words.

    Returns None (Unknown) when the BFS cap is exceeded.
    """
    _check_same_alphabet(u, v)
    if cap < 0:
        raise ValueError("cap must be nonnegative")
    w = multiply(inverse(u), v)
    if u.alphabet.kind in _EXACT_KINDS:
        return word_length(w)
    if w.is_identity():
        return 0
    gens = u.alphabet.symmetric_generators()
    seen = {u.alphabet.identity()}
    frontier = deque([(u.alphabet.identity(), 0)])
    while frontier:
        g, d = frontier.popleft()
        if d >= cap:
            continue
        for s in gens:
            h = multiply(g, s)
            if h in seen:
                continue
            if h == w:
                return d + 1
            seen.add(h)
            frontier.append((h, d + 1))
    return None


def letters_of(u: Word) -> tuple:
    """A letter sequence multiplying to u, as (generator index, sign) pairs."""
    kind = u.alphabet.kind
    if kind in (FREE, GENERIC):
        return u.data
    if kind == FREE_ABELIAN:
        out = []
        for i, e in enumerate(u.data):
            out.extend([(i, 1 if e > 0 else -1)] * abs(e))
        return tuple(out)
    if kind == CYCLIC:
        return tuple([(0, 1 if u.data > 0 else -1)] * abs(u.data))
    raise ValueError(f"letter sequences not defined for kind {kind}")


def to_str(u: Word) -> str:
    kind = u.alphabet.kind
    if kind in (FREE, GENERIC):
        if not u.data:
            return "e"
        return "".join(
            u.alphabet.names[i] if s > 0 else u.alphabet.names[i].upper()
            for i, s in u.data
        )
    if kind == FREE_ABELIAN:
        return "(" + ",".join(str(a) for a in u.data) + ")"
    if kind == CYCLIC:
        return f"{u.alphabet.names[0]}^{u.data}"
    if kind == PRODUCT_SWAP:
        u1, u2, b = u.data
        return f"({to_str(u1)}|{to_str(u2)}|{'s' if b else '.'})"
    raise ValueError(kind)


def parse(alphabet: Alphabet, text: str) -> Word:
    """Inverse of to_str for free/generic and cyclic kinds."""
    if alphabet.kind in (FREE, GENERIC):
        if text in ("", "e"):
            return alphabet.identity()
        letters = []
        for ch in text:
            low = ch.lower()
            if low not in alphabet.names:
                raise ValueError(f"unknown letter {ch!r}")
            letters.append((alphabet.names.index(low), 1 if ch.islower() else -1))
        return Word(alphabet, tuple(letters))
    if alphabet.kind == CYCLIC:
        name, _, exp = text.partition("^")
        if name != alphabet.names[0]:
            raise ValueError(f"unknown generator {name!r}")
        return Word(alphabet, int(exp or "1"))
    raise ValueError(f"parsing not defined for kind {alphabet.kind}")


# ---------------------------------------------------------------------------
# boundary prefixes


@dataclass(frozen=True)
class BoundaryWord:
    """Finite approximation of a boundary point: a reduced prefix."""

    prefix: Word
    stabilized: bool = True

    @property
    def depth(self) -> int:
        return word_length(self.prefix)


def _common_prefix_words(u: Word, v: Word) -> Word:
    out = []
    for a, b in zip(u.data, v.data):
        if a != b:
            break
        out.append(a)
    return Word(u.alphabet, tuple(out))


def boundary_prefix(ray: Sequence[Word], depth: int) -> BoundaryWord:
    """Stabilized prefix of a quasigeodesic ray, truncated to `depth`.

    Agreement is taken over the tail window (the last quarter of the ray, at
    least two words).  The result is flagged unstabilized when the agreed
    prefix stops short of `depth` although the final word is long enough.
    """
    if not ray:
        raise ValueError("empty ray")
    alphabet = ray[0].alphabet
    if alphabet.kind == FREE or alphabet.kind == GENERIC:
        window = max(2, math.ceil(len(ray) / 4))
        tail = list(ray[-window:])
        agreed = tail[0]
        for w in tail[1:]:
            agreed = _common_prefix_words(agreed, w)
        prefix = Word(alphabet, agreed.data[:depth])
        stab = word_length(prefix) >= depth or word_length(ray[-1]) < depth
        return BoundaryWord(prefix, stab)
    if alphabet.kind == CYCLIC:
        window = max(2, math.ceil(len(ray) / 4))
        exps = [w.data for w in ray[-window:]]
        drift = exps[-1] - exps[0]
        if drift == 0:
            return BoundaryWord(alphabet.identity(), False)
        sign = 1 if drift > 0 else -1
        return BoundaryWord(Word(alphabet, sign * depth), True)
    raise ValueError(
        f"boundary prefixes are defined for free and cyclic kinds, not {alphabet.kind}"
    )


def free_word_to_prefix_str(u: Word) -> str:
    """Free word as a boundary prefix string ('a' generator, 'A' inverse)."""
    if u.alphabet.kind not in (FREE, GENERIC):
        raise ValueError("prefix strings are for free-kind words")
    return "".join(
        u.alphabet.names[i] if s > 0 else u.alphabet.names[i].upper() for i, s in u.data
    )
