"""Subshifts of finite type: points, the shift, the metric, periodic orbits, closing.

Points are eventually periodic bi-infinite sequences

    ... L L L C R R R ...

with coordinate 0 at ``center[origin_offset]`` (the offset may point outside the
center, e.g. for purely periodic points whose center is empty).  The metric is
``d(x, y) = exp(-min{|i| : x_i != y_i})``.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .errors import DomainError, InternalInvariantError, ResourceLimitError

Word = tuple

DEFAULT_N_MAX = 18


def primitive_root(word: Word) -> Word:
    n = len(word)
    for p in range(1, n + 1):
        if n % p == 0 and word == word[:p] * (n // p):
            return word[:p]
    return word


def minimal_rotation(word: Word) -> Word:
    return min(word[i:] + word[:i] for i in range(len(word)))


class SftSystem:
    """A subshift of finite type given by a 0/1 transition matrix.

    ``closing_constants`` are the ``(c, theta)`` of the closing inequality; with the
    base-e metric, ``(1, 1)`` is valid for every SFT when the connector is the
    shortest admissible word (see :func:`calibrate_closing_constant`).
    """

    def __init__(self, transitions, closing_constants=(1.0, 1.0), n_max: int = DEFAULT_N_MAX,
                 name: str = ""):
        m = np.asarray(transitions)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
            raise DomainError("transition matrix must be square and nonempty")
        if not np.all((m == 0) | (m == 1)):
            raise DomainError("transition matrix entries must be 0 or 1")
        self.transitions = m.astype(np.int64)
        self.transitions.setflags(write=False)
        self.alphabet_size = int(m.shape[0])
        self.n_max = int(n_max)
        c, theta = closing_constants
        if c <= 0 or theta <= 0:
            raise DomainError("closing constants must be positive")
        self.closing_constants = (float(c), float(theta))
        self.name = name
        self.successors = tuple(tuple(int(b) for b in np.flatnonzero(row)) for row in self.transitions)
        self._connectors = self._all_connectors()
        self.connection_bound = max(len(w) for w in self._connectors.values())

    def __repr__(self):
        rows = ",".join("".join(str(int(v)) for v in row) for row in self.transitions)
        return f"SftSystem({self.name or rows})"

    @classmethod
    def full_shift(cls, k: int = 2, **kw) -> "SftSystem":
        kw.setdefault("name", f"full-{k}-shift")
        return cls(np.ones((k, k), dtype=int), **kw)

    @classmethod
    def golden_mean(cls, **kw) -> "SftSystem":
        kw.setdefault("name", "golden-mean")
        return cls([[1, 1], [1, 0]], **kw)

    def allowed(self, a: int, b: int) -> bool:
        return bool(self.transitions[a, b])

    def _all_connectors(self) -> dict:
        # BFS from every symbol; connector(a, b) is the interior of a shortest path a -> b
        out = {}
        for a in range(self.alphabet_size):
            parent = {}
            queue = deque()
            for s in self.successors[a]:
                if s not in parent:
                    parent[s] = None
                    queue.append(s)
            while queue:
                u = queue.popleft()
                for v in self.successors[u]:
                    if v not in parent:
                        parent[v] = u
                        queue.append(v)
            for b in range(self.alphabet_size):
                if b not in parent:
                    raise DomainError(f"transition matrix is not irreducible: {b} unreachable from {a}")
                path = []
                u = parent[b]
                while u is not None:
                    path.append(u)
                    u = parent[u]
                out[(a, b)] = tuple(reversed(path))
        return out

    def connector(self, a: int, b: int) -> Word:
        """Shortest word ``w`` with ``a w b`` admissible."""
        return self._connectors[(a, b)]

    def is_admissible(self, word: Sequence[int]) -> bool:
        if any(not 0 <= s < self.alphabet_size for s in word):
            return False
        return all(self.transitions[a, b] for a, b in zip(word, word[1:]))

    def is_cyclically_admissible(self, word: Sequence[int]) -> bool:
        return len(word) > 0 and self.is_admissible(word) and bool(self.transitions[word[-1], word[0]])

    def fixed_point_count(self, n: int) -> int:
        return int(np.trace(np.linalg.matrix_power(self.transitions, n)))

    def point(self, left_period, center, right_period, origin_offset: int = 0) -> "Point":
        p = Point(tuple(left_period), tuple(center), tuple(right_period), int(origin_offset), system=self)
        self.check_point(p)
        return p

    def check_point(self, x: "Point"):
        seq = list(x.left_period) + list(x.center) + list(x.right_period)
        if not (self.is_cyclically_admissible(x.left_period) and self.is_cyclically_admissible(x.right_period)
                and self.is_admissible(seq)):
            raise DomainError(f"point {x} is not admissible in {self!r}")

    def random_word(self, rng: np.random.Generator, length: int, start: int | None = None) -> Word:
        if length <= 0:
            return ()
        s = int(rng.integers(self.alphabet_size)) if start is None else start
        word = [s]
        for _ in range(length - 1):
            succ = self.successors[word[-1]]
            word.append(succ[int(rng.integers(len(succ)))])
        return tuple(word)

    def random_cycle(self, rng: np.random.Generator, length: int) -> Word:
        """Random cyclically admissible word of length >= ``length``."""
        walk = self.random_word(rng, max(length, 1))
        return walk + self.connector(walk[-1], walk[0])

    def random_point(self, rng: np.random.Generator, center_max: int = 8, period_max: int = 6) -> "Point":
        left = self.random_cycle(rng, int(rng.integers(1, period_max + 1)))
        clen = int(rng.integers(0, center_max + 1))
        succ = self.successors[left[-1]]
        first = succ[int(rng.integers(len(succ)))]
        center = self.random_word(rng, clen, start=first) if clen else ()
        last = center[-1] if center else left[-1]
        succ = self.successors[last]
        rstart = succ[int(rng.integers(len(succ)))]
        walk = self.random_word(rng, int(rng.integers(1, period_max + 1)), start=rstart)
        right = walk + self.connector(walk[-1], walk[0])
        offset = int(rng.integers(-2, clen + 3))
        return self.point(left, center, right, offset)


@dataclass(frozen=True, init=False)
class Point:
    left_period: Word
    center: Word
    right_period: Word
    origin_offset: int
    system: SftSystem | None = field(default=None, compare=False, repr=False)

    def __init__(self, left_period, center, right_period, origin_offset=0, system=None):
        if not left_period or not right_period:
            raise DomainError("periods must be nonempty words")
        L, C, R, off = _canonical(tuple(left_period), tuple(center), tuple(right_period), int(origin_offset))
        object.__setattr__(self, "left_period", L)
        object.__setattr__(self, "center", C)
        object.__setattr__(self, "right_period", R)
        object.__setattr__(self, "origin_offset", off)
        object.__setattr__(self, "system", system)

    @classmethod
    def periodic(cls, word, system=None) -> "Point":
        word = tuple(word)
        return cls(word, (), word, 0, system=system)

    def symbol(self, i: int) -> int:
        j = i + self.origin_offset
        nc = len(self.center)
        if j < 0:
            return self.left_period[j % len(self.left_period)]
        if j < nc:
            return self.center[j]
        return self.right_period[(j - nc) % len(self.right_period)]

    def window(self, start: int, stop: int) -> Word:
        return tuple(self.symbol(i) for i in range(start, stop))

    def shifted(self, m: int) -> "Point":
        return Point(self.left_period, self.center, self.right_period, self.origin_offset + m, system=self.system)

    @property
    def is_periodic(self) -> bool:
        return not self.center and self.left_period == self.right_period and self.origin_offset == 0

    @property
    def period(self) -> int | None:
        return len(self.right_period) if self.is_periodic else None

    def extent(self) -> int:
        """Radius beyond which both sides are inside the periodic tails."""
        return abs(self.origin_offset) + len(self.center) + 1

    def key(self) -> tuple:
        return (self.left_period, self.center, self.right_period, self.origin_offset)

    def __str__(self):
        def w(t):
            return "".join(map(str, t)) if all(s < 10 for s in t) else ",".join(map(str, t))
        return f"({w(self.left_period)})^inf.{w(self.center)}({w(self.right_period)})^inf@{self.origin_offset}"


def _canonical(L: Word, C: Word, R: Word, offset: int):
    L = primitive_root(L)
    R = primitive_root(R)
    c0 = -offset
    r0 = c0 + len(C)

    def s(i):
        if i < c0:
            return L[(i - c0) % len(L)]
        if i < r0:
            return C[i - c0]
        return R[(i - r0) % len(R)]

    def lp(i):
        return L[(i - c0) % len(L)]

    def rp(i):
        return R[(i - r0) % len(R)]

    span = math.lcm(len(L), len(R))
    a = None
    for i in range(c0, r0 + span):
        if s(i) != lp(i):
            a = i
            break
    if a is None:
        word = tuple(s(t) for t in range(len(L)))
        return word, (), word, 0
    b = r0
    while s(b - 1) == rp(b - 1):
        b -= 1
        if b < c0 - span:
            raise InternalInvariantError("left-periodic scan did not terminate")
    c = max(a, b)
    L2 = tuple(s(a - len(L) + t) for t in range(len(L)))
    C2 = tuple(s(i) for i in range(a, c))
    R2 = tuple(s(c + t) for t in range(len(R)))
    return L2, C2, R2, -a


def _same_system(x: Point, y: Point):
    if x.system is not None and y.system is not None and x.system is not y.system:
        raise DomainError("points belong to different systems")


def point_distance(x: Point, y: Point) -> float:
    """``exp(-s)`` with ``s`` the smallest ``|i|`` where the sequences differ; 0 if equal."""
    _same_system(x, y)
    s = separation(x, y)
    return 0.0 if s is None else math.exp(-s)


def separation(x: Point, y: Point) -> int | None:
    """Smallest ``|i|`` with ``x_i != y_i``; ``None`` for identical sequences."""
    if x == y:
        return None
    bound = (max(x.extent(), y.extent())
             + math.lcm(len(x.left_period), len(y.left_period))
             + math.lcm(len(x.right_period), len(y.right_period)) + 1)
    for s in range(bound + 1):
        if x.symbol(s) != y.symbol(s) or x.symbol(-s) != y.symbol(-s):
            return s
    raise InternalInvariantError(f"distinct canonical points {x} and {y} agree on a full window")


def shift(x: Point, m: int) -> Point:
    return x.shifted(m)


@dataclass(frozen=True)
class PeriodicOrbit:
    """A point of ``Fix(sigma^n)`` given by its repeating word (not necessarily primitive)."""

    word: Word
    system: SftSystem | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "word", tuple(self.word))
        if not self.word:
            raise DomainError("empty periodic word")
        if self.system is not None and not self.system.is_cyclically_admissible(self.word):
            raise DomainError(f"word {self.word} is not cyclically admissible")

    @property
    def period(self) -> int:
        return len(self.word)

    def point(self) -> Point:
        return Point.periodic(self.word, system=self.system)

    def rotation(self, i: int) -> "PeriodicOrbit":
        i %= self.period
        return PeriodicOrbit(self.word[i:] + self.word[:i], self.system)

    def points(self) -> list[Point]:
        return [self.rotation(i).point() for i in range(self.period)]

    def canonical_word(self) -> Word:
        return minimal_rotation(self.word)

    def __str__(self):
        return "(" + "".join(map(str, self.word)) + ")^inf"


@dataclass(frozen=True)
class PeriodicMeasure:
    orbit: PeriodicOrbit

    @property
    def support(self) -> list[Point]:
        return self.orbit.points()

    @property
    def weights(self) -> np.ndarray:
        n = self.orbit.period
        return np.full(n, 1.0 / n)

    def integrate(self, fn) -> float:
        return float(sum(w * fn(p) for w, p in zip(self.weights, self.support)))


def _cyclic_words(sys: SftSystem, n: int) -> Iterator[Word]:
    # depth-first in lexicographic order
    for first in range(sys.alphabet_size):
        stack = [(first,)]
        while stack:
            w = stack.pop()
            if len(w) == n:
                if sys.allowed(w[-1], first):
                    yield w
                continue
            for s in reversed(sys.successors[w[-1]]):
                stack.append(w + (s,))


def enumerate_periodic(sys: SftSystem, n: int) -> list[PeriodicOrbit]:
    """All points of ``Fix(sigma^n)``, one per cyclically admissible word, lexicographic."""
    if n < 1:
        raise DomainError("period must be >= 1")
    if n > sys.n_max:
        raise ResourceLimitError(f"period {n} exceeds N_max={sys.n_max}")
    return [PeriodicOrbit(w, sys) for w in _cyclic_words(sys, n)]


def enumerate_orbits(sys: SftSystem, n: int) -> list[PeriodicOrbit]:
    """One representative (least rotation) per orbit class of ``Fix(sigma^n)``."""
    seen = {}
    for orb in enumerate_periodic(sys, n):
        seen.setdefault(orb.canonical_word(), orb)
    return [PeriodicOrbit(w, sys) for w in sorted(seen)]


def periodic_points_upto(sys: SftSystem, N: int) -> list[Point]:
    """Every point lying on a periodic orbit of period <= N, deduplicated, deterministic order."""
    out, seen = [], set()
    for n in range(1, N + 1):
        for orb in enumerate_periodic(sys, n):
            p = orb.point()
            if p not in seen:
                seen.add(p)
                out.append(p)
    return out


@dataclass
class ClosingReport:
    n: int
    j: int
    return_distance: float
    c: float
    theta: float
    rows: list  # (i, d(f^i x, f^i p), bound)
    verified: bool

    @property
    def worst_ratio(self) -> float:
        r = 0.0
        for _, dist, bound in self.rows:
            if dist > 0:
                r = max(r, dist / bound if bound > 0 else math.inf)
        return r


def close_orbit(sys: SftSystem, x: Point, n: int):
    """Shadow ``x_0 .. x_{n-1}`` by the periodic point of that block plus a shortest connector.

    Returns ``(orbit, j, report)``; ``report.verified`` states the closing inequality
    at every ``i = 0..n`` with the system's frozen ``(c, theta)``.
    """
    if n < 1:
        raise DomainError("n must be >= 1")
    if x.system is not None and x.system is not sys:
        raise DomainError("point belongs to a different system")
    block = x.window(0, n)
    try:
        w = sys.connector(block[-1], block[0])
    except KeyError as exc:
        raise InternalInvariantError("no admissible connecting word") from exc
    orbit = PeriodicOrbit(block + w, sys)
    p = orbit.point()
    c, theta = sys.closing_constants
    ret = point_distance(x.shifted(n), x)
    rows, ok = [], True
    for i in range(n + 1):
        dist = point_distance(x.shifted(i), p.shifted(i))
        bound = c * math.exp(-theta * min(i, n - i)) * ret
        ok &= dist <= bound * (1 + 1e-12)
        rows.append((i, dist, bound))
    return orbit, len(w), ClosingReport(n, len(w), ret, c, theta, rows, bool(ok))


def calibrate_closing_constant(sys: SftSystem, trials: int = 500, n_max: int = 30, seed: int = 0,
                               theta: float = 1.0) -> float:
    """Smallest ``c`` making every sampled closing case verify (for the given theta)."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        x = sys.random_point(rng)
        n = int(rng.integers(1, n_max + 1))
        block = x.window(0, n)
        p = Point.periodic(block + sys.connector(block[-1], block[0]), sys)
        ret = point_distance(x.shifted(n), x)
        for i in range(n + 1):
            dist = point_distance(x.shifted(i), p.shifted(i))
            if dist == 0:
                continue
            if ret == 0:
                return math.inf
            worst = max(worst, dist / (math.exp(-theta * min(i, n - i)) * ret))
    return worst
