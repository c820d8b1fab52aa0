"""Exact matrix algebra and finitely presented modules.

Everything here works over one of three base rings: the integers, the
rationals, or a prime field.  A fourth ring, the integers localized at a
prime, exists only so that :func:`localize_at_prime` has somewhere to put its
answer.

Conventions
-----------
Matrices are ``numpy`` arrays of ``dtype=object`` holding Python ``int`` or
``Fraction`` values, so arithmetic is exact.  Module elements are *column*
vectors on a chosen generating set; a homomorphism ``M -> N`` is a matrix with
``N.ngens`` rows and ``M.ngens`` columns.

A module is stored as a direct sum of cyclic modules ``R/(o_1) + ... +
R/(o_k)``, one order per generator (``0`` means a free summand).  Orders are
never units, so the generators are all nonzero.  Coordinates are kept reduced
modulo their orders, which makes element equality a plain comparison.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, reduce
from typing import NamedTuple, Optional, Sequence

import numpy as np

Mat = np.ndarray


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    f = 3
    while f * f <= n:
        if n % f == 0:
            return False
        f += 2
    return True


def prime_factors(n: int) -> list[int]:
    n = abs(n)
    out = []
    f = 2
    while f * f <= n:
        if n % f == 0:
            out.append(f)
            while n % f == 0:
                n //= f
        f += 1
    if n > 1:
        out.append(n)
    return out


def _valuation(x: int, p: int) -> int:
    v = 0
    while x % p == 0:
        x //= p
        v += 1
    return v


@dataclass(frozen=True)
class Ring:
    """One of the supported coefficient rings.

    ``kind`` is ``"Z"``, ``"Q"``, ``"Fp"`` (with prime ``p``) or ``"Zloc"``
    (the integers localized at the prime ``p``).
    """

    kind: str
    p: int = 0

    def __post_init__(self):
        if self.kind not in ("Z", "Q", "Fp", "Zloc"):
            raise ValueError(f"unknown ring kind {self.kind!r}")
        if self.kind in ("Fp", "Zloc") and not is_prime(self.p):
            raise ValueError(f"{self.p} is not prime")

    def __str__(self):
        return {"Z": "Z", "Q": "Q", "Fp": f"F{self.p}", "Zloc": f"Z_({self.p})"}[self.kind]

    @classmethod
    def parse(cls, text: str) -> "Ring":
        """Parse ``Z``, ``Q`` or ``Fp:<p>``."""
        t = text.strip()
        if t == "Z":
            return ZZ
        if t == "Q":
            return QQ
        if t.startswith("Fp:") or t.startswith("F"):
            digits = t[3:] if t.startswith("Fp:") else t[1:]
            try:
                return cls("Fp", int(digits))
            except ValueError as exc:
                raise ValueError(f"bad ring {text!r}: {exc}") from None
        raise ValueError(f"bad ring {text!r}; expected Z, Q or Fp:<p>")

    @property
    def is_field(self) -> bool:
        return self.kind in ("Q", "Fp")

    # element arithmetic -------------------------------------------------

    def coerce(self, x):
        if self.kind == "Z":
            if isinstance(x, Fraction):
                if x.denominator != 1:
                    raise ValueError(f"{x} is not an integer")
                return int(x)
            return int(x)
        if self.kind == "Fp":
            if isinstance(x, Fraction):
                return x.numerator * pow(x.denominator, -1, self.p) % self.p
            return int(x) % self.p
        x = Fraction(x)
        if self.kind == "Zloc" and x.denominator % self.p == 0:
            raise ValueError(f"{x} is not in {self}")
        return x

    def fix(self, a: Mat) -> Mat:
        """Bring the entries of an integer-arithmetic result back into the ring."""
        if self.kind == "Fp":
            return a % self.p
        return a

    def is_unit(self, a) -> bool:
        if self.kind == "Z":
            return a == 1 or a == -1
        if self.kind == "Zloc":
            return a != 0 and Fraction(a).numerator % self.p != 0
        return a != 0

    def size(self, a) -> int:
        """Euclidean size used for pivot choice; zero only for zero."""
        if a == 0:
            return 0
        if self.kind == "Z":
            return abs(a)
        if self.kind == "Zloc":
            return _valuation(Fraction(a).numerator, self.p) + 1
        return 1

    def inv(self, u):
        if self.kind == "Z":
            return u
        if self.kind == "Fp":
            return pow(u, -1, self.p)
        return 1 / Fraction(u)

    def divmod(self, a, b):
        if self.kind == "Z":
            return divmod(a, b)
        if self.kind == "Zloc":
            if self.size(a) >= self.size(b):
                return Fraction(a) / b, Fraction(0)
            return Fraction(0), a
        return self.mul(a, self.inv(b)), self.zero

    def mul(self, a, b):
        if self.kind == "Fp":
            return a * b % self.p
        return a * b

    def unit_normalizer(self, a):
        """Unit ``u`` such that ``u * a`` is the canonical associate of ``a``."""
        if a == 0:
            return self.one
        if self.kind == "Z":
            return -1 if a < 0 else 1
        if self.kind == "Zloc":
            a = Fraction(a)
            v = _valuation(a.numerator, self.p)
            return Fraction(self.p**v) / a
        return self.inv(a)

    def canonical(self, a):
        return self.mul(self.unit_normalizer(a), a)

    def gcd(self, a, b):
        if self.kind == "Z":
            return math.gcd(a, b)
        if self.kind == "Zloc":
            if a == 0:
                return self.canonical(b)
            if b == 0:
                return self.canonical(a)
            return Fraction(self.p ** min(self.size(a), self.size(b)) // self.p)
        return self.one if (a != 0 or b != 0) else self.zero

    def divides(self, a, b) -> bool:
        """True when ``a`` divides ``b``."""
        if a == 0:
            return b == 0
        if self.is_field:
            return True
        if self.kind == "Z":
            return b % a == 0
        return b == 0 or self.size(a) <= self.size(b)

    def exact_div(self, b, a):
        if self.kind == "Z":
            q, r = divmod(b, a)
            if r:
                raise ArithmeticError(f"{a} does not divide {b}")
            return q
        if self.kind == "Fp":
            return b * pow(a, -1, self.p) % self.p
        return Fraction(b) / a

    def reduce(self, a, order):
        """Canonical representative of ``a`` modulo ``order`` (``0`` means no reduction)."""
        if order == 0:
            return a
        if self.kind == "Z":
            return a % order
        if self.kind == "Zloc":
            a = Fraction(a)
            m = int(order)
            return Fraction(a.numerator * pow(a.denominator, -1, m) % m)
        raise ValueError("nonzero order over a field")

    @property
    def zero(self):
        return Fraction(0) if self.kind in ("Q", "Zloc") else 0

    @property
    def one(self):
        return Fraction(1) if self.kind in ("Q", "Zloc") else 1

    def to_json(self, a):
        """Plain JSON-able form of an element (int, or ``"p/q"`` string)."""
        if isinstance(a, Fraction):
            return a.numerator if a.denominator == 1 else f"{a.numerator}/{a.denominator}"
        return int(a)


ZZ = Ring("Z")
QQ = Ring("Q")


def GF(p: int) -> Ring:
    return Ring("Fp", p)


# ---------------------------------------------------------------------------
# matrices


def zeros(rows: int, cols: int) -> Mat:
    return np.zeros((rows, cols), dtype=object)


def eye(n: int, ring: Ring = ZZ) -> Mat:
    m = zeros(n, n)
    for i in range(n):
        m[i, i] = ring.one
    return m


def as_mat(rows, ring: Ring = ZZ, shape: Optional[tuple[int, int]] = None) -> Mat:
    """Build an exact matrix from nested lists, coercing entries into ``ring``."""
    if isinstance(rows, np.ndarray) and rows.ndim == 2:
        out = np.empty(rows.shape, dtype=object)
        for idx, x in np.ndenumerate(rows):
            out[idx] = ring.coerce(x)
        return out
    rows = [list(r) for r in rows]
    if shape is None:
        if not rows:
            raise ValueError("cannot infer the shape of an empty matrix")
        shape = (len(rows), len(rows[0]))
    out = zeros(*shape)
    if len(rows) != shape[0] or any(len(r) != shape[1] for r in rows):
        raise ValueError(f"matrix entries do not match shape {shape}")
    for i, r in enumerate(rows):
        for j, x in enumerate(r):
            out[i, j] = ring.coerce(x)
    return out


def matmul(ring: Ring, *ms: Mat) -> Mat:
    return ring.fix(reduce(lambda a, b: a @ b, ms))


def hstack(blocks: Sequence[Mat], rows: int) -> Mat:
    blocks = [b for b in blocks if b.shape[1]]
    return np.hstack(blocks) if blocks else zeros(rows, 0)


def vstack(blocks: Sequence[Mat], cols: int) -> Mat:
    blocks = [b for b in blocks if b.shape[0]]
    return np.vstack(blocks) if blocks else zeros(0, cols)


def block_diag(blocks: Sequence[Mat]) -> Mat:
    r = sum(b.shape[0] for b in blocks)
    c = sum(b.shape[1] for b in blocks)
    out = zeros(r, c)
    i = j = 0
    for b in blocks:
        out[i:i + b.shape[0], j:j + b.shape[1]] = b
        i += b.shape[0]
        j += b.shape[1]
    return out


def det(m: Mat, ring: Ring = ZZ):
    """Exact determinant by Gaussian elimination over the rationals."""
    n = m.shape[0]
    if m.shape != (n, n):
        raise ValueError("determinant of a non-square matrix")
    if n == 0:
        return ring.one
    a = [[Fraction(x) for x in row] for row in m.tolist()]
    sign = 1
    for k in range(n):
        piv = next((i for i in range(k, n) if a[i][k] != 0), None)
        if piv is None:
            return ring.zero
        if piv != k:
            a[k], a[piv] = a[piv], a[k]
            sign = -sign
        for i in range(k + 1, n):
            f = a[i][k] / a[k][k]
            for j in range(k, n):
                a[i][j] -= f * a[k][j]
    d = Fraction(sign)
    for k in range(n):
        d *= a[k][k]
    return ring.coerce(d)


# ---------------------------------------------------------------------------
# Smith normal form


class SmithForm(NamedTuple):
    """``u @ m @ v == s`` with ``u``, ``v`` invertible and ``s`` diagonal.

    ``u_inv``/``v_inv`` are the inverses; any of the four transforms is
    ``None`` when it was not requested.
    """

    u: Optional[Mat]
    s: Mat
    v: Optional[Mat]
    u_inv: Optional[Mat]
    v_inv: Optional[Mat]
    rank: int

    @property
    def diagonal(self) -> list:
        return [self.s[i, i] for i in range(self.rank)]


def _xgcd(a: int, b: int) -> tuple[int, int, int]:
    """``(g, s, t)`` with ``s a + t b = g = gcd(a, b) > 0``."""
    s0, s1, t0, t1 = 1, 0, 0, 1
    while b:
        q, a, b = a // b, b, a % b
        s0, s1 = s1, s0 - q * s1
        t0, t1 = t1, t0 - q * t1
    if a < 0:
        a, s0, t0 = -a, -s0, -t0
    return a, s0, t0


def smith_form(m: Mat, ring: Ring = ZZ, left: bool = True, right: bool = True) -> SmithForm:
    """Smith normal form with unimodular transforms.

    Pivots are chosen with minimal Euclidean size to keep entries small.
    ``left`` tracks ``u`` and its inverse, ``right`` tracks ``v`` and its
    inverse.  Diagonal entries are canonical associates forming a
    divisibility chain.
    """
    rows, cols = m.shape
    A = [list(r) for r in ring.fix(m).tolist()]
    p = ring.p if ring.kind == "Fp" else 0
    euclid = ring.kind == "Z"
    U = [list(r) for r in eye(rows, ring).tolist()] if left else None
    Ui = [list(r) for r in eye(rows, ring).tolist()] if left else None
    V = [list(r) for r in eye(cols, ring).tolist()] if right else None
    Vi = [list(r) for r in eye(cols, ring).tolist()] if right else None

    def red(x):
        return x % p if p else x

    def row_sub(i, t, q):
        # row_i -= q * row_t
        A[i] = [red(a - q * b) for a, b in zip(A[i], A[t])]
        if left:
            U[i] = [red(a - q * b) for a, b in zip(U[i], U[t])]
            for r in Ui:
                r[t] = red(r[t] + q * r[i])

    def col_sub(j, t, q):
        # col_j -= q * col_t
        for r in A:
            r[j] = red(r[j] - q * r[t])
        if right:
            for r in V:
                r[j] = red(r[j] - q * r[t])
            Vi[t] = [red(a + q * b) for a, b in zip(Vi[t], Vi[j])]

    def row_mix(t, i, a, b, c, d):
        # (row_t, row_i) <- (a row_t + b row_i, c row_t + d row_i), with ad - bc = +-1
        det = a * d - b * c
        rt, ri = A[t], A[i]
        A[t] = [a * x + b * y for x, y in zip(rt, ri)]
        A[i] = [c * x + d * y for x, y in zip(rt, ri)]
        if left:
            ut, ui = U[t], U[i]
            U[t] = [a * x + b * y for x, y in zip(ut, ui)]
            U[i] = [c * x + d * y for x, y in zip(ut, ui)]
            for r in Ui:
                x, y = r[t], r[i]
                r[t], r[i] = (d * x - c * y) * det, (a * y - b * x) * det

    def col_mix(t, j, a, b, c, d):
        # (col_t, col_j) <- (a col_t + b col_j, c col_t + d col_j), with ad - bc = +-1
        det = a * d - b * c
        for r in A:
            x, y = r[t], r[j]
            r[t], r[j] = a * x + b * y, c * x + d * y
        if right:
            for r in V:
                x, y = r[t], r[j]
                r[t], r[j] = a * x + b * y, c * x + d * y
            vt, vj = Vi[t], Vi[j]
            Vi[t] = [(d * x - c * y) * det for x, y in zip(vt, vj)]
            Vi[j] = [(a * y - b * x) * det for x, y in zip(vt, vj)]

    def bezout(piv, x):
        # coefficients (a, b, c, d) sending (piv, x) to (g, 0)
        g, a, b = _xgcd(piv, x)
        return a, b, x // g, -(piv // g)

    def swap_rows(i, t):
        A[i], A[t] = A[t], A[i]
        if left:
            U[i], U[t] = U[t], U[i]
            for r in Ui:
                r[i], r[t] = r[t], r[i]

    def swap_cols(j, t):
        for r in A:
            r[j], r[t] = r[t], r[j]
        if right:
            for r in V:
                r[j], r[t] = r[t], r[j]
            Vi[j], Vi[t] = Vi[t], Vi[j]

    def diagonalize(start):
        t = start
        while t < min(rows, cols):
            best = None
            best_size = 0
            for i in range(t, rows):
                row = A[i]
                for j in range(t, cols):
                    x = row[j]
                    if x != 0:
                        s = ring.size(x)
                        if best is None or s < best_size:
                            best, best_size = (i, j), s
                            if ring.is_unit(x):
                                break
                if best is not None and ring.is_unit(A[best[0]][best[1]]):
                    break
            if best is None:
                return t
            if best[0] != t:
                swap_rows(best[0], t)
            if best[1] != t:
                swap_cols(best[1], t)
            while True:
                clean = True
                for i in range(t + 1, rows):
                    if A[i][t] != 0:
                        q, r = ring.divmod(A[i][t], A[t][t])
                        if r == 0:
                            row_sub(i, t, q)
                        elif euclid:
                            row_mix(t, i, *bezout(A[t][t], A[i][t]))
                            clean = False
                        else:
                            row_sub(i, t, q)
                            swap_rows(i, t)
                            clean = False
                for j in range(t + 1, cols):
                    if A[t][j] != 0:
                        q, r = ring.divmod(A[t][j], A[t][t])
                        if r == 0:
                            col_sub(j, t, q)
                        elif euclid:
                            col_mix(t, j, *bezout(A[t][t], A[t][j]))
                            clean = False
                        else:
                            col_sub(j, t, q)
                            swap_cols(j, t)
                            clean = False
                if clean and all(A[i][t] == 0 for i in range(t + 1, rows)):
                    break
            t += 1
        return t

    rank = diagonalize(0)
    if not ring.is_field:
        while True:
            bad = None
            for i in range(rank):
                for j in range(i + 1, rank):
                    if not ring.divides(A[i][i], A[j][j]):
                        bad = (i, j)
                        break
                if bad:
                    break
            if bad is None:
                break
            i, j = bad
            # row_i += row_j, then re-diagonalize from i
            A[i] = [a + b for a, b in zip(A[i], A[j])]
            if left:
                U[i] = [a + b for a, b in zip(U[i], U[j])]
                for r in Ui:
                    r[j] = r[j] - r[i]
            diagonalize(i)
    for t in range(rank):
        u = ring.unit_normalizer(A[t][t])
        if u != ring.one:
            A[t] = [red(u * a) for a in A[t]]
            if left:
                U[t] = [red(u * a) for a in U[t]]
                ui = ring.inv(u)
                for r in Ui:
                    r[t] = red(r[t] * ui)

    def pack(x, n, k):
        return as_mat(x, ring, shape=(n, k)) if x is not None else None

    return SmithForm(
        pack(U, rows, rows), as_mat(A, ring, shape=(rows, cols)), pack(V, cols, cols),
        pack(Ui, rows, rows), pack(Vi, cols, cols), rank,
    )


def snf(m: Mat, ring: Ring = ZZ) -> tuple[Mat, Mat, Mat]:
    """Return ``(u, s, v)`` with ``u @ m @ v == s`` in Smith normal form."""
    f = smith_form(m, ring)
    return f.u, f.s, f.v


def nullspace(m: Mat, ring: Ring = ZZ) -> Mat:
    """Basis (as columns) of ``{z : m z = 0}``; a lattice basis over Z."""
    f = smith_form(m, ring, left=False, right=True)
    return f.v[:, f.rank:]


class LinearSolver:
    """Solve ``m z = e`` exactly, reusing one Smith form for many right-hand sides."""

    def __init__(self, m: Mat, ring: Ring):
        self.m = m
        self.ring = ring
        self.form = smith_form(m, ring)

    def solve(self, e: Mat) -> Optional[Mat]:
        """A matrix ``z`` with ``m @ z == e`` column by column, or ``None``."""
        ring, f = self.ring, self.form
        rows, cols = self.m.shape
        if e.shape[0] != rows:
            raise ValueError("right-hand side has the wrong number of rows")
        w = matmul(ring, f.u, e)
        y = zeros(cols, e.shape[1])
        for i in range(rows):
            for c in range(e.shape[1]):
                x = w[i, c]
                if i < f.rank:
                    d = f.s[i, i]
                    if not ring.divides(d, x):
                        return None
                    y[i, c] = ring.exact_div(x, d)
                elif x != 0:
                    return None
        return matmul(ring, f.v, y)


# ---------------------------------------------------------------------------
# modules


@dataclass(frozen=True)
class FPModule:
    """A finitely presented module as a direct sum of cyclic modules.

    ``orders[i]`` is the order of generator ``i``: ``0`` for a free summand,
    otherwise a canonical nonunit.
    """

    ring: Ring
    orders: tuple = ()

    def __post_init__(self):
        for o in self.orders:
            if o != 0 and (self.ring.is_field or self.ring.is_unit(o)):
                raise ValueError(f"invalid cyclic order {o} over {self.ring}")

    @classmethod
    def free(cls, ring: Ring, n: int) -> "FPModule":
        return cls(ring, (ring.zero,) * n)

    @classmethod
    def zero_module(cls, ring: Ring) -> "FPModule":
        return cls(ring, ())

    @property
    def ngens(self) -> int:
        return len(self.orders)

    @property
    def free_rank(self) -> int:
        return sum(1 for o in self.orders if o == 0)

    @cached_property
    def invariant_factors(self) -> tuple:
        tors = [o for o in self.orders if o != 0]
        if not tors:
            return ()
        f = smith_form(np.diag(np.array(tors, dtype=object)), self.ring, left=False, right=False)
        return tuple(d for d in f.diagonal if not self.ring.is_unit(d))

    @property
    def presentation(self) -> Mat:
        """Relations x generators matrix (one row per torsion generator)."""
        rows = [i for i, o in enumerate(self.orders) if o != 0]
        out = zeros(len(rows), self.ngens)
        for r, i in enumerate(rows):
            out[r, i] = self.orders[i]
        return out

    @property
    def relation_columns(self) -> Mat:
        return self.presentation.T.copy()

    def is_zero(self) -> bool:
        return not self.orders

    def reduce(self, vecs: Mat) -> Mat:
        """Reduce columns of coordinate vectors to canonical representatives."""
        out = self.ring.fix(np.array(vecs, dtype=object, copy=True))
        if self.ring.kind == "Z":
            for i, o in enumerate(self.orders):
                if o != 0:
                    out[i, :] = out[i, :] % o
        elif self.ring.kind == "Zloc":
            for i, o in enumerate(self.orders):
                if o != 0:
                    for c in range(out.shape[1]):
                        out[i, c] = self.ring.reduce(out[i, c], o)
        return out

    def is_zero_element(self, vecs: Mat) -> bool:
        return not self.reduce(vecs).any()

    def describe(self) -> dict:
        r = self.ring
        return {"free_rank": self.free_rank, "invariant_factors": [r.to_json(d) for d in self.invariant_factors]}

    def isomorphic(self, other: "FPModule") -> bool:
        return (self.ring == other.ring and self.free_rank == other.free_rank
                and self.invariant_factors == other.invariant_factors)

    def __str__(self):
        parts = [str(self.ring)] * self.free_rank
        parts += [f"{self.ring}/{d}" for d in self.invariant_factors]
        return " + ".join(parts) if parts else "0"


@dataclass(frozen=True, eq=False)
class ModHom:
    """A homomorphism given by its matrix on the chosen generators."""

    source: FPModule
    target: FPModule
    matrix: Mat

    def __post_init__(self):
        shape = (self.target.ngens, self.source.ngens)
        if self.matrix.shape != shape:
            raise ValueError(f"matrix shape {self.matrix.shape} does not match {shape}")

    @classmethod
    def make(cls, source: FPModule, target: FPModule, matrix) -> "ModHom":
        m = matrix if isinstance(matrix, np.ndarray) else as_mat(matrix, source.ring, (target.ngens, source.ngens))
        return cls(source, target, target.reduce(m))

    @classmethod
    def identity(cls, m: FPModule) -> "ModHom":
        return cls(m, m, eye(m.ngens, m.ring))

    @classmethod
    def zero(cls, source: FPModule, target: FPModule) -> "ModHom":
        return cls(source, target, zeros(target.ngens, source.ngens))

    @property
    def ring(self) -> Ring:
        return self.source.ring

    def __call__(self, vecs: Mat) -> Mat:
        return self.target.reduce(matmul(self.ring, self.matrix, vecs))

    def compose(self, other: "ModHom") -> "ModHom":
        """``self`` after ``other``."""
        return ModHom(other.source, self.target, self.target.reduce(matmul(self.ring, self.matrix, other.matrix)))

    def is_well_defined(self) -> bool:
        rel = self.source.relation_columns
        return self.target.is_zero_element(matmul(self.ring, self.matrix, rel))

    def is_zero(self) -> bool:
        return not self.target.reduce(self.matrix).any()

    def equals(self, other: "ModHom") -> bool:
        return self.target.is_zero_element(self.matrix - other.matrix)

    @cached_property
    def _solver(self) -> LinearSolver:
        return LinearSolver(hstack([self.matrix, self.target.relation_columns], self.target.ngens), self.ring)

    def preimage(self, vecs: Mat) -> Optional[Mat]:
        """Columns ``x`` with ``self(x) == vecs``, or ``None`` if some column has none."""
        z = self._solver.solve(vecs)
        if z is None:
            return None
        return self.source.reduce(z[: self.source.ngens])


def present(ring: Ring, ngens: int, relations: Mat) -> tuple[FPModule, Mat, Mat]:
    """Normalize ``R^ngens / (column span of relations)``.

    Returns ``(module, to_new, from_new)``: ``to_new`` maps old coordinates to
    the new generators (a surjection), ``from_new`` sends each new generator to
    an old coordinate vector representing it.
    """
    rel = relations
    if rel.shape[0] != ngens:
        raise ValueError("relation matrix has the wrong number of rows")
    nz = [c for c in range(rel.shape[1]) if rel[:, c].any()]
    rel = rel[:, nz]
    # fast path: each relation is a nonunit multiple of a distinct generator
    simple = {}
    for c in range(rel.shape[1]):
        idx = [i for i in range(ngens) if rel[i, c] != 0]
        if len(idx) != 1 or idx[0] in simple or ring.is_unit(rel[idx[0], c]) or ring.is_field:
            simple = None
            break
        simple[idx[0]] = ring.canonical(rel[idx[0], c])
    if simple is not None:
        orders = tuple(simple.get(i, ring.zero) for i in range(ngens))
        mod = FPModule(ring, orders)
        return mod, eye(ngens, ring), eye(ngens, ring)
    f = smith_form(rel, ring, left=True, right=False)
    keep = []
    orders = []
    for i in range(ngens):
        d = f.s[i, i] if i < f.rank else ring.zero
        if i < f.rank and ring.is_unit(d):
            continue
        keep.append(i)
        orders.append(d)
    mod = FPModule(ring, tuple(orders))
    to_new = mod.reduce(f.u[keep, :])
    from_new = f.u_inv[:, keep]
    return mod, to_new, from_new


def submodule(m: FPModule, gens: Mat) -> tuple[FPModule, ModHom]:
    """The submodule of ``m`` generated by the columns of ``gens``, with its inclusion."""
    ring = m.ring
    g = m.reduce(gens)
    k = g.shape[1]
    if k == 0:
        s = FPModule.zero_module(ring)
        return s, ModHom.zero(s, m)
    rel = nullspace(hstack([g, m.relation_columns], m.ngens), ring)[:k, :]
    s, _, from_new = present(ring, k, rel)
    return s, ModHom(s, m, m.reduce(matmul(ring, g, from_new)))


def direct_sum(*mods: FPModule) -> FPModule:
    ring = mods[0].ring
    return FPModule(ring, tuple(o for m in mods for o in m.orders))


def kernel(h: ModHom) -> tuple[FPModule, ModHom]:
    """Kernel of ``h`` with its (injective) inclusion."""
    src, tgt, ring = h.source, h.target, h.ring
    if h.is_zero():
        return src, ModHom.identity(src)
    if src.ngens == 0:
        return src, ModHom.identity(src)
    null = nullspace(hstack([h.matrix, tgt.relation_columns], tgt.ngens), ring)
    return submodule(src, null[: src.ngens, :])


def image(h: ModHom) -> tuple[FPModule, ModHom]:
    return submodule(h.target, h.matrix)


class Cokernel(NamedTuple):
    module: FPModule
    projection: ModHom
    section: Mat  # target coordinates of a preimage of each cokernel generator


def cokernel(h: ModHom) -> Cokernel:
    """Cokernel of ``h`` with the projection from ``h.target``."""
    tgt, ring = h.target, h.ring
    if h.is_zero():
        return Cokernel(tgt, ModHom.identity(tgt), eye(tgt.ngens, ring))
    rel = hstack([h.matrix, tgt.relation_columns], tgt.ngens)
    q, to_new, from_new = present(ring, tgt.ngens, rel)
    return Cokernel(q, ModHom(tgt, q, to_new), from_new)


def solve(h: ModHom, target_elt) -> Optional[Mat]:
    """A preimage of ``target_elt`` under ``h`` (column vector), or ``None``."""
    e = target_elt if isinstance(target_elt, np.ndarray) else as_mat([[x] for x in target_elt], h.ring, (h.target.ngens, 1))
    if e.ndim == 1:
        e = e.reshape(-1, 1)
    return h.preimage(e)


def is_zero(m: FPModule) -> bool:
    return m.is_zero()


def is_surjective(h: ModHom) -> bool:
    if h.target.ngens == 0:
        return True
    rel = hstack([h.matrix, h.target.relation_columns], h.target.ngens)
    f = smith_form(rel, h.ring, left=False, right=False)
    return f.rank == h.target.ngens and all(h.ring.is_unit(d) for d in f.diagonal)


def is_injective(h: ModHom) -> bool:
    if h.source.ngens == 0:
        return True
    return kernel(h)[0].is_zero()


def is_iso(h: ModHom) -> bool:
    return is_surjective(h) and is_injective(h)


def multiplication(m: FPModule, scalar) -> ModHom:
    return ModHom(m, m, m.reduce(eye(m.ngens, m.ring) * scalar))


def annihilator(m: FPModule, scalar) -> tuple[FPModule, ModHom]:
    """Elements killed by ``scalar`` (all of ``m`` when ``scalar`` is zero)."""
    if scalar == 0:
        return m, ModHom.identity(m)
    return kernel(multiplication(m, scalar))


# ---------------------------------------------------------------------------
# tensor products and Hom modules


class TensorModule:
    """``M (x) N`` on generator pairs ``(i, j)``; pairs with unit order are dropped."""

    def __init__(self, left: FPModule, right: FPModule):
        ring = left.ring
        self.left, self.right = left, right
        self.keep = []
        orders = []
        for i, a in enumerate(left.orders):
            for j, b in enumerate(right.orders):
                g = ring.gcd(a, b)
                if g != 0 and ring.is_unit(g):
                    continue
                self.keep.append(i * right.ngens + j)
                orders.append(g)
        self.module = FPModule(ring, tuple(orders))

    def hom(self, f: Mat, g: Mat, target: "TensorModule") -> Mat:
        """Matrix of ``f (x) g`` from this tensor module to ``target``."""
        k = np.kron(f, g) if f.size and g.size else zeros(
            target.left.ngens * target.right.ngens, self.left.ngens * self.right.ngens)
        return target.module.reduce(self.module.ring.fix(k[np.ix_(target.keep, self.keep)]))


def tensor_modules(m: FPModule, n: FPModule) -> FPModule:
    return TensorModule(m, n).module


class HomModule:
    """``Hom_R(M, N)`` as a sum of cyclic modules, one per matrix entry that can be nonzero.

    Coordinate ``c`` stands for the matrix with ``scale`` at entry ``(i, j)``.
    """

    def __init__(self, source: FPModule, target: FPModule):
        ring = source.ring
        self.source, self.target = source, target
        self.entries = []
        orders = []
        for i, b in enumerate(target.orders):
            for j, a in enumerate(source.orders):
                if b == 0:
                    if a != 0:
                        continue
                    self.entries.append((i, j, ring.one))
                    orders.append(ring.zero)
                    continue
                g = ring.gcd(a, b)
                if ring.is_unit(g):
                    continue
                self.entries.append((i, j, ring.exact_div(b, g)))
                orders.append(g)
        self.module = FPModule(ring, tuple(orders))

    def to_matrices(self, vecs: Mat) -> list[Mat]:
        out = []
        for c in range(vecs.shape[1]):
            m = zeros(self.target.ngens, self.source.ngens)
            for k, (i, j, s) in enumerate(self.entries):
                m[i, j] = vecs[k, c] * s
            out.append(self.target.reduce(m))
        return out

    def coordinates(self, mats: Sequence[Mat]) -> Mat:
        ring = self.source.ring
        out = zeros(self.module.ngens, len(mats))
        for c, m in enumerate(mats):
            m = self.target.reduce(m)
            for k, (i, j, s) in enumerate(self.entries):
                out[k, c] = ring.exact_div(m[i, j], s)
        return self.module.reduce(out)


# ---------------------------------------------------------------------------
# localization


def _check_prime_or_zero(p: int):
    if p != 0 and not is_prime(p):
        raise ValueError(f"{p} is neither a prime nor 0")


def localize_at_prime(m: FPModule, p: int) -> FPModule:
    """``M_(p)`` for a module over Z; ``p = 0`` gives the rationalization over Q."""
    if m.ring != ZZ:
        raise ValueError("localization is only defined over Z")
    _check_prime_or_zero(p)
    if p == 0:
        return FPModule.free(QQ, m.free_rank)
    ring = Ring("Zloc", p)
    orders = [Fraction(0)] * m.free_rank
    for d in m.invariant_factors:
        v = _valuation(d, p)
        if v:
            orders.append(Fraction(p**v))
    return FPModule(ring, tuple(orders))


def tensor_residue(m: FPModule, p: int) -> FPModule:
    """``M (x) k(p)``: over F_p for a prime, over Q for ``p = 0``."""
    if m.ring != ZZ:
        raise ValueError("residue fields are only defined over Z")
    _check_prime_or_zero(p)
    if p == 0:
        return FPModule.free(QQ, m.free_rank)
    dim = m.free_rank + sum(1 for d in m.invariant_factors if d % p == 0)
    return FPModule.free(GF(p), dim)
