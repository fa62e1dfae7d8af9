"""Kronecker powers, monomial bases, and the tensor/monomial selection matrix.

The degree-c Kronecker power of a state vector x lists every length-c
product of its entries, with repetition.  Collapsing the repeats gives the
vector y of distinct degree-c monomials; the two are related by a 0/1
selection matrix S via  kron_power(x, c) = S @ eval_monomials(basis, x).
Everything downstream (operator lifts, certificates) works in the reduced
monomial coordinates, so this module is the foundation of the package.
"""

from __future__ import annotations

import hashlib
import json
import math
import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np

# Refuse to materialize tensor coordinates beyond this many entries.
DEFAULT_SIZE_CAP = 2**24


class SizeCapError(ValueError):
    """Construction would materialize more than the configured n**c coordinates."""


def _checked_tensor_dim(n: int, c: int, cap: int) -> int:
    dim = n**c
    if dim > cap:
        raise SizeCapError(f"n**c = {n}**{c} = {dim} exceeds the size cap {cap}")
    return dim


@dataclass(frozen=True)
class SwitchedSystem:
    """A finite family of real n x n mode matrices sharing one state space.

    Instances are treated as immutable; do not mutate the mode arrays.
    """

    n: int
    modes: tuple[np.ndarray, ...]
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("state dimension must be positive")
        if len(self.modes) < 1:
            raise ValueError("need at least one mode")
        normalized = []
        for k, A in enumerate(self.modes):
            A = np.asarray(A, dtype=float)
            if A.shape != (self.n, self.n):
                raise ValueError(f"mode {k} has shape {A.shape}, expected ({self.n}, {self.n})")
            if not np.all(np.isfinite(A)):
                raise ValueError(f"mode {k} contains non-finite entries")
            normalized.append(A)
        object.__setattr__(self, "modes", tuple(normalized))
        if self.labels is not None:
            if len(self.labels) != len(self.modes):
                raise ValueError("labels must match the number of modes")
            object.__setattr__(self, "labels", tuple(str(s) for s in self.labels))

    @property
    def num_modes(self) -> int:
        return len(self.modes)

    def unstable_modes(self) -> list[int]:
        """Indices of modes with some eigenvalue real part >= 0."""
        return [
            i for i, A in enumerate(self.modes)
            if np.max(np.linalg.eigvals(A).real) >= 0.0
        ]

    def content_hash(self) -> str:
        """Digest over n, mode count, and matrix bytes at fixed precision."""
        h = hashlib.sha256()
        h.update(np.int64(self.n).tobytes())
        h.update(np.int64(self.num_modes).tobytes())
        for A in self.modes:
            h.update(np.round(A, 12).astype(np.float64).tobytes())
        return h.hexdigest()

    def to_json_dict(self) -> dict:
        d = {"n": self.n, "modes": [A.tolist() for A in self.modes]}
        if self.labels is not None:
            d["labels"] = list(self.labels)
        return d

    @classmethod
    def from_json_dict(cls, d: dict) -> "SwitchedSystem":
        system = cls(
            n=int(d["n"]),
            modes=tuple(np.asarray(A, dtype=float) for A in d["modes"]),
            labels=tuple(d["labels"]) if d.get("labels") else None,
        )
        bad = system.unstable_modes()
        if bad:
            warnings.warn(
                f"modes {bad} are not Hurwitz; no common Lyapunov function can exist",
                stacklevel=2,
            )
        return system

    @classmethod
    def load(cls, path) -> "SwitchedSystem":
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2)
            fh.write("\n")


def basis_size(n: int, c: int) -> int:
    """Number of distinct degree-c monomials in n variables."""
    return math.comb(c + n - 1, n - 1)


def multinomial(c: int, exponents) -> int:
    """c! / prod(e_k!) for an exponent vector summing to c."""
    out = math.factorial(c)
    for e in exponents:
        out //= math.factorial(int(e))
    return out


@dataclass(frozen=True)
class MonomialBasis:
    """Ordered degree-c monomials of n variables with the tensor selection map.

    exponents[j] is the exponent vector of monomial j.  row_to_col[k] is the
    monomial index of tensor coordinate k, i.e. the selection matrix stores
    one index per row instead of a dense n**c x M array of 0/1 entries.
    """

    n: int
    c: int
    exponents: np.ndarray   # (M, n) int64, rows sum to c
    row_to_col: np.ndarray  # (n**c,) int64
    col_counts: np.ndarray  # (M,) int64, multinomial coefficients

    @property
    def size(self) -> int:
        return self.exponents.shape[0]

    @cached_property
    def selector(self) -> np.ndarray:
        """Dense 0/1 matrix S with kron_power(x, c) = S @ eval_monomials(self, x)."""
        S = np.zeros((self.row_to_col.shape[0], self.size))
        S[np.arange(self.row_to_col.shape[0]), self.row_to_col] = 1.0
        return S

    @cached_property
    def selector_pinv(self) -> np.ndarray:
        """Moore-Penrose inverse of selector: diag(1/col_counts) @ selector.T."""
        return self.selector.T / self.col_counts[:, None]

    @cached_property
    def index(self) -> dict:
        """Exponent tuple -> monomial index."""
        return {tuple(int(v) for v in e): j for j, e in enumerate(self.exponents)}

    @classmethod
    def from_exponents(cls, n: int, c: int, exponents, cap: int = DEFAULT_SIZE_CAP) -> "MonomialBasis":
        exponents = np.asarray(exponents, dtype=np.int64)
        if exponents.ndim != 2 or exponents.shape != (basis_size(n, c), n):
            raise ValueError("exponent table has the wrong shape for (n, c)")
        if np.any(exponents < 0) or not np.all(exponents.sum(axis=1) == c):
            raise ValueError("every exponent vector must be nonnegative and sum to c")
        if len({tuple(e) for e in exponents.tolist()}) != exponents.shape[0]:
            raise ValueError("exponent vectors must be distinct")
        dim = _checked_tensor_dim(n, c, cap)

        # Exponent vector of each tensor coordinate: count base-n digit occurrences.
        rem = np.arange(dim, dtype=np.int64)
        row_exp = np.zeros((dim, n), dtype=np.int64)
        for _ in range(c):
            digit = rem % n
            row_exp[np.arange(dim), digit] += 1
            rem //= n

        weights = (c + 1) ** np.arange(n, dtype=np.int64)
        basis_keys = exponents @ weights
        order = np.argsort(basis_keys)
        pos = np.searchsorted(basis_keys[order], row_exp @ weights)
        row_to_col = order[pos]
        col_counts = np.bincount(row_to_col, minlength=exponents.shape[0])
        return cls(n=n, c=c, exponents=exponents, row_to_col=row_to_col,
                   col_counts=col_counts.astype(np.int64))


def _graded_grevlex_exponents(n: int, c: int) -> np.ndarray:
    """All degree-c exponent vectors, descending graded reverse-lexicographic.

    Descending grevlex within one degree equals ascending lexicographic order
    of the reversed exponent tuples; for n = 2 it reduces to descending powers
    of the first variable.
    """
    def compositions(prefix, remaining, slots):
        if slots == 1:
            yield prefix + (remaining,)
            return
        for k in range(remaining + 1):
            yield from compositions(prefix + (k,), remaining - k, slots - 1)

    exps = sorted(compositions((), c, n), key=lambda e: tuple(reversed(e)))
    return np.array(exps, dtype=np.int64)


def enumerate_basis(n: int, c: int, order_rule: str = "grevlex",
                    cap: int = DEFAULT_SIZE_CAP) -> MonomialBasis:
    """Build the degree-c monomial basis in n variables.

    order_rule "grevlex" (the only built-in policy) sorts exponent vectors in
    descending graded reverse-lexicographic order, so the first monomial is
    x1**c and the last is xn**c.
    """
    if n < 1 or c < 1:
        raise ValueError("need n >= 1 and c >= 1")
    if order_rule != "grevlex":
        raise ValueError(f"unknown ordering policy {order_rule!r}")
    return MonomialBasis.from_exponents(n, c, _graded_grevlex_exponents(n, c), cap=cap)


def kron(A, B) -> np.ndarray:
    """Kronecker product of two dense matrices (or vectors)."""
    return np.kron(np.asarray(A, dtype=float), np.asarray(B, dtype=float))


def kron_power(x, c: int, cap: int = DEFAULT_SIZE_CAP) -> np.ndarray:
    """c-fold Kronecker power, built by the recursion x (x) (x^(c-1) terms)."""
    x = np.asarray(x, dtype=float)
    if c < 1:
        raise ValueError("Kronecker power needs c >= 1")
    _checked_tensor_dim(max(x.shape), c, cap)
    out = x
    for _ in range(c - 1):
        out = np.kron(x, out)
    return out


def selector_recursive_n2(c: int, cap: int = DEFAULT_SIZE_CAP) -> np.ndarray:
    """Closed-form selection matrix for n = 2 via block recursion.

    Starts from the 2 x 2 identity; each level stacks [S, 0] over [0, S],
    appending a zero column on the opposite side.  Equals
    enumerate_basis(2, c).selector entrywise.
    """
    if c < 1:
        raise ValueError("need c >= 1")
    _checked_tensor_dim(2, c, cap)
    S = np.eye(2)
    for k in range(2, c + 1):
        z = np.zeros((2 ** (k - 1), 1))
        S = np.block([[S, z], [z, S]])
    return S


def _power_table(pts: np.ndarray, c: int) -> np.ndarray:
    """pows[..., k, j] = pts[..., k]**j by repeated multiplication (exact on ints)."""
    shape = pts.shape + (c + 1,)
    pows = np.ones(shape)
    for j in range(1, c + 1):
        pows[..., j] = pows[..., j - 1] * pts
    return pows


def eval_monomials(basis: MonomialBasis, x) -> np.ndarray:
    """Evaluate the monomial vector y at x; accepts a single point or a batch.

    Entry j equals prod_k x_k**exponents[j, k].  Products use a repeated
    multiplication table so integer-valued inputs evaluate exactly.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = x[None, :] if single else x
    if pts.shape[-1] != basis.n:
        raise ValueError(f"points must have dimension {basis.n}")
    pows = _power_table(pts, basis.c)
    cols = np.broadcast_to(np.arange(basis.n), basis.exponents.shape)
    gathered = pows[:, cols, basis.exponents]  # (T, M, n)
    y = gathered.prod(axis=2)
    return y[0] if single else y


def substitution_matrix(basis: MonomialBasis, S) -> np.ndarray:
    """Matrix T of the degree-c substitution x -> S x on monomial coordinates.

    eval_monomials(basis, S @ x) == T @ eval_monomials(basis, x) for all x;
    the map is functorial, so substitution_matrix(basis, inv(S)) inverts it.
    Built by expanding each basis monomial of the substituted variables.
    """
    S = np.asarray(S, dtype=float)
    if S.shape != (basis.n, basis.n):
        raise ValueError(f"S must have shape ({basis.n}, {basis.n})")
    n, M = basis.n, basis.size
    T = np.zeros((M, M))
    for j in range(M):
        poly = {(0,) * n: 1.0}
        for m in range(n):
            for _ in range(int(basis.exponents[j, m])):
                grown = {}
                for mono, coef in poly.items():
                    for l in range(n):
                        if S[m, l] == 0.0:
                            continue
                        key = mono[:l] + (mono[l] + 1,) + mono[l + 1:]
                        grown[key] = grown.get(key, 0.0) + coef * S[m, l]
                poly = grown
        for mono, coef in poly.items():
            T[j, basis.index[mono]] = coef
    return T


def monomial_jacobian(basis: MonomialBasis, x) -> np.ndarray:
    """Analytic Jacobian of the monomial map: J[j, m] = d y_j / d x_m."""
    x = np.asarray(x, dtype=float)
    if x.shape != (basis.n,):
        raise ValueError(f"x must have shape ({basis.n},)")
    pows = _power_table(x, basis.c)
    J = np.zeros((basis.size, basis.n))
    cols = np.arange(basis.n)
    for m in range(basis.n):
        e = basis.exponents.copy()
        coeff = e[:, m].astype(float)
        lowered = e[:, m] > 0
        e[lowered, m] -= 1
        vals = pows[cols, e].prod(axis=1)
        J[:, m] = np.where(lowered, coeff * vals, 0.0)
    return J
