"""Switch geometry and the deterministic periodic stage configurations.

The fabric has three crossbar stages: k input modules (IMs) of size n x m,
m central modules (CMs) of size k x k, and k output modules (OMs) of size
m x n, with N = n*k external ports.  IMs and CMs follow fixed periodic
interconnection patterns; no runtime matching is computed.

Indexing conventions used throughout the package:
  input port   IP(i, s)  ->  flat index u = i*k + s
  output port  OP(j, d)  ->  flat index v = j*m + d
  IM(i) output r feeds input p = i of CM(r)  (standard Clos wiring).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ScheduleError(ValueError):
    """Raised when a configuration request violates the geometry contract."""


@dataclass(frozen=True)
class SwitchDims:
    """Geometry (n, k, m) of the three-stage fabric, restricted to n = k = m.

    The symmetric regime is the only one the deterministic schedule is
    defined for here; asymmetric geometries are rejected at construction.
    """

    n: int
    k: int
    m: int

    def __post_init__(self) -> None:
        if self.n < 1 or self.k < 1 or self.m < 1:
            raise ScheduleError(f"module sizes must be >= 1, got {(self.n, self.k, self.m)}")
        if not (self.n == self.k == self.m):
            raise ScheduleError(f"symmetric geometry n = k = m required, got {(self.n, self.k, self.m)}")

    @classmethod
    def symmetric(cls, n: int) -> "SwitchDims":
        return cls(n, n, n)

    @property
    def N(self) -> int:
        """Total external ports, N = n*k."""
        return self.n * self.k


@dataclass(frozen=True)
class PortAddress:
    """A port named by (module index, local port index)."""

    module: int
    local: int

    def flat(self, dims: SwitchDims) -> int:
        return self.module * dims.k + self.local

    @classmethod
    def from_flat(cls, flat: int, dims: SwitchDims) -> "PortAddress":
        return cls(flat // dims.k, flat % dims.k)

    def check_input(self, dims: SwitchDims) -> None:
        if not (0 <= self.module < dims.k and 0 <= self.local < dims.n):
            raise ScheduleError(f"input port {self} out of range for dims {dims}")

    def check_output(self, dims: SwitchDims) -> None:
        if not (0 <= self.module < dims.k and 0 <= self.local < dims.n):
            raise ScheduleError(f"output port {self} out of range for dims {dims}")


def im_link(s: int, t: int, dims: SwitchDims) -> int:
    """CM index reached from IM input s at slot t:  r = (s + t) mod m."""
    if not 0 <= s < dims.n:
        raise ScheduleError(f"IM input index {s} out of range [0, {dims.n})")
    return (s + t) % dims.m


def cm_link(p: int, r: int, t: int, dims: SwitchDims) -> int:
    """OM index reached from CM(r) input p at slot t:  j = (p - t + r) mod k.

    The CM pattern cycles counter to the IM pattern; the modulus is
    normalised to [0, k) so any integer slot is valid.
    """
    if not 0 <= p < dims.k:
        raise ScheduleError(f"CM input index {p} out of range [0, {dims.k})")
    if not 0 <= r < dims.m:
        raise ScheduleError(f"CM index {r} out of range [0, {dims.m})")
    return (p - t + r) % dims.k


@dataclass(frozen=True)
class PermutationMatrix:
    """An N x N 0/1 permutation given as cols[row] = column of the single 1."""

    size: int
    cols: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.cols) != self.size or sorted(self.cols) != list(range(self.size)):
            raise ScheduleError("mapping is not a permutation")

    def to_array(self) -> np.ndarray:
        mat = np.zeros((self.size, self.size), dtype=np.int64)
        mat[np.arange(self.size), list(self.cols)] = 1
        return mat


@dataclass(frozen=True)
class CompoundPermutation:
    """Sum of k pairwise-disjoint permutations: k ones per row and column."""

    size: int
    entries: np.ndarray

    def __post_init__(self) -> None:
        ent = np.asarray(self.entries)
        k = int(ent[0].sum())
        if not ((ent.sum(axis=0) == k).all() and (ent.sum(axis=1) == k).all()):
            raise ScheduleError("compound permutation must have k ones per row and column")


def im_permutation(t: int, dims: SwitchDims) -> PermutationMatrix:
    """IM-stage configuration at slot t as a permutation over flat indices.

    Row u = i*k + s maps to column r*k + i with r = im_link(s, t), i.e. the
    column space enumerates (CM r, CM input p = i) pairs.
    """
    k, n = dims.k, dims.n
    cols = [0] * dims.N
    for i in range(k):
        for s in range(n):
            cols[i * k + s] = im_link(s, t, dims) * k + i
    return PermutationMatrix(dims.N, tuple(cols))


def cm_permutation(t: int, dims: SwitchDims) -> PermutationMatrix:
    """CM-stage configuration at slot t as a permutation over flat indices.

    Row r*k + p (input p of CM r) maps to column j*k + r with
    j = cm_link(p, r, t), enumerating (OM j, via CM r) pairs.
    """
    k, m = dims.k, dims.m
    cols = [0] * dims.N
    for r in range(m):
        for p in range(k):
            cols[r * k + p] = cm_link(p, r, t, dims) * k + r
    return PermutationMatrix(dims.N, tuple(cols))


def _compound(perms: list[PermutationMatrix], size: int) -> CompoundPermutation:
    entries = np.zeros((size, size), dtype=np.int64)
    for perm in perms:
        rows = np.arange(size)
        cols = np.asarray(perm.cols)
        if (entries[rows, cols] != 0).any():
            raise ScheduleError("per-slot permutations are not disjoint")
        entries[rows, cols] = 1
    return CompoundPermutation(size, entries)


def compound_p1(dims: SwitchDims) -> CompoundPermutation:
    """IM compound configuration: sum of the k per-slot IM permutations."""
    return _compound([im_permutation(t, dims) for t in range(dims.k)], dims.N)


def compound_p2(dims: SwitchDims) -> CompoundPermutation:
    """CM compound configuration: sum of the k per-slot CM permutations."""
    return _compound([cm_permutation(t, dims) for t in range(dims.k)], dims.N)
