"""Grids, density profiles, initial data and weighted norms.

Every field lives on the interior nodes of a uniform Dirichlet box
``[-R, R]^N`` (``N`` is 1 or 2).  Values are stored as float arrays of shape
``(n,) * N``; axis ``i`` of the array is coordinate ``x_{i+1}``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

TAIL_CLASSES = ("A1", "A2", "A2star", "bounded_only")


class GridMismatchError(ValueError):
    """Two fields (or a field and an operator) live on different grids."""


@dataclass(frozen=True, eq=False)
class Grid:
    """Interior nodes of the box ``[-R, R]^N`` with ``n`` nodes per axis.

    The spacing ``h`` is stored and ``R`` derived from it, so that
    ``h * (n + 1) == 2 * R`` holds exactly in floating point.  Build grids
    with :func:`make_grid` or :func:`grid_with_spacing`.
    """

    N: int
    n: int
    h: float

    @property
    def R(self) -> float:
        return self.h * (self.n + 1) / 2.0

    def __eq__(self, other):
        if not isinstance(other, Grid):
            return NotImplemented
        return (self.N == other.N and self.n == other.n
                and abs(self.h - other.h) <= 1e-14 * self.h)

    def __hash__(self):
        return hash((self.N, self.n, round(self.h, 12)))

    def __repr__(self):
        return f"Grid(N={self.N}, R={self.R:g}, n={self.n})"

    @property
    def shape(self) -> tuple:
        return (self.n,) * self.N

    @property
    def size(self) -> int:
        return self.n**self.N

    @property
    def cell_volume(self) -> float:
        return self.h**self.N

    def axis(self) -> np.ndarray:
        # (i - (n+1)/2) is an exact half-integer, so the axis is exactly odd.
        i = np.arange(1, self.n + 1, dtype=float)
        return (i - 0.5 * (self.n + 1)) * self.h

    def coords(self) -> tuple:
        """Coordinate arrays (one per axis), each of shape :attr:`shape`."""
        ax = self.axis()
        if self.N == 1:
            return (ax,)
        return tuple(np.meshgrid(ax, ax, indexing="ij"))

    def radius(self) -> np.ndarray:
        """|x| at every node."""
        c = self.coords()
        return np.sqrt(sum(ci * ci for ci in c))

    def points(self) -> np.ndarray:
        """Node coordinates as an ``(size, N)`` array in C order."""
        return np.stack([c.ravel() for c in self.coords()], axis=1)

    def index_of(self, x: Sequence[float]) -> tuple:
        """Array index of the node at ``x`` (must be a node up to 1e-9 h)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        pos = x / self.h + 0.5 * (self.n + 1) - 1
        idx = np.rint(pos).astype(int)
        if np.any(np.abs(pos - idx) > 1e-9) or np.any(idx < 0) or np.any(idx >= self.n):
            raise ValueError(f"point {x.tolist()} is not a node of {self}")
        return tuple(int(i) for i in idx)


def make_grid(N: int, R: float, n: int) -> Grid:
    if N not in (1, 2):
        raise ValueError(f"dimension N must be 1 or 2, got {N}")
    if not R > 0:
        raise ValueError(f"box radius R must be positive, got {R}")
    if n < 8:
        raise ValueError(f"n too small: need at least 8 nodes per axis, got {n}")
    return Grid(int(N), int(n), 2.0 * float(R) / (n + 1))


def grid_with_spacing(N: int, R: float, h: float) -> Grid:
    """Grid on ``[-R, R]^N`` whose spacing is exactly ``h``.

    ``2R/h`` must be an integer (up to roundoff); nodes of two such grids
    with the same ``h`` and even ``2R/h`` coincide on their overlap.
    """
    cells = 2.0 * R / h
    k = int(round(cells))
    if abs(cells - k) > 1e-9 * max(1.0, cells):
        raise ValueError(f"2R/h = {cells} is not an integer")
    if N not in (1, 2) or k - 1 < 8:
        make_grid(N, R, k - 1)  # raises with the precise reason
    return Grid(int(N), k - 1, float(h))


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Sampled function on a :class:`Grid`."""

    grid: Grid
    values: np.ndarray
    nonnegative: bool = False
    label: str = ""

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.shape:
            if v.size != self.grid.size:
                raise ValueError(
                    f"{v.size} values for a grid with {self.grid.size} nodes"
                )
            v = v.reshape(self.grid.shape)
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        if self.nonnegative and v.size and v.min() < 0:
            raise ValueError(f"nonnegative field has minimum {v.min()}")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def with_values(self, values, nonnegative: Optional[bool] = None) -> "ScalarField":
        nn = self.nonnegative if nonnegative is None else nonnegative
        return ScalarField(self.grid, values, nn, self.label)

    def sup(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0


def check_same_grid(*fields: ScalarField) -> Grid:
    g = fields[0].grid
    for f in fields[1:]:
        if f.grid != g:
            raise GridMismatchError(f"grid mismatch: {g} vs {f.grid}")
    return g


# ---------------------------------------------------------------- densities


@dataclass(frozen=True)
class DensityProfile:
    """``rho(x) = c * (s0^2 + |x|^2)^(-alpha/2)``; ``kind='constant'`` is alpha=0."""

    kind: str = "constant"
    c: float = 1.0
    alpha: float = 0.0
    s0: float = 1.0

    def __post_init__(self):
        if self.kind not in ("constant", "power_tail"):
            raise ValueError(f"unknown density kind {self.kind!r}")
        if not self.c > 0:
            raise ValueError("density level c must be positive")
        if self.alpha < 0:
            raise ValueError("tail exponent alpha must be >= 0")
        if not self.s0 > 0:
            raise ValueError("regularization scale s0 must be positive")
        if self.kind == "constant" and self.alpha != 0:
            raise ValueError("constant density has alpha = 0")

    def __call__(self, r):
        """Evaluate at radius ``r`` (array-like)."""
        r = np.asarray(r, dtype=float)
        if self.kind == "constant":
            return np.full_like(r, self.c)
        return self.c * (self.s0**2 + r * r) ** (-0.5 * self.alpha)

    def tail_class(self, sigma: float, N: int) -> str:
        a = self.alpha
        if a < sigma:
            return "A1"
        if a > sigma:
            return "A2star" if a > N else "A2"
        return "bounded_only"

    def tail_constants(self) -> dict:
        """Constants realized by the profile in the tail comparisons.

        ``rho >= C_lo |x|^-alpha`` for ``|x| >= R_lo`` and
        ``rho <= C_hi |x|^-alpha`` for every ``x != 0``.
        """
        return {
            "C_lo": self.c * 2.0 ** (-0.5 * self.alpha),
            "R_lo": self.s0,
            "C_hi": self.c,
            "R_hi": 0.0,
        }

    @property
    def sup(self) -> float:
        return self.c * self.s0 ** (-self.alpha) if self.kind == "power_tail" else self.c

    def l1_norm(self, N: int) -> float:
        """Whole-space integral; ``inf`` unless ``alpha > N``."""
        if self.kind == "constant" or self.alpha <= N:
            return math.inf
        # int_0^inf r^{N-1} (s0^2+r^2)^{-a/2} dr = s0^{N-a} B(N/2, (a-N)/2) / 2
        a = self.alpha
        surface = 2.0 * math.pi ** (N / 2) / math.gamma(N / 2)
        beta = math.gamma(N / 2) * math.gamma((a - N) / 2) / math.gamma(a / 2)
        return self.c * surface * 0.5 * self.s0 ** (N - a) * beta


def sample_density(profile: DensityProfile, grid: Grid, sigma: Optional[float] = None) -> ScalarField:
    """Nodal samples of ``profile``; the tail class is stored in ``label``."""
    label = profile.tail_class(sigma, grid.N) if sigma is not None else ""
    return ScalarField(grid, profile(grid.radius()), nonnegative=True, label=label)


# ------------------------------------------------------------- initial data

DATUM_KINDS = ("constant", "gaussian_bump", "eigenmode", "power_singularity", "indicator_ball")


@dataclass(frozen=True)
class InitialDatum:
    """Nonnegative initial datum.

    ``gaussian_bump``: ``a exp(-|x-c|^2 / w^2)``.
    ``eigenmode``: ``a prod_i sin(k_i pi (x_i + R) / (2R))`` (sign dropped if
    a mode index is above 1, see :meth:`sample`).
    ``power_singularity``: ``a |x-c|^-beta`` on ``|x-c| < w``, zero outside;
    the node within half a cell of ``c`` gets the ball average
    ``a (h/2)^-beta N/(N-beta)``.
    ``indicator_ball``: ``a`` on ``|x-c| <= w``.
    """

    kind: str = "gaussian_bump"
    amplitude: float = 1.0
    width: float = 1.0
    center: tuple = ()
    mode: tuple = ()
    beta: float = 0.5
    cap: Optional[float] = None

    def __post_init__(self):
        if self.kind not in DATUM_KINDS:
            raise ValueError(f"unknown initial datum kind {self.kind!r}")
        if self.amplitude < 0:
            raise ValueError("amplitude must be nonnegative")
        if not self.width > 0:
            raise ValueError("width must be positive")
        if self.cap is not None and self.cap < 0:
            raise ValueError("cap must be nonnegative")

    def capped(self, M: Optional[float]) -> "InitialDatum":
        return InitialDatum(self.kind, self.amplitude, self.width, self.center,
                            self.mode, self.beta, M)

    def sample(self, grid: Grid) -> ScalarField:
        c = np.zeros(grid.N) if not self.center else np.asarray(self.center, dtype=float)
        if c.size != grid.N:
            raise ValueError(f"center {self.center} has wrong dimension for N={grid.N}")
        coords = grid.coords()
        a = self.amplitude
        if self.kind == "constant":
            v = np.full(grid.shape, a)
        elif self.kind == "gaussian_bump":
            d2 = sum((xi - ci) ** 2 for xi, ci in zip(coords, c))
            v = a * np.exp(-d2 / self.width**2)
        elif self.kind == "eigenmode":
            k = tuple(self.mode) or (1,) * grid.N
            if len(k) != grid.N or min(k) < 1:
                raise ValueError(f"mode {k} invalid for N={grid.N}")
            v = a * np.ones(grid.shape)
            for xi, ki in zip(coords, k):
                v = v * np.sin(ki * np.pi * (xi + grid.R) / (2 * grid.R))
            if any(ki > 1 for ki in k):
                # higher modes change sign; the datum keeps only the positive part
                v = np.maximum(v, 0.0)
        elif self.kind == "power_singularity":
            if not 0 < self.beta < grid.N:
                raise ValueError(f"singularity exponent beta must lie in (0, N), got {self.beta}")
            d = np.sqrt(sum((xi - ci) ** 2 for xi, ci in zip(coords, c)))
            core = 0.5 * grid.h
            with np.errstate(divide="ignore"):
                v = np.where(d < core,
                             a * core ** (-self.beta) * grid.N / (grid.N - self.beta),
                             a * np.maximum(d, core) ** (-self.beta))
            v = np.where(d < self.width, v, 0.0)
        else:  # indicator_ball
            d = np.sqrt(sum((xi - ci) ** 2 for xi, ci in zip(coords, c)))
            v = np.where(d <= self.width, a, 0.0)
        if self.cap is not None:
            v = np.minimum(v, self.cap)
        return ScalarField(grid, v, nonnegative=True)


# -------------------------------------------------------------------- norms


def weighted_norm(f: ScalarField, rho: ScalarField, q: float = 1.0) -> float:
    """``(sum |f|^q rho h^N)^(1/q)``; ``q = inf`` gives ``max |f|``."""
    check_same_grid(f, rho)
    if q < 1:
        raise ValueError(f"exponent q must be >= 1, got {q}")
    a = np.abs(f.values)
    if math.isinf(q):
        return float(a.max()) if a.size else 0.0
    top = float(a.max()) if a.size else 0.0
    if top == 0.0:
        return 0.0
    # scale by the max so |f|^q cannot overflow for large q
    s = np.sum((a / top) ** q * rho.values) * f.grid.cell_volume
    return top * float(s) ** (1.0 / q)


def weighted_mass(u: np.ndarray, rho: np.ndarray, cell_volume: float) -> float:
    return float(np.sum(u * rho) * cell_volume)


# ---------------------------------------------------------------- columnar io


def write_field(path: Union[str, Path], f: ScalarField) -> None:
    """Columnar text: ``# N R n`` then ``x1 [x2] value`` per node (17 sig. digits)."""
    g = f.grid
    pts = g.points()
    cols = np.column_stack([pts, f.values.ravel()])
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"# {g.N} {g.R:.17g} {g.n}\n")
        for row in cols:
            fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")


def read_field(path: Union[str, Path], nonnegative: bool = False) -> ScalarField:
    with open(path, encoding="ascii") as fh:
        header = fh.readline().split()
        if not header or header[0] != "#" or len(header) != 4:
            raise ValueError(f"{path}: bad field header")
        N, R, n = int(header[1]), float(header[2]), int(header[3])
        data = np.loadtxt(fh, ndmin=2)
    grid = make_grid(N, R, n)
    if data.shape != (grid.size, N + 1):
        raise ValueError(f"{path}: expected {grid.size} rows of {N + 1} columns")
    return ScalarField(grid, data[:, N], nonnegative=nonnegative)
