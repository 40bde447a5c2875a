"""Branched lifts of synthetic drivers over planar forests.

A driver is a tuple of smooth scalar signals (one per base letter), optionally
enriched by "intensity" signals attached to individual trees — prescribed
rates for the non-geometric components of the lift.  The lift integrates the
truncated character equation

    dg_t = g_t ★ v(t) dt ,
    v(t) = Σ_i  ẋ_i(t) •_i  +  Σ_τ  λ̇_τ(t) τ ,

one grid cell at a time, each cell split into ``substeps`` Magnus steps: the
step generator is the *exact* increment of the linear part plus the two-point
Gauss commutator correction, exponentiated exactly in the weight-truncated
algebra.  Each step is therefore group-like to machine precision, cell
characters compose by ★ (Chen's identity holds exactly), and level-one
components are exact.

The bracket extension re-lifts the driver over the alphabet extended by
bracket letters ``(i j)``, whose level-one increments are defined per substep
as ``⟨g, •_j •_i⟩ − ⟨g, [•_j]_i⟩`` of the base substep character.  Restricted
to base-letter forests the extension reproduces the original lift exactly.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .forest_core import (
    PlanarForest,
    b_plus,
    base_alphabet,
    bracket_alphabet,
    concat,
    letter_key,
    parse_forest,
    single,
)
from .hopf_mkw import FloatAlgebra, TruncatedBasis, shuffle
from .rates import fit_loglog

_SQRT3 = math.sqrt(3.0)


class ConfigError(ValueError):
    """A driver or experiment configuration violates its contract."""


# ---------------------------------------------------------------------------
# Scalar signals
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PolySignal:
    """Polynomial signal ``x(t) = Σ coeffs[k] t**k``."""

    coeffs: tuple

    def value(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for c in reversed(self.coeffs):
            out = out * t + c
        return out

    def rate(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for k in range(len(self.coeffs) - 1, 0, -1):
            out = out * t + k * self.coeffs[k]
        return out


@dataclass(frozen=True)
class TrigSignal:
    """Sum of sine waves: ``x(t) = Σ a sin(w t + phi)`` per (a, w, phi) term."""

    terms: tuple

    def value(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for a, w, phi in self.terms:
            out = out + a * np.sin(w * t + phi)
        return out

    def rate(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for a, w, phi in self.terms:
            out = out + a * w * np.cos(w * t + phi)
        return out


@dataclass(frozen=True, eq=False)
class SpectralSignal:
    """Seeded random trigonometric polynomial with power-law mode decay.

    ``x(t) = amplitude · Σ_{m=1..modes} m^{-(hurst+1/2)}
             (a_m cos(2π m t / period) + b_m sin(2π m t / period))``

    with independent standard normal ``a_m, b_m`` drawn from the seed.  On
    scales above ``period/modes`` the increments scale like ``h^hurst``; below
    that the signal is smooth, so rate fits should stay above the cutoff.
    """

    hurst: float
    modes: int
    seed: int
    amplitude: float = 1.0
    period: float = 1.0
    _cos: np.ndarray = field(init=False, repr=False)
    _sin: np.ndarray = field(init=False, repr=False)
    _freq: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        rng = np.random.default_rng(self.seed)
        m = np.arange(1, self.modes + 1, dtype=float)
        decay = self.amplitude * m ** (-(self.hurst + 0.5))
        object.__setattr__(self, "_cos", decay * rng.standard_normal(self.modes))
        object.__setattr__(self, "_sin", decay * rng.standard_normal(self.modes))
        object.__setattr__(self, "_freq", 2.0 * np.pi * m / self.period)

    def value(self, t):
        t = np.asarray(t, dtype=float)
        phase = np.multiply.outer(t, self._freq)
        return np.cos(phase) @ self._cos + np.sin(phase) @ self._sin

    def rate(self, t):
        t = np.asarray(t, dtype=float)
        phase = np.multiply.outer(t, self._freq)
        return (-np.sin(phase) * self._freq) @ self._cos + (
            np.cos(phase) * self._freq
        ) @ self._sin


# ---------------------------------------------------------------------------
# Driver specification
# ---------------------------------------------------------------------------


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def alpha_window(N: int):
    """Admissible regularity window for truncation level ``N``."""
    if N == 2:
        return (1.0 / 3.0, 1.0 / 2.0)
    if N == 3:
        return (1.0 / 4.0, 1.0 / 3.0)
    raise ConfigError(f"truncation level must be 2 or 3, got {N}")


@dataclass(frozen=True, eq=False)
class DriverSpec:
    """A synthetic driver plus lift parameters.

    Attributes:
        d: number of base letters (components of the driver).
        base: one scalar signal per base letter, index ``i`` driving ``•_{i+1}``.
        intensities: pairs ``(tree_forest, signal)`` prescribing rates of
            non-geometric tree components; each forest must be a single tree
            with 2..N vertices decorated by base letters.
        T: time horizon; the grid is uniform on ``[0, T]``.
        cells: number of grid cells (power of two).
        substeps: Magnus steps per cell (power of two).
        N: truncation weight (2 or 3).
        alpha: Hölder exponent the lift is meant to model; must lie in
            ``(1/3, 1/2]`` for N=2 and ``(1/4, 1/3]`` for N=3.
    """

    d: int
    base: tuple
    intensities: tuple = ()
    T: float = 1.0
    cells: int = 1024
    substeps: int = 64
    N: int = 2
    alpha: float = 0.45

    def __post_init__(self):
        if not 1 <= self.d <= 9:
            raise ConfigError(f"d must lie in 1..9, got {self.d}")
        if len(self.base) != self.d:
            raise ConfigError(
                f"driver has {len(self.base)} base signals for d={self.d}"
            )
        lo, hi = alpha_window(self.N)
        if not lo < self.alpha <= hi:
            raise ConfigError(
                f"alpha={self.alpha} outside ({lo:.4f}, {hi:.4f}] for N={self.N}"
            )
        if not _is_pow2(self.cells):
            raise ConfigError(f"cells must be a power of two, got {self.cells}")
        if not _is_pow2(self.substeps):
            raise ConfigError(f"substeps must be a power of two, got {self.substeps}")
        if not self.T > 0:
            raise ConfigError(f"horizon T must be positive, got {self.T}")
        for f, _sig in self.intensities:
            if len(f.trees) != 1:
                raise ConfigError(f"intensity key {f.key} is not a single tree")
            if not 2 <= f.degree <= self.N:
                raise ConfigError(
                    f"intensity tree {f.key} needs 2..{self.N} vertices"
                )
            if f.weight != f.degree:
                raise ConfigError(f"intensity tree {f.key} uses bracket letters")
            if any(
                not (isinstance(l, int) and 1 <= l <= self.d)
                for l in _letters_of(f)
            ):
                raise ConfigError(f"intensity tree {f.key} uses letters beyond d")

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.cells + 1)


def _letters_of(f: PlanarForest):
    out = []
    stack = list(f.trees)
    while stack:
        t = stack.pop()
        out.append(t.letter)
        stack.extend(t.children)
    return out


# ---------------------------------------------------------------------------
# Algebra caches
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def get_basis(letters, max_weight: int) -> TruncatedBasis:
    return TruncatedBasis(letters, max_weight)


@lru_cache(maxsize=None)
def get_algebra(letters, max_weight: int) -> FloatAlgebra:
    return FloatAlgebra(get_basis(letters, max_weight))


# ---------------------------------------------------------------------------
# The lift
# ---------------------------------------------------------------------------


def _substep_nodes(driver: DriverSpec) -> np.ndarray:
    n = driver.cells * driver.substeps
    return np.linspace(0.0, driver.T, n + 1)


def _generator_columns(driver: DriverSpec, algebra: FloatAlgebra):
    """Column indices and signals of the lift generator in a target algebra."""
    cols = []
    for i in range(driver.d):
        cols.append((algebra.basis.index[single(i + 1)], driver.base[i]))
    for f, sig in driver.intensities:
        cols.append((algebra.basis.index[f], sig))
    return cols


def _magnus_generators(driver: DriverSpec, algebra: FloatAlgebra) -> np.ndarray:
    """Per-substep Magnus generators Ω, shape ``(cells·substeps, dim)``."""
    nodes = _substep_nodes(driver)
    lo, hi = nodes[:-1], nodes[1:]
    h = hi - lo
    c1 = lo + h * (0.5 - _SQRT3 / 6.0)
    c2 = lo + h * (0.5 + _SQRT3 / 6.0)
    n = len(h)
    lin = np.zeros((n, algebra.dim))
    a1 = np.zeros((n, algebra.dim))
    a2 = np.zeros((n, algebra.dim))
    for col, sig in _generator_columns(driver, algebra):
        lin[:, col] = sig.value(hi) - sig.value(lo)
        a1[:, col] = sig.rate(c1)
        a2[:, col] = sig.rate(c2)
    return lin + ((h * h) * (_SQRT3 / 12.0))[:, None] * algebra.commutator(a1, a2)


def _pyramid(algebra: FloatAlgebra, cell_chars: np.ndarray):
    levels = [cell_chars]
    while levels[-1].shape[0] > 1:
        prev = levels[-1]
        levels.append(algebra.star(prev[0::2], prev[1::2]))
    return levels


@dataclass(eq=False)
class RoughPath:
    """A lifted driver: per-cell characters plus their dyadic compositions.

    ``levels[l]`` holds the characters of the ``cells >> l`` aligned blocks of
    ``2**l`` consecutive cells, so every stride of the dyadic mesh ladder is a
    plain array lookup and arbitrary node intervals compose from O(log) rows.
    """

    algebra: FloatAlgebra
    grid: np.ndarray
    levels: list
    base_values: np.ndarray  # (d, nodes) sampled base signals
    alpha: float
    driver: DriverSpec | None = None

    @property
    def cells(self) -> int:
        return self.levels[0].shape[0]

    @property
    def N(self) -> int:
        return self.algebra.basis.max_weight

    @property
    def T(self) -> float:
        return float(self.grid[-1])

    def stride_chars(self, stride: int) -> np.ndarray:
        """Characters of all aligned ``stride``-cell blocks (stride = 2**l)."""
        l = stride.bit_length() - 1
        if stride != 1 << l or l >= len(self.levels):
            raise ValueError(f"stride {stride} not available on {self.cells} cells")
        return self.levels[l]

    def eval_nodes(self, a: int, b: int) -> np.ndarray:
        """Character of ``[t_a, t_b]`` composed from dyadic blocks."""
        if not 0 <= a <= b <= self.cells:
            raise ValueError(f"node interval ({a}, {b}) out of range")
        g = self.algebra.unit()
        pos = a
        while pos < b:
            l = 0
            while (
                pos % (2 << l) == 0
                and pos + (2 << l) <= b
                and l + 1 < len(self.levels)
            ):
                l += 1
            g = self.algebra.star(g, self.levels[l][pos >> l])
            pos += 1 << l
        return g

    def node_of(self, t: float) -> int:
        k = round(t / self.T * self.cells)
        if not math.isclose(self.grid[k], t, rel_tol=0.0, abs_tol=1e-12 * self.T):
            raise ValueError(f"time {t} is not a grid node")
        return int(k)

    def eval(self, s: float, t: float) -> np.ndarray:
        """Character of ``[s, t]`` for grid-node times."""
        return self.eval_nodes(self.node_of(s), self.node_of(t))

    def component(self, s: float, t: float, f: PlanarForest) -> float:
        return float(self.eval(s, t)[self.algebra.basis.index[f]])

    # -- diagnostics ------------------------------------------------------

    def chen_defect(self, a: int, u: int, b: int) -> float:
        """∞-norm of ``g_{a,u} ★ g_{u,b} − g_{a,b}`` (node indices)."""
        left = self.algebra.star(self.eval_nodes(a, u), self.eval_nodes(u, b))
        return float(np.max(np.abs(left - self.eval_nodes(a, b))))

    def character_defect(self, a: int, b: int, f1: PlanarForest, f2: PlanarForest):
        """|⟨g, f1 ⧢ f2⟩ − ⟨g, f1⟩⟨g, f2⟩| on the node interval (a, b)."""
        g = self.eval_nodes(a, b)
        idx = self.algebra.basis.index
        lhs = sum(m * g[idx[w]] for w, m in shuffle(f1, f2).items())
        return float(abs(lhs - g[idx[f1]] * g[idx[f2]]))

    def holder_slope(self, f: PlanarForest, min_level: int = 0, max_level=None):
        """Empirical Hölder order of one component across dyadic scales.

        Fits ``log max_k |⟨g over blocks of 2**l cells, f⟩|`` against the
        block length; returns ``+inf`` when the component vanishes at every
        usable scale.
        """
        col = self.algebra.basis.index[f]
        top = len(self.levels) - 1 if max_level is None else max_level
        scales, maxima = [], []
        for l in range(min_level, top + 1):
            scales.append(self.T * (1 << l) / self.cells)
            maxima.append(float(np.max(np.abs(self.levels[l][:, col]))))
        return fit_loglog(scales, maxima)

    # -- persistence ------------------------------------------------------

    def dump(self, out_dir: str, name: str = "lift"):
        """Write per-cell components as CSV plus a JSON metadata sidecar."""
        os.makedirs(out_dir, exist_ok=True)
        csv_path = os.path.join(out_dir, f"{name}.csv")
        meta_path = os.path.join(out_dir, f"{name}.meta.json")
        forests = self.algebra.basis.forests
        with open(csv_path, "w") as fh:
            fh.write("t_left,t_right,forest,value\n")
            cells = self.levels[0]
            for k in range(cells.shape[0]):
                tl, tr = repr(float(self.grid[k])), repr(float(self.grid[k + 1]))
                row = cells[k]
                for i, f in enumerate(forests):
                    if row[i] != 0.0:
                        fh.write(f"{tl},{tr},{f.key},{float(row[i])!r}\n")
        meta = {
            "letters": [letter_key(l) for l in self.algebra.basis.letters],
            "max_weight": self.algebra.basis.max_weight,
            "alpha": self.alpha,
            "T": self.T,
            "cells": int(self.cells),
            "grid": [float(t) for t in self.grid],
            "base_values": [[float(v) for v in row] for row in self.base_values],
        }
        with open(meta_path, "w") as fh:
            json.dump(meta, fh, sort_keys=True, indent=2)
            fh.write("\n")
        return csv_path, meta_path

    @classmethod
    def load(cls, out_dir: str, name: str = "lift") -> "RoughPath":
        with open(os.path.join(out_dir, f"{name}.meta.json")) as fh:
            meta = json.load(fh)
        letters = []
        for text in meta["letters"]:
            if text.startswith("("):
                letters.append((int(text[1]), int(text[2])))
            else:
                letters.append(int(text))
        algebra = get_algebra(tuple(letters), meta["max_weight"])
        cells = meta["cells"]
        chars = np.zeros((cells, algebra.dim))
        chars[:, 0] = 1.0
        grid = np.array(meta["grid"])
        with open(os.path.join(out_dir, f"{name}.csv")) as fh:
            header = fh.readline()
            if header.strip() != "t_left,t_right,forest,value":
                raise ValueError("unrecognized lift CSV header")
            for line in fh:
                tl, _tr, key, val = line.rstrip("\n").split(",")
                k = int(round(float(tl) / meta["T"] * cells))
                chars[k, algebra.basis.index[parse_forest(key)]] = float(val)
        return cls(
            algebra=algebra,
            grid=grid,
            levels=_pyramid(algebra, chars),
            base_values=np.array(meta["base_values"]),
            alpha=meta["alpha"],
        )


def lift(driver: DriverSpec) -> RoughPath:
    """Lift a driver to a branched rough path over its base alphabet."""
    algebra = get_algebra(base_alphabet(driver.d), driver.N)
    omega = _magnus_generators(driver, algebra)
    sub_chars = algebra.exp(omega)
    cell_chars = algebra.star_reduce(
        sub_chars.reshape(driver.cells, driver.substeps, algebra.dim)
    )
    grid = driver.grid
    base_values = np.stack([sig.value(grid) for sig in driver.base])
    return RoughPath(
        algebra=algebra,
        grid=grid,
        levels=_pyramid(algebra, cell_chars),
        base_values=base_values,
        alpha=driver.alpha,
        driver=driver,
    )


def bracket_extension(x: RoughPath) -> RoughPath:
    """Extend a lifted driver over the bracket alphabet.

    Level-one bracket components integrate ``⟨•_j •_i⟩ − ⟨[•_j]_i⟩`` of the
    base lift substep by substep, so the defining identity holds exactly on
    every grid interval (that combination is primitive, hence additive), and
    base-letter components are reproduced bit for bit.
    """
    driver = x.driver
    if driver is None:
        raise ValueError("bracket_extension needs a lift that kept its driver")
    d, n_trunc = driver.d, driver.N
    base_alg = get_algebra(base_alphabet(d), n_trunc)
    ext_alg = get_algebra(bracket_alphabet(d), n_trunc)

    nodes = _substep_nodes(driver)
    lo, hi = nodes[:-1], nodes[1:]
    h = hi - lo
    c1 = lo + h * (0.5 - _SQRT3 / 6.0)
    c2 = lo + h * (0.5 + _SQRT3 / 6.0)
    n = len(h)

    lin = np.zeros((n, ext_alg.dim))
    a1 = np.zeros((n, ext_alg.dim))
    a2 = np.zeros((n, ext_alg.dim))
    for col, sig in _generator_columns(driver, ext_alg):
        lin[:, col] = sig.value(hi) - sig.value(lo)
        a1[:, col] = sig.rate(c1)
        a2[:, col] = sig.rate(c2)

    base_sub = base_alg.exp(_magnus_generators(driver, base_alg))
    bidx = base_alg.basis.index
    eidx = ext_alg.basis.index
    for i in range(1, d + 1):
        for j in range(1, d + 1):
            delta = (
                base_sub[:, bidx[concat(single(j), single(i))]]
                - base_sub[:, bidx[b_plus(single(j), i)]]
            )
            col = eidx[single((i, j))]
            lin[:, col] = delta
            rate = delta / h
            a1[:, col] = rate
            a2[:, col] = rate

    omega = lin + ((h * h) * (_SQRT3 / 12.0))[:, None] * ext_alg.commutator(a1, a2)
    sub_chars = ext_alg.exp(omega)
    cell_chars = ext_alg.star_reduce(
        sub_chars.reshape(driver.cells, driver.substeps, ext_alg.dim)
    )
    return RoughPath(
        algebra=ext_alg,
        grid=x.grid,
        levels=_pyramid(ext_alg, cell_chars),
        base_values=x.base_values,
        alpha=x.alpha,
        driver=driver,
    )


# ---------------------------------------------------------------------------
# Scalar extension paths
# ---------------------------------------------------------------------------


def bracket_series(i: int, j: int) -> dict:
    """The level-two combination a bracket letter abbreviates."""
    return {concat(single(j), single(i)): 1, b_plus(single(j), i): -1}


def tilde_series(i: int, j: int, k: int) -> dict:
    """Third-order compensator element for the triple ``(i, j, k)``."""
    return {
        concat(single(k), concat(single(j), single(i))): 1,
        b_plus(concat(single(k), single(j)), i): -1,
        b_plus(single(k), (i, j)): -1,
    }


def cbar_series(i: int, j: int, k: int) -> dict:
    """Mixed second-order compensator element for ``(i, j, k)``."""
    return {
        concat(single(i), b_plus(single(k), j)): 1,
        concat(b_plus(single(k), j), single(i)): 1,
        b_plus(b_plus(single(k), j), i): -1,
        b_plus(single(k), (i, j)): -1,
        b_plus(single(k), (j, i)): -1,
    }


@dataclass(eq=False)
class ScalarExtensionPath:
    """A scalar functional of an extended lift, evaluated per interval.

    ``increment(a, b)`` pairs the character of ``[t_a, t_b]`` with a fixed
    series — the defining two-parameter evaluation.  Whether those increments
    are additive over (s, u, t) is a property of the series (additive exactly
    when the series is primitive modulo the bracket relation), not of this
    container; :meth:`additivity_defect` measures it.
    """

    xhat: RoughPath
    series: dict
    label: str

    def __post_init__(self):
        self._vec = self.xhat.algebra.basis.vector(self.series)

    def increment(self, a: int, b: int) -> float:
        return float(self.xhat.eval_nodes(a, b) @ self._vec)

    def cell_increments(self, stride: int = 1) -> np.ndarray:
        """Direct increments of all aligned stride-blocks of the grid."""
        return self.xhat.stride_chars(stride) @ self._vec

    def node_values(self) -> np.ndarray:
        """Cumulative values on the finest grid, starting from zero."""
        return np.concatenate([[0.0], np.cumsum(self.cell_increments(1))])

    def additivity_defect(self, a: int, u: int, b: int) -> float:
        return self.increment(a, b) - self.increment(a, u) - self.increment(u, b)


def tilde_path(xhat: RoughPath, i: int, j: int, k: int) -> ScalarExtensionPath:
    """Third-order scalar extension path for the letter triple ``(i, j, k)``."""
    return ScalarExtensionPath(xhat, tilde_series(i, j, k), f"tilde({i}{j}{k})")


def cbar_path(xhat: RoughPath, i: int, j: int, k: int) -> ScalarExtensionPath:
    """Mixed-compensator scalar extension path for ``(i, j, k)``."""
    return ScalarExtensionPath(xhat, cbar_series(i, j, k), f"cbar({i}{j}{k})")


# ---------------------------------------------------------------------------
# Probe helpers
# ---------------------------------------------------------------------------


def chen_residuals(x: RoughPath, n_probes: int, seed: int = 0) -> np.ndarray:
    """∞-norm Chen defects over random node triples ``a < u < b``."""
    rng = np.random.default_rng(seed)
    out = np.empty(n_probes)
    for p in range(n_probes):
        a, u, b = np.sort(rng.choice(x.cells + 1, size=3, replace=False))
        out[p] = x.chen_defect(int(a), int(u), int(b))
    return out


def character_residuals(x: RoughPath, n_probes: int, seed: int = 0) -> np.ndarray:
    """Shuffle-character defects over random intervals and forest pairs."""
    rng = np.random.default_rng(seed)
    basis = x.algebra.basis
    nonempty = [f for f in basis.forests if f.weight >= 1]
    pairs = [
        (f1, f2)
        for f1 in nonempty
        for f2 in nonempty
        if f1.weight + f2.weight <= basis.max_weight
    ]
    if not pairs:
        raise ValueError("truncation too low for character probes")
    out = np.empty(n_probes)
    for p in range(n_probes):
        a, b = np.sort(rng.choice(x.cells + 1, size=2, replace=False))
        f1, f2 = pairs[rng.integers(len(pairs))]
        out[p] = x.character_defect(int(a), int(b), f1, f2)
    return out
