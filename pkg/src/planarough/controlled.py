"""Controlled paths: forest-indexed coefficient expansions along a lift.

A path ``Z`` is *controlled* by a lift ``X`` (to order ``M``) when it carries
coefficient paths ``⟨τ, Z⟩`` for every forest τ of weight ≤ M such that the
transported expansion

    ⟨τ, Z_t⟩ = Σ_σ ⟨σ, Z_s⟩ · Σ {coeff · ⟨X_{s,t}, P⟩ : (P, τ) a coproduct
               term of σ}  +  R^τ_{s,t}

has remainders of order ``(N − weight(τ)) · α`` in ``t − s``.  This module
provides the function objects used everywhere (values plus exact derivative
tensors, compiled from symbolic expressions), the three coefficient
constructions (composition with a function of the driver, composition with a
function of a controlled path, and the lifted indefinite integral), and the
transport remainder with its empirical rate fit.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
import sympy

from .forest_core import (
    EMPTY,
    PlanarForest,
    b_plus,
    forest,
    letter_weight,
    tree,
)
from .hopf_mkw import coproduct_mkw
from .rates import fit_loglog
from .rough_path import RoughPath


# ---------------------------------------------------------------------------
# Function objects
# ---------------------------------------------------------------------------


def _as_symbols(names):
    return tuple(sympy.Symbol(n, real=True) for n in names)


@dataclass(eq=False)
class SmoothFunctionWithDerivatives:
    """A smooth map with exact derivative tensors, compiled from sympy.

    ``value(u)`` evaluates the map at points ``u`` of shape ``(..., n_in)``;
    ``dm(u, (v1, …, vm))`` evaluates the m-th derivative as a symmetric
    multilinear form on the given direction arrays.  All evaluations
    broadcast over leading axes.
    """

    exprs: tuple
    symbols: tuple
    max_order: int = 3
    _tensors: list = field(init=False, repr=False)

    def __post_init__(self):
        self.exprs = tuple(sympy.sympify(e) for e in self.exprs)
        n_in = len(self.symbols)
        tensors = []
        for m in range(self.max_order + 1):
            funcs = []
            for e in self.exprs:
                for multi in itertools.product(range(n_in), repeat=m):
                    de = e
                    for a in multi:
                        de = de.diff(self.symbols[a])
                    funcs.append(sympy.lambdify(self.symbols, de, modules="numpy"))
            tensors.append(funcs)
        self._tensors = tensors

    @classmethod
    def from_expressions(cls, exprs, variables, max_order: int = 3):
        """Build from expression strings and variable names."""
        symbols = _as_symbols(variables)
        local = dict(zip(variables, symbols))
        parsed = tuple(sympy.sympify(e, locals=local) for e in exprs)
        return cls(exprs=parsed, symbols=symbols, max_order=max_order)

    @property
    def n_in(self) -> int:
        return len(self.symbols)

    @property
    def n_out(self) -> int:
        return len(self.exprs)

    def _eval_flat(self, funcs, u):
        u = np.asarray(u, dtype=float)
        cols = [u[..., k] for k in range(self.n_in)]
        shape = u.shape[:-1]
        out = np.empty((len(funcs),) + shape)
        for i, fn in enumerate(funcs):
            out[i] = np.broadcast_to(np.asarray(fn(*cols), dtype=float), shape)
        return np.moveaxis(out, 0, -1)

    def value(self, u) -> np.ndarray:
        """Map values, shape ``(..., n_out)``."""
        return self._eval_flat(self._tensors[0], u)

    def tensor(self, u, m: int) -> np.ndarray:
        """m-th derivative tensor, shape ``(..., n_out, n_in**m)`` (flat)."""
        if m > self.max_order:
            raise ValueError(f"derivative order {m} exceeds max_order={self.max_order}")
        flat = self._eval_flat(self._tensors[m], u)
        return flat.reshape(flat.shape[:-1] + (self.n_out, self.n_in**m))

    def dm(self, u, directions) -> np.ndarray:
        """Directional derivative ``D^m F(u):(v1, …, vm)``, m = len(directions)."""
        t = self.tensor(u, len(directions))
        for v in reversed(directions):
            v = np.asarray(v, dtype=float)
            t = t.reshape(t.shape[:-1] + (-1, self.n_in))
            t = (t * v[..., None, None, :]).sum(axis=-1)
        return t[..., 0]

    def partial(self, index: int) -> "SmoothFunctionWithDerivatives":
        """The partial derivative ``∂_index`` (1-based) as a new function."""
        s = self.symbols[index - 1]
        return SmoothFunctionWithDerivatives(
            exprs=tuple(e.diff(s) for e in self.exprs),
            symbols=self.symbols,
            max_order=self.max_order,
        )


def dm_contract_exprs(exprs, symbols, vectors):
    """Symbolic ``D^m(exprs):(v1, …, vm)`` with expression-valued directions.

    ``vectors`` is a list of m tuples of expressions (one component per
    symbol).  The directions are treated as fixed tensors at the evaluation
    point — they are *not* differentiated.
    """
    m = len(vectors)
    out = []
    for e in exprs:
        acc = sympy.Integer(0)
        for multi in itertools.product(range(len(symbols)), repeat=m):
            de = e
            for a in multi:
                de = de.diff(symbols[a])
            if de == 0:
                continue
            term = de
            for k, a in enumerate(multi):
                term = term * vectors[k][a]
            acc = acc + term
        out.append(sympy.expand(acc))
    return tuple(out)


# ---------------------------------------------------------------------------
# Controlled paths
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class ControlledPath:
    """Coefficient paths ``⟨τ, Z⟩`` on the grid nodes of a reference lift.

    ``coeffs`` maps forests (weight ≤ ``order``) to arrays of shape
    ``(nodes, n_out)``; forests absent from the dict are identically zero.
    """

    x: RoughPath
    order: int
    coeffs: dict
    n_out: int
    label: str = ""

    def __post_init__(self):
        nodes = len(self.x.grid)
        for f, arr in self.coeffs.items():
            if arr.shape != (nodes, self.n_out):
                raise ValueError(
                    f"coefficient {f.key} has shape {arr.shape}, "
                    f"expected {(nodes, self.n_out)}"
                )
            if f.weight > self.order:
                raise ValueError(f"coefficient {f.key} exceeds order {self.order}")

    def coefficient(self, f: PlanarForest) -> np.ndarray:
        arr = self.coeffs.get(f)
        if arr is None:
            return np.zeros((len(self.x.grid), self.n_out))
        return arr

    # -- transport and remainders ------------------------------------------

    def _transport_table(self, f: PlanarForest):
        """Rows ``(σ, P, coeff)`` with (P, f) a coproduct term of σ."""
        rows = []
        for sigma in self.coeffs:
            for (p, r), c in coproduct_mkw(sigma).items():
                if r is f:
                    rows.append((sigma, p, c))
        return rows

    def remainder(self, f: PlanarForest, a: int, b: int) -> np.ndarray:
        """Transport remainder ``R^f`` over one node interval ``(a, b)``."""
        g = self.x.eval_nodes(a, b)
        idx = self.x.algebra.basis.index
        acc = self.coefficient(f)[b].astype(float).copy()
        for sigma, p, c in self._transport_table(f):
            acc -= c * self.coeffs[sigma][a] * g[idx[p]]
        return acc

    def remainder_blocks(self, f: PlanarForest, stride: int) -> np.ndarray:
        """Remainders over all aligned stride-blocks, shape ``(m, n_out)``."""
        chars = self.x.stride_chars(stride)
        idx = self.x.algebra.basis.index
        starts = np.arange(0, self.x.cells, stride)
        acc = self.coefficient(f)[starts + stride].astype(float).copy()
        for sigma, p, c in self._transport_table(f):
            acc -= c * self.coeffs[sigma][starts] * chars[:, idx[p], None]
        return acc

    def remainder_rate(self, f: PlanarForest, min_level: int = 0, max_level=None):
        """Empirical order of ``max |R^f|`` across dyadic block sizes."""
        top = (
            len(self.x.levels) - 1 if max_level is None else max_level
        )
        scales, maxima = [], []
        for l in range(min_level, top + 1):
            scales.append(self.x.T * (1 << l) / self.x.cells)
            maxima.append(float(np.max(np.abs(self.remainder_blocks(f, 1 << l)))))
        return fit_loglog(scales, maxima)

    def dump(self, path: str):
        """Write coefficient paths as CSV ``(t, forest, component, value)``."""
        grid = self.x.grid
        keys = sorted(self.coeffs, key=lambda f: (f.weight, f.key))
        with open(path, "w") as fh:
            fh.write("t,forest,component,value\n")
            for f in keys:
                arr = self.coeffs[f]
                for k in range(arr.shape[0]):
                    for c in range(self.n_out):
                        fh.write(
                            f"{float(grid[k])!r},{f.key},{c},{float(arr[k, c])!r}\n"
                        )
        return path


# ---------------------------------------------------------------------------
# Coefficient constructions
# ---------------------------------------------------------------------------


def compose_FX(
    x: RoughPath, func: SmoothFunctionWithDerivatives, order: int
) -> ControlledPath:
    """The controlled path of ``F(driver)``: words carry bare partial tensors.

    Coefficients: the empty forest carries ``F(X_t)``, the word
    ``•_{a1}…•_{am}`` carries ``∂_{a1}…∂_{am} F (X_t)`` (no symmetry factor),
    and every forest containing a non-trivial tree carries zero.
    """
    d = x.base_values.shape[0]
    if func.n_in != d:
        raise ValueError(f"function takes {func.n_in} inputs, driver has {d}")
    u = x.base_values.T
    coeffs = {EMPTY: func.value(u)}
    letters = list(range(1, d + 1))
    for m in range(1, order + 1):
        t = func.tensor(u, m)
        for flat, multi in enumerate(itertools.product(letters, repeat=m)):
            word = forest(tuple(tree(a) for a in multi))
            arr = t[..., flat]
            if np.any(arr):
                coeffs[word] = arr
    return ControlledPath(x=x, order=order, coeffs=coeffs, n_out=func.n_out)


def _splittings(trees):
    """Ways to split a tree word into consecutive nonempty blocks."""
    n = len(trees)
    for mask in range(1 << (n - 1)) if n else ():
        blocks = []
        start = 0
        for gap in range(n - 1):
            if mask >> gap & 1:
                blocks.append(trees[start : gap + 1])
                start = gap + 1
        blocks.append(trees[start:])
        yield blocks


def compose_FY(
    y: ControlledPath, func: SmoothFunctionWithDerivatives, order: int
) -> ControlledPath:
    """The controlled path of ``F(Y)`` for ``Y`` itself controlled.

    The coefficient at a forest τ sums, over every way of splitting τ's tree
    word into consecutive nonempty blocks ``τ1 … τm``, the directional
    derivative ``D^m F(Y):(⟨τ1, Y⟩, …, ⟨τm, Y⟩)``.
    """
    if func.n_in != y.n_out:
        raise ValueError(f"function takes {func.n_in} inputs, path has {y.n_out}")
    if order > y.order:
        raise ValueError(f"cannot compose to order {order} over order {y.order}")
    u = y.coeffs[EMPTY]
    coeffs = {EMPTY: func.value(u)}
    basis = y.x.algebra.basis
    for f in basis.forests:
        if not 1 <= f.weight <= order:
            continue
        acc = None
        for blocks in _splittings(f.trees):
            vs = []
            for block in blocks:
                arr = y.coeffs.get(forest(block))
                if arr is None:
                    break
                vs.append(arr)
            else:
                term = func.dm(u, vs)
                acc = term if acc is None else acc + term
        if acc is not None and np.any(acc):
            coeffs[f] = acc
    return ControlledPath(x=y.x, order=order, coeffs=coeffs, n_out=func.n_out)


def lift_integral(
    z: ControlledPath,
    integrator: RoughPath,
    letter,
    node_values: np.ndarray,
) -> ControlledPath:
    """The indefinite rough integral as a controlled path.

    The empty forest carries the running integral (``node_values``); the
    forest ``[τ]_letter`` carries ``⟨τ, Z⟩`` whenever its weight fits the
    order; everything else is zero.
    """
    order = integrator.N - 1
    coeffs = {EMPTY: node_values.reshape(-1, z.n_out)}
    lw = letter_weight(letter)
    for tau, arr in z.coeffs.items():
        if tau.weight + lw <= order:
            coeffs[b_plus(tau, letter)] = arr
    return ControlledPath(x=integrator, order=order, coeffs=coeffs, n_out=z.n_out)
