"""Rough integrals, Young integrals, and the tree-indexed Euler scheme.

The compensated Riemann sum of a controlled integrand ``Z`` against letter
``l`` of a lift ``X`` adds, on each mesh cell ``[u, v]``, every term
``⟨τ, Z_u⟩ · ⟨X_{u,v}, [τ]_l⟩`` whose grafted forest survives the weight
truncation.  Against a base letter this compensates with all available
coefficients; against a bracket letter the weight budget shrinks by two, so
at truncation 2 the sum is a plain left-point sum and at truncation 3 it
carries single-letter compensators.

Differential equations driven by a lift are solved by the step-``N`` scheme

    Y_{k+1} = Y_k + Σ_{trees τ, weight ≤ N}  f_τ(Y_k) · ⟨X_{cell k}, τ⟩ ,

with the elementary differentials ``f_{•_i} = f_i`` and
``f_{[τ1…τm]_i} = D^m f_i : (f_{τ1}, …, f_{τm})``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import sympy

from .forest_core import EMPTY, PlanarForest, b_plus, letter_weight, single
from .controlled import (
    ControlledPath,
    SmoothFunctionWithDerivatives,
    dm_contract_exprs,
    _as_symbols,
)
from .rates import fit_loglog
from .rough_path import RoughPath


class DivergenceError(RuntimeError):
    """The numerical solution left the trust region (norm above 1e6)."""


# ---------------------------------------------------------------------------
# Vector fields and elementary differentials
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class VectorFieldFamily:
    """Driving vector fields ``f_1, …, f_d`` on R^n, with shared symbols."""

    fields: tuple
    _ftau_cache: dict = field(init=False, repr=False, default_factory=dict)

    def __post_init__(self):
        if not self.fields:
            raise ValueError("need at least one vector field")
        symbols = self.fields[0].symbols
        for f in self.fields:
            if f.symbols != symbols:
                raise ValueError("vector fields must share one symbol tuple")
            if f.n_in != f.n_out:
                raise ValueError("vector fields must map R^n to R^n")

    @classmethod
    def from_expressions(cls, exprs_per_field, variables, max_order: int = 3):
        symbols = _as_symbols(variables)
        local = dict(zip(variables, symbols))
        fields = tuple(
            SmoothFunctionWithDerivatives(
                exprs=tuple(sympy.sympify(e, locals=local) for e in exprs),
                symbols=symbols,
                max_order=max_order,
            )
            for exprs in exprs_per_field
        )
        return cls(fields=fields)

    @property
    def d(self) -> int:
        return len(self.fields)

    @property
    def n(self) -> int:
        return self.fields[0].n_in

    @property
    def symbols(self):
        return self.fields[0].symbols


def f_tau(fields: VectorFieldFamily, f: PlanarForest) -> SmoothFunctionWithDerivatives:
    """Elementary differential of a single tree as a function object."""
    if len(f.trees) != 1:
        raise ValueError(f"elementary differentials live on trees, got {f.key}")
    cached = fields._ftau_cache.get(f)
    if cached is not None:
        return cached
    t = f.trees[0]
    if not isinstance(t.letter, int):
        raise ValueError(f"tree {f.key} uses a bracket letter")
    if not 1 <= t.letter <= fields.d:
        raise ValueError(f"tree {f.key} uses letters beyond d={fields.d}")
    root = fields.fields[t.letter - 1]
    if not t.children:
        out = root
    else:
        child_exprs = [
            f_tau(fields, _forest_of(child)).exprs for child in t.children
        ]
        out = SmoothFunctionWithDerivatives(
            exprs=dm_contract_exprs(root.exprs, fields.symbols, child_exprs),
            symbols=fields.symbols,
            max_order=root.max_order,
        )
    fields._ftau_cache[f] = out
    return out


def _forest_of(t):
    from .forest_core import forest

    return forest((t,))


# ---------------------------------------------------------------------------
# Integrals
# ---------------------------------------------------------------------------


def rough_integral(
    z: ControlledPath, x: RoughPath, letter, stride: int = 1
) -> np.ndarray:
    """Compensated-sum contributions per mesh cell, shape ``(m, n_out)``.

    The mesh is the aligned coarsening of ``x``'s grid by ``stride`` cells.
    The total integral over the horizon is ``result.sum(axis=0)``; a running
    integral is its cumulative sum.
    """
    chars = x.stride_chars(stride)
    idx = x.algebra.basis.index
    starts = np.arange(0, x.cells, stride)
    out = np.zeros((len(starts), z.n_out))
    budget = x.N - letter_weight(letter)
    for tau, coeff in z.coeffs.items():
        if tau.weight > budget:
            continue
        grafted = idx.get(b_plus(tau, letter))
        if grafted is None:
            raise ValueError(f"integrator basis lacks [{tau.key}]_{letter}")
        out += coeff[starts] * chars[:, grafted, None]
    return out


def holder_exponent(node_values: np.ndarray, scales_T: float = 1.0) -> float:
    """Empirical Hölder order of a sampled path from dyadic increment maxima."""
    v = np.asarray(node_values, dtype=float)
    m = len(v) - 1
    scales, maxima = [], []
    stride = 1
    while stride * 8 <= m:
        diffs = v[stride::stride] - v[:-stride:stride]
        scales.append(scales_T * stride / m)
        maxima.append(float(np.max(np.abs(diffs))))
        stride *= 2
    return fit_loglog(scales, maxima, floor=1e-14)


def young_integral(
    integrand_nodes: np.ndarray,
    cell_increments: np.ndarray,
    check: bool = True,
    T: float = 1.0,
) -> np.ndarray:
    """Left-point Young sums per cell: ``g(t_k) · δW_k``.

    ``integrand_nodes`` holds the integrand at the mesh nodes (one more entry
    than ``cell_increments``).  With ``check=True`` the empirical Hölder
    orders of both sequences are estimated from dyadic increments; a summed
    order ≤ 1 triggers a ``UserWarning`` (the product limit is then not
    guaranteed to exist).
    """
    g = np.asarray(integrand_nodes, dtype=float)
    dw = np.asarray(cell_increments, dtype=float)
    if len(g) != len(dw) + 1:
        raise ValueError("need one more integrand node than increments")
    if check and len(dw) >= 16:
        a_g = holder_exponent(g, T)
        a_w = holder_exponent(np.concatenate([[0.0], np.cumsum(dw)]), T)
        if a_g + a_w <= 1.0 and not (math.isinf(a_g) or math.isinf(a_w)):
            warnings.warn(
                f"Young precondition violated: estimated orders "
                f"{a_g:.3f} + {a_w:.3f} <= 1",
                stacklevel=2,
            )
    return g[:-1] * dw


# ---------------------------------------------------------------------------
# Differential equations
# ---------------------------------------------------------------------------


def solve_rde(
    x: RoughPath,
    fields: VectorFieldFamily,
    xi,
    order: int | None = None,
) -> ControlledPath:
    """Step-N tree Euler solution of ``dY = Σ f_i(Y) dX^i`` as a controlled path.

    The returned path carries the solution at the empty forest and the
    elementary differentials ``f_τ(Y_t)`` on trees up to weight ``N − 1``
    (multi-tree forests carry zero).
    """
    n_trunc = x.N if order is None else order
    if fields.d != x.base_values.shape[0]:
        raise ValueError(
            f"{fields.d} fields against a driver with {x.base_values.shape[0]} letters"
        )
    basis = x.algebra.basis
    trees = [
        f
        for f in basis.forests
        if len(f.trees) == 1 and f.weight <= n_trunc
    ]
    ftaus = {f: f_tau(fields, f) for f in trees}

    # one compiled step: y + Σ_τ c_τ f_τ(y), with the c_τ as scalar arguments
    weights = _as_symbols([f"c{k}" for k in range(len(trees))])
    step_exprs = list(fields.symbols)
    for w, f in zip(weights, trees):
        fn = ftaus[f]
        step_exprs = [e + w * fe for e, fe in zip(step_exprs, fn.exprs)]
    step = sympy.lambdify(tuple(fields.symbols) + tuple(weights), step_exprs,
                          modules="numpy")

    cells = x.levels[0]
    cols = [x.algebra.basis.index[f] for f in trees]
    nodes = len(x.grid)
    y = np.empty((nodes, fields.n))
    y[0] = np.asarray(xi, dtype=float)
    for k in range(x.cells):
        args = list(y[k]) + [cells[k, c] for c in cols]
        y[k + 1] = step(*args)
        if not np.all(np.isfinite(y[k + 1])) or np.max(np.abs(y[k + 1])) > 1e6:
            raise DivergenceError(
                f"solution left the trust region at t={x.grid[k + 1]:.6g}"
            )

    coeffs = {EMPTY: y}
    for f in trees:
        if f.weight <= n_trunc - 1:
            arr = ftaus[f].value(y)
            if np.any(arr):
                coeffs[f] = arr
    return ControlledPath(x=x, order=n_trunc - 1, coeffs=coeffs, n_out=fields.n,
                          label="rde")


# ---------------------------------------------------------------------------
# Convergence reporting
# ---------------------------------------------------------------------------


@dataclass
class ConvergenceReport:
    """Mesh-refinement record for one scalar quantity."""

    quantity: str
    strides: list
    scales: list
    values: list
    reference: float
    residuals: list
    slope: float
    tolerance: float
    threshold: float
    passed: bool

    @classmethod
    def from_values(
        cls,
        quantity: str,
        strides,
        scales,
        values,
        reference: float,
        tolerance: float,
        threshold: float,
    ) -> "ConvergenceReport":
        residuals = [abs(v - reference) for v in values]
        slope = fit_loglog(scales, residuals)
        finest = residuals[-1]
        passed = finest <= tolerance and slope >= threshold
        return cls(
            quantity=quantity,
            strides=list(int(s) for s in strides),
            scales=list(float(s) for s in scales),
            values=list(float(v) for v in values),
            reference=float(reference),
            residuals=list(float(r) for r in residuals),
            slope=float(slope),
            tolerance=float(tolerance),
            threshold=float(threshold),
            passed=bool(passed),
        )

    def to_dict(self) -> dict:
        return {
            "quantity": self.quantity,
            "strides": self.strides,
            "scales": self.scales,
            "values": self.values,
            "reference": self.reference,
            "residuals": self.residuals,
            "slope": None if math.isinf(self.slope) else self.slope,
            "slope_is_converged_sentinel": math.isinf(self.slope),
            "tolerance": self.tolerance,
            "threshold": self.threshold,
            "passed": self.passed,
        }
