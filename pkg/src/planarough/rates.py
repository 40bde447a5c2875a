"""Log-log slope fitting for empirical convergence orders.

All rate estimates in the package funnel through :func:`fit_loglog`, which
implements one shared convention: residuals at or below ``floor`` are treated
as exact (pure roundoff) and excluded from the fit, and when fewer than two
informative points remain the fit returns ``+inf`` — "converged faster than
measurable", which passes any threshold.
"""

from __future__ import annotations

import math

import numpy as np

#: Residuals at or below this are considered float roundoff, not signal.
RESIDUAL_FLOOR = 1e-10


def fit_loglog(scales, values, floor: float = RESIDUAL_FLOOR) -> float:
    """Least-squares slope of log(values) against log(scales).

    Args:
        scales: positive mesh sizes / step sizes.
        values: nonnegative residual magnitudes, same length.
        floor: values ≤ floor are dropped (roundoff, no information).

    Returns:
        Fitted slope, or ``+inf`` when fewer than two points survive the
        floor (the quantity vanishes to within roundoff at every scale).
    """
    scales = np.asarray(scales, dtype=float)
    values = np.asarray(values, dtype=float)
    if scales.shape != values.shape:
        raise ValueError("scales and values must have matching shapes")
    keep = values > floor
    if keep.sum() < 2:
        return math.inf
    return float(np.polyfit(np.log(scales[keep]), np.log(values[keep]), 1)[0])
