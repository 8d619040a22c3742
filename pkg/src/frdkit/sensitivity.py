"""First-order dependence of kernels on the coefficient field.

Directional derivatives are estimated by central finite differences of the
kernel slices along a symmetric coefficient direction, with a Richardson
consistency check across step sizes.  For the full Green slice at a constant
base the estimate is validated against exact first-order perturbation theory:
the derivative of the inverse is minus the inverse times the direction's
divergence-form operator times the inverse, computable with two extra solves.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lattice import LatticeError
from .coefficients import (
    CoefficientField,
    ellipticity_constants,
    scaled_smoothness_norm,
)
from .operators import EllipticOperator, KernelColumn
from .decomposition import Decomposition, DecompositionPlan

#: Probe solves run three orders tighter than the library default because
#: central differencing divides the solver error by twice the step size.
PROBE_TOL = 1e-13


@dataclass(frozen=True)
class DirectionalProbe:
    """Finite-difference probe of one level kernel along one direction.

    The direction must keep the perturbed fields elliptic for every step and
    its scaled smoothness norm is normalized to at most one; margins are
    recorded rather than assumed.
    """

    base: CoefficientField
    direction: CoefficientField
    steps: tuple[float, ...]
    level: int
    source: int
    plan: DecompositionPlan | None = None
    tol: float = PROBE_TOL

    def __post_init__(self):
        if self.base.torus != self.direction.torus:
            raise LatticeError("base and direction tori differ")
        if not self.steps or any(h <= 0 for h in self.steps):
            raise LatticeError("steps must be positive")
        norm = scaled_smoothness_norm(self.direction)
        if norm > 1.0 + 1e-9:
            raise LatticeError(
                f"direction smoothness norm {norm:.3e} exceeds 1"
            )

    def shifted(self, h: float) -> CoefficientField:
        return CoefficientField(self.base.torus,
                                self.base.values + h * self.direction.values)

    def margins(self) -> dict:
        """Ellipticity margin at the largest probed step, both signs."""
        hmax = max(self.steps)
        out = {}
        for sign in (+1.0, -1.0):
            c0, c1 = ellipticity_constants(self.shifted(sign * hmax))
            out[f"c0_at_{sign * hmax:+g}"] = c0
        return out


def _resolved_plan(probe: DirectionalProbe) -> DecompositionPlan:
    return probe.plan or DecompositionPlan.default(probe.base.torus, probe.tol)


def _kernel_at(probe: DirectionalProbe, h: float) -> np.ndarray:
    A = probe.shifted(h)
    ellipticity_constants(A)  # raises when the probe leaves the elliptic cone
    dec = Decomposition(EllipticOperator(A), _resolved_plan(probe))
    return dec.level_kernel_column(probe.level, probe.source, probe.tol).values


def directional_derivative(probe: DirectionalProbe) -> tuple[KernelColumn, dict]:
    """Central-difference derivative of a level kernel slice, with a report.

    Uses the two smallest steps; the reported Richardson ratio compares the
    step-h and step-h/2 errors against the finer estimate (or the oracle when
    the caller supplies one via ``report["oracle"]`` comparison helpers).
    """
    steps = sorted(probe.steps, reverse=True)
    estimates = {}
    for h in steps:
        plus = _kernel_at(probe, +h)
        minus = _kernel_at(probe, -h)
        estimates[h] = (plus - minus) / (2 * h)
    hs = list(estimates)
    finest = estimates[hs[-1]]
    report = {
        "steps": hs,
        "margins": probe.margins(),
        "max_abs": float(np.abs(finest).max()),
    }
    if len(hs) >= 3:
        d1 = float(np.abs(estimates[hs[0]] - estimates[hs[1]]).max())
        d2 = float(np.abs(estimates[hs[1]] - estimates[hs[2]]).max())
        report["richardson_ratio"] = d1 / d2 if d2 > 0 else float("inf")
    t = probe.base.torus
    col = KernelColumn(
        t, probe.source, finest,
        f"derivative:level{probe.level}:h{hs[-1]:g}", probe.tol,
    )
    return col, report


def green_derivative_estimate(probe: DirectionalProbe) -> tuple[np.ndarray, dict]:
    """Central differences of the full Green slice (sum over all levels)."""
    t = probe.base.torus
    steps = sorted(probe.steps, reverse=True)
    estimates = {}
    for h in steps:
        cols = {}
        for sign in (+1.0, -1.0):
            A = probe.shifted(sign * h)
            cols[sign] = EllipticOperator(A).green_column(
                probe.source, probe.tol).values
        estimates[h] = (cols[+1.0] - cols[-1.0]) / (2 * h)
    report = {"steps": list(estimates), "margins": probe.margins()}
    return estimates[steps[-1]], {"estimates": estimates, **report}


def green_derivative_oracle(probe: DirectionalProbe) -> np.ndarray:
    """Exact first-order change of the Green slice: -(solve, direction-apply, solve)."""
    t = probe.base.torus
    op = EllipticOperator(probe.base)
    dir_op_vals = probe.direction.values
    out = np.zeros((t.sites, t.m, t.m))
    for a in range(t.m):
        rhs = np.zeros((t.sites, t.m))
        rhs[probe.source, a] = 1.0
        rhs -= rhs.mean(axis=0)
        g, _ = op.solve_green_raw(rhs, probe.tol)
        # apply the direction's divergence-form operator to the slice
        from .lattice import divergence_star_raw, gradient_stack_raw
        G = gradient_stack_raw(t, g).reshape(t.sites, t.m * t.d)
        F = np.einsum("spq,sq->sp", dir_op_vals, G).reshape(t.sites, t.m, t.d)
        w = divergence_star_raw(t, F)
        du, _ = op.solve_green_raw(-w, probe.tol)
        out[:, :, a] = du
    return out


def lipschitz_scan(probe: DirectionalProbe) -> dict:
    """Kernel distance versus step size: log-log slope near one means Lipschitz.

    Also reports the first-order homogeneity ratio under doubling of the
    direction (ratio of leading distances, expected near two).
    """
    if len(probe.steps) < 2:
        raise LatticeError("scan needs at least two steps")
    base_col = _kernel_at(probe, 0.0)
    hs = sorted(probe.steps)
    dists = []
    for h in hs:
        dists.append(float(np.abs(_kernel_at(probe, h) - base_col).max()))
    logs = np.log(np.array(dists))
    slope = float(np.polyfit(np.log(np.array(hs)), logs, 1)[0])
    h0 = hs[0]
    doubled = float(np.abs(_kernel_at(probe, 2 * h0) - base_col).max())
    return {
        "steps": hs,
        "distances": dists,
        "loglog_slope": slope,
        "doubling_ratio": doubled / dists[0] if dists[0] > 0 else float("inf"),
        "margins": probe.margins(),
    }
