"""Matrix-free elliptic operator, Dirichlet form, and mean-zero Green solves.

The operator is applied as: assemble the forward-difference gradient stack,
multiply by the per-site coefficient map, then apply the adjoint divergence.
Its inverse on mean-zero fields is computed by preconditioned conjugate
gradients with the iterate re-projected to mean zero every step; the operator
matrix is never assembled outside the small dense oracle used by tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lattice import (
    LatticeField,
    LatticeTorus,
    divergence_star_raw,
    gradient_stack_raw,
    mean_zero_tolerance,
)
from .coefficients import CoefficientField, ellipticity_constants
from . import tableio

DEFAULT_TOL = 1e-10
ORACLE_SITE_LIMIT = 4096


class TorusMismatchError(ValueError):
    """Field and operator live on different tori."""


class MeanZeroError(ValueError):
    """A solve was requested for a right-hand side with nonzero mean."""


class ConvergenceError(RuntimeError):
    """The iterative solver missed its tolerance within the iteration budget."""

    def __init__(self, message: str, report: "SolveReport"):
        super().__init__(message)
        self.report = report


class OracleSizeError(ValueError):
    """Dense oracle requested beyond the supported size."""


@dataclass(frozen=True)
class SolveReport:
    iterations: int
    residual: float
    tol: float


@dataclass(frozen=True)
class KernelColumn:
    """Matrix-valued kernel slice at a fixed source site.

    ``values[y, :, a]`` is the field response at site y to the unit source in
    component a placed at ``source``.
    """

    torus: LatticeTorus
    source: int
    values: np.ndarray  # (sites, m, m)
    provenance: str
    tol: float

    def block(self, y: int) -> np.ndarray:
        return self.values[y]

    def export(self, stem) -> dict:
        t = self.torus
        meta = {
            "kind": "kernel-column",
            "d": t.d, "m": t.m, "L": t.L, "N": t.N,
            "source": int(self.source),
            "provenance": self.provenance,
            "tol": self.tol,
        }
        return tableio.write_table(stem, self.values, meta)

    @staticmethod
    def import_table(stem) -> "KernelColumn":
        values, header = tableio.read_table(stem)
        meta = header["meta"]
        torus = LatticeTorus(int(meta["d"]), int(meta["m"]), int(meta["L"]), int(meta["N"]))
        return KernelColumn(torus, int(meta["source"]), values,
                            str(meta["provenance"]), float(meta["tol"]))


class EllipticOperator:
    """Divergence-form operator with variable symmetric coefficients."""

    def __init__(self, coefficients: CoefficientField):
        self.coefficients = coefficients
        self.torus = coefficients.torus
        self.c0, self.c1 = ellipticity_constants(coefficients)
        self._jacobi_inv = None

    # -- raw array plumbing ------------------------------------------------

    def apply_raw(self, flat: np.ndarray) -> np.ndarray:
        t = self.torus
        G = gradient_stack_raw(t, flat).reshape(t.sites, t.m * t.d)
        F = np.einsum("spq,sq->sp", self.coefficients.values, G)
        return divergence_star_raw(t, F.reshape(t.sites, t.m, t.d))

    def dirichlet_form_raw(self, u: np.ndarray, v: np.ndarray) -> float:
        t = self.torus
        Gu = gradient_stack_raw(t, u).reshape(t.sites, t.m * t.d)
        Gv = gradient_stack_raw(t, v).reshape(t.sites, t.m * t.d)
        return float(np.einsum("sp,spq,sq->", Gu, self.coefficients.values, Gv))

    def jacobi_blocks_inv(self) -> np.ndarray:
        """Inverse per-site m-by-m diagonal blocks of the operator stencil."""
        if self._jacobi_inv is None:
            t = self.torus
            Av = self.coefficients.values.reshape(t.sites, t.m, t.d, t.m, t.d)
            D = np.einsum("sajbj->sab", Av).copy()
            for j in range(t.d):
                g = t.to_grid(Av.reshape(t.sites, -1))
                shifted = t.to_flat(np.roll(g, +1, axis=j)).reshape(
                    t.sites, t.m, t.d, t.m, t.d
                )
                D += shifted[:, :, j, :, j]
            self._jacobi_inv = np.linalg.inv(D)
        return self._jacobi_inv

    def _check_field(self, phi: LatticeField) -> None:
        if phi.torus != self.torus:
            raise TorusMismatchError("field torus does not match operator torus")

    # -- public operations ---------------------------------------------------

    def apply(self, phi: LatticeField) -> LatticeField:
        """Apply the operator; the image always sums to zero by telescoping."""
        self._check_field(phi)
        return LatticeField(self.torus, self.apply_raw(phi.values), True)

    def dirichlet_form(self, phi: LatticeField, psi: LatticeField) -> float:
        self._check_field(phi)
        self._check_field(psi)
        return self.dirichlet_form_raw(phi.values, psi.values)

    def solve_green_raw(
        self, f: np.ndarray, tol: float = DEFAULT_TOL, max_iter: int | None = None
    ) -> tuple[np.ndarray, SolveReport]:
        """PCG for the mean-zero solution of (operator) u = f.

        The right-hand side must already be mean-zero; the iterate has its
        mean removed every step so roundoff cannot drift into the kernel.
        """
        t = self.torus
        sums = np.abs(f.sum(axis=0))
        if sums.max(initial=0.0) > max(mean_zero_tolerance(f), 1e-300):
            raise MeanZeroError(f"right-hand side has component sums {sums}")
        f = f - f.mean(axis=0)
        nf = float(np.linalg.norm(f))
        x = np.zeros_like(f)
        if nf == 0.0:
            return x, SolveReport(0, 0.0, tol)
        if max_iter is None:
            max_iter = max(1000, 40 * t.side * t.d)
        Dinv = self.jacobi_blocks_inv()
        r = f.copy()
        z = np.einsum("sab,sb->sa", Dinv, r)
        p = z.copy()
        rz = float(np.vdot(r, z))
        iterations = 0
        for _ in range(max_iter):
            Ap = self.apply_raw(p)
            alpha = rz / float(np.vdot(p, Ap))
            x += alpha * p
            x -= x.mean(axis=0)
            r -= alpha * Ap
            iterations += 1
            if float(np.linalg.norm(r)) <= tol * nf:
                r = f - self.apply_raw(x)  # guard against residual drift
                if float(np.linalg.norm(r)) <= tol * nf:
                    break
            z = np.einsum("sab,sb->sa", Dinv, r)
            rz_new = float(np.vdot(r, z))
            p = z + (rz_new / rz) * p
            rz = rz_new
        residual = float(np.linalg.norm(f - self.apply_raw(x)))
        report = SolveReport(iterations, residual, tol)
        if residual > tol * nf:
            raise ConvergenceError(
                f"no convergence after {iterations} iterations "
                f"(relative residual {residual / nf:.3e})",
                report,
            )
        return x, report

    def solve_green(
        self, f: LatticeField, tol: float = DEFAULT_TOL
    ) -> tuple[LatticeField, SolveReport]:
        self._check_field(f)
        x, report = self.solve_green_raw(f.values, tol)
        return LatticeField(self.torus, x, True), report

    def green_column(self, x0, tol: float = DEFAULT_TOL) -> KernelColumn:
        """Solve the kernel equation for every unit component at one source.

        The right-hand side per component is the unit mass at the source
        minus the uniform background ``1/sites``, so each column is the
        mean-zero kernel slice.
        """
        t = self.torus
        source = x0 if isinstance(x0, (int, np.integer)) else t.index_of(x0)
        cols = np.zeros((t.sites, t.m, t.m))
        for a in range(t.m):
            rhs = np.zeros((t.sites, t.m))
            rhs[source, a] = 1.0
            rhs -= rhs.mean(axis=0)
            cols[:, :, a], _ = self.solve_green_raw(rhs, tol)
        tag = f"green:{self.coefficients.content_hash()[:12]}"
        return KernelColumn(t, int(source), cols, tag, tol)


# ---------------------------------------------------------------------------
# dense oracle (tests and sampling only)


def _check_oracle_size(torus: LatticeTorus) -> None:
    if torus.sites > ORACLE_SITE_LIMIT:
        raise OracleSizeError(
            f"dense oracle limited to {ORACLE_SITE_LIMIT} sites, got {torus.sites}"
        )


def dense_matrix(op: EllipticOperator) -> np.ndarray:
    """Dense (sites*m, sites*m) matrix of the operator, by applying to a basis."""
    _check_oracle_size(op.torus)
    t = op.torus
    n = t.sites * t.m
    out = np.zeros((n, n))
    for j in range(n):
        e = np.zeros((t.sites, t.m))
        e[j // t.m, j % t.m] = 1.0
        out[:, j] = op.apply_raw(e).reshape(n)
    return out


def dense_green(op: EllipticOperator) -> np.ndarray:
    """Pseudo-inverse of the dense operator on the mean-zero subspace.

    The kernel of the operator is exactly the m-dimensional space of constant
    fields; eigenvalues below a relative cutoff are treated as that kernel.
    """
    A = dense_matrix(op)
    w, V = np.linalg.eigh(0.5 * (A + A.T))
    cutoff = 1e-12 * max(abs(w[0]), abs(w[-1]))
    inv = np.where(np.abs(w) > cutoff, 1.0 / np.where(np.abs(w) > cutoff, w, 1.0), 0.0)
    return (V * inv) @ V.T


def mean_projector(torus: LatticeTorus) -> np.ndarray:
    """Dense projector removing the per-component mean, on (sites*m) vectors."""
    n = torus.sites * torus.m
    P = np.eye(n)
    for a in range(torus.m):
        idx = np.arange(a, n, torus.m)
        P[np.ix_(idx, idx)] -= 1.0 / torus.sites
    return P
