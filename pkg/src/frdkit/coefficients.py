"""Coefficient fields A(x) on the torus and their smallness measurements.

A coefficient assigns to every site a symmetric linear map on m-by-d gradient
stacks, stored as an (md, md) matrix acting on the row-major flattening of the
stack.  The deviation from a constant reference is measured by the scaled
smoothness norm: the sup over sites and multi-indices ``|b| <= 3`` of
``side^|b|`` times the spectral norm of the entrywise forward difference
``D^b A``.  Perturbed fields are built from finite trigonometric profiles so
the construction budget can be checked against an analytically smooth family.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .lattice import (
    MULTI_INDEX_CAP,
    LatticeError,
    LatticeTorus,
    forward_diff_raw,
)
from . import tableio

SYMMETRY_TOL = 1e-12


class NonEllipticError(ValueError):
    """The quadratic form of the coefficient field is not positive definite."""


class BudgetError(ValueError):
    """Realized smoothness norm exceeds the declared construction budget."""


def _spectral_norms(mats: np.ndarray) -> np.ndarray:
    """Spectral norm per site of a stack of symmetric matrices."""
    return np.abs(np.linalg.eigvalsh(mats)).max(axis=-1)


@dataclass(frozen=True)
class CoefficientField:
    """Site-dependent symmetric positive map on gradient stacks."""

    torus: LatticeTorus
    values: np.ndarray  # (sites, m*d, m*d)

    def __post_init__(self):
        md = self.torus.m * self.torus.d
        v = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64))
        if v.shape != (self.torus.sites, md, md):
            raise LatticeError(
                f"coefficient shape {v.shape} does not match (sites, {md}, {md})"
            )
        asym = np.abs(v - v.transpose(0, 2, 1)).max()
        if asym > SYMMETRY_TOL:
            raise NonEllipticError(f"coefficient symmetry residual {asym:.3e}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @staticmethod
    def constant(torus: LatticeTorus, matrix: np.ndarray) -> "CoefficientField":
        md = torus.m * torus.d
        mat = np.asarray(matrix, dtype=np.float64)
        if mat.shape == ():
            mat = float(mat) * np.eye(md)
        if mat.shape != (md, md):
            raise LatticeError(f"constant coefficient must be ({md}, {md})")
        return CoefficientField(torus, np.broadcast_to(mat, (torus.sites, md, md)).copy())

    @staticmethod
    def identity(torus: LatticeTorus) -> "CoefficientField":
        return CoefficientField.constant(torus, np.eye(torus.m * torus.d))

    def content_hash(self) -> str:
        return tableio.array_hash(self.values)

    def is_constant(self, tol: float = 0.0) -> bool:
        return bool(np.abs(self.values - self.values[0]).max() <= tol)


def ellipticity_constants(A: CoefficientField) -> tuple[float, float]:
    """Extreme eigenvalues of the quadratic form over all sites.

    Raises NonEllipticError when the smallest eigenvalue is not positive.
    """
    eigs = np.linalg.eigvalsh(A.values)
    c0 = float(eigs[:, 0].min())
    c1 = float(eigs[:, -1].max())
    if c0 <= 0:
        raise NonEllipticError(f"coefficient field is not elliptic: c0={c0:.3e}")
    return c0, c1


def _multi_indices_upto(d: int, cap: int):
    for exps in product(range(cap + 1), repeat=d):
        if 0 < sum(exps) <= cap:
            yield exps


def scaled_smoothness_norm(
    A: CoefficientField,
    reference: np.ndarray | None = None,
    cap: int = MULTI_INDEX_CAP,
) -> float:
    """Sup over sites and |b| <= cap of side^|b| * ||D^b (A - reference)(x)||.

    The zero-order term is the plain sup of the spectral norm; differences use
    forward stencils entrywise.  With ``reference`` set this measures the
    deviation from a constant map, which is the smallness parameter used by
    the decomposition bounds.
    """
    if cap > MULTI_INDEX_CAP:
        raise LatticeError(f"smoothness cap {cap} exceeds supported {MULTI_INDEX_CAP}")
    torus = A.torus
    md = torus.m * torus.d
    dev = A.values.reshape(torus.sites, md * md).copy()
    if reference is not None:
        ref = np.asarray(reference, dtype=np.float64).reshape(1, md * md)
        dev = dev - ref
    best = _spectral_norms(dev.reshape(torus.sites, md, md)).max()
    scale = float(torus.side)
    for exps in _multi_indices_upto(torus.d, cap):
        diff = dev
        for axis, reps in enumerate(exps):
            for _ in range(reps):
                diff = forward_diff_raw(torus, diff, axis)
        order = sum(exps)
        val = scale ** order * _spectral_norms(diff.reshape(torus.sites, md, md)).max()
        best = max(best, float(val))
    return float(best)


@dataclass(frozen=True)
class TrigMode:
    """One term of a trigonometric profile: sin(2*pi*(freq . theta) + phase) * amplitude."""

    frequency: tuple[int, ...]
    amplitude: np.ndarray  # (md, md) symmetric
    phase: float = 0.0


@dataclass(frozen=True)
class PerturbationSpec:
    """Constant base map plus a scaled smooth trigonometric deviation.

    The realized field is ``A(x) = A0 + epsilon * B(x / side)`` where B is the
    finite trigonometric sum described by ``modes``.  ``budget`` bounds the
    scaled smoothness norm of ``A - A0``; when omitted it defaults to
    ``0.05 * c0(A0)``, recorded in every report that uses the field.
    """

    base: np.ndarray
    epsilon: float
    modes: tuple[TrigMode, ...] = ()
    budget: float | None = None

    def resolved_budget(self) -> float:
        if self.budget is not None:
            return float(self.budget)
        c0 = float(np.linalg.eigvalsh(np.asarray(self.base, dtype=np.float64))[0])
        return 0.05 * c0


def _profile_values(torus: LatticeTorus, modes: tuple[TrigMode, ...]) -> np.ndarray:
    md = torus.m * torus.d
    out = np.zeros((torus.sites, md, md))
    theta = torus.all_coords().astype(np.float64) / torus.side
    for mode in modes:
        freq = np.asarray(mode.frequency, dtype=np.float64)
        if freq.shape != (torus.d,):
            raise LatticeError(f"mode frequency must have {torus.d} entries")
        amp = np.asarray(mode.amplitude, dtype=np.float64)
        if amp.shape != (md, md) or np.abs(amp - amp.T).max() > SYMMETRY_TOL:
            raise NonEllipticError("mode amplitude must be a symmetric (md, md) matrix")
        out += np.sin(2 * np.pi * theta @ freq + mode.phase)[:, None, None] * amp
    return out


def make_perturbed(spec: PerturbationSpec, torus: LatticeTorus) -> CoefficientField:
    """Realize a perturbation spec, enforcing ellipticity and the budget."""
    md = torus.m * torus.d
    base = np.asarray(spec.base, dtype=np.float64)
    if base.shape == ():
        base = float(base) * np.eye(md)
    if base.shape != (md, md) or np.abs(base - base.T).max() > SYMMETRY_TOL:
        raise NonEllipticError(f"base map must be a symmetric ({md}, {md}) matrix")
    vals = base[None, :, :] + spec.epsilon * _profile_values(torus, spec.modes)
    A = CoefficientField(torus, vals)
    ellipticity_constants(A)  # raises NonEllipticError when lost
    realized = scaled_smoothness_norm(A, reference=base)
    budget = spec.resolved_budget()
    if spec.epsilon != 0 and realized > budget:
        raise BudgetError(
            f"realized smoothness norm {realized:.6e} exceeds budget {budget:.6e}"
        )
    return A


# ---------------------------------------------------------------------------
# structured-text coefficient specs and binary export

_SPEC_KEYS = {"d", "m", "L", "N", "A0", "modes", "epsilon", "budget"}
_MODE_KEYS = {"frequency", "amplitude", "phase"}


def spec_from_config(cfg: dict) -> tuple[LatticeTorus, PerturbationSpec]:
    """Parse the coefficient section of a config dict; unknown keys are errors."""
    unknown = set(cfg) - _SPEC_KEYS
    if unknown:
        raise LatticeError(f"unknown coefficient config keys: {sorted(unknown)}")
    missing = {"d", "m", "L", "N", "A0", "epsilon"} - set(cfg)
    if missing:
        raise LatticeError(f"missing coefficient config keys: {sorted(missing)}")
    torus = LatticeTorus(int(cfg["d"]), int(cfg["m"]), int(cfg["L"]), int(cfg["N"]))
    modes = []
    for raw in cfg.get("modes", []):
        unknown = set(raw) - _MODE_KEYS
        if unknown:
            raise LatticeError(f"unknown mode keys: {sorted(unknown)}")
        modes.append(
            TrigMode(
                frequency=tuple(int(f) for f in raw["frequency"]),
                amplitude=np.asarray(raw["amplitude"], dtype=np.float64),
                phase=float(raw.get("phase", 0.0)),
            )
        )
    spec = PerturbationSpec(
        base=np.asarray(cfg["A0"], dtype=np.float64),
        epsilon=float(cfg["epsilon"]),
        modes=tuple(modes),
        budget=float(cfg["budget"]) if "budget" in cfg else None,
    )
    return torus, spec


def export_table(A: CoefficientField, stem) -> dict:
    """Write the field as a site-major binary table with a JSON header."""
    t = A.torus
    meta = {"kind": "coefficients", "d": t.d, "m": t.m, "L": t.L, "N": t.N}
    return tableio.write_table(stem, A.values, meta)


def import_table(stem) -> CoefficientField:
    values, header = tableio.read_table(stem)
    meta = header.get("meta", {})
    torus = LatticeTorus(int(meta["d"]), int(meta["m"]), int(meta["L"]), int(meta["N"]))
    return CoefficientField(torus, values)
