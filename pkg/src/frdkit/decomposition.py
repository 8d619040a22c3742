"""Multiscale splitting of the Green operator into finite-range levels.

Level k is the difference of two sandwiched smoothing chains,

    level_k = chain_{k-1} - chain_k,      last level = chain_n,

where ``chain_j`` composes the fluctuation operators of cubes with increasing
sides around one Green solve.  The dual factors are never applied directly:
conjugating the complement through the solve converts every sandwich into a
palindrome of plain fluctuation applications after a single solve, which
halves the solver work.

Kernel slices at a fixed source are extracted through the transposed chain
(local solves first, one Green solve last).  On mean-zero test pairs both
orientations represent the same symmetric level operator; they differ by a
source-independent background field, and the transposed orientation is the
one whose far-field values are constant, which is the normalization the
range checks measure.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .lattice import LatticeError, LatticeField, LatticeTorus
from .coefficients import export_table, import_table
from .operators import DEFAULT_TOL, EllipticOperator, KernelColumn
from .smoothing import AveragingOperator
from . import tableio

ARCHIVE_FORMAT = "frdkit-archive-v1"


def default_cube_sides(L: int, N: int) -> tuple[int, ...]:
    """Cube side ``L**(k-1)`` for level k, capped at the torus side.

    The kernel of level k spreads at most one cube diameter on each side of
    the smoothing sandwich, so keeping the cube a factor ~L/2 below the
    claimed range radius ``L**k / 2`` is what makes the far field flat.
    """
    side = L ** N
    return tuple(min(L ** (k - 1), side) for k in range(1, N + 1))


@dataclass(frozen=True)
class DecompositionPlan:
    """Cube sides per level, claimed range radii, and solver tolerances."""

    cube_sides: tuple[int, ...]
    range_radii: tuple[float, ...]
    solver_tol: float = DEFAULT_TOL

    def __post_init__(self):
        if len(self.cube_sides) != len(self.range_radii):
            raise LatticeError("cube side and range radius counts differ")
        if any(b <= a for a, b in zip(self.cube_sides, self.cube_sides[1:])):
            raise LatticeError(f"cube sides must strictly increase: {self.cube_sides}")

    @property
    def depth(self) -> int:
        return len(self.cube_sides)

    @property
    def levels(self) -> int:
        return self.depth + 1

    @staticmethod
    def default(torus: LatticeTorus, solver_tol: float = DEFAULT_TOL) -> "DecompositionPlan":
        sides = default_cube_sides(torus.L, torus.N)
        radii = tuple(0.5 * torus.L ** k for k in range(1, torus.N + 1))
        return DecompositionPlan(sides, radii, solver_tol)

    def validate_for(self, torus: LatticeTorus) -> None:
        if self.cube_sides and self.cube_sides[-1] > torus.side:
            raise LatticeError(
                f"largest cube side {self.cube_sides[-1]} exceeds torus side {torus.side}"
            )

    def to_json(self) -> dict:
        return {
            "cube_sides": list(self.cube_sides),
            "range_radii": list(self.range_radii),
            "solver_tol": self.solver_tol,
        }

    @staticmethod
    def from_json(obj: dict) -> "DecompositionPlan":
        return DecompositionPlan(
            tuple(int(v) for v in obj["cube_sides"]),
            tuple(float(v) for v in obj["range_radii"]),
            float(obj["solver_tol"]),
        )


class Decomposition:
    """Composable level operators plus extracted kernel slices."""

    def __init__(self, op: EllipticOperator, plan: DecompositionPlan):
        plan.validate_for(op.torus)
        self.op = op
        self.plan = plan
        self.smoothers = [AveragingOperator(op, l) for l in plan.cube_sides]
        self.kernels: dict[tuple[int, int], KernelColumn] = {}
        self.manifest: dict = {}

    # -- operator applications ----------------------------------------------

    def _check_level(self, k: int) -> None:
        if not 1 <= k <= self.plan.levels:
            raise LatticeError(f"level {k} out of range 1..{self.plan.levels}")

    def _chain_raw(self, j: int, solved: np.ndarray) -> np.ndarray:
        """Palindromic fluctuation sandwich applied to an already-solved field."""
        u = solved
        for s in self.smoothers[:j]:
            u = s.fluctuation_raw(u)
        for s in reversed(self.smoothers[:j]):
            u = s.fluctuation_raw(u)
        return u

    def apply_level_raw(self, k: int, flat: np.ndarray) -> np.ndarray:
        self._check_level(k)
        solved, _ = self.op.solve_green_raw(flat, self.plan.solver_tol)
        if k <= self.plan.depth:
            return self._chain_raw(k - 1, solved) - self._chain_raw(k, solved)
        return self._chain_raw(self.plan.depth, solved)

    def apply_level(self, k: int, phi: LatticeField) -> LatticeField:
        """One level of the splitting applied to a mean-zero field."""
        if phi.torus != self.op.torus:
            raise LatticeError("field torus does not match operator torus")
        return LatticeField(self.op.torus, self.apply_level_raw(k, phi.values))

    def apply_all_levels_raw(self, flat: np.ndarray) -> list[np.ndarray]:
        """All levels from a single Green solve; sums exactly to the solve."""
        solved, _ = self.op.solve_green_raw(flat, self.plan.solver_tol)
        chains = [self._chain_raw(j, solved) for j in range(self.plan.depth + 1)]
        out = [chains[j] - chains[j + 1] for j in range(self.plan.depth)]
        out.append(chains[self.plan.depth])
        return out

    def apply_all_levels(self, phi: LatticeField) -> list[LatticeField]:
        return [LatticeField(self.op.torus, v)
                for v in self.apply_all_levels_raw(phi.values)]

    # -- kernel slices ---------------------------------------------------------

    def _chain_transpose_raw(self, j: int, flat: np.ndarray) -> np.ndarray:
        u = flat
        for s in self.smoothers[:j]:
            u = s.fluctuation_transpose_raw(u)
        for s in reversed(self.smoothers[:j]):
            u = s.fluctuation_transpose_raw(u)
        return u

    def level_kernel_column(self, k: int, x0, tol: float | None = None) -> KernelColumn:
        """Kernel slice of level k at one source site.

        Computed as the Green solve of the transposed-chain difference applied
        to the raw unit sources; one solve per component regardless of k.
        """
        self._check_level(k)
        t = self.op.torus
        tol = self.plan.solver_tol if tol is None else tol
        source = x0 if isinstance(x0, (int, np.integer)) else t.index_of(x0)
        cols = np.zeros((t.sites, t.m, t.m))
        for a in range(t.m):
            delta = np.zeros((t.sites, t.m))
            delta[source, a] = 1.0
            if k <= self.plan.depth:
                v = (self._chain_transpose_raw(k - 1, delta)
                     - self._chain_transpose_raw(k, delta))
            else:
                v = self._chain_transpose_raw(self.plan.depth, delta)
            v = v - v.mean(axis=0)
            cols[:, :, a], _ = self.op.solve_green_raw(v, tol)
        tag = f"level:{k}:{self.op.coefficients.content_hash()[:12]}"
        col = KernelColumn(t, int(source), cols, tag, tol)
        self.kernels[(k, int(source))] = col
        return col

    def far_mask(self, k: int, source: int) -> np.ndarray:
        """Sites at or beyond the claimed range radius of level k (may be empty).

        The last level carries no range claim; its mask uses the depth-level
        radius so its far-field variation can still be reported.
        """
        from .lattice import distances_from
        t = self.op.torus
        radius = self.plan.range_radii[min(k, self.plan.depth) - 1]
        return distances_from(t, t.coords_of(source)) >= radius

    def far_field_stats(self, k: int, source: int) -> dict:
        """Far-region mean block (the reported constant), spread, and extremes."""
        col = self.kernels.get((k, source))
        if col is None:
            col = self.level_kernel_column(k, source)
        mask = self.far_mask(k, source)
        vals = col.values
        stats = {
            "level": k,
            "source": source,
            "far_sites": int(mask.sum()),
            "max_abs": float(np.abs(vals).max()),
        }
        if mask.any():
            far = vals[mask]
            stats["constant_block"] = far.mean(axis=0).tolist()
            stats["far_std"] = float(far.std(axis=0).max())
            stats["far_spread"] = float((far.max(axis=0) - far.min(axis=0)).max())
        else:
            stats["constant_block"] = np.zeros((vals.shape[1], vals.shape[2])).tolist()
            stats["far_std"] = 0.0
            stats["far_spread"] = 0.0
        return stats


def build_decomposition(
    op: EllipticOperator,
    plan: DecompositionPlan | None = None,
    sources=(),
    threads: int | None = None,
) -> Decomposition:
    """Materialize kernel slices for the requested sources at every level."""
    plan = DecompositionPlan.default(op.torus) if plan is None else plan
    dec = Decomposition(op, plan)
    t = op.torus
    srcs = [s if isinstance(s, (int, np.integer)) else t.index_of(s) for s in sources]
    for k in range(1, plan.levels + 1):
        for s in srcs:
            dec.level_kernel_column(k, s)
    dec.manifest = {
        "format": ARCHIVE_FORMAT,
        "torus": {"d": t.d, "m": t.m, "L": t.L, "N": t.N},
        "plan": plan.to_json(),
        "levels": plan.levels,
        "sources": [int(s) for s in srcs],
        "coefficient_hash": op.coefficients.content_hash(),
        "threads": threads,
        "created": _timestamp(),
    }
    return dec


def _timestamp() -> str:
    # SOURCE_DATE_EPOCH keeps archives byte-reproducible under fixed seeds.
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    stamp = int(epoch) if epoch is not None else int(time.time())
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(stamp))


# ---------------------------------------------------------------------------
# archives


def save_archive(dec: Decomposition, directory: Path | str) -> Path:
    """Write manifest, coefficient table, and one table per (level, source)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    export_table(dec.op.coefficients, directory / "coefficients")
    kernel_files = {}
    for (k, s), col in sorted(dec.kernels.items()):
        stem = directory / f"kernel_L{k}_S{s}"
        header = col.export(stem)
        kernel_files[f"{k}:{s}"] = {"stem": stem.name, "sha256": header["sha256"]}
    manifest = dict(dec.manifest)
    manifest["kernels"] = kernel_files
    tableio.atomic_write_text(directory / "manifest.json",
                              tableio.json_dumps(manifest))
    return directory


def load_archive(directory: Path | str) -> Decomposition:
    """Reload an archive, verifying every table hash."""
    import json

    directory = Path(directory)
    try:
        manifest = json.loads((directory / "manifest.json").read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise tableio.IntegrityError(f"unreadable manifest: {exc}") from exc
    if manifest.get("format") != ARCHIVE_FORMAT:
        raise tableio.IntegrityError(
            f"unsupported archive format {manifest.get('format')!r}"
        )
    coeff = import_table(directory / "coefficients")
    if coeff.content_hash() != manifest["coefficient_hash"]:
        raise tableio.IntegrityError("coefficient table does not match manifest")
    op = EllipticOperator(coeff)
    dec = Decomposition(op, DecompositionPlan.from_json(manifest["plan"]))
    dec.manifest = manifest
    for key, entry in manifest.get("kernels", {}).items():
        k, s = (int(v) for v in key.split(":"))
        col = KernelColumn.import_table(directory / entry["stem"])
        dec.kernels[(k, s)] = col
    return dec
