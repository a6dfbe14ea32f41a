"""Reduced-order models from subsets of decomposition modes.

A ROM keeps a conjugate-closed subset of modes and reconstructs
snapshots as the superposition sum_k Phi_k mu_k^n b_k.  Subsets come
either from explicit mode indices or from box criteria on the summary
table (RMS and robustness ranges, optionally dropping non-persistent
transients); conjugate closure is enforced afterwards in both cases, so
a partner can enter even when it misses the box.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dmd import DmdResult, mode_time_sum, reconstruct
from .grids import SnapshotMatrix
from .modes import ModeInfo, pair_conjugates
from .ranking import persistence_filter


@dataclass(frozen=True)
class RomSelection:
    """Which modes a ROM keeps.

    Either explicit 1-based indices, or inclusive box bounds on the
    summary table columns.  persistent_only additionally drops modes
    whose envelope decays below persistence_factor over persistence_T
    hours.
    """

    indices: tuple[int, ...] | None = None
    rms_min: float | None = None
    rms_max: float | None = None
    robustness_min: float | None = None
    robustness_max: float | None = None
    persistent_only: bool = False
    persistence_t: float | None = None
    persistence_factor: float = 0.1


@dataclass(frozen=True)
class RomModel:
    """A conjugate-closed mode subset ready for reconstruction."""

    modes: np.ndarray
    mu: np.ndarray
    b: np.ndarray
    dt: float
    t0: float
    indices: tuple[int, ...]
    mean_mode: np.ndarray | None = None

    @property
    def n_modes(self) -> int:
        return self.mu.size


def select_modes(table: Sequence[ModeInfo], selection: RomSelection) -> tuple[int, ...]:
    """Resolve a selection to a sorted, conjugate-closed tuple of indices."""
    by_index = {info.index: info for info in table}
    if selection.indices is not None:
        chosen = set()
        for i in selection.indices:
            if i not in by_index:
                raise ValueError(f"mode index {i} not in the table")
            chosen.add(i)
    else:
        chosen = set()
        for info in table:
            if selection.rms_min is not None and info.rms < selection.rms_min:
                continue
            if selection.rms_max is not None and info.rms > selection.rms_max:
                continue
            if selection.robustness_min is not None:
                if info.robustness is None or info.robustness < selection.robustness_min:
                    continue
            if selection.robustness_max is not None:
                if info.robustness is None or info.robustness > selection.robustness_max:
                    continue
            if selection.persistent_only:
                if selection.persistence_t is None:
                    raise ValueError("persistent_only needs persistence_t")
                if not persistence_filter(info.gamma, selection.persistence_t,
                                          selection.persistence_factor):
                    continue
            chosen.add(info.index)
    # Conjugate closure overrides the box: partners always come along.
    for i in sorted(chosen):
        p = by_index[i].conj_partner
        if p is not None:
            chosen.add(p)
    if not chosen:
        raise ValueError("selection matches no modes")
    return tuple(sorted(chosen))


def build_rom(result: DmdResult, indices: Sequence[int]) -> RomModel:
    """Extract the given 1-based modes into a ROM.

    The index set must be conjugate-closed; a missing partner is an
    error rather than being silently added here.
    """
    idx = sorted(set(int(i) for i in indices))
    if not idx:
        raise ValueError("empty mode selection")
    for i in idx:
        if not 1 <= i <= result.r:
            raise ValueError(f"mode index {i} outside 1..{result.r}")
    partner = pair_conjugates(result.mu)
    missing = [
        (i, partner[i - 1] + 1)
        for i in idx
        if partner[i - 1] is not None and (partner[i - 1] + 1) not in idx
    ]
    if missing:
        detail = ", ".join(f"{i} needs {p}" for i, p in missing)
        raise ValueError(f"mode selection is not conjugate-closed: {detail}")
    pos = [i - 1 for i in idx]
    return RomModel(
        modes=result.modes[:, pos],
        mu=result.mu[pos],
        b=result.b[pos],
        dt=result.dt,
        t0=result.t0,
        indices=tuple(idx),
        mean_mode=result.mean_mode,
    )


def reconstruct_rom(rom: RomModel, times: Sequence[int]) -> np.ndarray:
    """Real reconstruction of the ROM at integer step indices."""
    c = mode_time_sum(rom.modes, rom.mu, rom.b, times)
    x = c.real
    if rom.mean_mode is not None:
        x = x + rom.mean_mode[:, None]
    return x


@dataclass(frozen=True)
class ErrorCurve:
    """Per-snapshot ROM magnitudes and relative errors."""

    steps: np.ndarray
    times_hours: np.ndarray
    rom_norm: np.ndarray
    rel_error: np.ndarray


def error_curve(snap: SnapshotMatrix, rom: RomModel) -> ErrorCurve:
    """Reconstruction-norm and relative-error curves over all snapshots."""
    if snap.d != rom.modes.shape[0]:
        raise ValueError(
            f"data dimension {snap.d} does not match ROM dimension {rom.modes.shape[0]}"
        )
    if not np.isclose(snap.dt, rom.dt, rtol=1e-12, atol=0.0):
        raise ValueError(f"time step mismatch: data {snap.dt}, ROM {rom.dt}")
    steps = np.arange(snap.n)
    xhat = reconstruct_rom(rom, steps)
    rom_norm = np.linalg.norm(xhat, axis=0)
    data_norm = np.linalg.norm(snap.data, axis=0)
    if (data_norm == 0.0).any():
        raise ValueError("relative error undefined: a data column has zero norm")
    rel = np.linalg.norm(snap.data - xhat, axis=0) / data_norm
    return ErrorCurve(steps=steps, times_hours=snap.times(),
                      rom_norm=rom_norm, rel_error=rel)
