"""Exact dynamic mode decomposition with optional debiasing refinements.

The baseline algorithm regresses the one-step propagator from a pair of
time-shifted snapshot matrices through a rank-r SVD and reads modes and
eigenvalues off the reduced operator.  Three optional refinements target
poorly scaled or noisy data:

  * column normalization: both matrices of the pair are divided by the
    l2 norms of the first matrix's columns, equalizing snapshot weights
    in the regression without changing the operator being estimated;
  * total-least-squares projection: the pair is compressed onto the
    leading right singular directions of the vertically stacked pair,
    removing the asymmetry of ordinary least squares to noise in the
    "input" snapshots;
  * a QR-based SVD driver whose small singular values retain relative
    accuracy on graded matrices, instead of the faster divide-and-conquer
    driver.

Amplitudes are always fitted against the original, unscaled snapshots,
either from the first snapshot alone or jointly over a small set of
snapshots spread across the record.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg

from .errors import NumericalError
from .grids import SnapshotMatrix, remove_temporal_mean

# Condition number of the reduced eigenvector matrix beyond which the
# eigenproblem is reported as (numerically) defective.
_DEFECTIVE_COND = 1e12
# Relative floor under which trailing singular values count as rank loss.
_RANK_RTOL = 1e-13


@dataclass(frozen=True)
class DmdOptions:
    """Settings for one decomposition run.

    b_fit is "first" (amplitudes from the first snapshot) or
    "multi:<count>" (joint fit over count snapshots evenly spread over
    the record, endpoints included).  svd_mode selects the LAPACK driver:
    "standard" divide-and-conquer or "high_accuracy" QR-based.
    """

    r: int
    use_tlsq: bool = False
    tlsq_rank: int | None = None
    normalize_columns: bool = False
    remove_mean: bool = False
    b_fit: str = "first"
    svd_mode: str = "standard"

    def __post_init__(self):
        if self.r < 1:
            raise ValueError(f"truncation rank r must be >= 1, got {self.r}")
        if self.tlsq_rank is not None and self.tlsq_rank < 1:
            raise ValueError(f"tlsq_rank must be >= 1, got {self.tlsq_rank}")
        if self.svd_mode not in ("standard", "high_accuracy"):
            raise ValueError(f"unknown svd_mode {self.svd_mode!r}")
        self.fit_count()  # validates b_fit syntax

    def fit_count(self) -> int | None:
        """Number of snapshots in the amplitude fit, None for first-only."""
        if self.b_fit == "first":
            return None
        if self.b_fit.startswith("multi:"):
            try:
                count = int(self.b_fit.split(":", 1)[1])
            except ValueError:
                raise ValueError(f"malformed b_fit {self.b_fit!r}") from None
            if count < 2:
                raise ValueError(f"multi-snapshot fit needs count >= 2, got {count}")
            return count
        raise ValueError(f"unknown b_fit {self.b_fit!r}")

    def to_json_dict(self) -> dict:
        return {
            "r": self.r,
            "use_tlsq": self.use_tlsq,
            "tlsq_rank": self.tlsq_rank,
            "normalize_columns": self.normalize_columns,
            "remove_mean": self.remove_mean,
            "b_fit": self.b_fit,
            "svd_mode": self.svd_mode,
        }


def modified_options(r: int, fit_count: int = 10) -> DmdOptions:
    """Options for the debiased variant: normalization, TLSQ at rank r,
    high-accuracy SVD, and a joint amplitude fit."""
    return DmdOptions(r=r, use_tlsq=True, normalize_columns=True,
                      b_fit=f"multi:{fit_count}", svd_mode="high_accuracy")


@dataclass(frozen=True)
class TruncatedSvd:
    """Leading r singular triplets of a matrix, plus the discarded tail."""

    u: np.ndarray
    sigma: np.ndarray
    v: np.ndarray
    sigma_tail: np.ndarray

    @property
    def singular_values(self) -> np.ndarray:
        """Full singular spectrum (kept + discarded)."""
        return np.concatenate([self.sigma, self.sigma_tail])


@dataclass(frozen=True)
class DmdResult:
    """Modes, spectrum, and amplitudes of one decomposition.

    Columns of modes have unit l2 norm with the largest-magnitude entry
    rotated real and positive.  Entries are sorted by descending |b|,
    ties broken by descending |mu| then ascending arg(mu).  gamma holds
    the continuous-time exponents log(mu)/dt on the principal branch.
    mean_mode is the removed temporal mean when the option was on.
    """

    modes: np.ndarray
    mu: np.ndarray
    gamma: np.ndarray
    b: np.ndarray
    singular_values: np.ndarray
    residuals: np.ndarray
    options: DmdOptions
    dt: float
    t0: float = 0.0
    mean_mode: np.ndarray | None = None

    @property
    def r(self) -> int:
        return self.mu.size


def split_snapshots(x) -> tuple[np.ndarray, np.ndarray]:
    """Split snapshots into the time-shifted regression pair.

    Accepts a SnapshotMatrix or a plain (D, N) array; returns views of
    columns 0..N-2 and 1..N-1.
    """
    data = x.data if isinstance(x, SnapshotMatrix) else np.asarray(x)
    if data.ndim != 2 or data.shape[1] < 2:
        raise ValueError("need a (D, N) matrix with N >= 2")
    return data[:, :-1], data[:, 1:]


def column_normalize(x1: np.ndarray, x2: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Divide both matrices by the column norms of the first.

    Scaling acts on the right, so the propagator relating the pair is
    unchanged; only the conditioning of the regression improves.
    """
    if x1.shape != x2.shape:
        raise ValueError("pair matrices must share one shape")
    scales = np.linalg.norm(x1, axis=0)
    if (scales == 0.0).any():
        k = int(np.nonzero(scales == 0.0)[0][0])
        raise NumericalError(f"column {k} of the input matrix is zero; scale undefined")
    return x1 / scales, x2 / scales, scales


def _svd(a: np.ndarray, svd_mode: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    driver = {"standard": "gesdd", "high_accuracy": "gesvd"}.get(svd_mode)
    if driver is None:
        raise ValueError(f"unknown svd_mode {svd_mode!r}")
    try:
        return scipy.linalg.svd(a, full_matrices=False, lapack_driver=driver)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD did not converge: {exc}") from exc


def truncated_svd(a: np.ndarray, r: int, svd_mode: str = "standard") -> TruncatedSvd:
    """Rank-r SVD of a, keeping the discarded singular values as a tail."""
    a = np.asarray(a)
    if a.ndim != 2:
        raise ValueError("need a 2-D matrix")
    if not 1 <= r <= min(a.shape):
        raise ValueError(f"rank r={r} outside 1..{min(a.shape)} for shape {a.shape}")
    u, s, vh = _svd(a, svd_mode)
    return TruncatedSvd(u=u[:, :r], sigma=s[:r], v=vh[:r].conj().T, sigma_tail=s[r:])


def tlsq_project(x1: np.ndarray, x2: np.ndarray, rank: int,
                 svd_mode: str = "standard") -> tuple[np.ndarray, np.ndarray]:
    """Project the pair onto the leading right singular directions of the
    vertically stacked pair.

    With rank equal to the column count this is an orthogonal change of
    basis; smaller ranks discard directions dominated by noise shared
    between the two matrices.
    """
    if x1.shape != x2.shape:
        raise ValueError("pair matrices must share one shape")
    cols = x1.shape[1]
    if not 1 <= rank <= min(2 * x1.shape[0], cols):
        raise ValueError(
            f"tlsq rank {rank} outside 1..{min(2 * x1.shape[0], cols)}"
        )
    z = np.vstack([x1, x2])
    _, _, vh = _svd(z, svd_mode)
    v = vh[:rank].conj().T
    return x1 @ v, x2 @ v


def default_fit_indices(n: int, count: int) -> np.ndarray:
    """count snapshot indices evenly spread over 0..n-1, endpoints included."""
    if count < 2:
        raise ValueError("need at least two fit snapshots")
    count = min(count, n)
    return np.unique(np.rint(np.linspace(0, n - 1, count)).astype(int))


def _solve_amplitudes(m: np.ndarray, y: np.ndarray, r: int) -> np.ndarray:
    b, _, rank, sv = np.linalg.lstsq(m, y.astype(complex), rcond=None)
    if rank < r:
        raise NumericalError(
            f"amplitude fit is rank deficient ({rank} < {r}); "
            f"smallest singular value {sv[-1]:.3e}"
        )
    return b


def fit_coefficients_first(modes: np.ndarray, x0: np.ndarray) -> np.ndarray:
    """Least-squares amplitudes reproducing the first snapshot."""
    modes = np.asarray(modes)
    return _solve_amplitudes(modes, np.asarray(x0), modes.shape[1])


def fit_coefficients_multi(modes: np.ndarray, mu: np.ndarray, data: np.ndarray,
                           indices: Sequence[int]) -> np.ndarray:
    """Joint least-squares amplitudes over several snapshots.

    Minimizes the stacked residual of data[:, n] - modes @ (mu**n * b)
    over the given snapshot indices.
    """
    modes = np.asarray(modes)
    mu = np.asarray(mu)
    data = np.asarray(data)
    idx = np.asarray(indices, dtype=int)
    if idx.size < 1:
        raise ValueError("need at least one fit snapshot")
    if (idx < 0).any() or (idx >= data.shape[1]).any():
        raise ValueError("fit indices outside the snapshot range")
    blocks = [modes * (mu[None, :] ** int(n)) for n in idx]
    rhs = np.concatenate([data[:, int(n)] for n in idx])
    return _solve_amplitudes(np.vstack(blocks), rhs, modes.shape[1])


def _conjugate_closed(mu: np.ndarray, tol: float = 1e-9) -> bool:
    """Whether the eigenvalue multiset equals its own conjugate within tol."""
    key = np.lexsort((mu.imag, mu.real))
    ckey = np.lexsort((-mu.imag, mu.real))
    a = mu[key]
    b = np.conj(mu)[ckey]
    return bool(np.all(np.abs(a - b) <= tol * np.maximum(1.0, np.abs(a))))


def mode_time_sum(modes: np.ndarray, mu: np.ndarray, b: np.ndarray,
                  times: Sequence[int]) -> np.ndarray:
    """Complex superposition modes @ diag(mu**n) b for each step index n."""
    steps = np.asarray(times, dtype=int)
    dyn = mu[:, None] ** steps[None, :]
    return modes @ (dyn * b[:, None])


def reconstruct(result: DmdResult, times: Sequence[int]) -> np.ndarray:
    """Superpose the modes at integer step indices, returning real columns.

    For a conjugate-closed mode set the imaginary residue must stay below
    1e-10 of each column norm; it is checked and discarded.  The removed
    temporal mean, when present, is added back so columns live in the
    units of the original data.
    """
    c = mode_time_sum(result.modes, result.mu, result.b, times)
    if _conjugate_closed(result.mu):
        col_norm = np.linalg.norm(c, axis=0)
        resid = np.linalg.norm(c.imag, axis=0)
        bad = resid > 1e-10 * np.maximum(col_norm, 1e-300)
        if bad.any():
            k = int(np.nonzero(bad)[0][0])
            raise NumericalError(
                f"imaginary residue {resid[k]:.3e} exceeds 1e-10 of column norm "
                f"{col_norm[k]:.3e} at step index {int(np.asarray(times)[k])}"
            )
    x = c.real
    if result.mean_mode is not None:
        x = x + result.mean_mode[:, None]
    return x


def dmd_from_pair(x1: np.ndarray, x2: np.ndarray, fit_data: np.ndarray,
                  dt: float, opts: DmdOptions,
                  mean_mode: np.ndarray | None = None, t0: float = 0.0) -> DmdResult:
    """Decomposition pipeline for an already-split snapshot pair.

    Used directly when the pair is manipulated before the regression,
    e.g. deleting columns in robustness trials.  fit_data holds the
    snapshots the amplitudes are fitted against: the original matrix
    (centered when the mean was removed), never the normalized or
    projected pair.
    """
    d, cols = x1.shape
    if opts.normalize_columns:
        x1, x2, _ = column_normalize(x1, x2)
    if opts.use_tlsq:
        rank = opts.tlsq_rank if opts.tlsq_rank is not None else opts.r
        if rank < opts.r:
            raise ValueError(f"tlsq_rank {rank} is below the truncation rank {opts.r}")
        x1, x2 = tlsq_project(x1, x2, rank, opts.svd_mode)
        cols = rank
    if not 1 <= opts.r <= min(d, cols):
        raise ValueError(
            f"truncation rank r={opts.r} infeasible for a {d}x{cols} matrix"
        )

    svd = truncated_svd(x1, opts.r, opts.svd_mode)
    sigma_full = svd.singular_values
    if svd.sigma[-1] <= _RANK_RTOL * svd.sigma[0]:
        raise NumericalError(
            f"rank deficiency below r={opts.r}: sigma_r/sigma_1 = "
            f"{svd.sigma[-1] / svd.sigma[0]:.3e}"
        )

    # Reduced one-step operator and its eigendecomposition.
    x2_v_sinv = (x2 @ svd.v) / svd.sigma[None, :]
    k_reduced = svd.u.conj().T @ x2_v_sinv
    mu, w = np.linalg.eig(k_reduced)
    # eig returns real arrays for an all-real spectrum; the principal-branch
    # log of a negative eigenvalue needs the complex plane
    mu = mu.astype(np.complex128, copy=False)
    w = w.astype(np.complex128, copy=False)
    cond_w = np.linalg.cond(w)
    if not np.isfinite(cond_w) or cond_w > _DEFECTIVE_COND:
        raise NumericalError(
            f"eigendecomposition is numerically defective; eigenvector "
            f"condition estimate {cond_w:.3e}"
        )
    residuals = np.linalg.norm(k_reduced @ w - w * mu[None, :], axis=0)

    if (np.abs(mu) == 0.0).any():
        raise NumericalError("zero eigenvalue; continuous-time exponent undefined")

    # Exact modes, unit norm, largest-magnitude entry rotated real-positive.
    modes = x2_v_sinv @ w
    norms = np.linalg.norm(modes, axis=0)
    if (norms == 0.0).any():
        raise NumericalError("zero exact mode; cannot normalize")
    modes = modes / norms
    lead = modes[np.argmax(np.abs(modes), axis=0), np.arange(opts.r)]
    modes = modes * (np.conj(lead) / np.abs(lead))[None, :]

    gamma = np.log(mu) / dt

    count = opts.fit_count()
    if count is None:
        b = fit_coefficients_first(modes, fit_data[:, 0])
    else:
        idx = default_fit_indices(fit_data.shape[1], count)
        b = fit_coefficients_multi(modes, mu, fit_data, idx)

    order = np.lexsort((np.angle(mu), -np.abs(mu), -np.abs(b)))
    return DmdResult(
        modes=modes[:, order],
        mu=mu[order],
        gamma=gamma[order],
        b=b[order],
        singular_values=sigma_full,
        residuals=residuals[order],
        options=opts,
        dt=dt,
        t0=t0,
        mean_mode=mean_mode,
    )


def exact_dmd(snap: SnapshotMatrix, opts: DmdOptions) -> DmdResult:
    """Run the full decomposition pipeline on a snapshot matrix."""
    mean_mode = None
    work = snap
    if opts.remove_mean:
        mean_mode, work = remove_temporal_mean(snap)
    x1, x2 = split_snapshots(work)
    return dmd_from_pair(x1, x2, work.data, snap.dt, opts, mean_mode, snap.t0)
