"""Single-qubit state reconstruction from projective count data.

Counts behind projector |psi_i> are modeled as Poisson with mean s * q_i
where q_i = <psi_i| rho_t |psi_i>, rho_t is an unnormalized density matrix
and s an overall flux scale.  The flux is profiled out analytically, so the
optimizer only sees the four real parameters of the triangular factor

    T = [[t1, 0], [t3 + i t4, t2]],    rho_t = T^dagger T,

which keeps every iterate positive semidefinite by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import minimize

from .counting import DEFAULT_PROJECTORS, ScanDataset
from .errors import IncompleteSetError, NoSignalError
from .polarization import DensityMatrix, PureState, fidelity

_Q_FLOOR = 1e-12
_EV_CLIP = 1e-6


@dataclass(frozen=True)
class MeasurementSet:
    """Labeled projector collection; must fix all four Stokes components."""

    projectors: tuple[tuple[str, PureState], ...] = DEFAULT_PROJECTORS

    def __post_init__(self):
        if len(self.projectors) < 4:
            raise IncompleteSetError(
                f"need at least 4 projectors, got {len(self.projectors)}")
        if np.linalg.matrix_rank(self.design_matrix(), tol=1e-9) < 4:
            raise IncompleteSetError("projector set does not span the state space")

    def design_matrix(self) -> np.ndarray:
        """Rows map x = (rho00, rho11, Re rho01, Im rho01) to <psi|rho|psi>."""
        rows = []
        for _, p in self.projectors:
            u, w = p.alpha, p.beta
            uw = np.conj(u) * w
            rows.append([abs(u) ** 2, abs(w) ** 2, 2.0 * uw.real, -2.0 * uw.imag])
        return np.array(rows, dtype=float)

    def labels(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.projectors)


@dataclass(frozen=True)
class ReconstructionResult:
    rho: DensityMatrix
    flux: float
    fidelity: float | None
    converged: bool
    log_likelihood: float
    mc_mean: float | None = None
    mc_std: float | None = None
    n_samples: int = 0
    n_failed: int = 0


def counts_from_dataset(ds: ScanDataset, mset: MeasurementSet) -> np.ndarray:
    """Extract counts aligned with the measurement set, matching by label."""
    by_label = {r.setting_label: r.counts for r in ds.records}
    missing = [name for name in mset.labels() if name not in by_label]
    if missing:
        raise IncompleteSetError(f"dataset lacks settings {missing}")
    return np.array([by_label[name] for name in mset.labels()], dtype=float)


def linear_inversion(counts, mset: MeasurementSet) -> tuple[np.ndarray, float]:
    """Least-squares pre-estimate: (unit-trace Hermitian matrix, flux).

    The matrix is not guaranteed positive semidefinite; it seeds the
    likelihood fit and is exact on noiseless data.
    """
    k = np.asarray(counts, dtype=float)
    a = mset.design_matrix()
    if k.shape != (a.shape[0],):
        raise ValueError(f"expected {a.shape[0]} counts, got {k.shape}")
    x, *_ = np.linalg.lstsq(a, k, rcond=None)
    flux = x[0] + x[1]
    if flux <= 0:
        raise NoSignalError("tomography counts carry no signal")
    rho = np.array([[x[0], x[2] + 1j * x[3]],
                    [x[2] - 1j * x[3], x[1]]], dtype=complex)
    return rho / flux, float(flux)


def _t_from_rho(rho: np.ndarray) -> np.ndarray:
    """Triangular parameters reproducing a PSD matrix, with floor guards."""
    r11 = max(rho[1, 1].real, 1e-9)
    t2 = math.sqrt(r11)
    z = rho[1, 0] / t2
    t1 = math.sqrt(max(rho[0, 0].real - abs(z) ** 2, 1e-12))
    return np.array([t1, t2, z.real, z.imag])


def _initial_t(counts, mset: MeasurementSet) -> np.ndarray:
    rho, _ = linear_inversion(counts, mset)
    ev, vec = np.linalg.eigh(rho)
    ev = np.clip(ev, _EV_CLIP, None)
    rho_psd = (vec * ev) @ vec.conj().T
    rho_psd /= np.trace(rho_psd).real
    return _t_from_rho(rho_psd)


def _profile_objective(k: np.ndarray, u: np.ndarray, w: np.ndarray):
    """Negative profile log-likelihood and gradient in (t1, t2, t3, t4)."""
    total = float(k.sum())
    uu = (u.conj() * u).real

    def fun(x):
        t1, t2, t3, t4 = x
        z = (t3 + 1j * t4) * u + t2 * w
        q = t1 * t1 * uu + (z.conj() * z).real
        q = np.maximum(q, _Q_FLOOR)
        big_q = q.sum()
        f = -(k * np.log(q)).sum() + total * math.log(big_q)
        # dq/dx rows: t1, t2, t3, t4
        dq = np.empty((4, len(q)))
        dq[0] = 2.0 * t1 * uu
        dq[1] = 2.0 * (z.conj() * w).real
        dq[2] = 2.0 * (z.conj() * u).real
        dq[3] = 2.0 * (z.conj() * 1j * u).real
        coeff = total / big_q - k / q
        return f, dq @ coeff

    return fun


def mle_reconstruct(counts, mset: MeasurementSet | None = None,
                    target: PureState | None = None) -> ReconstructionResult:
    """Maximum-likelihood state estimate from one set of projective counts.

    `converged` reports that the optimizer met its tolerances or that the
    scaled gradient norm (per total count) ended below 1e-8.
    """
    mset = mset or MeasurementSet()
    k = np.asarray(counts, dtype=float)
    if k.shape != (len(mset.projectors),):
        raise ValueError(f"expected {len(mset.projectors)} counts, got {k.shape}")
    if np.any(k < 0):
        raise ValueError("counts must be nonnegative")
    if k.sum() <= 0:
        raise NoSignalError("tomography counts carry no signal")

    u = np.array([p.alpha for _, p in mset.projectors])
    w = np.array([p.beta for _, p in mset.projectors])
    fun = _profile_objective(k, u, w)
    res = minimize(fun, _initial_t(k, mset), jac=True, method="L-BFGS-B",
                   options={"ftol": 1e-13, "gtol": 1e-10, "maxiter": 500})

    t1, t2, t3, t4 = res.x
    t = np.array([[t1, 0.0], [t3 + 1j * t4, t2]], dtype=complex)
    raw = t.conj().T @ t
    raw = 0.5 * (raw + raw.conj().T)
    tr = np.trace(raw).real
    rho = DensityMatrix(raw / tr)

    q_over_tr = np.array([rho.project(p) for _, p in mset.projectors])
    flux = float(k.sum() / max(q_over_tr.sum(), _Q_FLOOR))
    gnorm = float(np.linalg.norm(res.jac)) / max(float(k.sum()), 1.0)
    converged = bool(res.success or gnorm < 1e-8)
    fid = fidelity(rho, target) if target is not None else None
    return ReconstructionResult(rho, flux, fid, converged, -float(res.fun))


def monte_carlo_uncertainty(counts, mset: MeasurementSet, target: PureState, *,
                            n_samples: int = 10000, seed: int = 0) -> tuple[float, float, int]:
    """Fidelity mean and spread under Poisson resampling of the observed counts.

    All draws come from one generator seeded up front, so the result does not
    depend on evaluation order.  Returns (mean, sample std, n_failed) where
    failed samples (no signal or non-converged fit) are excluded from the
    statistics but counted.
    """
    if n_samples < 2:
        raise ValueError("n_samples must be at least 2")
    k = np.asarray(counts, dtype=float)
    draws = np.random.default_rng(seed).poisson(lam=k, size=(n_samples, len(k)))
    fids = []
    n_failed = 0
    for row in draws:
        try:
            r = mle_reconstruct(row.astype(float), mset, target)
        except NoSignalError:
            n_failed += 1
            continue
        if not r.converged:
            n_failed += 1
            continue
        fids.append(r.fidelity)
    if len(fids) < 2:
        raise NoSignalError("Monte Carlo resampling produced no usable fits")
    arr = np.array(fids)
    return float(arr.mean()), float(arr.std(ddof=1)), n_failed


def reconstruct_with_uncertainty(counts, mset: MeasurementSet | None = None,
                                 target: PureState | None = None, *,
                                 n_samples: int = 10000,
                                 seed: int = 0) -> ReconstructionResult:
    """MLE point estimate plus Monte Carlo error bar in one call."""
    mset = mset or MeasurementSet()
    result = mle_reconstruct(counts, mset, target)
    if target is None:
        return result
    mean, std, failed = monte_carlo_uncertainty(
        counts, mset, target, n_samples=n_samples, seed=seed)
    return replace(result, mc_mean=mean, mc_std=std,
                   n_samples=n_samples, n_failed=failed)
