"""Fringe and decay fits for count data, plus loss-budget projection.

Both fits are weighted least squares with Poisson weights.  The reported
covariance is scaled by the reduced chi-square, so exact model data yields
zero uncertainty while sampled data keeps the usual 1/sqrt(counts) scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .components import (
    CIRCULATOR_ARM, COUPLER, FIBER_SEGMENT, FPC, MIRROR, PBS, POCKELS_CELL,
    RETROREFLECTOR, ComponentSpec, fiber_transmission,
)
from .engine import MemoryConfig, TransmissionParams, derive_transmission_params, efficiency
from .errors import IncompleteSetError, NoSignalError, SchemaError

# Typical single-mode fiber attenuation by operating wavelength.
ATTENUATION_DB_PER_KM = {780.0: 4.0, 1550.0: 0.2}

_CIRC_KINDS = {CIRCULATOR_ARM, MIRROR, PBS}
_DELAY_KINDS = {FIBER_SEGMENT, RETROREFLECTOR, FPC}


@dataclass(frozen=True)
class MalusFit:
    """Analyzer-fringe fit C(theta) = A/2 * (1 + V cos 2(theta - theta0))."""

    amplitude: float
    visibility: float
    theta0: float
    sigma_visibility: float
    clamped: bool = False


@dataclass(frozen=True)
class DecayFit:
    """Cycle-decay fit C(N) = C1 * gamma^(N-1)."""

    prefactor: float
    gamma_per_cycle: float
    sigma_gamma: float
    n_excluded: int = 0
    clamped: bool = False


@dataclass(frozen=True)
class BudgetReport:
    params: TransmissionParams
    eta_table: tuple[float, ...]
    per_cycle: float
    lifetime_cycles_1e: float
    lifetime_time_1e_ns: float
    wavelength_nm: float | None
    fiber_factor: float
    delta_tau: float


def _counts_array(counts) -> np.ndarray:
    vals = [c.counts if hasattr(c, "counts") else c for c in counts]
    arr = np.array(vals, dtype=float)
    if np.any(arr < 0):
        raise ValueError("counts must be nonnegative")
    return arr


def _wls(x: np.ndarray, y: np.ndarray, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Weighted LS solve; covariance scaled by reduced chi-square."""
    sw = np.sqrt(w)
    beta, *_ = np.linalg.lstsq(x * sw[:, None], y * sw, rcond=None)
    resid = y - x @ beta
    dof = x.shape[0] - x.shape[1]
    chi2_red = float(w @ resid**2) / dof if dof > 0 else 0.0
    cov = np.linalg.inv(x.T @ (x * w[:, None])) * chi2_red
    return beta, cov


def fit_malus(angles, counts) -> MalusFit:
    """Visibility fit to an analyzer rotation scan.

    The model is linear in (a, b, c) with C = a + b cos 2theta + c sin 2theta,
    so the weighted optimum is found exactly; A = 2a, V = sqrt(b^2+c^2)/a,
    theta0 = atan2(c, b)/2.  Rescaling all counts by a common factor leaves
    V and theta0 unchanged.
    """
    th = np.asarray(angles, dtype=float)
    k = _counts_array(counts)
    if th.shape != k.shape:
        raise ValueError("angles and counts must have equal length")
    if len(np.unique(th)) < 5:
        raise ValueError("need at least 5 distinct analyzer angles")
    if th.max() - th.min() < math.pi - 1e-9:
        raise ValueError("analyzer angles must span at least half a turn")
    if k.sum() <= 0:
        raise NoSignalError("fringe scan carries no counts")

    x = np.column_stack([np.ones_like(th), np.cos(2 * th), np.sin(2 * th)])
    w = 1.0 / np.maximum(k, 1.0)
    if np.linalg.matrix_rank(x * np.sqrt(w)[:, None], tol=1e-9) < 3:
        raise IncompleteSetError("degenerate analyzer angle grid")
    beta, cov = _wls(x, k, w)
    a, b, c = (float(v) for v in beta)
    if a <= 0:
        raise NoSignalError("fitted fringe level is not positive")

    r = math.hypot(b, c)
    vis = r / a
    theta0 = 0.5 * math.atan2(c, b)
    if r > 0:
        grad = np.array([-vis / a, b / (a * r), c / (a * r)])
        sigma_v = math.sqrt(max(grad @ cov @ grad, 0.0))
    else:
        # flat fringe: direction of the (b, c) perturbation is undefined
        sigma_v = math.sqrt(max(cov[1, 1], cov[2, 2])) / a
    clamped = vis > 1.0
    return MalusFit(2.0 * a, min(vis, 1.0), theta0, sigma_v, clamped)


def fit_decay(n_values, counts) -> DecayFit:
    """Per-cycle survival fit, linear in the log domain.

    Zero-count points carry no log-domain information and are excluded,
    tracked in n_excluded.  gamma estimates above 1 are clamped with a flag.
    """
    n = np.asarray(n_values, dtype=float)
    k = _counts_array(counts)
    if n.shape != k.shape:
        raise ValueError("n_values and counts must have equal length")
    if len(n) < 3:
        raise ValueError("need at least 3 scan points")
    if np.any(n < 1) or np.any(n != np.round(n)):
        raise ValueError("cycle counts must be integers >= 1")

    keep = k > 0
    excluded = int((~keep).sum())
    if keep.sum() == 0:
        raise NoSignalError("decay scan carries no counts")
    if keep.sum() < 2 or len(np.unique(n[keep])) < 2:
        raise NoSignalError("too few nonzero points to fit a decay")

    nk, kk = n[keep], k[keep]
    x = np.column_stack([np.ones_like(nk), nk - 1.0])
    beta, cov = _wls(x, np.log(kk), kk)
    gamma = math.exp(beta[1])
    sigma = gamma * math.sqrt(max(cov[1, 1], 0.0))
    clamped = gamma > 1.0
    return DecayFit(math.exp(beta[0]), min(gamma, 1.0), sigma, excluded, clamped)


def default_attenuation_db_per_km(wavelength_nm: float) -> float:
    try:
        return ATTENUATION_DB_PER_KM[float(wavelength_nm)]
    except KeyError:
        known = sorted(ATTENUATION_DB_PER_KM)
        raise ValueError(f"no attenuation default at {wavelength_nm} nm; known: {known}") from None


def lifetime_1e(per_cycle: float) -> float:
    """Cycles until the survival drops to 1/e; inf for a lossless cycle."""
    if not 0.0 < per_cycle <= 1.0:
        raise ValueError("per-cycle efficiency must lie in (0, 1]")
    if per_cycle == 1.0:
        return math.inf
    return -1.0 / math.log(per_cycle)


def route_inventory(parts, delta_tau: float) -> MemoryConfig:
    """Build a config from a flat part list.

    Couplers are taken in order as input, loop, output; any further coupler
    entries model mating-sleeve connectors and join the delay line.
    """
    couplers: list[ComponentSpec] = []
    circ: list[ComponentSpec] = []
    switch: list[ComponentSpec] = []
    delay: list[ComponentSpec] = []
    for part in parts:
        if part.kind == COUPLER:
            (couplers if len(couplers) < 3 else delay).append(part)
        elif part.kind == POCKELS_CELL:
            switch.append(part)
        elif part.kind in _CIRC_KINDS:
            circ.append(part)
        elif part.kind in _DELAY_KINDS:
            delay.append(part)
        else:
            raise SchemaError(f"cannot place component kind {part.kind!r}", field="inventory")
    if len(couplers) < 3:
        raise SchemaError("inventory needs three couplers", field="inventory")
    if not circ or not switch or not delay:
        raise SchemaError("inventory must cover all three zones", field="inventory")
    return MemoryConfig(
        delta_tau=delta_tau,
        input_coupler=couplers[0], loop_coupler=couplers[1], output_coupler=couplers[2],
        circulator_zone=tuple(circ), switch_zone=tuple(switch), delay_zone=tuple(delay))


def project_budget(inventory, delta_tau: float | None = None,
                   wavelength_nm: float | None = None, n_max: int = 8) -> BudgetReport:
    """Efficiency projection for a component inventory.

    `inventory` is either a MemoryConfig or a flat ComponentSpec list routed
    to zones by kind.  When wavelength_nm is given, every fiber segment's
    attenuation is replaced by the tabulated value for that wavelength.
    """
    if isinstance(inventory, MemoryConfig):
        cfg = inventory
        if delta_tau is None:
            delta_tau = cfg.delta_tau
    else:
        if delta_tau is None:
            raise ValueError("delta_tau is required with a flat inventory list")
        cfg = route_inventory(inventory, delta_tau)
    if n_max < 0:
        raise ValueError("n_max must be nonnegative")

    if wavelength_nm is not None:
        atten = default_attenuation_db_per_km(wavelength_nm)
        delay = tuple(
            ComponentSpec(c.kind, c.transmission, c.rotation_error, c.static_phase,
                          c.length_m, atten) if c.kind == FIBER_SEGMENT else c
            for c in cfg.delay_zone)
        cfg = MemoryConfig(
            delta_tau=delta_tau, pass_through_time=cfg.pass_through_time,
            pc_rise_time=cfg.pc_rise_time, herald_latency=cfg.herald_latency,
            delay_line_compensation=cfg.delay_line_compensation,
            coincidence_window=cfg.coincidence_window, x_dl_enabled=cfg.x_dl_enabled,
            input_coupler=cfg.input_coupler, output_coupler=cfg.output_coupler,
            loop_coupler=cfg.loop_coupler, circulator_zone=cfg.circulator_zone,
            switch_zone=cfg.switch_zone, delay_zone=delay, zone_params=cfg.zone_params)

    params = derive_transmission_params(cfg)
    eta = tuple(efficiency(params, n) for n in range(n_max + 1))
    per_cycle = params.g22
    life = lifetime_1e(per_cycle) if per_cycle > 0 else 0.0
    fiber_factor = 1.0
    for c in cfg.delay_zone:
        if c.kind == FIBER_SEGMENT:
            fiber_factor *= fiber_transmission(c.length_m, c.atten_db_per_km, round_trip=True)
    return BudgetReport(params, eta, per_cycle, life, life * delta_tau,
                        wavelength_nm, fiber_factor, delta_tau)
