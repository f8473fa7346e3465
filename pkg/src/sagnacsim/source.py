"""Physical models of the Sagnac pair source.

Three systematic effects are modeled at the quantum-state level: the
pump-power balance between the two propagation directions, the loss of
temporal indistinguishability when the crystal sits off the collection
focus, and (at count level, via `accidental_ratio`) multi-pair emission.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.signal import fftconvolve

from .qstate import DensityMatrix, PureState, make_bell_psi_minus

C_UM_PS = 299.792458  # speed of light, um/ps

_P_HV = np.diag([0.0, 1.0, 0.0, 0.0]).astype(complex)
_P_VH = np.diag([0.0, 0.0, 1.0, 0.0]).astype(complex)


@dataclass(frozen=True)
class CrystalGeometry:
    """Fixed crystal and beam constants. Defaults describe the ppKTP setup."""

    crystal_length_mm: float = 15.0
    pump_index: float = 1.841
    group_index_ordinary: float = 1.805
    group_index_extraordinary: float = 1.910
    waist_pump_um: float = 26.0
    waist_signal_um: float = 36.0
    waist_idler_um: float = 36.0
    pump_wavelength_nm: float = 403.9
    photon_wavelength_nm: float = 807.8
    wavepacket_fwhm_ps: float = 1.92
    degenerate_temperature_c: float = 31.9  # carried for reference only

    def __post_init__(self):
        positives = (
            self.crystal_length_mm, self.pump_index, self.group_index_ordinary,
            self.group_index_extraordinary, self.waist_pump_um,
            self.waist_signal_um, self.waist_idler_um, self.pump_wavelength_nm,
            self.photon_wavelength_nm, self.wavepacket_fwhm_ps,
        )
        if any(v <= 0 for v in positives):
            raise ValueError("all geometry constants must be positive")

    @property
    def delta_omega(self) -> float:
        """Angular-frequency width (1/ps) matching the wavepacket FWHM."""
        return 2.0 * math.sqrt(2.0 * math.log(2.0)) / self.wavepacket_fwhm_ps

    def wavenumber_pump(self) -> float:
        return 2e3 * math.pi * self.pump_index / self.pump_wavelength_nm

    def wavenumber_signal(self) -> float:
        return 2e3 * math.pi * self.group_index_ordinary / self.photon_wavelength_nm

    def wavenumber_idler(self) -> float:
        return 2e3 * math.pi * self.group_index_extraordinary / self.photon_wavelength_nm

    def group_velocity(self, axis: str) -> float:
        """um/ps along the ordinary or extraordinary axis."""
        if axis == "ordinary":
            return C_UM_PS / self.group_index_ordinary
        if axis == "extraordinary":
            return C_UM_PS / self.group_index_extraordinary
        raise ValueError(f"unknown axis {axis!r}")


@dataclass(frozen=True)
class SourceParams:
    """All source knobs entering the end-to-end model."""

    balance: float = 1.0
    phase: float = 0.0
    crystal_offset_mm: float = 0.0
    multipair_ratio: float = 0.0
    eta_a: float = 1.0
    eta_b: float = 1.0
    coincidence_window_ps: float = 96.0
    geometry: CrystalGeometry = field(default_factory=CrystalGeometry)

    def __post_init__(self):
        if not 0.0 <= self.balance <= 2.0:
            raise ValueError(f"balance {self.balance!r} outside [0, 2]")
        if self.multipair_ratio < 0:
            raise ValueError("multipair ratio must be non-negative")
        if not (0 < self.eta_a <= 1 and 0 < self.eta_b <= 1):
            raise ValueError("channel efficiencies must lie in (0, 1]")
        internal = abs(self.crystal_offset_mm) / self.geometry.pump_index
        if internal > self.geometry.crystal_length_mm / 2.0:
            raise ValueError("crystal offset puts the focus outside the crystal")


@dataclass(frozen=True)
class TemporalDensity:
    """Probability density on a uniform time grid (ps), normalized to 1."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.shape != v.shape or t.ndim != 1 or t.size < 2:
            raise ValueError("times and values must be matching 1-d arrays")
        steps = np.diff(t)
        if not np.allclose(steps, steps[0], rtol=1e-9, atol=1e-12):
            raise ValueError("time grid must be uniform")
        if v.min() < 0:
            raise ValueError("density must be non-negative")
        total = np.trapezoid(v, t)
        if abs(total - 1.0) > 1e-8:
            raise ValueError(f"density integrates to {total!r}, not 1")
        t.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    @property
    def step(self) -> float:
        return float(self.times[1] - self.times[0])

    def mean(self) -> float:
        return float(np.trapezoid(self.times * self.values, self.times))


def balance_state(balance: float, phi: float = 0.0) -> PureState:
    """sqrt(1 - P/2)|HV> - sqrt(P/2) e^{i phi}|VH>."""
    if not 0.0 <= balance <= 2.0:
        raise ValueError(f"balance {balance!r} outside [0, 2]")
    a = math.sqrt(1.0 - balance / 2.0)
    b = math.sqrt(balance / 2.0)
    return PureState(np.array([0.0, a, -b * np.exp(1j * phi), 0.0]))


def spatial_overlap(z_um, focus_um, geom: CrystalGeometry):
    """Complex pair-collection amplitude at crystal position z (um).

    `focus_um` holds the (pump, signal, idler) focus positions. Only the
    normalized magnitude matters downstream, so the w_p w_s w_i prefactor
    is kept purely for dimensional familiarity.
    """
    z = np.asarray(z_um, dtype=float)
    z0p, z0s, z0i = focus_um
    qp = geom.waist_pump_um**2 + 2j * (z - z0p) / geom.wavenumber_pump()
    qs = geom.waist_signal_um**2 + 2j * (z - z0s) / geom.wavenumber_signal()
    qi = geom.waist_idler_um**2 + 2j * (z - z0i) / geom.wavenumber_idler()
    denom = np.conj(qs) * np.conj(qi) + qp * np.conj(qi) + qp * np.conj(qs)
    return geom.waist_pump_um * geom.waist_signal_um * geom.waist_idler_um / denom


def _time_grid(geom: CrystalGeometry, axis: str, step_ps: float) -> np.ndarray:
    half = (geom.crystal_length_mm * 1e3 / 2.0) / geom.group_velocity(axis)
    pad = 5.0 * geom.wavepacket_fwhm_ps
    n = int(math.ceil((half + pad) / step_ps))
    return np.arange(-n, n + 1) * step_ps


def collection_time_density(
    z_c_mm: float,
    axis: str,
    direction: str,
    geom: CrystalGeometry | None = None,
    step_ps: float = 0.005,
) -> TemporalDensity:
    """Collection-weighted generation-time density for one propagation direction.

    An external crystal displacement z_c moves the collection focus inside
    the crystal by z_c/n with opposite signs for the two directions; the
    pump focus stays at the crystal center. Times map to positions through
    the group velocity of the chosen axis.
    """
    if geom is None:
        geom = CrystalGeometry()
    if step_ps > 0.01:
        raise ValueError("time grid step must be at most 0.01 ps")
    if direction not in ("cw", "ccw"):
        raise ValueError(f"unknown direction {direction!r}")
    vg = geom.group_velocity(axis)
    t = _time_grid(geom, axis, step_ps)
    sign = 1.0 if direction == "cw" else -1.0
    z0 = sign * z_c_mm * 1e3 / geom.pump_index
    tau = np.abs(spatial_overlap(t * vg, (0.0, z0, z0), geom)) ** 2
    half = (geom.crystal_length_mm * 1e3 / 2.0) / vg
    tau[np.abs(t) > half] = 0.0
    tau /= np.trapezoid(tau, t)
    return TemporalDensity(t, tau)


def arrival_density(tau: TemporalDensity, geom: CrystalGeometry | None = None) -> TemporalDensity:
    """Convolve a generation-time density with the single-photon wavepacket."""
    if geom is None:
        geom = CrystalGeometry()
    dw = geom.delta_omega
    t = tau.times
    kernel = dw / math.sqrt(2.0 * math.pi) * np.exp(-0.5 * (t * dw) ** 2)
    q = fftconvolve(tau.values, kernel, mode="same") * tau.step
    q = np.clip(q, 0.0, None)
    q /= np.trapezoid(q, t)
    return TemporalDensity(t, q)


def direction_overlap(
    z_c_mm: float,
    axis: str,
    geom: CrystalGeometry | None = None,
    step_ps: float = 0.005,
) -> float:
    """Bhattacharyya overlap of the cw and ccw arrival-time densities."""
    if geom is None:
        geom = CrystalGeometry()
    q_cw = arrival_density(collection_time_density(z_c_mm, axis, "cw", geom, step_ps), geom)
    q_ccw = arrival_density(collection_time_density(z_c_mm, axis, "ccw", geom, step_ps), geom)
    val = float(np.trapezoid(np.sqrt(q_cw.values * q_ccw.values), q_cw.times) ** 2)
    return min(val, 1.0)


def _offset_mixture(averaged_overlap: float, coherent: DensityMatrix,
                    pop_hv: float, pop_vh: float) -> DensityMatrix:
    o = averaged_overlap
    m = o * coherent.matrix + (1.0 - o) * (pop_hv * _P_HV + pop_vh * _P_VH)
    m = (m + m.conj().T) / 2.0
    return DensityMatrix(m / np.trace(m).real)


def crystal_offset_state(
    z_c_mm: float,
    geom: CrystalGeometry | None = None,
    step_ps: float = 0.005,
) -> DensityMatrix:
    """Two-qubit state for a crystal displaced z_c from the collection focus.

    The singlet keeps the axis-averaged overlap as its weight and the
    non-interfering remainder splits evenly over the |HV>, |VH> populations,
    which keeps the state at unit trace and reproduces the singlet at zero
    offset.
    """
    if geom is None:
        geom = CrystalGeometry()
    if z_c_mm == 0.0:
        o = 1.0
    else:
        o = 0.5 * (
            direction_overlap(z_c_mm, "ordinary", geom, step_ps)
            + direction_overlap(z_c_mm, "extraordinary", geom, step_ps)
        )
    return _offset_mixture(o, make_bell_psi_minus().density(), 0.5, 0.5)


class MultipairParams(NamedTuple):
    nu_hz: float
    eta_a: float
    eta_b: float
    p: float


def multipair_params_from_rates(
    r_a: float, r_b: float, r_c: float, t_c_ps: float
) -> MultipairParams:
    """Emission rate, channel efficiencies and multi-pair ratio from measured rates.

    nu = R_A R_B / R_c, eta_A = R_c / R_B, eta_B = R_c / R_A and
    p = nu T_c, the probability of a second pair inside the window.
    """
    if min(r_a, r_b, r_c) <= 0:
        raise ValueError("all rates must be positive")
    if r_c > min(r_a, r_b):
        raise ValueError("coincidence rate exceeds a singles rate")
    nu = r_a * r_b / r_c
    return MultipairParams(
        nu_hz=nu,
        eta_a=r_c / r_b,
        eta_b=r_c / r_a,
        p=nu * t_c_ps * 1e-12,
    )


def accidental_ratio(alpha: float, beta: float, p: float,
                     eta_a: float, eta_b: float) -> float:
    """Accidental-to-true coincidence ratio at linear analyzer angles.

    Covers double emission in a single direction plus simultaneous emission
    in both directions, with non-photon-number-resolving detectors.
    """
    if p < 0:
        raise ValueError("multipair ratio must be non-negative")
    sa, ca = math.sin(alpha), math.cos(alpha)
    sb, cb = math.sin(beta), math.cos(beta)
    term1 = (2.0 - eta_a * sa * sa) * (2.0 - eta_b * cb * cb) * (sa * cb) ** 2
    term2 = (2.0 - eta_a * ca * ca) * (2.0 - eta_b * sb * sb) * (ca * sb) ** 2
    term3 = 2.0 * (1.0 - eta_a * (sa * ca) ** 2) * (1.0 - eta_b * (sb * cb) ** 2)
    return 0.5 * p * (term1 + term2 + term3)


def accidental_ratio_projectors(proj_a: np.ndarray, proj_b: np.ndarray,
                                p: float, eta_a: float, eta_b: float) -> float:
    """`accidental_ratio` generalized to arbitrary analyzer projectors.

    Same double-emission combinatorics, expressed through the H/V
    transmissions of each analyzer; reduces term by term to the linear-angle
    form when the projectors are |R(alpha)>, |R(beta)>. Needed for the
    tomography settings, whose circular projectors have no polarizer angle.
    """
    th = eta_a * float(np.real(proj_a[0, 0]))
    tv = eta_a * float(np.real(proj_a[1, 1]))
    uh = eta_b * float(np.real(proj_b[0, 0]))
    uv = eta_b * float(np.real(proj_b[1, 1]))
    term1 = (tv * (2.0 - tv) / eta_a) * (uh * (2.0 - uh) / eta_b)
    term2 = (th * (2.0 - th) / eta_a) * (uv * (2.0 - uv) / eta_b)
    pa = th + tv - th * tv
    pb = uh + uv - uh * uv
    term3 = 2.0 * (pa / eta_a) * (pb / eta_b)
    return 0.5 * p * (term1 + term2 + term3)


def combined_source_state(params: SourceParams, step_ps: float = 0.005) -> DensityMatrix:
    """Balance and crystal-offset effects composed into one state.

    The offset mixing acts on the balance state instead of the ideal
    singlet, with the incoherent populations inheriting the same pump-power
    weighting. Multi-pair emission is not folded in here; it enters at
    count level during simulation.
    """
    psi = balance_state(params.balance, params.phase)
    z = params.crystal_offset_mm
    if z == 0.0:
        o = 1.0
    else:
        o = 0.5 * (
            direction_overlap(z, "ordinary", params.geometry, step_ps)
            + direction_overlap(z, "extraordinary", params.geometry, step_ps)
        )
    return _offset_mixture(
        o, psi.density(), 1.0 - params.balance / 2.0, params.balance / 2.0
    )
