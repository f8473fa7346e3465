"""Jones-calculus model of the analysis optics.

A projection arm is a rotatable quarter-wave plate, then a rotatable
half-wave plate, then a fixed polarizer transmitting H. Retarders follow
the convention R(theta) diag(1, e^{i delta}) R(-theta), under which a
quarter-wave plate at +45 deg turns |H> into right-circular light with
Stokes S3 = +1 (S2 = 2 Re(a_H conj(a_V)), S3 = 2 Im(a_H conj(a_V))).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import curve_fit, minimize

from .qstate import Projector1Q

H_KET = np.array([1.0, 0.0], dtype=complex)


@dataclass(frozen=True)
class PlateCalibration:
    """Measured retardance and zero-point offset of one wave plate (radians)."""

    retardance: float
    zero_point: float
    retardance_uncertainty: float = 0.0
    zero_point_uncertainty: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.retardance < 2.0 * math.pi:
            raise ValueError(f"retardance {self.retardance!r} outside (0, 2pi)")
        if self.retardance_uncertainty < 0 or self.zero_point_uncertainty < 0:
            raise ValueError("uncertainties must be non-negative")

    @classmethod
    def ideal_hwp(cls) -> "PlateCalibration":
        return cls(retardance=math.pi, zero_point=0.0)

    @classmethod
    def ideal_qwp(cls) -> "PlateCalibration":
        return cls(retardance=math.pi / 2.0, zero_point=0.0)


@dataclass(frozen=True)
class PlateSetting:
    """Mount angles of the QWP/HWP pair defining one projection measurement."""

    hwp_angle: float
    qwp_angle: float
    hwp_cal: PlateCalibration = field(default_factory=PlateCalibration.ideal_hwp)
    qwp_cal: PlateCalibration = field(default_factory=PlateCalibration.ideal_qwp)

    def __post_init__(self):
        two_pi = 2.0 * math.pi
        object.__setattr__(self, "hwp_angle", self.hwp_angle % two_pi)
        object.__setattr__(self, "qwp_angle", self.qwp_angle % two_pi)


@dataclass(frozen=True)
class StokesSample:
    """One polarimeter reading: plate mount angle plus (S0, S1, S2, S3).

    Raw measured vectors may be slightly super-polarized from noise, so the
    degree-of-polarization check is a loose sanity bound rather than the
    strict physical inequality.
    """

    plate_angle: float
    stokes: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.stokes, dtype=float).reshape(4)
        s.setflags(write=False)
        if s[0] <= 0:
            raise ValueError("S0 must be positive")
        dop2 = (s[1] ** 2 + s[2] ** 2 + s[3] ** 2) / s[0] ** 2
        if dop2 > 1.25:
            raise ValueError(f"unphysical Stokes vector, DOP^2 = {dop2:.3f}")
        object.__setattr__(self, "stokes", s)

    def normalized(self) -> np.ndarray:
        return self.stokes / self.stokes[0]


def retarder_jones(theta: float, delta: float) -> np.ndarray:
    """Jones matrix of a linear retarder with fast axis at `theta`."""
    c, s = np.cos(theta), np.sin(theta)
    e = np.exp(1j * delta)
    return np.array(
        [
            [c * c + s * s * e, c * s * (1.0 - e)],
            [c * s * (1.0 - e), s * s + c * c * e],
        ]
    )


def jones_to_stokes(ket: np.ndarray) -> np.ndarray:
    a, b = complex(ket[0]), complex(ket[1])
    cross = a * np.conj(b)
    return np.array(
        [abs(a) ** 2 + abs(b) ** 2, abs(a) ** 2 - abs(b) ** 2,
         2.0 * cross.real, 2.0 * cross.imag]
    )


def linear_ket(alpha: float) -> np.ndarray:
    """Linear polarization cos(alpha)|H> + sin(alpha)|V>."""
    return np.array([np.cos(alpha), np.sin(alpha)], dtype=complex)


def analyzer_ket(setting: PlateSetting) -> np.ndarray:
    """State transmitted with unit probability by the analyzer.

    The photon traverses QWP, HWP, then the H polarizer, so the accepted
    mode is W_Q^dag W_H^dag |H> with zero-point offsets removed.
    """
    wq = retarder_jones(setting.qwp_angle - setting.qwp_cal.zero_point,
                        setting.qwp_cal.retardance)
    wh = retarder_jones(setting.hwp_angle - setting.hwp_cal.zero_point,
                        setting.hwp_cal.retardance)
    return wq.conj().T @ (wh.conj().T @ H_KET)


def projector_from_plates(setting: PlateSetting) -> Projector1Q:
    return Projector1Q.from_ket(analyzer_ket(setting))


def projection_overlap(setting: PlateSetting, alpha: float) -> float:
    """|<R(alpha)|m>|^2 for the analyzer mode m of `setting`."""
    m = analyzer_ket(setting)
    return float(abs(np.vdot(m, linear_ket(alpha))) ** 2)


def plates_for_linear_projection(
    alpha: float,
    hwp_cal: PlateCalibration,
    qwp_cal: PlateCalibration,
) -> tuple[PlateSetting, float]:
    """Plate angles projecting onto the linear state R(alpha).

    Returns the setting together with the achieved overlap. For ideal
    retardances the closed form q = alpha, h = alpha/2 (plus zero points)
    is exact; otherwise both angles are refined numerically from that seed.
    """
    if abs(hwp_cal.retardance - math.pi) > 0.2 * math.pi:
        raise ValueError("half-wave retardance too far from pi")
    if abs(qwp_cal.retardance - math.pi / 2) > 0.2 * math.pi:
        raise ValueError("quarter-wave retardance too far from pi/2")

    h0 = hwp_cal.zero_point + alpha / 2.0
    q0 = qwp_cal.zero_point + alpha
    ideal = (
        abs(hwp_cal.retardance - math.pi) < 1e-12
        and abs(qwp_cal.retardance - math.pi / 2) < 1e-12
    )
    if not ideal:
        target = linear_ket(alpha)

        def neg_overlap(x):
            s = PlateSetting(x[0], x[1], hwp_cal, qwp_cal)
            return -abs(np.vdot(analyzer_ket(s), target)) ** 2

        res = minimize(
            neg_overlap,
            np.array([h0, q0]),
            method="Nelder-Mead",
            options=dict(xatol=1e-12, fatol=1e-15, maxiter=4000),
        )
        h0, q0 = res.x
    setting = PlateSetting(h0, q0, hwp_cal, qwp_cal)
    overlap = projection_overlap(setting, alpha)
    if overlap < 0.99:
        raise ValueError(
            f"achieved overlap {overlap:.4f} < 0.99; calibration pathological"
        )
    return setting, overlap


def stokes_curve(
    cal: PlateCalibration, jones_in: np.ndarray, angles
) -> list[StokesSample]:
    """Stokes vectors of `jones_in` after the plate, per mount angle."""
    out = []
    for theta in np.atleast_1d(angles):
        ket = retarder_jones(theta - cal.zero_point, cal.retardance) @ jones_in
        out.append(StokesSample(float(theta), jones_to_stokes(ket)))
    return out


def _stokes_model(theta, delta, theta0):
    """(S1, S2, S3) of an H-polarized beam after the plate, stacked."""
    u = 2.0 * (np.asarray(theta) - theta0)
    s1 = np.cos(u) ** 2 + np.sin(u) ** 2 * np.cos(delta)
    s2 = 0.5 * np.sin(2.0 * u) * (1.0 - np.cos(delta))
    s3 = np.sin(u) * np.sin(delta)
    return np.concatenate([s1, s2, s3])


def fit_waveplate(samples, stokes_sigma: float | None = None) -> PlateCalibration:
    """Least-squares (retardance, zero point) from polarimeter samples.

    The model assumes an H-polarized input beam. All three of S1, S2, S3
    enter with equal weight. Returned uncertainties are the 1-sigma values
    from the fit covariance; pass `stokes_sigma` when the per-component
    measurement noise is known so the covariance is scaled absolutely.
    """
    samples = list(samples)
    if len(samples) < 8:
        raise ValueError("need at least 8 samples")
    theta = np.array([s.plate_angle for s in samples])
    if np.ptp(theta) < math.pi / 2:
        raise ValueError("samples must span at least 90 degrees of rotation")
    norm = np.array([s.normalized() for s in samples])
    ydata = np.concatenate([norm[:, 1], norm[:, 2], norm[:, 3]])

    # seed: retardance from the S1 range, zero point from a coarse scan
    delta0 = float(np.arccos(np.clip(norm[:, 1].min(), -1.0, 1.0)))
    if delta0 < 1e-3:
        delta0 = math.pi / 2
    grid = np.linspace(0.0, math.pi, 361)
    sse = [
        np.sum((_stokes_model(theta, delta0, t0) - ydata) ** 2) for t0 in grid
    ]
    theta0_seed = float(grid[int(np.argmin(sse))])

    sigma = None if stokes_sigma is None else np.full(ydata.size, stokes_sigma)
    popt, pcov = curve_fit(
        _stokes_model,
        theta,
        ydata,
        p0=(delta0, theta0_seed),
        sigma=sigma,
        absolute_sigma=stokes_sigma is not None,
        maxfev=20000,
    )
    delta, theta0 = popt
    if not np.all(np.isfinite(pcov)):
        residual = float(np.sum((_stokes_model(theta, *popt) - ydata) ** 2))
        raise RuntimeError(f"fit did not converge; residual {residual:.3e}")
    delta = float(delta % (2.0 * math.pi))
    return PlateCalibration(
        retardance=delta,
        zero_point=float(theta0 % math.pi),
        retardance_uncertainty=float(np.sqrt(pcov[0, 0])),
        zero_point_uncertainty=float(np.sqrt(pcov[1, 1])),
    )


CALIBRATION_HEADER = (
    "plate_id",
    "retardance_rad",
    "retardance_unc_rad",
    "zero_point_rad",
    "zero_point_unc_rad",
)


def read_calibration_file(path) -> dict[str, PlateCalibration]:
    """Calibration CSV -> {plate_id: PlateCalibration}."""
    out: dict[str, PlateCalibration] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != CALIBRATION_HEADER:
            raise ValueError(
                f"bad calibration header {reader.fieldnames!r}; "
                f"expected {','.join(CALIBRATION_HEADER)}"
            )
        for row in reader:
            out[row["plate_id"]] = PlateCalibration(
                retardance=float(row["retardance_rad"]),
                retardance_uncertainty=float(row["retardance_unc_rad"]),
                zero_point=float(row["zero_point_rad"]),
                zero_point_uncertainty=float(row["zero_point_unc_rad"]),
            )
    if not out:
        raise ValueError("calibration file has no rows")
    return out


def write_calibration_file(path, cals: dict[str, PlateCalibration]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CALIBRATION_HEADER)
        for plate_id, c in cals.items():
            writer.writerow(
                [plate_id, repr(c.retardance), repr(c.retardance_uncertainty),
                 repr(c.zero_point), repr(c.zero_point_uncertainty)]
            )


def bundled_calibrations() -> dict[str, PlateCalibration]:
    """The four analysis-plate calibrations shipped with the package."""
    return read_calibration_file(Path(__file__).parent / "data" / "table_a1_calibrations.csv")
