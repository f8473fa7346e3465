"""Two-qubit polarization states and their figures of merit.

The computational basis is fixed everywhere in this package as
(HH, HV, VH, VV), i.e. qubit A is the slow index. Density matrices are
plain 4x4 complex arrays wrapped in a thin validating container; all
operations are pure functions over immutable values.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

BASIS_LABELS = ("HH", "HV", "VH", "VV")

HERMITICITY_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = -1e-10

_SY_SY = np.kron(np.array([[0, -1j], [1j, 0]]), np.array([[0, -1j], [1j, 0]]))


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class PureState:
    """Normalized two-qubit state vector in the (HH, HV, VH, VV) basis."""

    amplitudes: np.ndarray

    def __post_init__(self):
        amps = _readonly(self.amplitudes)
        if amps.shape != (4,):
            raise ValueError(f"expected 4 amplitudes, got shape {amps.shape}")
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"state not normalized: |psi| = {norm!r}")
        object.__setattr__(self, "amplitudes", amps)

    def density(self) -> "DensityMatrix":
        return DensityMatrix(np.outer(self.amplitudes, self.amplitudes.conj()))


@dataclass(frozen=True)
class DensityMatrix:
    """4x4 density matrix; Hermitian and unit trace by construction.

    `unconstrained=True` marks linear-inversion reconstructions that are
    allowed to carry negative eigenvalues; every other instance must be
    positive semidefinite within `PSD_TOL`.
    """

    matrix: np.ndarray
    unconstrained: bool = field(default=False)

    def __post_init__(self):
        m = _readonly(self.matrix)
        if m.shape != (4, 4):
            raise ValueError(f"expected a 4x4 matrix, got shape {m.shape}")
        herm_err = np.abs(m - m.conj().T).max()
        if herm_err > HERMITICITY_TOL:
            raise ValueError(f"matrix not Hermitian: max deviation {herm_err:.3e}")
        tr = m.trace()
        if abs(tr - 1.0) > TRACE_TOL:
            raise ValueError(f"trace must be 1, got {tr!r}")
        if not self.unconstrained:
            lo = np.linalg.eigvalsh(m).min()
            if lo < PSD_TOL:
                raise ValueError(
                    f"negative eigenvalue {lo:.3e}; pass unconstrained=True "
                    "for linear-inversion outputs"
                )
        object.__setattr__(self, "matrix", m)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    def is_physical(self) -> bool:
        return self.eigenvalues().min() >= PSD_TOL


@dataclass(frozen=True)
class Projector1Q:
    """Rank-1 Hermitian projector on a single polarization qubit."""

    matrix: np.ndarray

    def __post_init__(self):
        m = _readonly(self.matrix)
        if m.shape != (2, 2):
            raise ValueError(f"expected a 2x2 matrix, got shape {m.shape}")
        if np.abs(m - m.conj().T).max() > 1e-10:
            raise ValueError("projector not Hermitian")
        if np.abs(m @ m - m).max() > 1e-10:
            raise ValueError("projector not idempotent")
        if abs(m.trace() - 1.0) > 1e-10:
            raise ValueError("projector must have rank 1")
        object.__setattr__(self, "matrix", m)

    @classmethod
    def from_ket(cls, ket: np.ndarray) -> "Projector1Q":
        k = np.asarray(ket, dtype=complex).reshape(2)
        k = k / np.linalg.norm(k)
        return cls(np.outer(k, k.conj()))


def make_bell_psi_minus() -> PureState:
    """The singlet (|HV> - |VH>)/sqrt(2)."""
    return PureState(np.array([0, 1, -1, 0]) / np.sqrt(2))


def fidelity_to_pure(rho: DensityMatrix, psi: PureState) -> float:
    """Overlap <psi|rho|psi> of a state with a pure target."""
    tr = rho.matrix.trace().real
    if abs(tr - 1.0) > 1e-9:
        raise ValueError(f"density matrix must have unit trace, got {tr!r}")
    amp = psi.amplitudes
    val = np.real(amp.conj() @ rho.matrix @ amp)
    return float(min(max(val, 0.0), 1.0))


def _psd_sqrt(m: np.ndarray, floor: float = -1e-8) -> np.ndarray:
    w, u = np.linalg.eigh(m)
    if w.min() < floor:
        raise ValueError(f"eigenvalue {w.min():.3e} below tolerance {floor:.0e}")
    w = np.clip(w, 0.0, None)
    return (u * np.sqrt(w)) @ u.conj().T


def uhlmann_fidelity(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """Squared Uhlmann fidelity (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2."""
    sr = _psd_sqrt(rho.matrix)
    inner = _psd_sqrt(sr @ sigma.matrix @ sr)
    val = float(np.real(inner.trace()) ** 2)
    return min(max(val, 0.0), 1.0)


def concurrence(rho: DensityMatrix) -> float:
    """Wootters concurrence of a two-qubit state.

    Square roots of the eigenvalues of rho (sy x sy) rho* (sy x sy) in
    decreasing order l1..l4 give C = max(0, l1 - l2 - l3 - l4).
    """
    m = rho.matrix
    r = m @ _SY_SY @ m.conj() @ _SY_SY
    # abs() guards tiny negative real parts from round-off
    lam = np.sqrt(np.abs(np.real(np.linalg.eigvals(r))))
    lam.sort()
    return float(max(0.0, lam[3] - lam[2] - lam[1] - lam[0]))


def born_probability(rho: DensityMatrix, ma: Projector1Q, mb: Projector1Q) -> float:
    """Coincidence probability Tr(rho (ma x mb))."""
    val = np.real(np.einsum("ij,ji->", rho.matrix, np.kron(ma.matrix, mb.matrix)))
    if val < -1e-12 or val > 1 + 1e-12:
        raise ValueError(f"Born probability {val!r} outside [0, 1]")
    return float(min(max(val, 0.0), 1.0))


def density_matrix_to_json(rho: DensityMatrix) -> str:
    """Serialize as row-major [re, im] pairs with the basis order recorded."""
    payload = {
        "basis": list(BASIS_LABELS),
        "matrix": [[[z.real, z.imag] for z in row] for row in rho.matrix],
        "unconstrained": rho.unconstrained,
    }
    return json.dumps(payload, indent=2)


def density_matrix_from_json(text: str) -> DensityMatrix:
    payload = json.loads(text)
    basis = payload.get("basis")
    if basis is not None and tuple(basis) != BASIS_LABELS:
        raise ValueError(f"unsupported basis order {basis!r}")
    m = np.array(
        [[complex(re, im) for re, im in row] for row in payload["matrix"]]
    )
    if m.shape != (4, 4):
        raise ValueError(f"expected a 4x4 matrix, got shape {m.shape}")
    if np.abs(m - m.conj().T).max() > HERMITICITY_TOL:
        raise ValueError("matrix in file is not Hermitian")
    return DensityMatrix(m, unconstrained=bool(payload.get("unconstrained", False)))
