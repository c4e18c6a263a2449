"""Pure qubit states and null-weak measurement Kraus operators.

Basis ordering is (|up>, |down>), which the optics module identifies with
(vertical, horizontal) polarization.  Operators are plain ``(..., 2, 2)``
complex numpy arrays so they broadcast over parameter batches.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import AnnihilationError, DomainError

ANNIHILATION_NORM = 1e-14

IDENTITY = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)


@dataclass(frozen=True)
class PureQubitState:
    c_up: complex
    c_down: complex

    @classmethod
    def from_vector(cls, vec) -> "PureQubitState":
        vec = np.asarray(vec, dtype=complex)
        return cls(complex(vec[0]), complex(vec[1]))

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.c_up, self.c_down], dtype=complex)

    @property
    def norm(self) -> float:
        return float(np.hypot(abs(self.c_up), abs(self.c_down)))

    def normalized(self) -> "PureQubitState":
        n = self.norm
        if n < ANNIHILATION_NORM:
            raise AnnihilationError("cannot normalize a zero state")
        return PureQubitState(self.c_up / n, self.c_down / n)

    def bloch_vector(self) -> np.ndarray:
        """Unit Bloch vector (<sx>, <sy>, <sz>) of the normalized state."""
        u, d = self.normalized().vector
        cross = np.conj(u) * d
        return np.array([2 * cross.real, 2 * cross.imag, abs(u) ** 2 - abs(d) ** 2])

    def overlap(self, other: "PureQubitState") -> complex:
        """<self|other>."""
        return complex(np.vdot(self.vector, other.vector))


def make_state(theta: float, phi: float) -> PureQubitState:
    """|theta, phi> = cos(theta/2)|up> + exp(i phi) sin(theta/2)|down>."""
    if not 0.0 <= theta <= np.pi:
        raise DomainError(f"theta={theta} outside [0, pi]")
    if not 0.0 <= phi < 2 * np.pi:
        raise DomainError(f"phi={phi} outside [0, 2pi)")
    return PureQubitState(complex(np.cos(theta / 2)), np.exp(1j * phi) * np.sin(theta / 2))


def strength_eta(zeta: float) -> float:
    """Measurement strength eta = sqrt(-ln(1 - zeta)); ``inf`` at zeta = 1."""
    if not 0.0 <= zeta <= 1.0:
        raise DomainError(f"zeta={zeta} outside [0, 1]")
    if zeta == 1.0:
        return float("inf")
    return float(np.sqrt(-np.log1p(-zeta)))


def zeta_from_eta(eta: float) -> float:
    if eta < 0:
        raise DomainError(f"eta={eta} must be non-negative")
    return float(-np.expm1(-eta * eta))


@dataclass(frozen=True)
class MeasurementSpec:
    """Axis (theta, phi) on the Bloch sphere and raw strength zeta."""

    theta: float
    phi: float
    zeta: float

    def __post_init__(self):
        if not 0.0 <= self.theta <= np.pi:
            raise DomainError(f"theta={self.theta} outside [0, pi]")
        if not 0.0 <= self.phi < 2 * np.pi:
            raise DomainError(f"phi={self.phi} outside [0, 2pi)")
        if not 0.0 <= self.zeta <= 1.0:
            raise DomainError(f"zeta={self.zeta} outside [0, 1]")

    @property
    def eta(self) -> float:
        return strength_eta(self.zeta)

    @property
    def axis(self) -> np.ndarray:
        return bloch_axis(self.theta, self.phi)


def bloch_axis(theta, phi) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    return np.stack(
        np.broadcast_arrays(np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)),
        axis=-1,
    )


def axis_projectors(theta, phi) -> tuple[np.ndarray, np.ndarray]:
    """Projectors onto the +1 and -1 eigenstates of n.sigma, broadcast over inputs."""
    n = bloch_axis(theta, phi)
    n_sigma = (
        n[..., 0, None, None] * SIGMA_X
        + n[..., 1, None, None] * SIGMA_Y
        + n[..., 2, None, None] * SIGMA_Z
    )
    return (IDENTITY + n_sigma) / 2, (IDENTITY - n_sigma) / 2


def null_kraus(theta, phi, zeta) -> np.ndarray:
    """No-click operator M_-(n) = |up_n><up_n| + sqrt(1 - zeta)|down_n><down_n|.

    Accepts arrays; the result has shape ``broadcast(theta, phi, zeta) + (2, 2)``.
    """
    up, down = axis_projectors(theta, phi)
    keep = np.sqrt(1.0 - np.asarray(zeta, dtype=float))
    return up + keep[..., None, None] * down


def kraus_pair(spec: MeasurementSpec) -> tuple[np.ndarray, np.ndarray]:
    """(M_plus, M_minus) for a null-weak measurement along ``spec``'s axis."""
    up, down = axis_projectors(spec.theta, spec.phi)
    if spec.zeta == 1.0:
        return down, up
    return np.sqrt(spec.zeta) * down, up + np.sqrt(1.0 - spec.zeta) * down


def hermiticity_deviation(op) -> float:
    op = np.asarray(op)
    return float(np.max(np.abs(op - np.conj(np.swapaxes(op, -1, -2)))))


def rotation_unitary(axis, angle: float) -> np.ndarray:
    """SU(2) element exp(-i angle/2 n.sigma) rotating Bloch vectors by ``angle`` about ``axis``."""
    n = np.asarray(axis, dtype=float)
    n = n / np.linalg.norm(n)
    n_sigma = n[0] * SIGMA_X + n[1] * SIGMA_Y + n[2] * SIGMA_Z
    return np.cos(angle / 2) * IDENTITY - 1j * np.sin(angle / 2) * n_sigma


def apply_kraus(op, state: PureQubitState) -> tuple[PureQubitState, float]:
    """Return the normalized post-measurement state and sqrt(P(r)) = ||M psi||."""
    out = np.asarray(op) @ state.vector
    norm = float(np.linalg.norm(out))
    if norm < ANNIHILATION_NORM:
        raise AnnihilationError("measurement outcome annihilates the state")
    return PureQubitState.from_vector(out / norm), norm


def readout_operator(spec: MeasurementSpec, readout: str) -> np.ndarray:
    plus, minus = kraus_pair(spec)
    if readout in ("+", 1, +1):
        return plus
    if readout in ("-", -1):
        return minus
    raise DomainError(f"readout must be '+' or '-', got {readout!r}")


def sequence_amplitude(
    specs: Sequence[MeasurementSpec],
    readouts: Sequence[str],
    psi0: PureQubitState,
) -> complex:
    """<psi0| M_{r_N} ... M_{r_1} |psi0> for the ordered measurement record."""
    if len(specs) != len(readouts):
        raise DomainError("specs and readouts must have equal length")
    vec = psi0.vector
    for spec, r in zip(specs, readouts):
        vec = readout_operator(spec, r) @ vec
    return complex(np.vdot(psi0.vector, vec))


def trajectory(
    specs: Sequence[MeasurementSpec],
    readouts: Sequence[str],
    psi0: PureQubitState,
) -> list[PureQubitState]:
    """Normalized states psi0, M_1 psi0, ..., M_N ... M_1 psi0."""
    states = [psi0.normalized()]
    for spec, r in zip(specs, readouts):
        nxt, _ = apply_kraus(readout_operator(spec, r), states[-1])
        states.append(nxt)
    return states
