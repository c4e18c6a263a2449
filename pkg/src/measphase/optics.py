"""Jones calculus on superpositions of displaced, tilted Gaussian modes.

A field is a finite sum of terms ``amp * g(r - center) * exp(i tilt . r)``
where ``g`` is the intensity-normalized waist-plane Gaussian
``sqrt(2 / (pi w0^2)) exp(-|r|^2 / w0^2)`` and each term carries a linear
polarization label, ``"y"`` (vertical, index 0) or ``"x"`` (horizontal,
index 1).  Lengths are in mm, tilts in rad/mm.

Amplitudes may be numpy arrays: every element then describes the same set
of spatial modes at a different parameter value (e.g. a grid of waveplate
angles), which is how curve and diagram scans stay vectorized.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import DomainError, TermLimitError
from .phase import geometric_phase, protocol_amplitude
from .qubit import zeta_from_eta

POLS = ("y", "x")
MERGE_TOL = 1e-9
TERM_CAP = 4096
ARCSEC = np.pi / (180 * 3600)


@dataclass(frozen=True)
class OpticsConfig:
    wavelength_nm: float = 632.9
    w0_mm: float = 1.0
    d_x_mm: float = 1.0
    gamma_rad: float = 0.0
    tilt_scale: float = 1.0

    def __post_init__(self):
        if not self.w0_mm > 0:
            raise DomainError(f"w0_mm={self.w0_mm} must be positive")
        if self.d_x_mm < 0:
            raise DomainError(f"d_x_mm={self.d_x_mm} must be non-negative")
        if not self.wavelength_nm > 0:
            raise DomainError(f"wavelength_nm={self.wavelength_nm} must be positive")

    @property
    def k(self) -> float:
        """Vacuum wavenumber in rad/mm."""
        return 2 * np.pi / (self.wavelength_nm * 1e-6)

    @property
    def eta(self) -> float:
        return self.d_x_mm / self.w0_mm


@dataclass(frozen=True)
class GaussianTerm:
    amp: complex | np.ndarray
    pol: str
    center: tuple[float, float] = (0.0, 0.0)
    tilt: tuple[float, float] = (0.0, 0.0)

    @property
    def index(self) -> int:
        return POLS.index(self.pol)

    def key(self) -> tuple:
        return (self.pol,) + tuple(int(round(v / MERGE_TOL)) for v in self.center + self.tilt)


@dataclass(frozen=True)
class BeamField:
    terms: tuple[GaussianTerm, ...]
    config: OpticsConfig = field(default_factory=OpticsConfig)

    def __len__(self) -> int:
        return len(self.terms)

    def with_config(self, config: OpticsConfig) -> "BeamField":
        return replace(self, config=config)

    def polarized(self, pol: str) -> "BeamField":
        """Field behind an ideal linear polarizer along ``pol``."""
        return replace(self, terms=tuple(t for t in self.terms if t.pol == pol))

    def total_power(self):
        return np.real(overlap(self, self))


def gaussian_input(config: OpticsConfig, pol: str = "y", amp: complex = 1.0) -> BeamField:
    return BeamField((GaussianTerm(amp, pol),), config)


def merge_terms(terms: Sequence[GaussianTerm], cap: int = TERM_CAP) -> tuple[GaussianTerm, ...]:
    """Sum terms sharing (pol, center, tilt) within MERGE_TOL; drop exact zeros."""
    merged: dict[tuple, GaussianTerm] = {}
    for t in terms:
        k = t.key()
        if k in merged:
            merged[k] = replace(merged[k], amp=merged[k].amp + t.amp)
        else:
            merged[k] = t
    out = tuple(t for t in merged.values() if np.any(t.amp != 0))
    if len(out) > cap:
        raise TermLimitError(f"{len(out)} terms exceed the cap of {cap}")
    return out


def jones_rotation(angle):
    """R(a) = [[cos a, -sin a], [sin a, cos a]], broadcast over ``angle``."""
    a = np.asarray(angle, dtype=float)
    c, s = np.cos(a), np.sin(a)
    return np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2).astype(complex)


def jones_phase_plate(phi, axis_angle=0.0):
    """P(phi, a) = R(a) diag(exp(i phi/2), exp(-i phi/2)) R(-a)."""
    phi = np.asarray(phi, dtype=float)
    diag = np.zeros(phi.shape + (2, 2), dtype=complex)
    diag[..., 0, 0] = np.exp(0.5j * phi)
    diag[..., 1, 1] = np.exp(-0.5j * phi)
    return jones_rotation(axis_angle) @ diag @ jones_rotation(-np.asarray(axis_angle, dtype=float))


def apply_jones(op, beam: BeamField, cap: int = TERM_CAP) -> BeamField:
    """Mix the polarization labels of every term by the 2x2 operator ``op``."""
    op = np.asarray(op, dtype=complex)
    out = []
    for t in beam.terms:
        i = t.index
        for o, pol in enumerate(POLS):
            coef = op[..., o, i]
            if np.all(coef == 0):
                continue
            out.append(GaussianTerm(coef * t.amp, pol, t.center, t.tilt))
    return replace(beam, terms=merge_terms(out, cap))


def deflection_tilt(config: OpticsConfig, beta: float, nu: float) -> tuple[float, float]:
    """Transverse wavevector of an extraordinary ray deflected by ``beta`` along azimuth ``nu``."""
    q = config.tilt_scale * config.k * np.sin(beta)
    return (q * np.cos(nu), q * np.sin(nu))


def apply_beam_displacer(
    beam: BeamField,
    d_x: float,
    beta: float = 0.0,
    nu: float = 0.0,
    gamma_internal: float = 0.0,
    cap: int = TERM_CAP,
) -> BeamField:
    """Walk the x-polarized terms off by ``d_x`` along x and tilt them.

    y terms pass untouched.  ``gamma_internal`` is the x-minus-y propagation
    phase left in the crystal; it is zero when folded into the compensator.
    """
    qx, qy = deflection_tilt(beam.config, beta, nu)
    out = []
    for t in beam.terms:
        if t.pol == "y":
            out.append(t)
            continue
        # lab-referenced tilt phase moves with the translated profile
        amp = t.amp * np.exp(1j * (gamma_internal - t.tilt[0] * d_x))
        out.append(
            GaussianTerm(
                amp,
                "x",
                (t.center[0] + d_x, t.center[1]),
                (t.tilt[0] + qx, t.tilt[1] + qy),
            )
        )
    return replace(beam, terms=merge_terms(out, cap))


def mode_overlap(c1, q1, c2, q2, w0):
    """<g(c1, q1)|g(c2, q2)> for normalized tilted Gaussians of waist ``w0``."""
    dc = np.subtract(c2, c1)
    dq = np.subtract(q2, q1)
    mid = 0.5 * np.add(c1, c2)
    w0 = np.asarray(w0, dtype=float)
    return (
        np.exp(-np.dot(dc, dc) / (2 * w0**2))
        * np.exp(-(w0**2) * np.dot(dq, dq) / 8)
        * np.exp(1j * np.dot(dq, mid))
    )


def overlap(reference: BeamField, beam: BeamField):
    """Integral of E_ref^* . E over the transverse plane, in closed form."""
    a, b = reference.config, beam.config
    if a.w0_mm != b.w0_mm or a.k != b.k:
        raise DomainError("fields were built with different waists or wavelengths")
    total = 0.0 + 0.0j
    for r in reference.terms:
        for t in beam.terms:
            if r.pol != t.pol:
                continue
            total = total + np.conj(r.amp) * t.amp * mode_overlap(r.center, r.tilt, t.center, t.tilt, a.w0_mm)
    return total


def sample_field(beam: BeamField, x, y) -> np.ndarray:
    """Evaluate the (E_y, E_x) components on a grid; used by quadrature oracles."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    w0 = beam.config.w0_mm
    norm = np.sqrt(2 / (np.pi * w0**2))
    out = np.zeros((2,) + np.broadcast(x, y).shape, dtype=complex)
    for t in beam.terms:
        g = norm * np.exp(-((x - t.center[0]) ** 2 + (y - t.center[1]) ** 2) / w0**2)
        out[t.index] += t.amp * g * np.exp(1j * (t.tilt[0] * x + t.tilt[1] * y))
    return out


@dataclass(frozen=True)
class StageConfig:
    """One measurement stage: QWP at ``alpha``, beam displacer, compensator.

    ``gamma`` is the net residual retardance left after compensation
    (0 = exact).  ``alpha`` may be an array to batch over plate angles.
    """

    alpha: float | np.ndarray = 0.0
    gamma: float = 0.0
    d_x: float = 1.0
    beta: float = 0.0
    nu: float = 0.0


@dataclass(frozen=True)
class JonesElement:
    matrix: np.ndarray
    name: str = "jones"

    def apply(self, beam: BeamField, cap: int = TERM_CAP) -> BeamField:
        return apply_jones(self.matrix, beam, cap)


@dataclass(frozen=True)
class BeamDisplacer:
    d_x: float
    beta: float = 0.0
    nu: float = 0.0
    gamma_internal: float = 0.0
    name: str = "BD"

    def apply(self, beam: BeamField, cap: int = TERM_CAP) -> BeamField:
        return apply_beam_displacer(beam, self.d_x, self.beta, self.nu, self.gamma_internal, cap)


def plate_retardance(n_stages: int) -> float:
    """Retardance 2 pi / (N + 1) of the rotated plates; pi/2 (a QWP) for N = 3."""
    return 2 * np.pi / (n_stages + 1)


def build_stage(cfg: StageConfig, retardance: float = np.pi / 2) -> list:
    """Elements of the three-element stage, in the order light meets them."""
    return [
        JonesElement(jones_phase_plate(retardance, cfg.alpha), "QWP"),
        BeamDisplacer(cfg.d_x, cfg.beta, cfg.nu),
        JonesElement(jones_phase_plate(cfg.gamma, 0.0), "CWP"),
    ]


def build_naive_stage(
    theta: float,
    phi: float,
    gamma: float = 0.0,
    d_x: float = 1.0,
    beta: float = 0.0,
    nu: float = 0.0,
) -> list:
    """Four-element measurement of n(theta, phi): P(-phi) R(theta/2) P(gamma) BD R(-theta/2) P(phi).

    Returned in the order light meets them (rightmost factor first).
    """
    return [
        JonesElement(jones_phase_plate(phi), "P(phi)"),
        JonesElement(jones_rotation(-theta / 2), "R(-theta/2)"),
        BeamDisplacer(d_x, beta, nu),
        JonesElement(jones_phase_plate(gamma), "P(gamma)"),
        JonesElement(jones_rotation(theta / 2), "R(theta/2)"),
        JonesElement(jones_phase_plate(-phi), "P(-phi)"),
    ]


def apply_elements(elements: Sequence, beam: BeamField, cap: int = TERM_CAP) -> BeamField:
    for el in elements:
        beam = el.apply(beam, cap)
    return beam


def propagate(setup: Sequence[StageConfig], beam: BeamField, cap: int = TERM_CAP) -> BeamField:
    """Send ``beam`` through the stages in order; plates use retardance 2 pi/(N+1)."""
    ret = plate_retardance(len(setup))
    for cfg in setup:
        beam = apply_elements(build_stage(cfg, ret), beam, cap)
    return beam


def closing_plate(alpha, n_stages: int) -> np.ndarray:
    """Rotated plate in front of the polarizer that closes the measurement cycle.

    Its retardance 2 pi/(N+1) - 2 pi maps the output frame back onto the
    input polarization, so the ideal (d_x = 0) setup is the identity.
    """
    return jones_phase_plate(plate_retardance(n_stages) - 2 * np.pi, alpha)


def analyzed_field(setup: Sequence[StageConfig], config: OpticsConfig, cap: int = TERM_CAP) -> BeamField:
    """Vertical input through all stages, the closing plate and a vertical polarizer."""
    beam = propagate(setup, gaussian_input(config), cap)
    alpha = setup[-1].alpha if setup else 0.0
    beam = apply_jones(closing_plate(alpha, len(setup)), beam, cap)
    return beam.polarized("y")


def setup_amplitude(setup: Sequence[StageConfig], config: OpticsConfig, cap: int = TERM_CAP):
    """Interference amplitude A between the measured arm and the vertical reference."""
    return overlap(gaussian_input(config), analyzed_field(setup, config, cap))


def ideal_setup(alpha, n_stages: int = 3, d_x: float = 1.0, gamma: float = 0.0, imperfections=None) -> list:
    """``n_stages`` stages at a common plate angle; ``imperfections`` is a list of (nu, beta)."""
    imperfections = imperfections or [(0.0, 0.0)] * n_stages
    if len(imperfections) != n_stages:
        raise DomainError("need one (nu, beta) pair per stage")
    return [StageConfig(alpha, gamma, d_x, beta, nu) for nu, beta in imperfections]


@dataclass(frozen=True)
class Readout:
    delta: np.ndarray
    power: np.ndarray
    amplitude: complex
    chi: float
    contrast: float


def fringe_power(amplitude, delta, input_power: float = 1.0):
    """Port-0 power (1/2)[1 + Re exp(-i delta) A], scaled to the input power."""
    delta = np.asarray(delta, dtype=float)
    return 0.5 * input_power * (1.0 + np.real(np.exp(-1j * delta) * amplitude))


def default_delta_grid(points: int = 64) -> np.ndarray:
    return np.linspace(0.0, 2 * np.pi, points, endpoint=False)


def interference_readout(setup: Sequence[StageConfig], config: OpticsConfig, delta_grid=None) -> Readout:
    delta = default_delta_grid() if delta_grid is None else np.asarray(delta_grid, dtype=float)
    if delta.size == 0:
        raise DomainError("delta grid is empty")
    amp = complex(setup_amplitude(setup, config))
    return Readout(delta, fringe_power(amp, delta), amp, float(geometric_phase(amp)), abs(amp))


@dataclass(frozen=True)
class FringeFit:
    chi: float
    contrast: float
    offset: float
    amplitude: float
    residual: float
    defined: bool


def fringe_fit(delta, power, min_amplitude: float = 1e-4) -> FringeFit:
    """Linear least squares for power = c0 + c1 cos(delta + chi).

    With power = (1/2)[1 + |A| cos(delta - arg A)], ``chi`` is the geometric
    phase -arg A and ``contrast`` = c1 / c0 recovers |A|.
    """
    delta = np.asarray(delta, dtype=float)
    power = np.asarray(power, dtype=float)
    if delta.size < 3:
        raise DomainError("need at least three samples")
    if np.ptp(delta) <= np.pi:
        raise DomainError("samples must span more than pi in delta")
    design = np.column_stack([np.ones_like(delta), np.cos(delta), np.sin(delta)])
    coef, *_ = np.linalg.lstsq(design, power, rcond=None)
    c0, a, b = coef
    c1 = float(np.hypot(a, b))
    resid = float(np.sqrt(np.mean((design @ coef - power) ** 2)))
    defined = c1 > min_amplitude
    chi = float(geometric_phase(a + 1j * b)) if defined else float("nan")
    contrast = c1 / c0 if c0 > 0 else float("nan")
    return FringeFit(chi, float(contrast), float(c0), c1, resid, bool(defined))


@dataclass(frozen=True)
class KrausEquivalence:
    optical: complex
    kraus: complex
    deviation: float
    n_stages: int

    def matches(self, tol: float = 1e-9) -> bool:
        return self.deviation < tol


def single_stage_kraus_equivalence_check(
    cfg: StageConfig,
    config: OpticsConfig,
    n_stages: int = 1,
) -> KrausEquivalence:
    """Compare the optical amplitude with the per-step postselected Kraus chain.

    The Kraus side uses theta = 2 alpha, zeta = 1 - exp(-(d_x/w0)^2) and
    ignores the stage's beta and gamma.
    """
    setup = [cfg] * n_stages
    optical = complex(setup_amplitude(setup, config))
    zeta = zeta_from_eta(cfg.d_x / config.w0_mm)
    kraus = complex(protocol_amplitude(2 * float(cfg.alpha), n_stages, zeta)[0])
    return KrausEquivalence(optical, kraus, abs(optical - kraus), n_stages)
