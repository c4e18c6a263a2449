"""Measurement-induced geometric phase of postselected measurement families.

Orientation convention: the reported phase is ``chi = -arg A`` where
``A = <psi0| M_N ... M_1 |psi0>``.  For Hermitian Kraus chains this equals
``arg prod <psi_i|psi_{i+1}>`` over the trajectory and ``+Omega/2`` with
``Omega`` the solid angle on the left of the oriented geodesic polygon.
With it the projective limit winds by ``+2 pi`` over ``theta in [0, pi]``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import (
    AmbiguityError,
    DomainError,
    GeodesicError,
    NoTransitionError,
    NonQuantizedWarning,
)
from .qubit import (
    MeasurementSpec,
    PureQubitState,
    make_state,
    null_kraus,
    sequence_amplitude,
    trajectory,
)

CONTRAST_THRESHOLD = 1e-4
DEFAULT_THETA_POINTS = 721
MAX_JUMP = np.pi / 4
QUANTIZATION_TOLERANCE = 0.2 * 2 * np.pi
AMBIGUITY_TOLERANCE = 1e-12

AmplitudeFn = Callable[[np.ndarray], np.ndarray]


def wrap_phase(x):
    """Map angles onto (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(x, dtype=float), 2 * np.pi)


def geometric_phase(amplitude):
    """Phase chi carried by an interference amplitude (see module docstring)."""
    return wrap_phase(-np.angle(amplitude))


@dataclass(frozen=True)
class ProtocolFamily:
    n_measurements: int
    zeta: float
    theta_grid: tuple = field(default_factory=lambda: tuple(np.linspace(0, np.pi, DEFAULT_THETA_POINTS)))

    def __post_init__(self):
        if self.n_measurements < 1:
            raise DomainError("n_measurements must be >= 1")
        if not 0.0 <= self.zeta <= 1.0:
            raise DomainError(f"zeta={self.zeta} outside [0, 1]")
        grid = np.asarray(self.theta_grid, dtype=float)
        if grid.ndim != 1 or grid.size < 2:
            raise DomainError("theta_grid needs at least two points")
        if np.any(np.diff(grid) <= 0):
            raise DomainError("theta_grid must be strictly increasing")
        if grid[0] < 0 or grid[-1] > np.pi:
            raise DomainError("theta_grid must lie in [0, pi]")

    @property
    def azimuths(self) -> np.ndarray:
        j = np.arange(1, self.n_measurements + 1)
        return 2 * np.pi * j / (self.n_measurements + 1)

    def specs(self, theta: float) -> list[MeasurementSpec]:
        return [MeasurementSpec(theta, phi, self.zeta) for phi in self.azimuths]


@dataclass(frozen=True)
class PhasePoint:
    theta: float
    chi_raw: float
    chi_unwrapped: float
    contrast: float
    valid: bool


@dataclass(frozen=True)
class TopologicalResult:
    delta_chi: float
    m: int
    quantization_residual: float

    @property
    def quantized(self) -> bool:
        return self.quantization_residual <= QUANTIZATION_TOLERANCE


@dataclass(frozen=True)
class PhaseCurve:
    """A sampled phase curve chi(x) with the complex amplitude behind it."""

    x: np.ndarray
    amplitude: np.ndarray
    chi_raw: np.ndarray
    chi_unwrapped: np.ndarray
    contrast: np.ndarray
    valid: np.ndarray

    @classmethod
    def from_amplitudes(cls, x, amplitude, threshold: float = CONTRAST_THRESHOLD) -> "PhaseCurve":
        x = np.asarray(x, dtype=float)
        amplitude = np.asarray(amplitude, dtype=complex)
        contrast = np.abs(amplitude)
        valid = contrast > threshold
        raw = geometric_phase(amplitude)
        return cls(x, amplitude, raw, unwrap_phases(x, raw, valid), contrast, valid)

    @property
    def topology(self) -> TopologicalResult:
        return index_from_unwrapped(self.chi_unwrapped, self.valid)

    @property
    def min_contrast(self) -> float:
        return float(self.contrast.min())

    def points(self) -> list[PhasePoint]:
        return [
            PhasePoint(float(x), float(r), float(u), float(c), bool(v))
            for x, r, u, c, v in zip(self.x, self.chi_raw, self.chi_unwrapped, self.contrast, self.valid)
        ]


def protocol_amplitude(theta, n_measurements: int, zeta: float) -> np.ndarray:
    """A(theta) = <theta,0| M_-(theta, phi_N) ... M_-(theta, phi_1) |theta,0>, vectorized in theta."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    psi0 = np.stack([np.cos(theta / 2), np.sin(theta / 2)], axis=-1).astype(complex)
    vec = psi0
    for j in range(1, n_measurements + 1):
        phi = 2 * np.pi * j / (n_measurements + 1)
        vec = np.einsum("...ij,...j->...i", null_kraus(theta, phi, zeta), vec)
    return np.einsum("...i,...i->...", np.conj(psi0), vec)


def chi_of_theta(family: ProtocolFamily, threshold: float = CONTRAST_THRESHOLD) -> list[PhasePoint]:
    """Raw phase points on the family's theta grid; ``chi_unwrapped`` equals ``chi_raw``.

    Points with contrast at or below ``threshold`` are flagged invalid.
    """
    grid = np.asarray(family.theta_grid, dtype=float)
    amp = protocol_amplitude(grid, family.n_measurements, family.zeta)
    contrast = np.abs(amp)
    raw = geometric_phase(amp)
    return [
        PhasePoint(float(t), float(r), float(r), float(c), bool(c > threshold))
        for t, r, c in zip(grid, raw, contrast)
    ]


def unwrap_phases(x, raw, valid) -> np.ndarray:
    """Continuity unwrapping with minimal jumps between consecutive valid samples.

    Invalid samples are linearly interpolated (in ``x``) between their valid
    neighbours; trailing ones hold the last valid value.
    """
    x = np.asarray(x, dtype=float)
    raw = np.asarray(raw, dtype=float)
    valid = np.asarray(valid, dtype=bool)
    if raw.size == 0:
        return raw.copy()
    if not valid[0]:
        raise DomainError("the first sample of a curve must be valid")
    idx = np.flatnonzero(valid)
    steps = wrap_phase(np.diff(raw[idx]))
    ambiguous = np.abs(np.abs(steps) - np.pi) < AMBIGUITY_TOLERANCE
    if np.any(ambiguous):
        where = x[idx[1:][ambiguous][0]]
        raise AmbiguityError(f"phase step of exactly pi at x={where}; refine the grid")
    out = np.empty_like(raw)
    out[idx] = raw[idx[0]] + np.concatenate(([0.0], np.cumsum(steps)))
    if idx.size < raw.size:
        missing = np.flatnonzero(~valid)
        out[missing] = np.interp(x[missing], x[idx], out[idx])
    return out


def unwrap_curve(points: Sequence[PhasePoint]) -> list[PhasePoint]:
    x = np.array([p.theta for p in points])
    raw = np.array([p.chi_raw for p in points])
    valid = np.array([p.valid for p in points], dtype=bool)
    unwrapped = unwrap_phases(x, raw, valid)
    return [
        PhasePoint(p.theta, p.chi_raw, float(u), p.contrast, p.valid)
        for p, u in zip(points, unwrapped)
    ]


def index_from_unwrapped(unwrapped, valid=None) -> TopologicalResult:
    unwrapped = np.asarray(unwrapped, dtype=float)
    if valid is not None and not (valid[0] and valid[-1]):
        raise DomainError("curve endpoints must be valid")
    delta = float(unwrapped[-1] - unwrapped[0])
    m = int(np.rint(delta / (2 * np.pi)))
    residual = abs(delta - 2 * np.pi * m)
    if residual > QUANTIZATION_TOLERANCE:
        warnings.warn(
            f"delta chi = {delta:.4f} is not quantized (residual {residual:.3f}); "
            "grid under-resolved or endpoints not trivial",
            NonQuantizedWarning,
            stacklevel=2,
        )
    return TopologicalResult(delta, m, residual)


def topological_index(points: Sequence[PhasePoint]) -> TopologicalResult:
    return index_from_unwrapped(
        [p.chi_unwrapped for p in points], [p.valid for p in points]
    )


def refine_grid(
    fn: AmplitudeFn,
    grid,
    max_jump: float = MAX_JUMP,
    low_contrast: float | None = None,
    contrast_depth: int = 0,
    min_step: float = 1e-11,
    max_points: int = 200_000,
) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate ``fn`` on ``grid`` and bisect intervals until phase steps are small.

    An interval is split while the wrapped phase step across it exceeds
    ``max_jump``; with ``low_contrast`` set, intervals touching a sample below
    it are also split, ``contrast_depth`` times at most.
    """
    x = np.asarray(grid, dtype=float)
    amp = np.asarray(fn(x), dtype=complex)
    level = 0
    while x.size < max_points:
        step = np.abs(wrap_phase(np.diff(np.angle(amp))))
        wide = np.diff(x) > min_step
        split = (step > max_jump) & wide
        if low_contrast is not None and level < contrast_depth:
            dim = np.minimum(np.abs(amp[:-1]), np.abs(amp[1:])) < low_contrast
            split |= dim & wide
        if not split.any():
            break
        mids = 0.5 * (x[:-1] + x[1:])[split]
        x = np.concatenate((x, mids))
        amp = np.concatenate((amp, np.asarray(fn(mids), dtype=complex)))
        order = np.argsort(x, kind="stable")
        x, amp = x[order], amp[order]
        level += 1
    return x, amp


def refined_curve(
    fn: AmplitudeFn,
    grid,
    threshold: float = CONTRAST_THRESHOLD,
    **refine_kwargs,
) -> PhaseCurve:
    x, amp = refine_grid(fn, grid, **refine_kwargs)
    return PhaseCurve.from_amplitudes(x, amp, threshold)


def winding_index(fn: AmplitudeFn, grid, **refine_kwargs) -> int:
    """Topological index of ``fn`` using every nonzero sample (no contrast cut)."""
    x, amp = refine_grid(fn, grid, **refine_kwargs)
    curve = PhaseCurve.from_amplitudes(x, amp, threshold=0.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NonQuantizedWarning)
        return curve.topology.m


def minimum_contrast(fn: AmplitudeFn, lo: float, hi: float, points: int = 721) -> tuple[float, float]:
    """(x, |fn(x)|) at the minimum of the contrast, polished by a bounded 1D search."""
    x = np.linspace(lo, hi, points)
    c = np.abs(fn(x))
    i = int(np.argmin(c))
    a, b = x[max(i - 1, 0)], x[min(i + 1, points - 1)]
    if b <= a:
        return float(x[i]), float(c[i])
    res = minimize_scalar(
        lambda t: float(np.abs(fn(np.array([t]))[0])),
        bounds=(a, b),
        method="bounded",
        options={"xatol": 1e-13},
    )
    if res.fun < c[i]:
        return float(res.x), float(res.fun)
    return float(x[i]), float(c[i])


@dataclass(frozen=True)
class TransitionBracket:
    """Result of a bisection on a control parameter over a jump of the index."""

    value: float
    lo: float
    hi: float
    m_lo: int
    m_hi: int
    min_contrast: float
    argmin: float
    evaluations: int = 0

    @property
    def width(self) -> float:
        return self.hi - self.lo


def bisect_index(index_fn: Callable[[float], int], lo: float, hi: float, tol: float):
    """Bisect ``[lo, hi]`` down to width ``tol`` keeping the index jump inside."""
    m_lo, m_hi = index_fn(lo), index_fn(hi)
    if m_lo == m_hi:
        raise NoTransitionError(f"index {m_lo} at both ends of [{lo}, {hi}]")
    count = 2
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        m_mid = index_fn(mid)
        count += 1
        if m_mid == m_lo:
            lo = mid
        elif m_mid == m_hi:
            hi = mid
        else:
            # a third value means several transitions are nested in the bracket
            raise NoTransitionError(f"index {m_mid} at {mid} differs from both ends ({m_lo}, {m_hi})")
    return lo, hi, m_lo, m_hi, count


def critical_strength(
    n_measurements: int,
    resolution: float = 1e-6,
    theta_points: int = DEFAULT_THETA_POINTS,
) -> TransitionBracket:
    """Bisect zeta in [0, 1] over the jump of the postselected protocol's index."""
    if n_measurements < 1:
        raise DomainError("n_measurements must be >= 1")
    grid = np.linspace(0.0, np.pi, theta_points)

    def index(zeta: float) -> int:
        return winding_index(lambda t: protocol_amplitude(t, n_measurements, zeta), grid)

    lo, hi, m_lo, m_hi, count = bisect_index(index, 0.0, 1.0, resolution)
    zeta_c = 0.5 * (lo + hi)
    at, cmin = minimum_contrast(lambda t: protocol_amplitude(t, n_measurements, zeta_c), 0.0, np.pi)
    return TransitionBracket(zeta_c, lo, hi, m_lo, m_hi, cmin, at, count)


def bargmann_oracle(states: Sequence[PureQubitState]) -> float:
    """arg prod_i <psi_i|psi_{i+1}> around the closed list of states."""
    vecs = [s.normalized().vector for s in states]
    if not vecs:
        return 0.0
    product = 1.0 + 0.0j
    for a, b in zip(vecs, vecs[1:] + vecs[:1]):
        ov = np.vdot(a, b)
        if abs(ov) < 1e-12:
            raise GeodesicError("consecutive states are orthogonal")
        product *= ov / abs(ov)
    return float(wrap_phase(np.angle(product)))


def _triangle_solid_angle(a, b, c) -> float:
    num = np.dot(a, np.cross(b, c))
    den = 1.0 + np.dot(a, b) + np.dot(b, c) + np.dot(c, a)
    return 2.0 * np.arctan2(num, den)


def spherical_excess_oracle(bloch_vectors) -> float:
    """Signed solid angle of the closed geodesic polygon, reduced to (-2 pi, 2 pi].

    Counter-clockwise polygons (seen from outside) are positive.  The fan apex
    is the first vertex unless another vertex is (nearly) antipodal to it.
    """
    verts = [np.asarray(v, dtype=float) / np.linalg.norm(v) for v in bloch_vectors]
    kept: list[np.ndarray] = []
    for v in verts:
        if not kept or np.linalg.norm(v - kept[-1]) > 1e-12:
            kept.append(v)
    while len(kept) > 1 and np.linalg.norm(kept[0] - kept[-1]) <= 1e-12:
        kept.pop()
    if len(kept) < 3:
        return 0.0
    for a, b in zip(kept, kept[1:] + kept[:1]):
        if np.dot(a, b) < -1.0 + 1e-12:
            raise GeodesicError("consecutive vertices are antipodal")

    def clearance(p):
        return min(1.0 + np.dot(p, v) for v in kept)

    apex = kept[0]
    if clearance(apex) < 1e-6:
        candidates = []
        mean = np.sum(kept, axis=0)
        if np.linalg.norm(mean) > 1e-9:
            candidates.append(mean / np.linalg.norm(mean))
        candidates.extend(np.vstack([np.eye(3), -np.eye(3)]))
        apex = max(candidates, key=clearance)
    total = sum(_triangle_solid_angle(apex, a, b) for a, b in zip(kept, kept[1:] + kept[:1]))
    return float(2.0 * wrap_phase(total / 2.0))


def interferometer_probability(
    specs: Sequence[MeasurementSpec],
    psi0: PureQubitState,
    delta: float,
) -> tuple[float, float]:
    """Output-port probabilities with the measured arm postselected to all-null readouts."""
    amp = sequence_amplitude(specs, ["-"] * len(specs), psi0)
    p0 = 0.5 * (1.0 + (np.exp(-1j * delta) * amp).real)
    return float(p0), float(1.0 - p0)


def trajectory_states(theta: float, n_measurements: int, zeta: float) -> list[PureQubitState]:
    """Bloch trajectory psi0, M_1 psi0, ... for the postselected protocol at ``theta``."""
    family = ProtocolFamily(n_measurements, zeta, (0.0, np.pi))
    return trajectory(family.specs(theta), ["-"] * n_measurements, make_state(theta, 0.0))
