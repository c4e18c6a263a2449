"""Cross-validation batteries between independent computations of the same quantity.

Each battery returns a :class:`BatteryResult` carrying the worst residual so a
failing run can report how far off it was.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.integrate import cubature

from .errors import AnnihilationError
from .optics import (
    BeamField,
    GaussianTerm,
    OpticsConfig,
    StageConfig,
    ideal_setup,
    overlap,
    sample_field,
    setup_amplitude,
    single_stage_kraus_equivalence_check,
)
from .phase import CONTRAST_THRESHOLD, bargmann_oracle, geometric_phase, spherical_excess_oracle, wrap_phase
from .qubit import MeasurementSpec, make_state, sequence_amplitude, trajectory

KRAUS_TOL = 1e-9
QUADRATURE_RTOL = 1e-6
EQUIVALENCE_TOL = 1e-9
SCALE_TOL = 1e-9
SCALE_FACTORS = (0.5, 2.0, 5.0)


@dataclass(frozen=True)
class BatteryResult:
    name: str
    passed: bool
    max_residual: float
    tolerance: float
    cases: int
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}: max residual {self.max_residual:.3e} (tol {self.tolerance:.0e}, {self.cases} cases){self.detail}"


def _random_sequence(rng: np.random.Generator, n: int):
    specs = [
        MeasurementSpec(rng.uniform(0, np.pi), rng.uniform(0, 2 * np.pi), rng.uniform(0.0, 0.99)) for _ in range(n)
    ]
    readouts = list(rng.choice(["-", "+"], size=n, p=[0.8, 0.2]))
    psi0 = make_state(rng.uniform(0, np.pi), rng.uniform(0, 2 * np.pi))
    return specs, readouts, psi0


def kraus_bargmann_battery(trials: int = 500, seed: int = 0, max_n: int = 6, tol: float = KRAUS_TOL) -> BatteryResult:
    """Chain amplitude phase vs Bargmann product vs half the spherical excess."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    done = 0
    while done < trials:
        specs, readouts, psi0 = _random_sequence(rng, int(rng.integers(1, max_n + 1)))
        try:
            states = trajectory(specs, readouts, psi0)
        except AnnihilationError:
            continue
        amp = sequence_amplitude(specs, readouts, psi0)
        if abs(amp) < 1e-6:
            continue
        chi = geometric_phase(amp)
        bargmann = bargmann_oracle(states)
        omega = spherical_excess_oracle([s.bloch_vector() for s in states])
        r1 = abs(wrap_phase(chi - bargmann))
        r2 = abs(2 * wrap_phase((2 * bargmann - omega) / 2))
        worst = max(worst, r1, r2)
        done += 1
    return BatteryResult("kraus-bargmann", worst < tol, worst, tol, trials)


def random_field(rng: np.random.Generator, config: OpticsConfig, max_terms: int = 4) -> BeamField:
    """Multi-term field with random amplitudes, centers within 2 w0 and tilts within 3/w0."""
    w0 = config.w0_mm
    terms = []
    for _ in range(int(rng.integers(1, max_terms + 1))):
        terms.append(
            GaussianTerm(
                complex(rng.normal(), rng.normal()),
                str(rng.choice(["y", "x"])),
                tuple(rng.uniform(-2 * w0, 2 * w0, 2)),
                tuple(rng.uniform(-3 / w0, 3 / w0, 2)),
            )
        )
    return BeamField(tuple(terms), config)


def quadrature_overlap(reference: BeamField, beam: BeamField, rtol: float = 1e-10) -> complex:
    """Adaptive cubature of E_ref^* . E over a box covering every term."""
    w0 = beam.config.w0_mm
    pts = np.array([t.center for t in reference.terms + beam.terms])
    lo = pts.min(axis=0) - 7 * w0
    hi = pts.max(axis=0) + 7 * w0

    def integrand(xy):
        a = sample_field(reference, xy[:, 0], xy[:, 1])
        b = sample_field(beam, xy[:, 0], xy[:, 1])
        v = np.sum(np.conj(a) * b, axis=0)
        return np.stack([v.real, v.imag], axis=-1)

    res = cubature(integrand, lo, hi, rtol=rtol, atol=1e-14, max_subdivisions=100000)
    return complex(res.estimate[0], res.estimate[1])


def overlap_quadrature_battery(
    fields: int = 200, seed: int = 0, config: OpticsConfig | None = None, tol: float = QUADRATURE_RTOL
) -> BatteryResult:
    config = config or OpticsConfig()
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(fields):
        a, b = random_field(rng, config), random_field(rng, config)
        exact = complex(overlap(a, b))
        numeric = quadrature_overlap(a, b)
        scale = max(abs(exact), np.sqrt(float(a.total_power().real * b.total_power().real)) * 1e-3)
        worst = max(worst, abs(exact - numeric) / scale)
    return BatteryResult("overlap-quadrature", worst < tol, worst, tol, fields)


def single_stage_battery(
    trials: int = 100, seed: int = 0, config: OpticsConfig | None = None, tol: float = EQUIVALENCE_TOL
) -> BatteryResult:
    """N = 1 optical amplitude vs <psi0|M_-|psi0> at random alpha and waist.

    The stage uses the configured d_x and residual retardance, so a nonzero
    gamma shows up as a failure: the Kraus model has no such term.
    """
    config = config or OpticsConfig()
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        cfg = replace(config, w0_mm=float(rng.uniform(0.2, 4.0)))
        stage = StageConfig(alpha=float(rng.uniform(0, np.pi / 2)), gamma=config.gamma_rad, d_x=config.d_x_mm)
        worst = max(worst, single_stage_kraus_equivalence_check(stage, cfg).deviation)
    return BatteryResult("single-stage-kraus", worst < tol, worst, tol, trials)


def scale_invariance_battery(
    config: OpticsConfig | None = None,
    factors=SCALE_FACTORS,
    n_stages: int = 3,
    points: int = 721,
    tol: float = SCALE_TOL,
) -> BatteryResult:
    """chi(alpha) depends on d_x and w0 only through their ratio when beta = 0."""
    config = config or OpticsConfig()
    alphas = np.linspace(0, np.pi / 2, points)

    def chi(scale):
        cfg = replace(config, w0_mm=config.w0_mm * scale, d_x_mm=config.d_x_mm * scale)
        amp = setup_amplitude(ideal_setup(alphas, n_stages, cfg.d_x_mm, cfg.gamma_rad), cfg)
        return np.broadcast_to(amp, alphas.shape)

    base = chi(1.0)
    valid = np.abs(base) > CONTRAST_THRESHOLD
    worst = 0.0
    for f in factors:
        diff = wrap_phase(geometric_phase(chi(f)) - geometric_phase(base))
        worst = max(worst, float(np.max(np.abs(diff[valid]), initial=0.0)))
    return BatteryResult("eta-scale-invariance", worst < tol, worst, tol, len(factors) * int(valid.sum()))


def run_all(config: OpticsConfig | None = None, seed: int = 0, quick: bool = False) -> list[BatteryResult]:
    config = config or OpticsConfig()
    return [
        kraus_bargmann_battery(100 if quick else 500, seed),
        overlap_quadrature_battery(20 if quick else 200, seed, config),
        single_stage_battery(20 if quick else 100, seed, config),
        scale_invariance_battery(config, points=181 if quick else 721),
    ]
