"""Curves, transition search and (w0, gamma) phase diagrams for the optical setup."""
from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import DomainError, NonQuantizedWarning
from .optics import OpticsConfig, analyzed_field, gaussian_input, ideal_setup, overlap
from .phase import (
    CONTRAST_THRESHOLD,
    QUANTIZATION_TOLERANCE,
    PhaseCurve,
    TransitionBracket,
    bisect_index,
    minimum_contrast,
    refine_grid,
)

DEFAULT_ALPHA_POINTS = 181
DEFAULT_TOL_MM = 1e-3
DIAGRAM_SIZE = 64
LOW_CONTRAST = 0.05
CONTRAST_DEPTH = 4


def alpha_grid(points: int = DEFAULT_ALPHA_POINTS) -> np.ndarray:
    return np.linspace(0.0, np.pi / 2, points)


@dataclass(frozen=True)
class SetupTemplate:
    """Everything but the waist and plate angle: optics constants plus per-stage (nu, beta)."""

    optics: OpticsConfig = field(default_factory=OpticsConfig)
    n_stages: int = 3
    imperfections: tuple = ()

    def __post_init__(self):
        if self.n_stages < 1:
            raise DomainError("n_stages must be >= 1")
        if self.imperfections and len(self.imperfections) != self.n_stages:
            raise DomainError("need one (nu, beta) pair per stage")

    def stages(self, alpha, gamma: float | None = None) -> list:
        gamma = self.optics.gamma_rad if gamma is None else gamma
        return ideal_setup(
            alpha,
            self.n_stages,
            self.optics.d_x_mm,
            gamma,
            [tuple(p) for p in self.imperfections] or None,
        )

    def config(self, w0: float) -> OpticsConfig:
        return replace(self.optics, w0_mm=float(w0))

    def with_imperfections(self, pairs) -> "SetupTemplate":
        return replace(self, imperfections=tuple(tuple(map(float, p)) for p in pairs))

    def amplitude_fn(self, w0: float, gamma: float | None = None):
        """alpha -> interference amplitude A at fixed waist and residual retardance."""
        cfg = self.config(w0)
        reference = gaussian_input(cfg)

        def fn(alpha):
            alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
            return np.broadcast_to(overlap(reference, analyzed_field(self.stages(alpha, gamma), cfg)), alpha.shape)

        return fn


@dataclass(frozen=True)
class AlphaCurve:
    w0: float
    curve: PhaseCurve

    @property
    def alpha(self) -> np.ndarray:
        return self.curve.x

    @property
    def topology(self):
        return self.curve.topology


def chi_curve_vs_alpha(
    w0: float,
    template: SetupTemplate,
    alphas=None,
    refine: bool = True,
    gamma: float | None = None,
    threshold: float = CONTRAST_THRESHOLD,
) -> AlphaCurve:
    """chi(alpha) over [0, pi/2] with adaptive refinement around fast phase changes."""
    grid = alpha_grid() if alphas is None else np.asarray(alphas, dtype=float)
    fn = template.amplitude_fn(w0, gamma)
    if refine:
        x, amp = refine_grid(fn, grid, low_contrast=LOW_CONTRAST, contrast_depth=CONTRAST_DEPTH)
    else:
        x, amp = grid, fn(grid)
    return AlphaCurve(float(w0), PhaseCurve.from_amplitudes(x, amp, threshold))


@dataclass(frozen=True)
class CellResult:
    m: int
    delta_chi: float
    residual: float
    min_contrast: float

    @property
    def resolved(self) -> bool:
        return self.residual < QUANTIZATION_TOLERANCE


def evaluate_cell(template: SetupTemplate, w0: float, gamma: float | None = None, alphas=None) -> CellResult:
    """Index of one (w0, gamma) point using every nonzero sample of the refined curve."""
    grid = alpha_grid() if alphas is None else np.asarray(alphas, dtype=float)
    x, amp = refine_grid(template.amplitude_fn(w0, gamma), grid)
    curve = PhaseCurve.from_amplitudes(x, amp, threshold=0.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NonQuantizedWarning)
        top = curve.topology
    return CellResult(top.m, top.delta_chi, top.quantization_residual, curve.min_contrast)


def index_at(template: SetupTemplate, w0: float, gamma: float | None = None, alphas=None) -> int:
    return evaluate_cell(template, w0, gamma, alphas).m


def locate_transition(
    template: SetupTemplate,
    bracket: tuple[float, float] = (0.3, 1.5),
    tol: float = DEFAULT_TOL_MM,
    alphas=None,
    gamma: float | None = None,
) -> TransitionBracket:
    """Bisect the waist over the jump of the topological index.

    The returned ``min_contrast`` is the minimum over alpha of |A| at w0*.
    """
    lo, hi = bracket
    if not 0 < lo < hi:
        raise DomainError(f"bad bracket {bracket}")
    lo, hi, m_lo, m_hi, count = bisect_index(lambda w: index_at(template, w, gamma, alphas), lo, hi, tol)
    w_star = 0.5 * (lo + hi)
    at, cmin = minimum_contrast(template.amplitude_fn(w_star, gamma), 0.0, np.pi / 2)
    return TransitionBracket(w_star, lo, hi, m_lo, m_hi, cmin, at, count)


@dataclass(frozen=True)
class ScanSpec:
    w0_values: tuple
    alpha_grid: tuple = tuple(alpha_grid())
    gamma_values: tuple | None = None
    stage_imperfections: tuple = ()

    def __post_init__(self):
        for name in ("w0_values", "alpha_grid"):
            vals = np.asarray(getattr(self, name), dtype=float)
            if vals.size == 0:
                raise DomainError(f"{name} is empty")
            if np.any(np.diff(vals) < 0):
                raise DomainError(f"{name} must be sorted")
        if self.gamma_values is not None:
            g = np.asarray(self.gamma_values, dtype=float)
            if g.size == 0 or np.any(np.diff(g) < 0):
                raise DomainError("gamma_values must be non-empty and sorted")


@dataclass(frozen=True)
class PhaseDiagram:
    """Index m on a (gamma, w0) grid; rows are gamma values, columns waists."""

    w0_values: np.ndarray
    gamma_values: np.ndarray
    m: np.ndarray
    min_contrast: np.ndarray
    residual: np.ndarray

    @property
    def resolved(self) -> np.ndarray:
        return self.residual < QUANTIZATION_TOLERANCE

    def trivial_count(self) -> int:
        return int(np.sum(self.m == 0))

    def rows(self):
        for i, g in enumerate(self.gamma_values):
            for j, w in enumerate(self.w0_values):
                yield w, g, int(self.m[i, j]), float(self.min_contrast[i, j]), bool(self.resolved[i, j])


def default_gamma_values(points: int = DIAGRAM_SIZE) -> np.ndarray:
    return np.linspace(-np.pi, np.pi, points)


def phase_diagram(spec: ScanSpec, template: SetupTemplate, threads: int = 1) -> PhaseDiagram:
    """Topological index for every (w0, gamma) cell; cells are independent tasks."""
    if spec.gamma_values is None:
        raise DomainError("phase_diagram needs gamma_values")
    if spec.stage_imperfections:
        template = template.with_imperfections(spec.stage_imperfections)
    w0s = np.asarray(spec.w0_values, dtype=float)
    gammas = np.asarray(spec.gamma_values, dtype=float)
    grid = np.asarray(spec.alpha_grid, dtype=float)
    tasks = [(g, w) for g in gammas for w in w0s]

    def run(task):
        g, w = task
        return evaluate_cell(template, w, g, grid)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            cells = list(pool.map(run, tasks))
    else:
        cells = [run(t) for t in tasks]
    shape = (gammas.size, w0s.size)
    return PhaseDiagram(
        w0s,
        gammas,
        np.array([c.m for c in cells], dtype=int).reshape(shape),
        np.array([c.min_contrast for c in cells]).reshape(shape),
        np.array([c.residual for c in cells]).reshape(shape),
    )


@dataclass(frozen=True)
class W0ScanRow:
    w0: float
    delta_chi: float
    m: int
    min_contrast: float


def scan_w0(template: SetupTemplate, w0_values: Sequence[float], alphas=None) -> list[W0ScanRow]:
    rows = []
    for w in w0_values:
        cell = evaluate_cell(template, w, None, alphas)
        rows.append(W0ScanRow(float(w), cell.delta_chi, cell.m, cell.min_contrast))
    return rows


def imperfection_trend(
    template: SetupTemplate,
    betas: Sequence[float],
    nu: float = 0.0,
    bracket: tuple[float, float] = (0.3, 1.5),
    tol: float = DEFAULT_TOL_MM,
) -> list[tuple[float, TransitionBracket]]:
    """w0* for identical crystals deflecting by each ``beta`` (radians) along ``nu``."""
    out = []
    for beta in betas:
        t = template.with_imperfections([(nu, beta)] * template.n_stages)
        out.append((float(beta), locate_transition(t, bracket, tol)))
    return out
