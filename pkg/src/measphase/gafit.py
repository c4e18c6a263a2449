"""Genetic-algorithm search for per-crystal deflection parameters (nu_j, beta_j)."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from scipy.optimize import minimize

from .errors import DomainError
from .optics import ARCSEC, analyzed_field, gaussian_input, overlap
from .phase import CONTRAST_THRESHOLD, geometric_phase, wrap_phase
from .scan import SetupTemplate

BETA_MAX = 60 * ARCSEC
INVALID_PENALTY = 10.0


@dataclass(frozen=True)
class ExperimentRecord:
    w0: float
    alpha: float
    chi: float
    contrast: float
    weight: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.contrast <= 1.0:
            raise DomainError(f"contrast={self.contrast} outside [0, 1]")
        if self.weight < 0:
            raise DomainError(f"weight={self.weight} is negative")


@dataclass(frozen=True)
class GAConfig:
    seed: int
    population: int = 64
    generations: int = 200
    tournament: int = 2
    crossover_rate: float = 0.7
    sigma_nu: float = 1.0
    sigma_beta: float = 5 * ARCSEC
    elitism: int = 2
    beta_max: float = BETA_MAX
    mutation_decay: float = 0.001
    gene_mutation_rate: float = 0.5
    immigrants: int = 8
    polish_every: int = 25
    polish_count: int = 4
    polish_evals: int = 150

    def __post_init__(self):
        if self.seed is None:
            raise DomainError("a seed is mandatory")
        if self.population < 2 or self.tournament < 1 or self.generations < 0:
            raise DomainError("population >= 2, tournament >= 1 and generations >= 0 required")
        if not 0 <= self.elitism < self.population:
            raise DomainError("elitism must be smaller than the population")
        if not 0 <= self.immigrants <= self.population - self.elitism:
            raise DomainError("immigrants must fit beside the elite")
        if self.polish_every < 0 or not 0 <= self.polish_count <= self.population or self.polish_evals < 1:
            raise DomainError("polish_every >= 0, 0 <= polish_count <= population and polish_evals >= 1 required")
        if not 0.0 <= self.crossover_rate <= 1.0:
            raise DomainError("crossover_rate outside [0, 1]")
        if self.sigma_nu <= 0 or self.sigma_beta <= 0 or self.beta_max <= 0:
            raise DomainError("mutation widths and beta_max must be positive")
        if not 0.0 < self.mutation_decay <= 1.0 or not 0.0 < self.gene_mutation_rate <= 1.0:
            raise DomainError("mutation_decay and gene_mutation_rate must lie in (0, 1]")

    def mutation_scale(self, generation: int) -> float:
        """Geometric annealing from 1 at the start to ``mutation_decay`` at the last generation."""
        if self.generations <= 1:
            return 1.0
        return self.mutation_decay ** ((generation - 1) / (self.generations - 1))


def genome_pairs(genome) -> list[tuple[float, float]]:
    """(nu_1, beta_1, nu_2, beta_2, ...) -> [(nu_1, beta_1), ...]."""
    g = np.asarray(genome, dtype=float)
    if g.ndim != 1 or g.size % 2:
        raise DomainError("genome must be a flat vector of (nu, beta) pairs")
    return [(float(g[i]), float(g[i + 1])) for i in range(0, g.size, 2)]


def in_bounds(genome, beta_max: float = BETA_MAX) -> bool:
    g = np.asarray(genome, dtype=float)
    nu, beta = g[0::2], g[1::2]
    return bool(np.all((nu >= 0) & (nu < 2 * np.pi) & (beta >= 0) & (beta <= beta_max)))


def simulate(genome, template: SetupTemplate, w0, alpha) -> tuple[np.ndarray, np.ndarray]:
    """Simulated (chi, contrast) at paired (w0, alpha) samples for one genome."""
    w0 = np.asarray(w0, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    t = template.with_imperfections(genome_pairs(genome))
    alphas, a_idx = np.unique(alpha, return_inverse=True)
    amp = np.empty(w0.shape, dtype=complex)
    beam = None
    for w in np.unique(w0):
        cfg = t.config(w)
        if beam is None:
            # propagation does not depend on the waist, only the overlap does
            beam = analyzed_field(t.stages(alphas), cfg)
        values = np.broadcast_to(overlap(gaussian_input(cfg), beam.with_config(cfg)), alphas.shape)
        sel = w0 == w
        amp[sel] = values[a_idx[sel]]
    return geometric_phase(amp), np.abs(amp)


def records_from_genome(genome, template: SetupTemplate, w0_values, alpha_values) -> list[ExperimentRecord]:
    """Synthetic data on the product grid, generated by forward simulation."""
    w, a = np.meshgrid(np.asarray(w0_values, float), np.asarray(alpha_values, float), indexing="ij")
    chi, con = simulate(genome, template, w.ravel(), a.ravel())
    return [
        ExperimentRecord(float(wi), float(ai), float(c), float(min(k, 1.0)))
        for wi, ai, c, k in zip(w.ravel(), a.ravel(), chi, con)
    ]


def _columns(data: Sequence[ExperimentRecord]):
    return (
        np.array([r.w0 for r in data]),
        np.array([r.alpha for r in data]),
        np.array([r.chi for r in data]),
        np.array([r.contrast for r in data]),
        np.array([r.weight for r in data]),
    )


def loss(
    genome,
    data: Sequence[ExperimentRecord],
    template: SetupTemplate,
    contrast_weight: float = 1.0,
    threshold: float = CONTRAST_THRESHOLD,
) -> float:
    """Weighted circular phase error plus contrast error.

    Each record contributes weight * [d(chi)^2 + lambda (dC)^2] with d the
    circular distance.  A simulated contrast below ``threshold`` where the
    measurement has a defined phase costs INVALID_PENALTY instead of d^2;
    measured points without a defined phase only enter through dC.
    """
    if not data:
        raise DomainError("no data")
    w0, alpha, chi_m, con_m, weight = _columns(data)
    try:
        chi_s, con_s = simulate(genome, template, w0, alpha)
    except (ArithmeticError, MemoryError, ValueError):
        return float("inf")
    meas_ok = con_m > threshold
    sim_ok = con_s > threshold
    phase = np.where(sim_ok, wrap_phase(chi_s - chi_m) ** 2, INVALID_PENALTY)
    phase = np.where(meas_ok, phase, 0.0)
    total = np.sum(weight * (phase + contrast_weight * (con_s - con_m) ** 2))
    return float(total) if np.isfinite(total) else float("inf")


@dataclass
class GAResult:
    best: np.ndarray
    best_loss: float
    history: list[float] = field(default_factory=list)
    evaluations: int = 0

    @property
    def pairs(self) -> list[tuple[float, float]]:
        return genome_pairs(self.best)


def _random_genomes(rng: np.random.Generator, count: int, n_genes: int, beta_max: float) -> np.ndarray:
    pop = np.empty((count, n_genes))
    pop[:, 0::2] = rng.uniform(0, 2 * np.pi, (count, n_genes // 2))
    pop[:, 1::2] = rng.uniform(0, beta_max, (count, n_genes // 2))
    return pop


def _reflect(x, hi):
    """Fold values back into [0, hi] by mirror reflection at both bounds."""
    period = 2 * hi
    y = np.mod(x, period)
    return np.where(y > hi, period - y, y)


def _offspring(
    parent_pool: np.ndarray,
    losses: np.ndarray,
    cfg: GAConfig,
    rng: np.random.Generator,
    scale: float = 1.0,
) -> np.ndarray:
    def pick():
        idx = rng.integers(0, len(parent_pool), cfg.tournament)
        return parent_pool[idx[np.argmin(losses[idx])]]

    a, b = pick(), pick()
    child = a.copy()
    if rng.random() < cfg.crossover_rate:
        mask = rng.random(a.size) < 0.5
        child[mask] = b[mask]
    sigma = np.empty(a.size)
    sigma[0::2], sigma[1::2] = cfg.sigma_nu * scale, cfg.sigma_beta * scale
    hit = rng.random(a.size) < cfg.gene_mutation_rate
    child = child + np.where(hit, rng.normal(0.0, sigma), 0.0)
    child[0::2] = np.mod(child[0::2], 2 * np.pi)
    child[1::2] = _reflect(child[1::2], cfg.beta_max)
    return child


def _fold(genome, beta_max: float) -> np.ndarray:
    g = np.array(genome, dtype=float)
    g[0::2] = np.mod(g[0::2], 2 * np.pi)
    g[1::2] = _reflect(g[1::2], beta_max)
    return g


def _polish(genome, objective, cfg: GAConfig) -> tuple[np.ndarray, float, int]:
    """Nelder-Mead from ``genome`` in coordinates where beta is in arcsec.

    Steps leaving the box are folded back (nu wraps, beta reflects), so the
    result is always a valid genome.
    """
    scale = np.ones(len(genome))
    scale[1::2] = ARCSEC

    def f(x):
        return objective(_fold(x * scale, cfg.beta_max))

    res = minimize(
        f,
        np.asarray(genome) / scale,
        method="Nelder-Mead",
        options={"maxfev": cfg.polish_evals, "xatol": 1e-10, "fatol": 1e-16},
    )
    best = _fold(res.x * scale, cfg.beta_max)
    return best, objective(best), int(res.nfev) + 1


def evolve(
    cfg: GAConfig,
    data: Sequence[ExperimentRecord],
    template: SetupTemplate,
    workers: int = 1,
    contrast_weight: float = 1.0,
) -> GAResult:
    """Tournament selection, uniform crossover, Gaussian mutation and elitism.

    Every child draws from its own generator seeded by (seed, generation,
    index), so results do not depend on ``workers``.  Each generation also
    admits ``immigrants`` fresh random genomes.  Every ``polish_every``
    generations the best ``polish_count`` genomes get a short Nelder-Mead
    refinement, replacing the original only when it improves.
    """
    n_genes = 2 * template.n_stages

    def one(g):
        return loss(g, data, template, contrast_weight)

    def score(pop):
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as ex:
                return np.array(list(ex.map(one, pop)))
        return np.array([one(g) for g in pop])

    pop = _random_genomes(np.random.default_rng([cfg.seed, 0]), cfg.population, n_genes, cfg.beta_max)
    losses = score(pop)
    evaluations = len(pop)
    order = np.argsort(losses, kind="stable")
    pop, losses = pop[order], losses[order]
    history = [float(losses[0])]
    for gen in range(1, cfg.generations + 1):
        n_children = cfg.population - cfg.elitism - cfg.immigrants
        children = [
            _offspring(pop, losses, cfg, np.random.default_rng([cfg.seed, gen, i]), cfg.mutation_scale(gen))
            for i in range(n_children)
        ]
        if cfg.immigrants:
            fresh = np.random.default_rng([cfg.seed, gen, cfg.population])
            children.extend(_random_genomes(fresh, cfg.immigrants, n_genes, cfg.beta_max))
        children = np.array(children)
        child_losses = score(children)
        evaluations += len(children)
        pop = np.concatenate([pop[: cfg.elitism], children])
        losses = np.concatenate([losses[: cfg.elitism], child_losses])
        order = np.argsort(losses, kind="stable")
        pop, losses = pop[order], losses[order]
        if cfg.polish_every and cfg.polish_count and gen % cfg.polish_every == 0:
            for k in range(cfg.polish_count):
                g, val, n = _polish(pop[k], one, cfg)
                evaluations += n
                if val < losses[k]:
                    pop[k], losses[k] = g, val
            order = np.argsort(losses, kind="stable")
            pop, losses = pop[order], losses[order]
        history.append(float(losses[0]))
    return GAResult(pop[0].copy(), float(losses[0]), history, evaluations)
