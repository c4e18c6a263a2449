from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from measphase.errors import DomainError
from measphase.gafit import (
    BETA_MAX,
    ExperimentRecord,
    GAConfig,
    _offspring,
    _random_genomes,
    _reflect,
    evolve,
    genome_pairs,
    in_bounds,
    loss,
    records_from_genome,
    simulate,
)
from measphase.optics import ARCSEC
from measphase.scan import SetupTemplate

TEMPLATE = SetupTemplate()
TRUE = np.array([0.4, 25 * ARCSEC, 2.0, 12 * ARCSEC, 4.5, 28 * ARCSEC])


@pytest.fixture(scope="module")
def data():
    return records_from_genome(TRUE, TEMPLATE, [0.5, 1.0, 2.0], np.linspace(0, np.pi / 2, 6))


def test_record_validation():
    with pytest.raises(DomainError):
        ExperimentRecord(1.0, 0.1, 0.0, 1.5)
    with pytest.raises(DomainError):
        ExperimentRecord(1.0, 0.1, 0.0, 0.5, weight=-1)


def test_config_validation():
    with pytest.raises(DomainError):
        GAConfig(seed=None)
    with pytest.raises(DomainError):
        GAConfig(seed=0, population=1)
    with pytest.raises(DomainError):
        GAConfig(seed=0, elitism=64)
    with pytest.raises(DomainError):
        GAConfig(seed=0, crossover_rate=1.5)
    with pytest.raises(DomainError):
        GAConfig(seed=0, immigrants=63)
    with pytest.raises(DomainError):
        GAConfig(seed=0, mutation_decay=0.0)
    cfg = GAConfig(seed=0, generations=11, mutation_decay=0.01)
    assert cfg.mutation_scale(1) == 1.0
    assert cfg.mutation_scale(11) == pytest.approx(0.01)


def test_genome_helpers():
    assert genome_pairs([1, 2, 3, 4]) == [(1.0, 2.0), (3.0, 4.0)]
    with pytest.raises(DomainError):
        genome_pairs([1, 2, 3])
    assert in_bounds(TRUE)
    assert not in_bounds([7.0, 0.0])
    assert not in_bounds([0.0, 2 * BETA_MAX])


def test_self_consistent_loss(data):
    assert loss(TRUE, data, TEMPLATE) < 1e-12


def test_pi_offset_loss_is_n_pi_squared(data):
    shifted = [replace(r, chi=float(np.angle(-np.exp(1j * r.chi)))) for r in data if r.contrast > 1e-4]
    assert loss(TRUE, shifted, TEMPLATE, contrast_weight=0.0) == pytest.approx(len(shifted) * np.pi**2)


def test_ideal_genome_does_not_fit_imperfect_data():
    synthetic = records_from_genome(np.array([0.0, 30 * ARCSEC] * 3), TEMPLATE, [0.7, 1.0], np.linspace(0, np.pi / 2, 5))
    assert loss(np.zeros(6), synthetic, TEMPLATE) > 0


def test_loss_rejects_empty_data():
    with pytest.raises(DomainError):
        loss(TRUE, [], TEMPLATE)


def test_invalid_measurements_only_enter_through_contrast():
    rec = [ExperimentRecord(1.0, 0.3, 2.0, 0.0)]
    chi, con = simulate(TRUE, TEMPLATE, [1.0], [0.3])
    assert loss(TRUE, rec, TEMPLATE) == pytest.approx(con[0] ** 2)


def test_simulate_pairs_samples(data):
    w = np.array([r.w0 for r in data])
    a = np.array([r.alpha for r in data])
    chi, con = simulate(TRUE, TEMPLATE, w, a)
    assert np.allclose(chi, [r.chi for r in data])
    assert np.allclose(np.minimum(con, 1.0), [r.contrast for r in data])


@given(st.floats(-1.0, 1.0))
def test_reflect_stays_in_box(x):
    y = _reflect(np.array([x]), 0.3)[0]
    assert 0.0 <= y <= 0.3


@settings(max_examples=30)
@given(st.integers(0, 10_000), st.floats(0.001, 1.0))
def test_offspring_respect_bounds(seed, scale):
    cfg = GAConfig(seed=seed, sigma_nu=5.0, sigma_beta=BETA_MAX)
    rng = np.random.default_rng(seed)
    pool = _random_genomes(rng, 8, 6, cfg.beta_max)
    child = _offspring(pool, rng.random(8), cfg, rng, scale)
    assert in_bounds(child, cfg.beta_max)


def test_zero_generations_returns_initial_best(data):
    cfg = GAConfig(seed=5, population=8, generations=0, immigrants=0)
    res = evolve(cfg, data, TEMPLATE)
    pop = _random_genomes(np.random.default_rng([5, 0]), 8, 6, cfg.beta_max)
    losses = [loss(g, data, TEMPLATE) for g in pop]
    assert res.best_loss == pytest.approx(min(losses))
    assert np.allclose(res.best, pop[int(np.argmin(losses))])
    assert res.history == [res.best_loss]


def test_evolve_is_deterministic_and_monotone(data):
    cfg = GAConfig(seed=3, population=10, generations=6, immigrants=2, polish_every=0)
    a = evolve(cfg, data, TEMPLATE)
    b = evolve(cfg, data, TEMPLATE, workers=3)
    assert a.history == b.history
    assert np.array_equal(a.best, b.best)
    assert all(x >= y for x, y in zip(a.history, a.history[1:]))
    assert a.evaluations == 10 + 6 * 8
    assert in_bounds(a.best)
    assert len(a.pairs) == 3
    c = evolve(replace(cfg, seed=4), data, TEMPLATE)
    assert c.history != a.history


def test_polish_only_improves_and_is_deterministic(data):
    base = GAConfig(seed=2, population=10, generations=4, immigrants=2, polish_every=0)
    polished = replace(base, polish_every=2, polish_count=2, polish_evals=40)
    a = evolve(polished, data, TEMPLATE)
    b = evolve(polished, data, TEMPLATE)
    assert a.history == b.history
    assert all(x >= y for x, y in zip(a.history, a.history[1:]))
    assert in_bounds(a.best)
    assert a.evaluations > 10 + 4 * 8
    plain = evolve(base, data, TEMPLATE)
    # identical until the first polish step
    assert a.history[:2] == plain.history[:2]
    assert a.history[2] <= plain.history[2]


def test_bundled_fit_shifts_transition_outward():
    import json
    from importlib import resources

    from measphase.scan import locate_transition

    stages = json.loads(resources.files("measphase").joinpath("data/fitted_genome.json").read_text())["stages"]
    fitted = TEMPLATE.with_imperfections([(s["nu_rad"], s["beta_rad"]) for s in stages])
    assert locate_transition(fitted).value > locate_transition(TEMPLATE).value + 0.01
