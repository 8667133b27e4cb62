"""Shared test helpers: synthetic scenarios and independent oracles.

The grid oracle evaluates margins with direct numpy expressions so it
shares no code path with the scalar solvers it checks.
"""

import dataclasses

import numpy as np

from elid_urllc.channel_model import Scenario, SystemConfig, VehicleLink, sample_scenario
from elid_urllc.fbl_core import LN2


def make_scenario(gains, **config_kwargs) -> Scenario:
    """Scenario with hand-picked normalized gains (fading absorbs them)."""
    cfg = SystemConfig(**config_kwargs)
    links = []
    for i, gain in enumerate(gains):
        loss_db = 35.3
        links.append(
            VehicleLink(
                vehicle_id=i,
                distance=1.0,
                path_loss_db=loss_db,
                fading_power_gain=float(gain) * 10.0 ** (loss_db / 10.0),
                noise_power=1.0,
                norm_gain=float(gain),
            )
        )
    return Scenario(config=cfg, links=tuple(links), seed=0)


def grid_oracle_minmax_two_vehicles(scenario, m_vec, rounds=4, pts=65):
    """Zoomed 2-D grid search over the power box for the max-min margin."""
    cfg = scenario.config
    d = cfg.payload_bits
    budget = cfg.energy_budget
    h = np.array([link.norm_gain for link in scenario.links])
    m = np.array(m_vec, dtype=float)
    lo = np.zeros(2)
    hi = np.array([budget / m[0], budget / m[1]])
    best = -np.inf
    for _ in range(rounds):
        p1 = np.linspace(lo[0], hi[0], pts)
        p2 = np.linspace(lo[1], hi[1], pts)
        grid1, grid2 = np.meshgrid(p1, p2, indexing="ij")
        feasible = grid1 * m[0] + grid2 * m[1] <= budget * (1.0 + 1e-12)
        g1 = np.sqrt(m[0]) * (np.log1p(grid1 * h[0]) - LN2 * d / m[0])
        g2 = np.sqrt(m[1]) * (np.log1p(grid2 * h[1]) - LN2 * d / m[1])
        objective = np.where(feasible, np.minimum(g1, g2), -np.inf)
        k1, k2 = np.unravel_index(int(np.argmax(objective)), objective.shape)
        best = max(best, float(objective[k1, k2]))
        step1 = (hi[0] - lo[0]) / (pts - 1)
        step2 = (hi[1] - lo[1]) / (pts - 1)
        lo = np.array([max(0.0, p1[k1] - 2 * step1), max(0.0, p2[k2] - 2 * step2)])
        hi = np.array(
            [
                min(budget / m[0], p1[k1] + 2 * step1),
                min(budget / m[1], p2[k2] + 2 * step2),
            ]
        )
    return best


def random_feasible_minmax_instance(rng, n=None, headroom_decades=(0.1, 2.5)):
    """Scenario plus blocklength split with a budget that always funds
    the zero-margin power vector (uniformly random headroom above it)."""
    cfg = SystemConfig()
    if n is None:
        n = int(rng.integers(1, 9))
    seed = int(rng.integers(0, 2**63))
    scenario = sample_scenario(cfg, n, seed=seed)
    splits = rng.multinomial(cfg.symbol_budget - n, np.full(n, 1.0 / n))
    m_vec = [int(s) + 1 for s in splits]
    floor_energy = sum(
        m * (2.0 ** (cfg.payload_bits / m) - 1.0) / link.norm_gain
        for m, link in zip(m_vec, scenario.links)
    )
    budget = floor_energy * 10.0 ** float(rng.uniform(*headroom_decades))
    cfg = dataclasses.replace(cfg, energy_budget=float(budget))
    return sample_scenario(cfg, n, seed=seed), m_vec


def feasible_joint_instance(rng, n=2, m_total=40, payload_bits=32):
    """Instance whose per-vehicle blocklength floors are guaranteed to
    exist (budget scaled from the worst link's feasibility bound)."""
    seed = int(rng.integers(0, 2**63))
    base = SystemConfig(symbol_budget=m_total, payload_bits=payload_bits)
    probe = sample_scenario(base, n, seed=seed)
    h_min = min(link.norm_gain for link in probe.links)
    required = m_total * (2.0 ** (payload_bits / m_total) - 1.0)
    budget = required / h_min * 10.0 ** float(rng.uniform(0.3, 2.0))
    cfg = dataclasses.replace(base, energy_budget=float(budget))
    return sample_scenario(cfg, n, seed=seed)


def compositions(total, n):
    """All length-n tuples of positive integers summing to total."""
    if n == 1:
        yield (total,)
        return
    for first in range(1, total - n + 2):
        for rest in compositions(total - first, n - 1):
            yield (first,) + rest
