"""Power and blocklength allocation for the shared downlink.

Two families of solvers over n vehicles, a symbol budget M, and an
energy budget E:

Min-max reliability: maximize the worst per-vehicle margin g (that is,
minimize the worst decoder error probability). Restricted variants fix
either the blocklengths (power found by bisection on the common margin)
or a common power (symbols granted greedily); the joint solver wraps
the power bisection in an integer symbol-exchange local search.

Energy minimization: meet a fixed reliability target on every link at
the least total energy sum(p_i * m_i). Power is closed-form per vehicle
at a fixed blocklength split; the split itself is improved by moving
alpha symbols at a time from the cheapest vehicle to the most expensive
one while that strictly helps.

Brute-force enumerations over small instances back both families as
verification oracles. Everything runs in margin space; probabilities
appear only inside reports.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel_model import Scenario
from .exceptions import InfeasibleError
from .fbl_core import (
    LN2,
    ReliabilityMargin,
    min_blocklength,
    min_power_for_target,
    q_inverse,
    reliability_margin,
    upper_blocklength,
)

# A move or bisection step must beat the incumbent by this relative
# margin to count as progress; guarantees termination on finite floats.
_REL_IMPROVEMENT = 1e-12
# Absolute version for margin comparisons (g is O(10), often near 0).
_ABS_IMPROVEMENT = 1e-12


@dataclass(frozen=True)
class Allocation:
    """Per-vehicle transmit powers (W) and integer blocklengths."""

    powers: tuple[float, ...]
    blocklengths: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.powers) != len(self.blocklengths):
            raise ValueError(
                f"length mismatch: {len(self.powers)} powers vs "
                f"{len(self.blocklengths)} blocklengths"
            )
        if len(self.powers) == 0:
            raise ValueError("allocation must cover at least one vehicle")
        for p in self.powers:
            if not (math.isfinite(p) and p >= 0.0):
                raise ValueError(f"powers must be finite and >= 0, got {p!r}")
        for m in self.blocklengths:
            if not isinstance(m, int) or m < 1:
                raise ValueError(f"blocklengths must be integers >= 1, got {m!r}")

    @property
    def n_vehicles(self) -> int:
        return len(self.powers)


@dataclass(frozen=True)
class SolveReport:
    """Solver output: the allocation plus everything needed to audit it."""

    allocation: Allocation
    margins: tuple[ReliabilityMargin, ...]
    worst_margin: ReliabilityMargin
    total_energy: float
    iterations: int
    trace: tuple[tuple[int, float], ...]
    converged: bool
    solver_name: str
    clamped: tuple[int, ...] = ()


def _resolve_g_target(scenario: Scenario, g_target: float | None) -> float:
    if g_target is None:
        return q_inverse(scenario.config.target_eps)
    if not math.isfinite(g_target):
        raise ValueError(f"g_target must be finite, got {g_target!r}")
    return float(g_target)


def _equal_split(total: int, n: int) -> list[int]:
    # floor(total/n) each, remainder to the lowest vehicle ids
    base, remainder = divmod(total, n)
    return [base + 1 if i < remainder else base for i in range(n)]


def _build_report(
    scenario: Scenario,
    powers,
    blocklengths,
    *,
    solver_name: str,
    iterations: int,
    trace,
    converged: bool,
    clamped: tuple[int, ...] = (),
    enforce_energy_budget: bool,
) -> SolveReport:
    cfg = scenario.config
    allocation = Allocation(
        powers=tuple(float(p) for p in powers),
        blocklengths=tuple(int(m) for m in blocklengths),
    )
    margins = tuple(
        reliability_margin(p * link.norm_gain, m, cfg.payload_bits)
        for link, p, m in zip(scenario.links, allocation.powers, allocation.blocklengths)
    )
    worst = min(margins, key=lambda margin: margin.g)
    total_energy = math.fsum(
        p * m for p, m in zip(allocation.powers, allocation.blocklengths)
    )
    assert sum(allocation.blocklengths) <= cfg.symbol_budget
    if enforce_energy_budget:
        assert total_energy <= cfg.energy_budget * (1.0 + 1e-9)
    return SolveReport(
        allocation=allocation,
        margins=margins,
        worst_margin=worst,
        total_energy=total_energy,
        iterations=iterations,
        trace=tuple((int(i), float(v)) for i, v in trace),
        converged=converged,
        solver_name=solver_name,
        clamped=clamped,
    )


# ---------------------------------------------------------------------------
# energy minimization at a fixed reliability target


def min_energy_fixed_m(
    scenario: Scenario, blocklengths, g_target: float | None = None
) -> tuple[tuple[float, ...], float]:
    """Cheapest powers meeting margin g_target at fixed blocklengths.

    Per vehicle the binding constraint is solved in closed form, so the
    result is exact (clamped at zero where the target is already met).
    Returns (powers, total_energy).
    """
    gt = _resolve_g_target(scenario, g_target)
    m_vec = [int(m) for m in blocklengths]
    if len(m_vec) != scenario.n_vehicles:
        raise ValueError(
            f"expected {scenario.n_vehicles} blocklengths, got {len(m_vec)}"
        )
    d = scenario.config.payload_bits
    powers = tuple(
        min_power_for_target(link.norm_gain, m, d, gt)
        for link, m in zip(scenario.links, m_vec)
    )
    total = math.fsum(p * m for p, m in zip(powers, m_vec))
    return powers, total


def _blocklength_floors(scenario: Scenario) -> list[int]:
    """Exchange floors: the energy-feasibility blocklength bound where it
    exists, else the trivial floor of one symbol.

    The energy objective itself carries no budget, so a link that cannot
    meet the configured energy budget at any blocklength still gets the
    lenient floor instead of an infeasibility error.
    """
    cfg = scenario.config
    floors = []
    for link in scenario.links:
        bound = min_blocklength(
            link.norm_gain * cfg.energy_budget, cfg.payload_bits, cfg.symbol_budget
        )
        floors.append(bound if bound is not None else 1)
    return floors


def symbol_sharing(scenario: Scenario, g_target: float | None = None) -> SolveReport:
    """Minimize total energy by trading symbols between vehicles.

    Starts from the equal split and repeatedly moves alpha symbols from
    the cheapest vehicle (minimum power) to the most expensive one
    (maximum power), keeping a move only while total energy strictly
    decreases; the last unhelpful move is rolled back. Ties break toward
    the lowest vehicle_id, moves below a vehicle's blocklength floor end
    the search.
    """
    cfg = scenario.config
    n = scenario.n_vehicles
    if cfg.symbol_budget < n:
        raise InfeasibleError(
            f"symbol budget {cfg.symbol_budget} cannot cover {n} vehicles "
            f"at one symbol each"
        )
    gt = _resolve_g_target(scenario, g_target)
    alpha = cfg.alpha
    floors = _blocklength_floors(scenario)
    m_vec = _equal_split(cfg.symbol_budget, n)

    best_powers: tuple[float, ...] | None = None
    best_m: tuple[int, ...] | None = None
    best_energy = math.inf
    trace: list[tuple[int, float]] = []
    iterations = 0
    iteration_cap = max(1, (cfg.symbol_budget * n) // alpha)
    converged = False
    while iterations < iteration_cap:
        iterations += 1
        powers, energy = min_energy_fixed_m(scenario, m_vec, gt)
        improved = best_m is None or energy < best_energy * (1.0 - _REL_IMPROVEMENT)
        if not improved:
            # best_* still holds the pre-move state, so stopping here is
            # the rollback of the move just tried
            converged = True
            break
        best_powers, best_m, best_energy = powers, tuple(m_vec), energy
        trace.append((iterations, energy))
        recipient = int(np.argmax(powers))  # most expensive link
        donor = int(np.argmin(powers))  # cheapest link
        if recipient == donor:
            converged = True
            break
        if m_vec[donor] - alpha < max(1, floors[donor]):
            converged = True
            break
        m_vec[recipient] += alpha
        m_vec[donor] -= alpha

    assert best_powers is not None and best_m is not None
    if not math.isfinite(best_energy):
        raise InfeasibleError(
            "no finite-energy allocation exists within the symbol budget "
            "for this reliability target"
        )
    return _build_report(
        scenario,
        best_powers,
        best_m,
        solver_name="symbol_sharing",
        iterations=iterations,
        trace=trace,
        converged=converged,
        enforce_energy_budget=False,
    )


def equal_allocation_energy(
    scenario: Scenario, g_target: float | None = None
) -> tuple[Allocation, float]:
    """Baseline: equal symbol split, closed-form powers, no exchange."""
    cfg = scenario.config
    n = scenario.n_vehicles
    if cfg.symbol_budget < n:
        raise InfeasibleError(
            f"symbol budget {cfg.symbol_budget} cannot cover {n} vehicles "
            f"at one symbol each"
        )
    m_vec = _equal_split(cfg.symbol_budget, n)
    powers, total = min_energy_fixed_m(scenario, m_vec, g_target)
    allocation = Allocation(powers=powers, blocklengths=tuple(m_vec))
    return allocation, total


def brute_force_energy(
    scenario: Scenario, g_target: float | None = None
) -> SolveReport:
    """Exhaustive minimum of total energy over integer blocklength splits.

    Verification oracle for symbol_sharing: searches every m vector with
    sum(m) <= symbol_budget and m_i at or above the same floors the
    exchange respects. Guarded to n <= 3 and M <= 1000.
    """
    cfg = scenario.config
    n = scenario.n_vehicles
    m_total = cfg.symbol_budget
    if n > 3:
        raise ValueError(f"brute_force_energy is limited to n <= 3, got n={n}")
    if m_total > 1000:
        raise ValueError(
            f"brute_force_energy is limited to symbol budgets <= 1000, "
            f"got {m_total}"
        )
    if m_total < n:
        raise InfeasibleError(
            f"symbol budget {m_total} cannot cover {n} vehicles at one "
            f"symbol each"
        )
    gt = _resolve_g_target(scenario, g_target)
    d = cfg.payload_bits
    floors = [max(1, f) for f in _blocklength_floors(scenario)]

    ms = np.arange(1, m_total + 1, dtype=float)
    exponent = LN2 * d / ms + gt / np.sqrt(ms)
    with np.errstate(over="ignore"):
        required = np.where(exponent > 709.0, np.inf, ms * np.expm1(exponent))
    # energy_tables[i][k] = energy for vehicle i at blocklength k+1
    energy_tables = [required / link.norm_gain for link in scenario.links]
    for i, floor in enumerate(floors):
        energy_tables[i][: floor - 1] = np.inf

    candidates = 0
    best_energy = np.inf
    best_m: tuple[int, ...] | None = None

    if n == 1:
        table = energy_tables[0]
        candidates = m_total
        idx = int(np.argmin(table))
        best_energy = float(table[idx])
        best_m = (idx + 1,)
    elif n == 2:
        e1, e2 = energy_tables
        # prefix_min2[k] = min energy of vehicle 1 over blocklengths 1..k+1
        prefix_min2 = np.minimum.accumulate(e2)
        for m1 in range(floors[0], m_total):
            cap2 = m_total - m1
            if cap2 < floors[1]:
                break
            candidates += cap2 - floors[1] + 1
            total = e1[m1 - 1] + prefix_min2[cap2 - 1]
            if total < best_energy:
                segment = e2[floors[1] - 1 : cap2]
                m2 = floors[1] + int(np.argmin(segment))
                best_energy = float(total)
                best_m = (m1, m2)
    else:
        e1, e2, e3 = energy_tables
        prefix_min3 = np.minimum.accumulate(e3)
        for m1 in range(floors[0], m_total - 1):
            cap23 = m_total - m1
            if cap23 < floors[1] + floors[2]:
                break
            m2_values = np.arange(floors[1], cap23 - floors[2] + 1)
            candidates += m2_values.size
            totals = e1[m1 - 1] + e2[m2_values - 1] + prefix_min3[cap23 - m2_values - 1]
            k = int(np.argmin(totals))
            if totals[k] < best_energy:
                m2 = int(m2_values[k])
                segment = e3[floors[2] - 1 : cap23 - m2]
                m3 = floors[2] + int(np.argmin(segment))
                best_energy = float(totals[k])
                best_m = (m1, m2, m3)

    if best_m is None or not math.isfinite(best_energy):
        raise InfeasibleError(
            "no finite-energy allocation exists within the symbol budget "
            "for this reliability target"
        )
    powers = [
        min_power_for_target(link.norm_gain, m, d, gt)
        for link, m in zip(scenario.links, best_m)
    ]
    return _build_report(
        scenario,
        powers,
        best_m,
        solver_name="brute_force_energy",
        iterations=candidates,
        trace=((candidates, best_energy),),
        converged=True,
        enforce_energy_budget=False,
    )


# ---------------------------------------------------------------------------
# min-max reliability under the energy budget


def solve_power_minmax_fixed_m(
    scenario: Scenario, blocklengths, margin_floor: float = 0.0
) -> SolveReport:
    """Equalize reliability margins at fixed blocklengths.

    The worst margin is maximized by spending the whole energy budget on
    a common margin: required energy is nondecreasing in the margin, so
    bisection on the common margin converges to the budget boundary.
    Vehicles whose constraint is slack at zero power (possible only for
    negative margin floors) are clamped and flagged; infeasibility means
    the budget cannot even fund margin_floor (default 0, i.e. eps 0.5).
    """
    cfg = scenario.config
    n = scenario.n_vehicles
    m_vec = [int(m) for m in blocklengths]
    if len(m_vec) != n:
        raise ValueError(f"expected {n} blocklengths, got {len(m_vec)}")
    if any(m < 1 for m in m_vec):
        raise ValueError("blocklengths must all be >= 1")
    if sum(m_vec) > cfg.symbol_budget:
        raise ValueError(
            f"blocklengths sum to {sum(m_vec)}, exceeding the symbol "
            f"budget {cfg.symbol_budget}"
        )
    if not math.isfinite(margin_floor):
        raise ValueError(f"margin_floor must be finite, got {margin_floor!r}")
    d = cfg.payload_bits
    budget = cfg.energy_budget
    gains = [link.norm_gain for link in scenario.links]

    def required(margin: float) -> tuple[list[float], float]:
        powers = [
            min_power_for_target(h, m, d, margin) for h, m in zip(gains, m_vec)
        ]
        return powers, math.fsum(p * m for p, m in zip(powers, m_vec))

    evaluations = 1
    powers_lo, energy_lo = required(margin_floor)
    if energy_lo > budget:
        raise InfeasibleError(
            f"energy budget {budget:.6g} J cannot reach the margin search "
            f"floor {margin_floor:.6g} at these blocklengths "
            f"(needs {energy_lo:.6g} J)"
        )

    # expand upward until the budget no longer covers the margin; the
    # closed-form power overflows to inf well before float limits, so
    # this always terminates
    lo = margin_floor
    step = 1.0
    while True:
        hi = margin_floor + step
        evaluations += 1
        _, energy_hi = required(hi)
        if energy_hi > budget:
            break
        lo = hi
        step *= 2.0

    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            break  # floats exhausted
        evaluations += 1
        _, energy_mid = required(mid)
        if energy_mid > budget:
            hi = mid
        else:
            lo = mid
            if budget - energy_mid <= _REL_IMPROVEMENT * budget:
                break

    powers, _ = required(lo)
    clamped = tuple(i for i, p in enumerate(powers) if p == 0.0)
    return _build_report(
        scenario,
        powers,
        m_vec,
        solver_name="power_minmax_fixed_m",
        iterations=evaluations,
        trace=((evaluations, lo),),
        converged=True,
        clamped=clamped,
        enforce_energy_budget=True,
    )


def solve_symbols_minmax_fixed_p(
    scenario: Scenario, p_common: float | None = None
) -> SolveReport:
    """Maximize the worst margin over integer blocklengths at a common
    transmit power.

    Grants the symbol budget one symbol at a time to the currently worst
    vehicle (ties to the lowest vehicle_id). Margins increase in own
    blocklength and depend on nothing else, so the greedy allocation is
    max-min optimal. p_common defaults to the config's common power
    (energy_budget / symbol_budget unless overridden).
    """
    cfg = scenario.config
    n = scenario.n_vehicles
    m_total = cfg.symbol_budget
    if m_total < n:
        raise InfeasibleError(
            f"symbol budget {m_total} cannot cover {n} vehicles at one "
            f"symbol each"
        )
    if p_common is None:
        p_common = cfg.common_power_value()
    if not (math.isfinite(p_common) and p_common > 0.0):
        raise ValueError(f"p_common must be positive, got {p_common!r}")
    spend = p_common * m_total
    if spend > cfg.energy_budget * (1.0 + 1e-9):
        raise InfeasibleError(
            f"common power {p_common:.6g} W across {m_total} symbols costs "
            f"{spend:.6g} J, exceeding the energy budget "
            f"{cfg.energy_budget:.6g} J"
        )
    d = cfg.payload_bits
    snrs = [p_common * link.norm_gain for link in scenario.links]
    m_vec = [1] * n
    margins_g = [reliability_margin(snr, 1, d).g for snr in snrs]
    trace: list[tuple[int, float]] = [(0, min(margins_g))]
    grants = m_total - n
    for grant in range(1, grants + 1):
        worst = min(range(n), key=lambda i: margins_g[i])
        m_vec[worst] += 1
        margins_g[worst] = reliability_margin(snrs[worst], m_vec[worst], d).g
        trace.append((grant, min(margins_g)))
    powers = [p_common] * n
    return _build_report(
        scenario,
        powers,
        m_vec,
        solver_name="symbols_minmax_fixed_p",
        iterations=grants,
        trace=trace,
        converged=True,
        enforce_energy_budget=True,
    )


def _minmax_bounds(scenario: Scenario) -> tuple[list[int], list[int]]:
    """Per-vehicle blocklength search bounds for the budgeted min-max
    problem; raises InfeasibleError naming the binding constraint."""
    cfg = scenario.config
    floors = []
    for link in scenario.links:
        bound = min_blocklength(
            link.norm_gain * cfg.energy_budget, cfg.payload_bits, cfg.symbol_budget
        )
        if bound is None:
            raise InfeasibleError(
                f"vehicle {link.vehicle_id}: the energy budget "
                f"{cfg.energy_budget:.6g} J cannot support any blocklength "
                f"up to {cfg.symbol_budget} at its channel gain"
            )
        floors.append(bound)
    if sum(floors) > cfg.symbol_budget:
        raise InfeasibleError(
            f"minimum blocklengths sum to {sum(floors)}, exceeding the "
            f"symbol budget {cfg.symbol_budget}"
        )
    ceilings = [
        upper_blocklength(floors, i, cfg.symbol_budget)
        for i in range(scenario.n_vehicles)
    ]
    return floors, ceilings


def _zero_power_floor(payload_bits: int, m_vec) -> float:
    # common margin at which every required power is zero: the inner
    # search is always feasible from here
    return min(-LN2 * payload_bits / math.sqrt(m) for m in m_vec)


def _project_equal_split(
    total: int, floors: list[int], ceilings: list[int]
) -> list[int]:
    """Equal split clipped into [floor, ceiling] and repaired to sum to
    total. Feasible whenever sum(floors) <= total."""
    n = len(floors)
    m_vec = [min(max(m, lo), hi) for m, lo, hi in zip(_equal_split(total, n), floors, ceilings)]
    deficit = total - sum(m_vec)
    while deficit > 0:
        idx = max(range(n), key=lambda i: ceilings[i] - m_vec[i])
        room = ceilings[idx] - m_vec[idx]
        if room <= 0:
            break
        add = min(room, deficit)
        m_vec[idx] += add
        deficit -= add
    while deficit < 0:
        idx = max(range(n), key=lambda i: m_vec[i] - floors[i])
        slack = m_vec[idx] - floors[idx]
        if slack <= 0:
            break
        take = min(slack, -deficit)
        m_vec[idx] -= take
        deficit += take
    return m_vec


def solve_joint_minmax(scenario: Scenario) -> SolveReport:
    """Max-min margin over powers and integer blocklengths jointly.

    Outer loop: symbol-exchange local search over the blocklength vector
    inside per-vehicle bounds; inner loop: margin-equalizing power
    bisection. At the inner optimum all unclamped margins are equal, so
    the exchange direction is taken from the power ordering: the most
    expensive vehicle receives alpha symbols from the cheapest one. A
    single deterministic start (equal split projected into the bounds);
    the result is a local optimum of that neighborhood.
    """
    cfg = scenario.config
    n = scenario.n_vehicles
    alpha = cfg.alpha
    floors, ceilings = _minmax_bounds(scenario)
    m_vec = _project_equal_split(cfg.symbol_budget, floors, ceilings)

    best_worst = -math.inf
    best: SolveReport | None = None
    best_m: tuple[int, ...] | None = None
    trace: list[tuple[int, float]] = []
    iterations = 0
    iteration_cap = max(1, (cfg.symbol_budget * n) // alpha)
    converged = False
    while iterations < iteration_cap:
        iterations += 1
        inner = solve_power_minmax_fixed_m(
            scenario, m_vec, margin_floor=_zero_power_floor(cfg.payload_bits, m_vec)
        )
        worst = inner.worst_margin.g
        if best is None or worst > best_worst + _ABS_IMPROVEMENT:
            best, best_m, best_worst = inner, tuple(m_vec), worst
            trace.append((iterations, worst))
        else:
            # rollback of the unhelpful trial move: best_* is pre-move
            converged = True
            break
        powers = inner.allocation.powers
        recipient = int(np.argmax(powers))
        donor = int(np.argmin(powers))
        if recipient == donor:
            converged = True
            break
        if (
            m_vec[donor] - alpha < floors[donor]
            or m_vec[recipient] + alpha > ceilings[recipient]
        ):
            converged = True
            break
        m_vec[recipient] += alpha
        m_vec[donor] -= alpha

    assert best is not None and best_m is not None
    return _build_report(
        scenario,
        best.allocation.powers,
        best_m,
        solver_name="joint_minmax",
        iterations=iterations,
        trace=trace,
        converged=converged,
        clamped=best.clamped,
        enforce_energy_budget=True,
    )


def brute_force_minmax(scenario: Scenario) -> SolveReport:
    """Exhaustive max-min margin over integer blocklength vectors.

    Verification oracle for solve_joint_minmax: enumerates every m
    vector inside the per-vehicle bounds with sum(m) <= symbol_budget
    and runs the exact power bisection on each. Guarded to n <= 3 and
    M <= 100.
    """
    cfg = scenario.config
    n = scenario.n_vehicles
    m_total = cfg.symbol_budget
    if n > 3:
        raise ValueError(f"brute_force_minmax is limited to n <= 3, got n={n}")
    if m_total > 100:
        raise ValueError(
            f"brute_force_minmax is limited to symbol budgets <= 100, "
            f"got {m_total}"
        )
    floors, ceilings = _minmax_bounds(scenario)

    def evaluate(m_vec: tuple[int, ...]) -> SolveReport:
        return solve_power_minmax_fixed_m(
            scenario, m_vec, margin_floor=_zero_power_floor(cfg.payload_bits, m_vec)
        )

    best: SolveReport | None = None
    best_m: tuple[int, ...] | None = None
    candidates = 0
    for m_vec in _bounded_vectors(floors, ceilings, m_total):
        candidates += 1
        report = evaluate(m_vec)
        if best is None or report.worst_margin.g > best.worst_margin.g:
            best, best_m = report, m_vec
    assert best is not None and best_m is not None
    return _build_report(
        scenario,
        best.allocation.powers,
        best_m,
        solver_name="brute_force_minmax",
        iterations=candidates,
        trace=((candidates, best.worst_margin.g),),
        converged=True,
        clamped=best.clamped,
        enforce_energy_budget=True,
    )


def _bounded_vectors(floors: list[int], ceilings: list[int], m_total: int):
    """Yield every integer vector with floors <= m <= ceilings and
    sum(m) <= m_total, in lexicographic order."""
    n = len(floors)
    if n == 1:
        for m1 in range(floors[0], min(ceilings[0], m_total) + 1):
            yield (m1,)
    elif n == 2:
        for m1 in range(floors[0], min(ceilings[0], m_total - floors[1]) + 1):
            for m2 in range(floors[1], min(ceilings[1], m_total - m1) + 1):
                yield (m1, m2)
    else:
        for m1 in range(
            floors[0], min(ceilings[0], m_total - floors[1] - floors[2]) + 1
        ):
            for m2 in range(
                floors[1], min(ceilings[1], m_total - m1 - floors[2]) + 1
            ):
                for m3 in range(
                    floors[2], min(ceilings[2], m_total - m1 - m2) + 1
                ):
                    yield (m1, m2, m3)
