"""Turning posterior draws into joint decisions.

The objective being maximized is

    sum_i d_i * (w_i(d) - penalty),

where ``w_i(d)`` is the posterior probability that hypothesis ``i``'s
alternative holds jointly with every other decision in its dependency group
being correct.  Each summand depends on ``d`` only through the group of ``i``,
so the maximization splits exactly across connected components of the group
graph: small components are enumerated, large ones fall back to simulated
annealing over bit flips.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidSpec
from .hypotheses import ComponentPartition, DecisionConfig, GroupStructure, TestSpec
from .model_ar1 import PosteriorDraws


@dataclass(frozen=True, eq=False)
class PosteriorIndicators:
    """Boolean S x H matrix: draw s lies in the alternative region of hypothesis i."""

    ind: np.ndarray
    spec: TestSpec

    def __post_init__(self):
        ind = np.array(self.ind, dtype=bool)
        if ind.ndim != 2:
            raise InvalidSpec("indicator matrix must be 2-d (draws x hypotheses)")
        if ind.shape[1] != self.spec.num_hypotheses:
            raise InvalidSpec("indicator columns and hypothesis count disagree")
        ind.setflags(write=False)
        object.__setattr__(self, "ind", ind)

    @property
    def num_draws(self) -> int:
        return self.ind.shape[0]

    @property
    def num_hypotheses(self) -> int:
        return self.ind.shape[1]


@dataclass(frozen=True)
class OptimizerConfig:
    """Exact-enumeration threshold and annealing schedule for large components."""

    exact_component_limit: int = 20
    annealing_iterations: int = 4000
    initial_temperature: float = 1.0
    cooling_factor: float = 0.995
    restarts: int = 8
    seed: int = 0

    def __post_init__(self):
        if not 1 <= self.exact_component_limit <= 24:
            raise InvalidSpec("exact_component_limit must lie in [1, 24] (enumeration memory)")
        if not 0.0 < self.cooling_factor < 1.0:
            raise InvalidSpec("cooling_factor must lie inside (0, 1)")
        if self.annealing_iterations < 1 or self.restarts < 1:
            raise InvalidSpec("annealing needs at least one iteration and one restart")


def alternative_indicators(draws: PosteriorDraws, spec: TestSpec) -> PosteriorIndicators:
    """Mark, per draw, which hypotheses' alternatives the draw satisfies.

    The autoregression alternative is ``|rho| >= rho_null_bound``; coefficient
    alternatives are ``|b_i| > null_radius`` with the boundary kept in the null.
    """
    if draws.num_coefficients != spec.num_covariates + 1:
        raise InvalidSpec("draw columns and spec dimensions disagree")
    s = draws.num_draws
    ind = np.zeros((s, spec.num_hypotheses), dtype=bool)
    if spec.include_rho_test:
        ind[:, 0] = np.abs(draws.rho) >= spec.rho_null_bound
    for i in range(spec.num_covariates + 1):
        ind[:, spec.coefficient_hypothesis(i)] = np.abs(draws.beta[:, i]) > spec.null_radius
    return PosteriorIndicators(ind, spec)


def marginal_probs(indicators: PosteriorIndicators) -> np.ndarray:
    """Posterior probability of each alternative: column means of the indicators."""
    return indicators.ind.mean(axis=0)


def joint_correct_probs(
    indicators: PosteriorIndicators,
    groups: GroupStructure,
    config: DecisionConfig,
) -> np.ndarray:
    """Posterior probability, per hypothesis, of its alternative jointly with
    the correctness of the other decisions in its group.

    For a singleton group this is exactly the marginal probability.
    """
    ind = indicators.ind
    h = indicators.num_hypotheses
    if groups.num_hypotheses != h or len(config) != h:
        raise InvalidSpec("indicators, groups, and decision vector disagree on length")
    bits = config.bits
    out = np.empty(h)
    for i in range(h):
        others = groups.others(i)
        if others.size == 0:
            out[i] = ind[:, i].mean()
        else:
            match = (ind[:, others] == bits[others]).all(axis=1)
            out[i] = (ind[:, i] & match).mean()
    return out


def penalized_objective(
    config: DecisionConfig,
    indicators: PosteriorIndicators,
    groups: GroupStructure,
    penalty: float,
) -> float:
    """sum_i d_i * (w_i(d) - penalty); zero for the all-accept configuration."""
    if not 0.0 <= penalty < 1.0:
        raise InvalidSpec("penalty must lie in [0, 1)")
    w = joint_correct_probs(indicators, groups, config)
    d = config.bits.astype(float)
    return float(np.dot(d, w - penalty))


def additive_rule_at_penalty(marginals: np.ndarray, penalty: float) -> DecisionConfig:
    """Reject every hypothesis whose marginal alternative probability exceeds the penalty."""
    if not 0.0 <= penalty < 1.0:
        raise InvalidSpec("penalty must lie in [0, 1)")
    return DecisionConfig(np.asarray(marginals) > penalty)


def additive_rule(marginals: np.ndarray, cost: float) -> DecisionConfig:
    """Marginal thresholding rule: reject when the alternative probability
    exceeds cost / (1 + cost), the posterior-risk minimizer under a loss that
    charges ``cost`` per false discovery and one per missed discovery.
    """
    if not cost > 0:
        raise InvalidSpec("cost must be positive")
    return additive_rule_at_penalty(marginals, cost / (1.0 + cost))


# ---------------------------------------------------------------------------
# component-wise maximization
# ---------------------------------------------------------------------------

class _GroupTables:
    """Per-hypothesis lookup tables for w_i(d) * S.

    Table ``i`` is indexed by the bit pattern of the decisions on the group of
    ``i`` (excluding ``i``) and counts the draws where the alternative of ``i``
    holds and the group indicators match that pattern, so one objective
    evaluation is a handful of O(1) lookups.
    """

    _TABLE_LIMIT = 24  # beyond this, fall back to direct masking per evaluation

    def __init__(self, indicators: PosteriorIndicators, groups: GroupStructure):
        ind = indicators.ind
        self.ind = ind
        self.num_draws = indicators.num_draws
        self.others: list[np.ndarray] = []
        self.counts: list[np.ndarray | None] = []
        for i in range(indicators.num_hypotheses):
            others = groups.others(i)
            self.others.append(others)
            if others.size == 0:
                self.counts.append(np.array([ind[:, i].sum()], dtype=np.int64))
            elif others.size <= self._TABLE_LIMIT:
                weights = 1 << np.arange(others.size, dtype=np.int64)
                patterns = ind[:, others].astype(np.int64) @ weights
                self.counts.append(
                    np.bincount(patterns[ind[:, i]], minlength=1 << others.size)
                )
            else:
                self.counts.append(None)

    def joint_prob(self, i: int, bits: np.ndarray) -> float:
        others = self.others[i]
        counts = self.counts[i]
        if others.size == 0:
            return counts[0] / self.num_draws
        if counts is None:
            match = (self.ind[:, others] == bits[others]).all(axis=1)
            return (self.ind[:, i] & match).sum() / self.num_draws
        pattern = 0
        for b, j in enumerate(others):
            if bits[j]:
                pattern |= 1 << b
        return counts[pattern] / self.num_draws


def _popcount(values: np.ndarray) -> np.ndarray:
    return np.bitwise_count(values)


def _lexicographic_rank(values: np.ndarray, width: int) -> np.ndarray:
    """Rank configurations so that the tuple (d_0, d_1, ...) orders lexicographically."""
    rank = np.zeros_like(values)
    for j in range(width):
        rank |= ((values >> np.uint64(j)) & np.uint64(1)) << np.uint64(width - 1 - j)
    return rank


def _enumerate_component(
    component: tuple[int, ...],
    tables: _GroupTables,
    penalty: float,
) -> np.ndarray:
    """Exact maximization over all 2^k configurations of one component.

    Ties are broken toward fewer rejections, then the lexicographically
    smallest bit vector, so the result is deterministic.
    """
    k = len(component)
    position = {hyp: idx for idx, hyp in enumerate(component)}
    configs = np.arange(1 << k, dtype=np.uint64)
    objective = np.zeros(1 << k)
    s = tables.num_draws
    for hyp in component:
        d_bit = ((configs >> np.uint64(position[hyp])) & np.uint64(1)).astype(float)
        others = tables.others[hyp]
        pattern = np.zeros_like(configs)
        for b, j in enumerate(others):
            pattern |= ((configs >> np.uint64(position[j])) & np.uint64(1)) << np.uint64(b)
        w = tables.counts[hyp][pattern.astype(np.int64)] / s
        objective += d_bit * (w - penalty)
    best = objective.max()
    candidates = configs[objective == best]
    rejections = _popcount(candidates)
    candidates = candidates[rejections == rejections.min()]
    winner = candidates[np.argmin(_lexicographic_rank(candidates, k))]
    bits = np.zeros(k, dtype=bool)
    for idx in range(k):
        bits[idx] = bool((int(winner) >> idx) & 1)
    return bits


def _component_objective(
    component: tuple[int, ...],
    tables: _GroupTables,
    bits: np.ndarray,
    penalty: float,
) -> float:
    total = 0.0
    for hyp in component:
        if bits[hyp]:
            total += tables.joint_prob(hyp, bits) - penalty
    return total


def _tie_break_key(bits_component: np.ndarray):
    return (int(bits_component.sum()), tuple(int(b) for b in bits_component))


def _anneal_component(
    component: tuple[int, ...],
    tables: _GroupTables,
    marginals: np.ndarray,
    penalty: float,
    config: OptimizerConfig,
    component_id: int,
    full_bits: np.ndarray,
) -> np.ndarray:
    """Simulated annealing over single-bit flips; returns the best state visited.

    Restart 0 starts from the marginal thresholding warm start, the remaining
    restarts from random configurations.  Proposals are accepted with
    probability exp(delta / T) under a geometric cooling schedule.
    """
    comp = np.array(component, dtype=int)
    affected: dict[int, list[int]] = {hyp: [hyp] for hyp in component}
    for hyp in component:
        for j in tables.others[hyp]:
            affected[int(j)].append(hyp)

    rng = np.random.default_rng(np.random.SeedSequence([config.seed, component_id]))
    best_bits: np.ndarray | None = None
    best_value = -math.inf
    best_key = None

    def consider(bits: np.ndarray, value: float):
        nonlocal best_bits, best_value, best_key
        key = _tie_break_key(bits[comp])
        if value > best_value or (value == best_value and key < best_key):
            best_bits = bits.copy()
            best_value = value
            best_key = key

    for restart in range(config.restarts):
        bits = full_bits.copy()
        if restart == 0:
            bits[comp] = marginals[comp] > penalty
        else:
            bits[comp] = rng.random(comp.size) < 0.5
        value = _component_objective(component, tables, bits, penalty)
        consider(bits, value)
        temperature = config.initial_temperature
        for _ in range(config.annealing_iterations):
            flip = int(comp[rng.integers(comp.size)])
            old_terms = sum(
                (tables.joint_prob(h, bits) - penalty) for h in affected[flip] if bits[h]
            )
            bits[flip] = ~bits[flip]
            new_terms = sum(
                (tables.joint_prob(h, bits) - penalty) for h in affected[flip] if bits[h]
            )
            delta = new_terms - old_terms
            consider(bits, value + delta)
            if delta > 0 or rng.random() < math.exp(min(delta / max(temperature, 1e-300), 0.0)):
                value += delta
            else:
                bits[flip] = ~bits[flip]
            temperature *= config.cooling_factor
    return best_bits[comp]


def optimize_decisions(
    indicators: PosteriorIndicators,
    groups: GroupStructure,
    partition: ComponentPartition,
    penalty: float,
    config: OptimizerConfig | None = None,
) -> DecisionConfig:
    """Maximize the penalized objective component by component.

    Components up to ``exact_component_limit`` hypotheses are solved by
    exhaustive enumeration; larger ones by seeded simulated annealing.  Ties go
    to the configuration with fewest rejections, then the lexicographically
    smallest bit vector.
    """
    if not 0.0 <= penalty < 1.0:
        raise InvalidSpec("penalty must lie in [0, 1)")
    h = indicators.num_hypotheses
    if groups.num_hypotheses != h or partition.num_hypotheses != h:
        raise InvalidSpec("indicators, groups, and partition disagree on length")
    config = config or OptimizerConfig()
    marginals = marginal_probs(indicators)
    bits = np.zeros(h, dtype=bool)
    tables = None
    for cid, component in enumerate(partition.components):
        if len(component) == 1:
            # singleton component: the lone term is marginal, ties go to acceptance
            i = component[0]
            bits[i] = marginals[i] > penalty
            continue
        if tables is None:
            tables = _GroupTables(indicators, groups)
        if len(component) <= config.exact_component_limit:
            bits[list(component)] = _enumerate_component(component, tables, penalty)
        else:
            bits[list(component)] = _anneal_component(
                component, tables, marginals, penalty, config, cid, bits
            )
    return DecisionConfig(bits)
