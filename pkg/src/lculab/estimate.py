"""Sampling estimators for overlaps and angles between states.

Each estimate draws ``ceil(4 / epsilon**2)`` Bernoulli samples of a test
circuit's acceptance bit.  Under ``cost_model="paper"`` the ledger is charged
at the amplitude-estimation rate ``ceil(1 / epsilon)`` instead; the number
of samples actually drawn is still returned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DegenerateAngle, NonRealState
from .qcore import CostLedger, StateVector, as_rng, inner

COST_MODELS = ("sampling", "paper")


@dataclass(frozen=True)
class AngleEstimate:
    value: float
    half_width: float
    samples_used: int


def sample_count(epsilon: float) -> int:
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    return math.ceil(4.0 / epsilon**2)


def charged_samples(epsilon: float, cost_model: str = "sampling") -> int:
    if cost_model == "sampling":
        return sample_count(epsilon)
    if cost_model == "paper":
        return math.ceil(1.0 / epsilon)
    raise ValueError(f"unknown cost model {cost_model!r}")


def swap_test_prob(a: StateVector, b: StateVector) -> float:
    """Exact acceptance probability of the swap test."""
    return 0.5 * (1.0 + abs(inner(a, b)) ** 2)


def _charge(ledger, epsilon, cost_model):
    if ledger is not None:
        n = charged_samples(epsilon, cost_model)
        ledger.charge(CostLedger(estimator_samples=n, input_preps=2 * n))


def overlap_magnitude(a, b, epsilon, rng, ledger=None, cost_model="sampling"):
    """Estimate ``|<a|b>|`` by sampling the swap test.

    Returns ``(estimate, samples)``.
    """
    n = sample_count(epsilon)
    rng = as_rng(rng)
    accepted = rng.generator.binomial(n, min(1.0, swap_test_prob(a, b)))
    p_hat = accepted / n
    _charge(ledger, epsilon, cost_model)
    return math.sqrt(max(0.0, 2.0 * p_hat - 1.0)), n


def overlap_signed(a, b, epsilon, rng, ledger=None, cost_model="sampling"):
    """Estimate ``Re<a|b>`` for real states.

    Idealized Hadamard-test style circuit accepting with probability
    ``(1 + Re<a|b>) / 2``.  Returns ``(estimate, samples)``.
    """
    for s in (a, b):
        if not s.is_real():
            raise NonRealState("signed overlap needs real-amplitude states")
    n = sample_count(epsilon)
    rng = as_rng(rng)
    p = min(1.0, max(0.0, 0.5 * (1.0 + inner(a, b).real)))
    accepted = rng.generator.binomial(n, p)
    _charge(ledger, epsilon, cost_model)
    return 2.0 * accepted / n - 1.0, n


def estimate_angle(a, b, epsilon, rng, ledger=None, cost_model="sampling") -> AngleEstimate:
    """Angle ``acos <a|b>`` in ``[0, pi]`` from a signed overlap estimate."""
    c, n = overlap_signed(a, b, epsilon, rng, ledger=ledger, cost_model=cost_model)
    if abs(c) > 1.0 - 1e-12:
        raise DegenerateAngle(f"estimated overlap {c:+.12f}: angle is 0 or pi")
    c = max(-1.0, min(1.0, c))
    half_width = epsilon / math.sqrt(1.0 - c * c + epsilon)
    return AngleEstimate(value=math.acos(c), half_width=half_width, samples_used=n)
