"""Unstructured search: oracle, standard Grover iteration and LCU-based search.

The oracle flips the sign of marked items.  The LCU searches combine the
uniform state ``a`` with ``b = O_f a``; for one marked item
``a - b = (2/sqrt(N)) |x0>``, so any two-state combination method yields the
marked item directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyMarkedSet, UnsupportedMultiplicity
from .lcu import combine2_hadamard, combine2_rotation, iterate_tolerance
from .qcore import (
    CostLedger,
    DiagonalOp,
    StateVector,
    apply,
    as_rng,
    basis_state,
    fidelity,
    measure,
    reflect_about,
    uniform_state,
)

LCU_METHODS = ("hadamard", "eig", "pe", "iterate")
SEARCH_METHODS = ("standard", "classical") + LCU_METHODS
ITERATE_EPSILON = 0.1


@dataclass(frozen=True)
class SearchInstance:
    N: int
    marked: frozenset
    oracle: DiagonalOp

    @property
    def M(self) -> int:
        return len(self.marked)


@dataclass
class SearchResult:
    found: int
    success: bool
    queries: int
    iterations: int
    success_probability: float
    method: str = "standard"
    ledger: CostLedger = field(default_factory=CostLedger)
    details: dict = field(default_factory=dict)

    def as_record(self) -> dict:
        return {
            "method": self.method,
            "found": self.found,
            "success": self.success,
            "queries": self.queries,
            "iterations": self.iterations,
            "success_probability": self.success_probability,
            "ledger": self.ledger.as_dict(),
            "details": self.details,
        }


def make_instance(N: int, marked) -> SearchInstance:
    marked = frozenset(int(x) for x in marked)
    if N < 1:
        raise ValueError("N must be positive")
    if not marked:
        raise EmptyMarkedSet("at least one item must be marked")
    if min(marked) < 0 or max(marked) >= N:
        raise ValueError(f"marked indices must lie in [0, {N})")
    diag = np.ones(N)
    diag[list(marked)] = -1.0
    return SearchInstance(N=N, marked=marked, oracle=DiagonalOp(diag, cost=CostLedger(oracle_queries=1)))


def random_instance(N: int, rng, M: int = 1) -> SearchInstance:
    marked = as_rng(rng).generator.choice(N, size=M, replace=False)
    return make_instance(N, marked)


def _marked_mass(inst: SearchInstance, s: StateVector) -> float:
    p = s.probabilities()
    return float(sum(p[k] for k in inst.marked))


def grover_iterations(N: int, M: int = 1) -> int:
    return math.floor(math.pi / 4.0 * math.sqrt(N / M))


def grover_closed_form(N: int, M: int, k: int) -> float:
    return math.sin((2 * k + 1) * math.asin(math.sqrt(M / N))) ** 2


def grover_standard(inst: SearchInstance, rng=None, iterations: int | None = None) -> SearchResult:
    """Apply ``G = (2|phi><phi| - I) O_f`` ``k`` times to the uniform state."""
    if inst.M >= inst.N:
        raise ValueError("every item is marked; there is nothing to search for")
    rng = as_rng(rng)
    k = grover_iterations(inst.N, inst.M) if iterations is None else int(iterations)
    phi = uniform_state(inst.N)
    about_phi = reflect_about(phi)
    ledger = CostLedger()
    psi = phi.amplitudes
    for _ in range(k):
        psi = inst.oracle.act(psi)
        ledger.charge(inst.oracle.cost)
        psi = -about_phi.act(psi)
    state = StateVector(psi / np.linalg.norm(psi))
    found = next(iter(measure(state, 1, rng)))
    return SearchResult(
        found=found,
        success=found in inst.marked,
        queries=ledger.oracle_queries,
        iterations=k,
        success_probability=_marked_mass(inst, state),
        method="standard",
        ledger=ledger,
    )


def classical_scan(inst: SearchInstance, rng=None) -> SearchResult:
    """Query items in a random order until a marked one turns up."""
    order = as_rng(rng).generator.permutation(inst.N)
    for q, x in enumerate(order, start=1):
        if int(x) in inst.marked:
            ledger = CostLedger(oracle_queries=q)
            return SearchResult(int(x), True, q, q, 1.0, method="classical", ledger=ledger)
    raise AssertionError("unreachable: the marked set is non-empty")


def search_states(inst: SearchInstance, ledger: CostLedger | None = None) -> tuple[StateVector, StateVector]:
    """``a`` = uniform superposition, ``b = O_f a`` (one oracle query)."""
    a = uniform_state(inst.N)
    b = apply(inst.oracle, a, ledger=ledger)
    return a, b


def search_lcu(
    inst: SearchInstance,
    method: str = "iterate",
    rng=None,
    c: float = 0.5,
    guard_bits: int = 2,
    iterate_c: float = 2.0,
) -> SearchResult:
    """Find the single marked item by combining ``a`` and ``-b``.

    ``hadamard`` amplifies the interference circuit; ``eig`` uses the exact
    generator at precision ``c / sqrt(N)``; ``pe`` quantizes the rotation
    angle to ``ceil(log2 sqrt(N)) + guard_bits`` bits; ``iterate`` searches
    integer powers up to ``iterate_c * sqrt(N)``.
    """
    if method not in LCU_METHODS:
        raise ValueError(f"unknown LCU search method {method!r}")
    if inst.M != 1:
        raise UnsupportedMultiplicity("LCU search handles exactly one marked item")
    rng = as_rng(rng)
    (x0,) = inst.marked
    N = inst.N
    a, b = search_states(inst)
    cost_a = CostLedger(input_preps=1)
    cost_b = CostLedger(input_preps=1, oracle_queries=1)
    sqrt_n = math.sqrt(N)
    details = {}

    if method == "hadamard":
        rep = combine2_hadamard(a, -b, rng.child(0), use_amplification=True, prep_costs=[cost_a, cost_b])
        # probability of reading ancilla 0 and the marked item in one amplified attempt
        p_success = float(rep.final_state.probabilities()[x0])
    else:
        kwargs = {}
        if method == "eig":
            eps = c / sqrt_n
        elif method == "pe":
            eps = c / sqrt_n
            kwargs["bits"] = math.ceil(math.log2(sqrt_n)) + guard_bits
        else:
            eps = ITERATE_EPSILON
            kwargs["max_k"] = math.ceil(iterate_c * sqrt_n)
            kwargs["tol"] = iterate_tolerance(eps)
        rep = combine2_rotation(a, b, 1.0, -1.0, eps, method, rng.child(0), prep_costs=[cost_a, cost_b], **kwargs)
        p_success = fidelity(rep.output, basis_state(N, x0))
        details["epsilon"] = eps
    details.update({k: v for k, v in rep.details.items() if k in ("bits", "k", "t", "direction", "amplified")})
    found = next(iter(measure(rep.output, 1, rng.child(1))))
    return SearchResult(
        found=found,
        success=found in inst.marked,
        queries=rep.ledger.oracle_queries,
        iterations=rep.rounds,
        success_probability=p_success,
        method=method,
        ledger=rep.ledger,
        details=details,
    )


def run_search(method: str, inst: SearchInstance, rng=None) -> SearchResult:
    if method == "standard":
        return grover_standard(inst, rng)
    if method == "classical":
        return classical_scan(inst, rng)
    return search_lcu(inst, method, rng)


def loglog_fit(xs, ys) -> tuple[float, float, float]:
    """Least-squares ``log y = e log x + c``; returns ``(e, c, r2)``."""
    lx, ly = np.log(np.asarray(xs, float)), np.log(np.asarray(ys, float))
    e, c = np.polyfit(lx, ly, 1)
    resid = ly - (e * lx + c)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return float(e), float(c), r2


def scaling_study(method: str, Ns, seeds=range(4)) -> dict:
    """Mean oracle queries per ``N`` (random single marked item) and a log-log fit."""
    Ns = [int(n) for n in Ns]
    if len(Ns) < 4:
        raise ValueError("need at least four values of N")
    if any(n < 2 or n & (n - 1) for n in Ns):
        raise ValueError("N values must be powers of two")
    if method not in SEARCH_METHODS:
        raise ValueError(f"unknown search method {method!r}")
    seeds = list(seeds)
    means = []
    for N in Ns:
        q = []
        for s in seeds:
            rng = as_rng(s).child(N)
            inst = random_instance(N, rng.child(0))
            q.append(run_search(method, inst, rng.child(1)).queries)
        means.append(float(np.mean(q)))
    e, c, r2 = loglog_fit(Ns, means)
    return {"method": method, "N": Ns, "mean_queries": means, "exponent": e, "intercept": c, "r2": r2}
