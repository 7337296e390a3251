"""Linear combination of real quantum states.

Given preparable states ``x_j`` and real weights ``alpha_j`` these routines
produce the normalized state of ``y = sum_j alpha_j x_j``:

* ``combine2_hadamard``: ancilla + Hadamard interference, post-selected,
* ``combine2_rotation``: rotate ``a`` toward ``b`` with a fractional power of
  ``R = (I - 2|b><b|)(I - 2|a><a|)`` (generator, phase-estimation or integer
  iterate variants),
* ``combine_multi_v1`` / ``combine_multi_v2``: one-shot post-selected
  circuits with a uniform or coefficient-loaded index register,
* ``combine_recursive``: a pairwise tree of two-state rotations.

Negative weights are absorbed into the states.  Every routine reports the
fidelity of its output against the directly computed normalized sum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from .errors import CollinearStates, DimMismatch, NonRealState, RetryLimit, ZeroSum
from .estimate import overlap_signed
from .fracpow import COLLINEAR_TOL, frac_power_iterate, residual_sin, rotation_generator
from .qcore import (
    ControlledOp,
    CostLedger,
    IdentityOp,
    KronOp,
    StateVector,
    amplitude_amplify,
    apply,
    as_rng,
    basis_state,
    compose,
    fidelity,
    hadamard_op,
    inner,
    new_state,
    postselect,
    prep_unitary,
    ry_op,
    uniform_state,
)

METHODS = (
    "hadamard",
    "rotation-eig",
    "rotation-pe",
    "rotation-iterate",
    "multi-v1",
    "multi-v2",
    "recursive",
)
ROTATION_VARIANTS = ("eig", "pe", "iterate")
MAX_ATTEMPTS = 10**6
ZERO_SUM_TOL = 1e-12


@dataclass
class CombineReport:
    output: StateVector
    target_fidelity: float
    attempts: int
    ledger: CostLedger
    method: str
    success_probability: float = 1.0
    rounds: int = 0
    tree_trace: list = field(default_factory=list)
    details: dict = field(default_factory=dict)
    final_state: StateVector | None = None

    @property
    def expected_attempts(self) -> float:
        return 1.0 / self.success_probability

    def as_record(self) -> dict:
        return {
            "method": self.method,
            "target_fidelity": self.target_fidelity,
            "attempts": self.attempts,
            "success_probability": self.success_probability,
            "expected_attempts": self.expected_attempts,
            "rounds": self.rounds,
            "ledger": self.ledger.as_dict(),
            "details": self.details,
            "tree_trace": self.tree_trace,
        }


@dataclass
class CombineRequest:
    states: list
    coeffs: list
    method: str = "multi-v2"
    epsilon: float = 1e-2
    rng: object = None
    prep_costs: list | None = None
    use_amplification: bool = False

    def __post_init__(self):
        if len(self.states) < 2:
            raise ValueError("need at least two states")
        if len(self.states) != len(self.coeffs):
            raise ValueError("states and coeffs differ in length")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")


def combine(req: CombineRequest) -> CombineReport:
    if req.method == "hadamard":
        if len(req.states) != 2 or req.coeffs[0] != req.coeffs[1]:
            raise ValueError("the Hadamard method combines two states with equal weights")
        a, b = absorb_signs(req.states, req.coeffs)[0]
        return combine2_hadamard(a, b, req.rng, req.use_amplification, req.prep_costs)
    if req.method.startswith("rotation-"):
        if len(req.states) != 2:
            raise ValueError("rotation methods combine exactly two states")
        a, b = req.states
        return combine2_rotation(
            a, b, req.coeffs[0], req.coeffs[1], req.epsilon, req.method.split("-", 1)[1], req.rng,
            prep_costs=req.prep_costs,
        )
    if req.method == "multi-v1":
        return combine_multi_v1(req.states, req.coeffs, req.rng, req.use_amplification, req.prep_costs)
    if req.method == "multi-v2":
        return combine_multi_v2(req.states, req.coeffs, req.rng, req.use_amplification, req.prep_costs)
    return combine_recursive(req.states, req.coeffs, req.epsilon, "pe", req.rng, prep_costs=req.prep_costs)


# ---------------------------------------------------------------------------
# helpers


def absorb_signs(states, coeffs):
    """Move negative signs from the weights into the states."""
    out_states, out_coeffs = [], []
    for s, c in zip(states, coeffs):
        c = float(c)
        out_states.append(-s if c < 0 else s)
        out_coeffs.append(abs(c))
    return out_states, out_coeffs


def combination_vector(states, coeffs) -> np.ndarray:
    return sum(float(c) * s.amplitudes for s, c in zip(states, coeffs))


def exact_combination(states, coeffs, path=None) -> StateVector:
    y = combination_vector(states, coeffs)
    if np.linalg.norm(y) < ZERO_SUM_TOL:
        raise ZeroSum("the weighted sum vanishes", path=path)
    return new_state(y)


def _default_costs(prep_costs, m):
    if prep_costs is None:
        return [CostLedger(input_preps=1) for _ in range(m)]
    if len(prep_costs) != m:
        raise ValueError("one preparation cost per state is required")
    return list(prep_costs)


def _check_common_dim(states):
    d = states[0].dim
    for s in states:
        if s.dim != d:
            raise DimMismatch("all states must share one dimension")
    return d


def _attempts_until_success(p: float, rng) -> int:
    if p <= 0.0:
        raise RetryLimit("post-selection branch has zero probability")
    n = int(rng.generator.geometric(min(1.0, p)))
    if n > MAX_ATTEMPTS:
        raise RetryLimit(f"post-selection needed more than {MAX_ATTEMPTS} attempts")
    return n


def run_postselected(A, ancilla_dim, rng, use_amplification, known_amplitude, ledger):
    """Run circuit ``A`` on |0>, then repeat until the ancilla reads 0."""
    init = basis_state(A.dim, 0)
    rounds = 0
    if use_amplification:
        good = np.arange(A.dim // ancilla_dim)
        state, rounds = amplitude_amplify(A, good, known_amplitude, init)
    else:
        state = apply(A, init)
    p, out = postselect(state, ancilla_dim, 0)
    attempts = _attempts_until_success(p, rng)
    ledger.charge(A.cost, attempts * (2 * rounds + 1))
    return out, p, attempts, rounds, state


def _coefficient_loader_cost(m: int) -> CostLedger:
    return CostLedger(elementary_ops=max(1, math.ceil(math.log2(m))))


# ---------------------------------------------------------------------------
# two states


def combine2_hadamard(a, b, rng=None, use_amplification=False, prep_costs=None) -> CombineReport:
    """Prepare ``(a + b)/||a + b||`` by ancilla interference.

    ``|0>|0> -> H -> controlled prep -> H`` gives
    ``1/2 |0>(a + b) + 1/2 |1>(a - b)``; the ancilla is then post-selected
    on 0, either by plain repetition or after amplitude amplification.
    """
    rng = as_rng(rng)
    n = _check_common_dim([a, b])
    cost_a, cost_b = _default_costs(prep_costs, 2)
    target = exact_combination([a, b], [1.0, 1.0])
    norm_sum = float(np.linalg.norm(a.amplitudes + b.amplitudes))

    had = KronOp(hadamard_op(CostLedger(elementary_ops=1)), IdentityOp(n))
    ctrl = ControlledOp([prep_unitary(a, cost_a), prep_unitary(b, cost_b)])
    A = compose(had, ctrl, had)

    ledger = CostLedger()
    out, p, attempts, rounds, state = run_postselected(A, 2, rng, use_amplification, norm_sum / 2.0, ledger)
    return CombineReport(
        output=out,
        target_fidelity=fidelity(out, target),
        attempts=attempts,
        ledger=ledger,
        method="hadamard",
        success_probability=p,
        rounds=rounds,
        details={"closed_form_probability": norm_sum**2 / 4.0, "amplified": bool(use_amplification)},
        final_state=state,
    )


def weighted_angles(a, b, alpha, beta, overlap=None) -> tuple[float, float, float]:
    """Angles for rotating ``a`` onto ``alpha a + beta b``.

    Returns ``(phi, theta, t)`` with ``phi`` the angle between a and b,
    ``theta`` the angle between a and the target, and ``t = theta / (2 phi)``
    the power of ``R`` (a rotation by ``2 phi``) that carries a onto it.
    """
    if alpha < 0 or beta < 0:
        raise ValueError("absorb negative signs into the states first")
    if alpha == 0 and beta == 0:
        raise ZeroSum("both weights are zero")
    if overlap is None:
        c, sin_phi = inner(a, b).real, residual_sin(a, b)
    else:
        c = float(overlap)
        sin_phi = math.sqrt(max(0.0, 1.0 - c * c))
    c = max(-1.0, min(1.0, c))
    if sin_phi <= COLLINEAR_TOL:
        raise CollinearStates("states are (anti)parallel")
    phi = math.acos(c)
    norm = math.sqrt(max(0.0, alpha * alpha + beta * beta + 2.0 * alpha * beta * c))
    if norm < ZERO_SUM_TOL:
        raise ZeroSum("the weighted sum vanishes")
    theta = math.acos(max(-1.0, min(1.0, (alpha + beta * c) / norm)))
    return phi, theta, theta / (2.0 * phi)


def pe_bits(epsilon: float, t: float) -> int:
    """Bits keeping the quantized rotation within infidelity ``epsilon``."""
    if t == 0:
        return 1
    # state error is |t| * (angle error) <= |t| * pi / 2**bits
    need = abs(t) * math.pi / math.asin(math.sqrt(epsilon))
    return int(min(20, max(1, math.ceil(math.log2(need)))))


def iterate_tolerance(epsilon: float) -> float:
    """Largest rotation error (rad) keeping fidelity >= 1 - epsilon."""
    return math.asin(math.sqrt(epsilon))


def combine2_rotation(
    a,
    b,
    alpha=1.0,
    beta=1.0,
    epsilon=1e-2,
    variant="eig",
    rng=None,
    *,
    prep_costs=None,
    angles="exact",
    bits=None,
    tol=None,
    max_k=None,
    cost_model="sampling",
) -> CombineReport:
    """Prepare the state of ``alpha a + beta b`` by a fractional rotation.

    ``variant`` picks how ``R**t`` is realized: ``eig`` evolves the
    closed-form generator, ``pe`` quantizes its angle to ``bits`` bits and
    ``iterate`` applies ``R**k`` for an integer ``k``.  ``angles="estimated"``
    replaces the exact overlap by a sampled one.  Of the rotation and its
    inverse, the one landing closer to the exact target is kept.
    """
    if variant not in ROTATION_VARIANTS:
        raise ValueError(f"unknown rotation variant {variant!r}")
    if angles not in ("exact", "estimated"):
        raise ValueError("angles must be 'exact' or 'estimated'")
    for s in (a, b):
        if not s.is_real():
            raise NonRealState("rotation methods combine real-amplitude states")
    rng = as_rng(rng)
    _check_common_dim([a, b])
    cost_a, cost_b = _default_costs(prep_costs, 2)
    (a, b), (alpha, beta) = absorb_signs([a, b], [alpha, beta])
    target = exact_combination([a, b], [alpha, beta])
    ledger = CostLedger()
    method = f"rotation-{variant}"

    if alpha == 0 or beta == 0:
        out, cost = (a, cost_a) if beta == 0 else (b, cost_b)
        ledger.charge(cost)
        return CombineReport(out, fidelity(out, target), 1, ledger, method, details={"rotation": "none"})

    overlap = None
    if angles == "estimated":
        overlap, _ = overlap_signed(a, b, epsilon, rng, ledger=ledger, cost_model=cost_model)
    spec = rotation_generator(a, b, overlap=overlap)
    phi, theta, t = weighted_angles(a, b, alpha, beta, overlap=spec.overlap)

    # each reflection I - 2|x><x| = P_x S_0 P_x^dagger uses two preparations
    r_cost = cost_a * 2 + cost_b * 2 + CostLedger(elementary_ops=2)
    details = {"phi": phi, "theta": theta, "t": t, "overlap_used": spec.overlap}
    if variant == "eig":
        uses = math.ceil(1.0 / epsilon)
        forward, reverse = spec.power(t), spec.power(-t)
    elif variant == "pe":
        bits = bits or pe_bits(epsilon, t)
        uses = 2**bits
        forward, reverse = spec.power(t, bits), spec.power(-t, bits)
        details["bits"] = bits
    else:
        tol = tol or iterate_tolerance(epsilon)
        max_k = max_k or max(64, math.ceil(8 * math.pi / tol))
        k, err = frac_power_iterate(spec, t, tol, max_k)
        uses = k
        forward, reverse = spec.iterate(k), spec.iterate(-k)
        details.update(k=k, angle_error=err)

    out_f = apply(forward, a)
    out_r = apply(reverse, a)
    # compare signed overlaps: near theta = pi/2 the wrong direction lands on
    # -target, which fidelity cannot tell apart but a parent node can
    keep_f = inner(out_f, target).real >= inner(out_r, target).real
    out = out_f if keep_f else out_r
    fid = fidelity(out, target)
    details["direction"] = "forward" if keep_f else "inverse"
    details["reverse_fidelity"] = fidelity(out_r if keep_f else out_f, target)

    ledger.charge(cost_a)
    ledger.charge(r_cost, uses)
    return CombineReport(out, fid, 1, ledger, method, rounds=uses, details=details)


# ---------------------------------------------------------------------------
# many states, one shot


def _multi_setup(states, coeffs, prep_costs):
    if len(states) < 2:
        raise ValueError("need at least two states")
    if len(states) != len(coeffs):
        raise ValueError("states and coeffs differ in length")
    n = _check_common_dim(states)
    costs = _default_costs(prep_costs, len(states))
    states, coeffs = absorb_signs(states, coeffs)
    y = combination_vector(states, coeffs)
    target = exact_combination(states, coeffs)
    return n, costs, states, np.array(coeffs), float(np.linalg.norm(y)), target


def combine_multi_v1(states, coeffs, rng=None, use_amplification=False, prep_costs=None) -> CombineReport:
    """Uniform index register, controlled preparation, controlled weight rotation.

    Registers are ``index (m) (x) flag (2) (x) system (n)``; success means
    index 0 and flag 0, with probability ``||y||^2 / (max alpha^2 m^2)``.
    """
    rng = as_rng(rng)
    n, costs, states, alpha, norm_y, target = _multi_setup(states, coeffs, prep_costs)
    m = len(states)
    t = 1.0 / alpha.max()

    F = prep_unitary(uniform_state(m), cost=_coefficient_loader_cost(m))
    blocks = [
        KronOp(ry_op(t * alpha[j]), prep_unitary(states[j], costs[j]), cost=CostLedger(elementary_ops=1))
        for j in range(m)
    ]
    A = compose(KronOp(F.dagger(), IdentityOp(2 * n)), ControlledOp(blocks), KronOp(F, IdentityOp(2 * n)))

    closed = norm_y**2 / (alpha.max() ** 2 * m**2)
    ledger = CostLedger()
    out, p, attempts, rounds, state = run_postselected(
        A, 2 * m, rng, use_amplification, math.sqrt(closed), ledger
    )
    return CombineReport(
        output=out,
        target_fidelity=fidelity(out, target),
        attempts=attempts,
        ledger=ledger,
        method="multi-v1",
        success_probability=p,
        rounds=rounds,
        details={"closed_form_probability": closed, "amplified": bool(use_amplification)},
        final_state=state,
    )


def combine_multi_v2(states, coeffs, rng=None, use_amplification=False, prep_costs=None) -> CombineReport:
    """Coefficient-loading ``S|0> = sum_j sqrt(alpha_j / s)|j>`` around a controlled preparation.

    Success (index register back in 0) has probability ``||y||^2 / s^2``
    with ``s = sum_j |alpha_j|``.
    """
    rng = as_rng(rng)
    n, costs, states, alpha, norm_y, target = _multi_setup(states, coeffs, prep_costs)
    m = len(states)
    s = float(alpha.sum())

    S = prep_unitary(new_state(np.sqrt(alpha)), cost=_coefficient_loader_cost(m))
    ctrl = ControlledOp([prep_unitary(x, c) for x, c in zip(states, costs)])
    A = compose(KronOp(S.dagger(), IdentityOp(n)), ctrl, KronOp(S, IdentityOp(n)))

    closed = norm_y**2 / s**2
    ledger = CostLedger()
    out, p, attempts, rounds, state = run_postselected(A, m, rng, use_amplification, math.sqrt(closed), ledger)
    return CombineReport(
        output=out,
        target_fidelity=fidelity(out, target),
        attempts=attempts,
        ledger=ledger,
        method="multi-v2",
        success_probability=p,
        rounds=rounds,
        details={"closed_form_probability": closed, "amplified": bool(use_amplification)},
        final_state=state,
    )


# ---------------------------------------------------------------------------
# recursive pairwise tree


@dataclass
class _Node:
    state: StateVector
    coeff: float
    cost: CostLedger
    path: tuple


def _merge(left: _Node, right: _Node, epsilon0, variant, rng, angles, cost_model, level, index):
    path = (level, index)
    if right.coeff == 0:
        return _Node(left.state, left.coeff, left.cost, path), {"pass": "left"}
    if left.coeff == 0:
        return _Node(right.state, right.coeff, right.cost, path), {"pass": "right"}
    c = inner(left.state, right.state).real
    if residual_sin(left.state, right.state) <= COLLINEAR_TOL:
        if c > 0:
            return _Node(left.state, left.coeff + right.coeff, left.cost, path), {"collinear": "parallel"}
        diff = left.coeff - right.coeff
        if abs(diff) < ZERO_SUM_TOL * max(left.coeff, right.coeff):
            raise ZeroSum(f"node {path} cancels", path=path)
        keep = left if diff > 0 else right
        return _Node(keep.state, abs(diff), keep.cost, path), {"collinear": "antiparallel"}

    try:
        rep = combine2_rotation(
            left.state, right.state, left.coeff, right.coeff, epsilon0, variant, rng,
            prep_costs=[left.cost, right.cost], angles=angles, cost_model=cost_model,
        )
    except ZeroSum as exc:
        raise ZeroSum(f"node {path} cancels", path=path) from exc
    c_used = rep.details["overlap_used"]
    coeff = math.sqrt(max(0.0, left.coeff**2 + right.coeff**2 + 2 * left.coeff * right.coeff * c_used))
    if coeff < ZERO_SUM_TOL:
        raise ZeroSum(f"node {path} cancels", path=path)
    info = {k: rep.details[k] for k in ("phi", "theta", "t")}
    info["node_fidelity"] = rep.target_fidelity
    return _Node(rep.output, coeff, rep.ledger, path), info


def combine_recursive(
    states,
    coeffs,
    epsilon0=0.01,
    variant="pe",
    rng=None,
    *,
    angles="exact",
    prep_costs=None,
    cost_model="sampling",
) -> CombineReport:
    """Combine ``m = 2**k`` states level by level with two-state rotations.

    Each node is produced at precision ``epsilon0``; its new weight is
    ``||alpha x + alpha' x'||``.  A node's cost is the ledger of one
    preparation of it, so costs compound multiplicatively up the tree.
    """
    if not 0.0 < epsilon0 < 0.5:
        raise ValueError("epsilon0 must lie in (0, 1/2)")
    rng = as_rng(rng)
    if len(states) < 2 or len(states) != len(coeffs):
        raise ValueError("need matching states and coeffs, at least two")
    _check_common_dim(states)
    costs = _default_costs(prep_costs, len(states))
    states, coeffs = absorb_signs(states, coeffs)
    target = exact_combination(states, coeffs, path=("root",))

    m = len(states)
    size = 1 << (m - 1).bit_length()
    nodes = [_Node(s, c, cost, (0, j)) for j, (s, c, cost) in enumerate(zip(states, coeffs, costs))]
    nodes += [_Node(states[0], 0.0, costs[0], (0, j)) for j in range(m, size)]

    trace = [{"level": 0, "coeffs": [n.coeff for n in nodes]}]
    level = 0
    while len(nodes) > 1:
        level += 1
        merged, infos = [], []
        for i in range(len(nodes) // 2):
            node, info = _merge(nodes[2 * i], nodes[2 * i + 1], epsilon0, variant, rng, angles, cost_model, level, i)
            merged.append(node)
            infos.append(info)
        nodes = merged
        trace.append({"level": level, "coeffs": [n.coeff for n in nodes], "nodes": infos})

    root = nodes[0]
    return CombineReport(
        output=root.state,
        target_fidelity=fidelity(root.state, target),
        attempts=1,
        ledger=root.cost.copy(),
        method="recursive",
        rounds=level,
        tree_trace=trace,
        details={"variant": variant, "epsilon0": epsilon0, "padded_m": size},
    )


# ---------------------------------------------------------------------------
# method comparison


def coefficient_profile(profile: str, m: int, rng=None) -> np.ndarray:
    """``uniform``, ``ratio:<R>`` (geometric 1..R) or ``random`` weights."""
    if profile == "uniform":
        return np.ones(m)
    if profile.startswith("ratio:"):
        return np.geomspace(1.0, float(profile.split(":", 1)[1]), m)
    if profile == "random":
        return as_rng(rng).generator.uniform(0.5, 2.0, size=m)
    raise ValueError(f"unknown coefficient profile {profile!r}")


def random_real_states(m: int, dim: int, rng, orthonormal: bool = False) -> list:
    gen = as_rng(rng).generator
    if orthonormal:
        if m > dim:
            raise ValueError("cannot draw more orthonormal states than the dimension")
        q, _ = np.linalg.qr(gen.normal(size=(dim, m)))
        return [new_state(q[:, j]) for j in range(m)]
    return [new_state(gen.normal(size=dim)) for _ in range(m)]


def table1_bench(grid, epsilon=0.01, variant="eig", seed=0) -> list[dict]:
    """Run the one-shot and recursive methods on a grid of cells.

    Each cell is a dict with ``m``, ``profile``, ``dim`` and optionally
    ``orthonormal``.  Returns one row per (cell, method).
    """
    rows = []
    for idx, cell in enumerate(grid):
        rng = as_rng(seed).child(idx)
        m, dim = int(cell["m"]), int(cell["dim"])
        states = random_real_states(m, dim, rng.child(0), bool(cell.get("orthonormal", False)))
        coeffs = coefficient_profile(cell["profile"], m, rng.child(1))
        key = f"m={m}/profile={cell['profile']}/dim={dim}/orthonormal={bool(cell.get('orthonormal', False))}"
        runs = {
            "multi-v1": partial(combine_multi_v1, states, coeffs, rng.child(2)),
            "multi-v2": partial(combine_multi_v2, states, coeffs, rng.child(3)),
            "recursive": partial(combine_recursive, states, coeffs, epsilon / m, variant, rng.child(4)),
        }
        for name, run in runs.items():
            row = {"cell": key, "method": name, "m": m, "profile": cell["profile"], "dim": dim}
            try:
                rep = run()
            except ZeroSum as exc:
                row.update(status="failure", error=str(exc))
            else:
                row.update(
                    status="ok",
                    fidelity=rep.target_fidelity,
                    success_probability=rep.success_probability,
                    expected_attempts=rep.expected_attempts,
                    attempts=rep.attempts,
                    ledger=rep.ledger.as_dict(),
                )
            rows.append(row)
    return rows
