"""Loading a classical real vector ``x`` into the amplitudes of a state.

Routes, from plain to structured:

* ``prep_naive``: a Householder unitary with ``x/||x||`` as first column,
* ``prep_uniformish``: uniform superposition over the support plus a flag
  rotation by ``x_k / max|x|``, post-selected; cost grows with the
  uniformity ratio ``kappa = max|x| / min nonzero |x|``,
* ``prep_thm1``: split ``x`` into dyadic magnitude bins (each with
  ``kappa <= 2``) and recombine them with the coefficient-loaded LCU,
* ``prep_thm2``: write ``x = z - y`` with ``y = M sign(x)`` and
  ``z = x + y`` (both nearly uniform), and rotate between them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ZeroVector
from .lcu import (
    CombineReport,
    combine2_rotation,
    combine_multi_v1,
    combine_multi_v2,
    run_postselected,
)
from .qcore import (
    CostLedger,
    IdentityOp,
    KronOp,
    MultiplexedRotationOp,
    StateVector,
    UnitaryOp,
    as_rng,
    basis_state,
    compose,
    fidelity,
    new_state,
    prep_unitary,
    uniform_state,
)

PREP_METHODS = ("naive", "prop2", "thm1", "thm2")


@dataclass(frozen=True)
class ClassicalVector:
    entries: np.ndarray

    def __post_init__(self):
        x = np.array(self.entries, dtype=float).ravel()
        if x.size < 1:
            raise ZeroVector("empty vector")
        if not np.all(np.isfinite(x)):
            raise ValueError("entries must be finite")
        if not np.any(x != 0):
            raise ZeroVector("vector has no nonzero entry")
        x.setflags(write=False)
        object.__setattr__(self, "entries", x)

    @property
    def n(self) -> int:
        return self.entries.size

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.entries)

    @property
    def max_abs(self) -> float:
        return float(np.max(np.abs(self.entries)))

    @property
    def min_abs_nonzero(self) -> float:
        return float(np.min(np.abs(self.entries[self.support])))

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.entries))

    @property
    def kappa(self) -> float:
        return self.max_abs / self.min_abs_nonzero

    def state(self) -> StateVector:
        return new_state(self.entries)


def as_vector(x) -> ClassicalVector:
    return x if isinstance(x, ClassicalVector) else ClassicalVector(x)


def _log_cost(n: int) -> CostLedger:
    return CostLedger(elementary_ops=max(1, math.ceil(math.log2(max(n, 2)))))


def prep_naive(x) -> tuple[UnitaryOp, StateVector]:
    """Householder unitary ``U`` with ``U|0> = x/||x||``; tagged ``n**2`` gates."""
    v = as_vector(x)
    U = prep_unitary(v.state(), cost=CostLedger(elementary_ops=v.n**2))
    return U, StateVector(U.act(basis_state(v.n, 0).amplitudes))


def _single_entry_report(v: ClassicalVector, method: str) -> CombineReport:
    k = int(v.support[0])
    out = StateVector(np.sign(v.entries[k]) * basis_state(v.n, k).amplitudes)
    return CombineReport(out, 1.0, 1, _log_cost(v.n), method, details={"kappa": 1.0, "support": 1})


def prep_uniformish(x, rng=None, use_amplification=False, circuit="merged") -> CombineReport:
    """Flag-rotation preparation, post-selected on flag 0.

    ``circuit="merged"`` prepares the uniform superposition over the ``n'``
    nonzero indices and rotates the flag by ``x_k / max|x|``; the success
    probability is ``||x||^2 / (n' max|x|^2) >= 1/kappa^2``.
    ``circuit="lcu1"`` instead runs the uniform-index LCU over basis states,
    which has the weaker success probability ``||x||^2 / (n' max|x|)^2``.
    """
    v = as_vector(x)
    rng = as_rng(rng)
    if v.support.size == 1:
        return _single_entry_report(v, "prop2")
    n, support = v.n, v.support
    if circuit == "lcu1":
        states = [basis_state(n, int(k)) for k in support]
        rep = combine_multi_v1(states, v.entries[support], rng, use_amplification, [_log_cost(n)] * support.size)
        rep.method = "prop2-lcu1"
        rep.details["kappa"] = v.kappa
        return rep
    if circuit != "merged":
        raise ValueError(f"unknown circuit {circuit!r}")

    spread = prep_unitary(uniform_state(n, support), cost=_log_cost(n))
    rotate = MultiplexedRotationOp(v.entries / v.max_abs, cost=_log_cost(n))
    A = compose(rotate, KronOp(IdentityOp(2), spread))
    closed = v.norm**2 / (support.size * v.max_abs**2)
    ledger = CostLedger()
    out, p, attempts, rounds, state = run_postselected(A, 2, rng, use_amplification, math.sqrt(closed), ledger)
    return CombineReport(
        output=out,
        target_fidelity=fidelity(out, v.state()),
        attempts=attempts,
        ledger=ledger,
        method="prop2",
        success_probability=p,
        rounds=rounds,
        details={"closed_form_probability": closed, "kappa": v.kappa, "support": int(support.size)},
        final_state=state,
    )


@dataclass(frozen=True)
class BinDecomposition:
    bins: list
    intervals: list
    lambdas: list
    q: int

    def nonempty(self) -> list[int]:
        return [j for j, y in enumerate(self.bins) if np.any(y != 0)]


def bin_count(kappa_num: float, kappa_den: float) -> int:
    """Smallest ``q >= 1`` with ``max <= 2**q * min``, computed without rounding."""
    q = 1
    while math.ldexp(kappa_den, q) < kappa_num:
        q += 1
    return q


def decompose_bins(x) -> BinDecomposition:
    """Split ``x`` by magnitude into ``[2**(j-1) m, 2**j m)``, ``m = min nonzero |x|``.

    The last bin is closed on the right so ``max|x|`` always fits.  Entries
    are copied, so the bins sum back to ``x`` exactly.
    """
    v = as_vector(x)
    mn, mx = v.min_abs_nonzero, v.max_abs
    q = bin_count(mx, mn)
    mag = np.abs(v.entries)
    bins, intervals, lambdas = [], [], []
    for j in range(1, q + 1):
        lo, hi = math.ldexp(mn, j - 1), math.ldexp(mn, j)
        mask = (mag >= lo) & ((mag <= hi) if j == q else (mag < hi))
        y = np.where(mask, v.entries, 0.0)
        bins.append(y)
        intervals.append((lo, hi))
        lambdas.append(float(np.linalg.norm(y)) / v.norm)
    return BinDecomposition(bins=bins, intervals=intervals, lambdas=lambdas, q=q)


def prep_thm1(x, rng=None, use_amplification=False) -> CombineReport:
    """Prepare each magnitude bin with ``prep_uniformish``, then combine them.

    The combination succeeds with probability ``(||x|| / sum_j ||y_j||)**2``,
    at least ``1/q``.
    """
    v = as_vector(x)
    rng = as_rng(rng)
    dec = decompose_bins(v)
    idx = dec.nonempty()
    bin_reports = [prep_uniformish(dec.bins[j], rng.child(1, j)) for j in idx]
    details = {
        "kappa": v.kappa,
        "q": dec.q,
        "lambdas": dec.lambdas,
        "bin_attempts": [r.attempts for r in bin_reports],
    }
    if len(idx) == 1:
        rep = bin_reports[0]
        rep.method = "thm1"
        rep.details.update(details)
        return rep
    rep = combine_multi_v2(
        [r.output for r in bin_reports],
        [dec.lambdas[j] for j in idx],
        rng.child(2),
        use_amplification,
        prep_costs=[r.ledger for r in bin_reports],
    )
    rep.method = "thm1"
    rep.target_fidelity = fidelity(rep.output, v.state())
    rep.details.update(details)
    return rep


@dataclass(frozen=True)
class SignShift:
    M: float
    y: np.ndarray
    z: np.ndarray
    coefficients: tuple = field(default=(0.0, 0.0))

    def bound_ratio(self, x_norm: float) -> float:
        """``(||y||^2 + ||z||^2) / ||x||^2``, the sampling overhead of the plain LCU route."""
        return (float(self.y @ self.y) + float(self.z @ self.z)) / x_norm**2


def sign_shift(x, M: float | None = None) -> SignShift:
    """``y = M sign(x)`` with ``sign(0) = +1`` and ``z = x + y``, so ``z - y = x``."""
    v = as_vector(x)
    M = v.max_abs if M is None else float(M)
    sign = np.where(v.entries < 0, -1.0, 1.0)
    y = M * sign
    z = v.entries + y
    return SignShift(M=M, y=y, z=z, coefficients=(np.linalg.norm(z) / v.norm, np.linalg.norm(y) / v.norm))


def prep_thm2(x, epsilon=0.01, variant="pe", rng=None, angles="exact") -> CombineReport:
    """Prepare ``x`` as ``||z|| |z> - ||y|| |y>`` via a two-state rotation.

    ``|y>`` has uniform magnitudes and ``|z>`` has ``kappa(z) <= 2``, so
    both are cheap; the rotation angles come from the known entries.
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    v = as_vector(x)
    rng = as_rng(rng)
    shift = sign_shift(v)
    ratio = shift.bound_ratio(v.norm)
    limit = 3.0 * v.kappa**2 + 1.0
    details = {
        "kappa": v.kappa,
        "kappa_z": float(np.max(np.abs(shift.z)) / np.min(np.abs(shift.z))),
        "bound_ratio": ratio,
        "bound_limit": limit,
        "bound_check": "pass" if ratio <= limit else "fail",
        # always valid for zero-free x; 3 kappa^2 + 1 only dominates it once kappa >= 2
        "bound_tight": 2.0 * v.kappa**2 + 2.0 * v.kappa + 1.0,
    }
    y_state = new_state(shift.y)
    # uniform magnitudes with sign phases: one layer of gates beyond the spread
    cost_y = _log_cost(v.n) + CostLedger(elementary_ops=1)
    if 1.0 - fidelity(y_state, v.state()) < 1e-15:
        # x is a multiple of y already: |x> = |y>
        return CombineReport(y_state, 1.0, 1, cost_y, "thm2", details=details | {"rotation": "none"})
    z_rep = prep_uniformish(shift.z, rng.child(1))
    rep = combine2_rotation(
        z_rep.output,
        y_state,
        shift.coefficients[0],
        -shift.coefficients[1],
        epsilon,
        variant,
        rng.child(2),
        prep_costs=[z_rep.ledger, cost_y],
        angles=angles,
    )
    rep.method = "thm2"
    rep.target_fidelity = fidelity(rep.output, v.state())
    rep.details.update(details, z_attempts=z_rep.attempts)
    return rep


def prepare(x, method: str, rng=None, epsilon=0.01, variant="pe", use_amplification=False) -> CombineReport:
    v = as_vector(x)
    if method == "naive":
        U, out = prep_naive(v)
        return CombineReport(out, fidelity(out, v.state()), 1, U.cost.copy(), "naive", details={"kappa": v.kappa})
    if method == "prop2":
        return prep_uniformish(v, rng, use_amplification)
    if method == "thm1":
        return prep_thm1(v, rng, use_amplification)
    if method == "thm2":
        return prep_thm2(v, epsilon, variant, rng)
    raise ValueError(f"unknown preparation method {method!r}")


def log_uniform_vector(n: int, kappa: float, rng, signed: bool = True) -> np.ndarray:
    """Random entries with log-uniform magnitudes spanning exactly ``[1, kappa]``."""
    gen = as_rng(rng).generator
    mag = np.exp(gen.uniform(0.0, math.log(kappa), size=n))
    if n >= 2:
        i, j = gen.choice(n, size=2, replace=False)
        mag[i], mag[j] = 1.0, kappa
    else:
        mag[:] = 1.0
    sign = gen.choice([-1.0, 1.0], size=n) if signed else np.ones(n)
    return sign * mag


def spike_vector(n: int, kappa: float) -> np.ndarray:
    """One entry ``kappa``, the rest 1: the least uniform profile at a given kappa."""
    x = np.ones(n)
    x[0] = kappa
    return x


def prep_bench(corpus, methods=PREP_METHODS, epsilon=0.01, seed=0, use_amplification=False) -> list[dict]:
    """One row per (vector, method) with fidelity, attempts and ledger."""
    corpus = list(corpus)
    if not corpus:
        raise ValueError("corpus is empty")
    rows = []
    for i, x in enumerate(corpus):
        v = as_vector(x)
        q = bin_count(v.max_abs, v.min_abs_nonzero)
        for j, m in enumerate(methods):
            rep = prepare(v, m, as_rng(seed).child(i, j), epsilon, use_amplification=use_amplification)
            rows.append(
                {
                    "vector": i,
                    "method": m,
                    "n": v.n,
                    "kappa": v.kappa,
                    "q": q,
                    "fidelity": rep.target_fidelity,
                    "attempts": rep.attempts,
                    "expected_attempts": rep.expected_attempts,
                    "success_probability": rep.success_probability,
                    "rounds": rep.rounds,
                    "ledger": rep.ledger.as_dict(),
                }
            )
    return rows
