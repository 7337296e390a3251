"""Dense statevector simulation with structured unitary operators.

States are normalized complex vectors.  Operators act on column stacks of
shape ``(dim, k)`` and only materialize a dense matrix when ``.matrix`` is
requested, which keeps reflections, oracles and controlled preparations
cheap at dimensions of a few thousand.

Multi-register layouts are ancilla-major: the ancilla index varies slowest,
so a state on ``ancilla (x) system`` is ``amps.reshape(ancilla_dim, -1)``.
"""

from __future__ import annotations

import math
from dataclasses import astuple, dataclass, fields
from functools import cached_property

import numpy as np

from .errors import AmplitudeMismatch, DimMismatch, ZeroProbability, ZeroVector

NORM_TOL = 1e-10
UNITARY_TOL = 1e-8
HERMITIAN_TOL = 1e-10
ZERO_TOL = 1e-14


@dataclass
class CostLedger:
    """Abstract cost counters.

    ``input_preps`` is measured in units of one input-state preparation and
    ``elementary_ops`` in units of whatever primitive the charging operation
    declares.  A ledger is an accumulator owned by a single trial.
    """

    oracle_queries: int = 0
    input_preps: int = 0
    elementary_ops: int = 0
    estimator_samples: int = 0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if v < 0:
                raise ValueError(f"{f.name} must be non-negative, got {v}")

    def __add__(self, other: CostLedger) -> CostLedger:
        return CostLedger(*(a + b for a, b in zip(astuple(self), astuple(other))))

    def __mul__(self, k: int) -> CostLedger:
        k = int(k)
        return CostLedger(*(a * k for a in astuple(self)))

    __rmul__ = __mul__

    def charge(self, other: CostLedger, times: int = 1) -> CostLedger:
        for f in fields(self):
            setattr(self, f.name, getattr(self, f.name) + int(times) * getattr(other, f.name))
        return self

    def copy(self) -> CostLedger:
        return CostLedger(*astuple(self))

    def as_dict(self) -> dict:
        return {f.name: int(getattr(self, f.name)) for f in fields(self)}


class RandomSource:
    """Seeded random stream; identical seeds give identical sample streams."""

    def __init__(self, seed: int = 0, spawn_key: tuple = ()):
        self.seed = int(seed)
        self.spawn_key = tuple(int(k) for k in spawn_key)
        self.generator = np.random.default_rng(
            np.random.SeedSequence(self.seed, spawn_key=self.spawn_key)
        )

    def child(self, *keys: int) -> RandomSource:
        return RandomSource(self.seed, self.spawn_key + tuple(keys))

    def random(self) -> float:
        return float(self.generator.random())

    def __repr__(self):
        return f"RandomSource(seed={self.seed}, spawn_key={self.spawn_key})"


def as_rng(rng) -> RandomSource:
    if rng is None:
        return RandomSource(0)
    if isinstance(rng, RandomSource):
        return rng
    return RandomSource(int(rng))


class StateVector:
    """Normalized complex amplitude vector (read-only)."""

    __slots__ = ("amplitudes",)

    def __init__(self, amplitudes):
        amps = np.array(amplitudes, dtype=complex)
        if amps.ndim != 1 or amps.size < 1:
            raise ValueError("a state needs a non-empty 1-d amplitude vector")
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"amplitudes not normalized (norm={norm!r})")
        amps.setflags(write=False)
        self.amplitudes = amps

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def __len__(self):
        return self.dim

    def __neg__(self) -> StateVector:
        return StateVector(-self.amplitudes)

    def is_real(self, tol: float = 1e-10) -> bool:
        return bool(np.all(np.abs(self.amplitudes.imag) <= tol))

    @property
    def real(self) -> np.ndarray:
        return self.amplitudes.real.copy()

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def __repr__(self):
        return f"StateVector(dim={self.dim})"


def _renormalized(amps: np.ndarray) -> StateVector:
    norm = np.linalg.norm(amps)
    if norm < ZERO_TOL:
        raise ZeroVector("vector norm is zero")
    return StateVector(amps / norm)


def new_state(raw) -> StateVector:
    """Normalize ``raw`` into a state."""
    amps = np.asarray(raw, dtype=complex).ravel()
    if amps.size < 1 or np.linalg.norm(amps) < ZERO_TOL:
        raise ZeroVector("cannot normalize a zero vector")
    return _renormalized(amps)


def basis_state(dim: int, k: int = 0) -> StateVector:
    amps = np.zeros(dim, dtype=complex)
    amps[k] = 1.0
    return StateVector(amps)


def uniform_state(dim: int, support=None) -> StateVector:
    amps = np.zeros(dim, dtype=complex)
    if support is None:
        amps[:] = 1.0
    else:
        amps[np.asarray(support, dtype=int)] = 1.0
    return new_state(amps)


def _check_dims(a: int, b: int):
    if a != b:
        raise DimMismatch(f"dimension mismatch: {a} vs {b}")


# ---------------------------------------------------------------------------
# operators


class UnitaryOp:
    """Base class: a unitary acting on ``dim`` amplitudes with a cost tag."""

    dim: int
    cost: CostLedger

    def _forward(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _adjoint(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def act(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=complex)
        if x.shape[0] != self.dim:
            raise DimMismatch(f"operator dim {self.dim} applied to length {x.shape[0]}")
        if x.ndim == 1:
            return self._forward(x.reshape(self.dim, 1)).ravel()
        return self._forward(x)

    def act_adjoint(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=complex)
        if x.shape[0] != self.dim:
            raise DimMismatch(f"operator dim {self.dim} applied to length {x.shape[0]}")
        if x.ndim == 1:
            return self._adjoint(x.reshape(self.dim, 1)).ravel()
        return self._adjoint(x)

    @cached_property
    def matrix(self) -> np.ndarray:
        return self._forward(np.eye(self.dim, dtype=complex))

    def dagger(self) -> UnitaryOp:
        return AdjointOp(self)

    def __matmul__(self, other: UnitaryOp) -> UnitaryOp:
        return compose(self, other)

    def unitarity_error(self) -> float:
        m = self.matrix
        return float(np.max(np.abs(m.conj().T @ m - np.eye(self.dim))))


class DenseOp(UnitaryOp):
    def __init__(self, matrix, cost: CostLedger | None = None, check: bool = True):
        m = np.array(matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("matrix must be square")
        if check:
            err = np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0])))
            if err > UNITARY_TOL:
                raise ValueError(f"matrix is not unitary (max deviation {err:.3e})")
        m.setflags(write=False)
        self.dim = m.shape[0]
        self.cost = cost or CostLedger()
        self.__dict__["matrix"] = m

    def _forward(self, x):
        return self.matrix @ x

    def _adjoint(self, x):
        return self.matrix.conj().T @ x


class IdentityOp(UnitaryOp):
    def __init__(self, dim: int, cost: CostLedger | None = None):
        self.dim = int(dim)
        self.cost = cost or CostLedger()

    def _forward(self, x):
        return x.copy()

    _adjoint = _forward


class DiagonalOp(UnitaryOp):
    def __init__(self, diagonal, cost: CostLedger | None = None):
        d = np.array(diagonal, dtype=complex).ravel()
        if np.max(np.abs(np.abs(d) - 1.0)) > UNITARY_TOL:
            raise ValueError("diagonal entries must have unit modulus")
        d.setflags(write=False)
        self.diagonal = d
        self.dim = d.size
        self.cost = cost or CostLedger()

    def _forward(self, x):
        return self.diagonal[:, None] * x

    def _adjoint(self, x):
        return self.diagonal.conj()[:, None] * x


class ReflectionOp(UnitaryOp):
    """``phase * (I - 2|v><v|)`` for a unit vector ``v``."""

    def __init__(self, v, cost: CostLedger | None = None, phase: complex = 1.0):
        v = np.array(v, dtype=complex).ravel()
        n = np.linalg.norm(v)
        if n < ZERO_TOL:
            raise ZeroVector("reflection axis is zero")
        self.axis = v / n
        self.axis.setflags(write=False)
        self.phase = complex(phase)
        self.dim = v.size
        self.cost = cost or CostLedger()

    def _reflect(self, x):
        return x - 2.0 * np.outer(self.axis, self.axis.conj() @ x)

    def _forward(self, x):
        return self.phase * self._reflect(x)

    def _adjoint(self, x):
        return self.phase.conjugate() * self._reflect(x)


class KronOp(UnitaryOp):
    """``first (x) second`` with ``first`` on the slow (ancilla) register."""

    def __init__(self, first: UnitaryOp, second: UnitaryOp, cost: CostLedger | None = None):
        self.first = first
        self.second = second
        self.dim = first.dim * second.dim
        self.cost = first.cost + second.cost + (cost or CostLedger())

    def _apply(self, x, fa, fb):
        da, db = self.first.dim, self.second.dim
        k = x.shape[1]
        t = x.reshape(da, db, k)
        if not isinstance(self.second, IdentityOp):
            t = fb(t.transpose(1, 0, 2).reshape(db, da * k)).reshape(db, da, k).transpose(1, 0, 2)
        if not isinstance(self.first, IdentityOp):
            t = fa(np.ascontiguousarray(t).reshape(da, db * k)).reshape(da, db, k)
        return np.ascontiguousarray(t).reshape(da * db, k)

    def _forward(self, x):
        return self._apply(x, self.first._forward, self.second._forward)

    def _adjoint(self, x):
        return self._apply(x, self.first._adjoint, self.second._adjoint)


class ControlledOp(UnitaryOp):
    """Block-diagonal ``sum_j |j><j| (x) blocks[j]``; control register slowest."""

    def __init__(self, blocks, cost: CostLedger | None = None):
        blocks = list(blocks)
        if not blocks:
            raise ValueError("need at least one block")
        d = blocks[0].dim
        for b in blocks:
            _check_dims(d, b.dim)
        self.blocks = blocks
        self.block_dim = d
        self.dim = d * len(blocks)
        total = cost or CostLedger()
        for b in blocks:
            total = total + b.cost
        self.cost = total

    def _apply(self, x, adjoint):
        k = x.shape[1]
        t = x.reshape(len(self.blocks), self.block_dim, k)
        out = np.empty_like(t)
        for j, b in enumerate(self.blocks):
            out[j] = b._adjoint(t[j]) if adjoint else b._forward(t[j])
        return out.reshape(self.dim, k)

    def _forward(self, x):
        return self._apply(x, False)

    def _adjoint(self, x):
        return self._apply(x, True)


class MultiplexedRotationOp(UnitaryOp):
    """Flag-qubit rotation conditioned on a register index.

    Layout is ``flag (x) register`` (flag slowest).  For register index ``k``
    the flag receives ``[[c_k, -s_k], [s_k, c_k]]`` with ``s_k = sqrt(1-c_k^2)``,
    so ``|0>|k> -> c_k|0>|k> + s_k|1>|k>``.
    """

    def __init__(self, cosines, cost: CostLedger | None = None):
        c = np.array(cosines, dtype=float).ravel()
        if np.any(np.abs(c) > 1.0 + 1e-12):
            raise ValueError("rotation cosines must lie in [-1, 1]")
        c = np.clip(c, -1.0, 1.0)
        self.cos = c
        self.sin = np.sqrt(1.0 - c * c)
        self.register_dim = c.size
        self.dim = 2 * c.size
        self.cost = cost or CostLedger()

    def _apply(self, x, sign):
        n = self.register_dim
        x0, x1 = x[:n], x[n:]
        c, s = self.cos[:, None], sign * self.sin[:, None]
        return np.concatenate([c * x0 - s * x1, s * x0 + c * x1])

    def _forward(self, x):
        return self._apply(x, 1.0)

    def _adjoint(self, x):
        return self._apply(x, -1.0)


class PlaneRotationOp(UnitaryOp):
    """Rotation by ``angle`` inside span{e1, e2}, from e1 toward e2.

    ``e1, e2`` are real orthonormal; the orthogonal complement is left
    untouched.
    """

    def __init__(self, e1, e2, angle: float, cost: CostLedger | None = None):
        e1 = np.asarray(e1, dtype=float).ravel()
        e2 = np.asarray(e2, dtype=float).ravel()
        _check_dims(e1.size, e2.size)
        self.e1, self.e2 = e1, e2
        self.angle = float(angle)
        self.dim = e1.size
        self.cost = cost or CostLedger()

    def _rotate(self, x, angle):
        c, s = math.cos(angle), math.sin(angle)
        p1 = self.e1 @ x
        p2 = self.e2 @ x
        return x + np.outer(self.e1, (c - 1.0) * p1 - s * p2) + np.outer(self.e2, s * p1 + (c - 1.0) * p2)

    def _forward(self, x):
        return self._rotate(x, self.angle)

    def _adjoint(self, x):
        return self._rotate(x, -self.angle)


class ProductOp(UnitaryOp):
    """Operators applied in sequence: ``ops[0]`` first."""

    def __init__(self, ops, cost: CostLedger | None = None):
        ops = list(ops)
        for o in ops[1:]:
            _check_dims(ops[0].dim, o.dim)
        self.ops = ops
        self.dim = ops[0].dim
        total = cost or CostLedger()
        for o in ops:
            total = total + o.cost
        self.cost = total

    def _forward(self, x):
        for o in self.ops:
            x = o._forward(x)
        return x

    def _adjoint(self, x):
        for o in reversed(self.ops):
            x = o._adjoint(x)
        return x


class AdjointOp(UnitaryOp):
    def __init__(self, op: UnitaryOp):
        self.op = op
        self.dim = op.dim
        self.cost = op.cost

    def _forward(self, x):
        return self.op._adjoint(x)

    def _adjoint(self, x):
        return self.op._forward(x)

    def dagger(self):
        return self.op


def compose(*ops: UnitaryOp) -> UnitaryOp:
    """Matrix product ``ops[0] @ ops[1] @ ...`` (rightmost acts first)."""
    return ProductOp(list(reversed(ops)))


class HermitianOp:
    """Dense Hermitian matrix (a generator ``A`` with ``U = exp(-iA)``)."""

    def __init__(self, matrix):
        m = np.array(matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("matrix must be square")
        err = np.max(np.abs(m - m.conj().T)) if m.size else 0.0
        if err > HERMITIAN_TOL * max(1.0, np.max(np.abs(m))):
            raise ValueError(f"matrix is not Hermitian (max deviation {err:.3e})")
        m = 0.5 * (m + m.conj().T)
        m.setflags(write=False)
        self.matrix = m
        self.dim = m.shape[0]

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)


def hadamard_op(cost: CostLedger | None = None) -> DenseOp:
    return DenseOp(np.array([[1, 1], [1, -1]]) / math.sqrt(2), cost=cost)


def ry_op(cosine: float) -> DenseOp:
    """Real rotation with ``|0> -> c|0> + s|1>``."""
    c = float(np.clip(cosine, -1.0, 1.0))
    s = math.sqrt(1.0 - c * c)
    return DenseOp(np.array([[c, -s], [s, c]]), check=False)


# ---------------------------------------------------------------------------
# state operations


def apply(U: UnitaryOp, s: StateVector, ledger: CostLedger | None = None) -> StateVector:
    _check_dims(U.dim, s.dim)
    out = U.act(s.amplitudes)
    if ledger is not None:
        ledger.charge(U.cost)
    return _renormalized(out)


def inner(a: StateVector, b: StateVector) -> complex:
    """``<a|b>``, conjugating ``a``."""
    _check_dims(a.dim, b.dim)
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def fidelity(a: StateVector, b: StateVector) -> float:
    return abs(inner(a, b)) ** 2


def tensor(a: StateVector, b: StateVector) -> StateVector:
    return _renormalized(np.kron(a.amplitudes, b.amplitudes))


def tensor_op(U: UnitaryOp, V: UnitaryOp) -> UnitaryOp:
    return KronOp(U, V)


def measure(s: StateVector, shots: int, rng) -> dict[int, int]:
    """Histogram of basis indices over ``shots`` projective measurements."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    rng = as_rng(rng)
    p = s.probabilities()
    p = p / p.sum()
    counts = rng.generator.multinomial(int(shots), p)
    return {int(k): int(counts[k]) for k in np.flatnonzero(counts)}


def postselect(s: StateVector, ancilla_dim: int, value: int = 0) -> tuple[float, StateVector]:
    """Condition the leading ``ancilla_dim`` register on ``value``."""
    if ancilla_dim < 1 or s.dim % ancilla_dim:
        raise DimMismatch(f"ancilla dim {ancilla_dim} does not divide state dim {s.dim}")
    block = s.amplitudes.reshape(ancilla_dim, -1)[value]
    p = float(np.vdot(block, block).real)
    if p < ZERO_TOL:
        raise ZeroProbability(f"ancilla value {value} has probability {p:.3e}")
    return p, StateVector(block / math.sqrt(p))


def reflect_about(v: StateVector, cost: CostLedger | None = None) -> ReflectionOp:
    """``I - 2|v><v|``."""
    return ReflectionOp(v.amplitudes, cost=cost)


def prep_unitary(state: StateVector, cost: CostLedger | None = None) -> UnitaryOp:
    """A Householder-type unitary ``U`` with ``U|0> = state`` exactly.

    For real states the result is a real reflection, hence Hermitian and
    self-inverse.
    """
    psi = state.amplitudes
    x0 = psi[0]
    gamma = 0.0
    if abs(x0.imag) > 0.0:
        # the phase that makes x0 real, folded into (-pi/2, pi/2]
        gamma = math.atan2(x0.imag, x0.real)
        if gamma > math.pi / 2:
            gamma -= math.pi
        elif gamma <= -math.pi / 2:
            gamma += math.pi
    phase = complex(math.cos(gamma), math.sin(gamma))
    w = psi * phase.conjugate()
    u = -w
    u[0] += 1.0
    if np.linalg.norm(u) < 1e-15:
        return DiagonalOp(np.full(state.dim, phase), cost=cost)
    if w[0].real > 0:
        # e0 - w cancels when w is close to e0; -(I - 2|u><u|) with
        # u = e0 + w also maps e0 to w and is well conditioned
        u = w.copy()
        u[0] += 1.0
        phase = -phase
    return ReflectionOp(u, cost=cost, phase=phase)


def _good_mask(good, dim: int) -> np.ndarray:
    g = np.asarray(good)
    if g.dtype == bool:
        if g.size != dim:
            raise DimMismatch("good-subspace mask has the wrong length")
        return g
    mask = np.zeros(dim, dtype=bool)
    mask[g.astype(int)] = True
    return mask


def amplitude_amplify(
    A: UnitaryOp,
    good,
    known_amplitude: float,
    initial: StateVector | None = None,
    ledger: CostLedger | None = None,
    tol: float = 1e-6,
) -> tuple[StateVector, int]:
    """Boost the good-subspace amplitude of ``A|initial>``.

    ``good`` is an index array or boolean mask of computational basis states.
    Runs ``floor(pi / (4 asin(a)))`` rounds of ``-(I - 2|psi><psi|)(I - 2P)``
    where ``|psi> = A|initial>``; the reflection about ``|psi>`` stands for
    ``A S_0 A^dagger`` and is charged as two uses of ``A``.
    """
    a = float(known_amplitude)
    if not 0.0 < a <= 1.0:
        raise ValueError("known_amplitude must lie in (0, 1]")
    if initial is None:
        initial = basis_state(A.dim, 0)
    _check_dims(A.dim, initial.dim)
    mask = _good_mask(good, A.dim)
    psi0 = A.act(initial.amplitudes)
    p_good = float(np.sum(np.abs(psi0[mask]) ** 2))
    if abs(math.sqrt(p_good) - a) > tol:
        raise AmplitudeMismatch(
            f"good-subspace amplitude {math.sqrt(p_good):.9f} differs from stated {a:.9f}"
        )
    # the small offset keeps exact integers (a = sin(pi/4), ...) from rounding down
    rounds = math.floor(math.pi / (4.0 * math.asin(a)) + 1e-9)
    about = reflect_about(StateVector(psi0 / np.linalg.norm(psi0)))
    psi = psi0.reshape(-1, 1)
    for _ in range(rounds):
        psi = psi.copy()
        psi[mask] *= -1.0
        psi = -about._forward(psi)
    if ledger is not None:
        ledger.charge(A.cost, 2 * rounds + 1)
    return _renormalized(psi.ravel()), rounds
