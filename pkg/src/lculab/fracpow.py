"""Fractional powers ``U**t`` of unitaries, ``0 <= t <= 1``.

Three routes:

* eigendecomposition with the principal logarithm (exact),
* ideal phase-estimation quantization of the eigenphases to ``bits`` bits,
* integer iterates ``R**k`` of a plane rotation chosen so that ``k * angle``
  lands near ``t * angle`` modulo ``2 pi``.

Plane rotations ``R = (I - 2|b><b|)(I - 2|a><a|)`` are described by a
:class:`RotationSpec` whose generator is known in closed form.  Its angle
lives in ``(0, 2 pi)``, not on the principal branch, so ``spec.power(t)``
turns ``a`` toward ``b`` even when the principal logarithm of ``R`` would
turn it the other way.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (
    BranchAmbiguity,
    CollinearStates,
    NoApproximation,
    NonRealState,
    NumericalFailure,
)
from .qcore import (
    CostLedger,
    DenseOp,
    HermitianOp,
    IdentityOp,
    PlaneRotationOp,
    StateVector,
    UnitaryOp,
    inner,
    new_state,
)

TWO_PI = 2.0 * math.pi
BRANCH_TOL = 1e-10
COLLINEAR_TOL = 1e-10


@dataclass(frozen=True)
class EigenDecomp:
    phases: np.ndarray
    vectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        V = self.vectors
        return (V * np.exp(1j * self.phases)) @ V.conj().T


def eig_unitary(U: UnitaryOp) -> EigenDecomp:
    """Eigenphases on ``(-pi, pi]`` and an orthonormal eigenbasis of ``U``."""
    M = U.matrix
    # complex Schur form of a normal matrix is diagonal with unitary Z,
    # which keeps degenerate eigenspaces orthonormal
    T, Z = scipy.linalg.schur(M, output="complex")
    phases = np.angle(np.diag(T))
    phases = np.where(phases <= -math.pi + 1e-13, math.pi, phases)
    dec = EigenDecomp(phases=phases, vectors=Z)
    if np.max(np.abs(dec.reconstruct() - M)) > 1e-8:
        raise NumericalFailure("eigendecomposition does not reconstruct the operator")
    if np.max(np.abs(Z.conj().T @ Z - np.eye(U.dim))) > 1e-8:
        raise NumericalFailure("eigenvectors are not orthonormal")
    return dec


def _near_branch_cut(phases: np.ndarray) -> bool:
    return bool(np.any(math.pi - np.abs(phases) <= BRANCH_TOL))


def principal_log(U: UnitaryOp) -> HermitianOp:
    """Hermitian ``A`` with ``U = exp(-iA)`` and spectrum in ``(-pi, pi)``."""
    dec = eig_unitary(U)
    if _near_branch_cut(dec.phases):
        raise BranchAmbiguity("an eigenphase sits on the branch cut at pi")
    V = dec.vectors
    return HermitianOp(-(V * dec.phases) @ V.conj().T)


def evolve(generator, t: float) -> UnitaryOp:
    """``exp(-i A t)`` for a HermitianOp or a RotationSpec."""
    if isinstance(generator, RotationSpec):
        return generator.power(t)
    w, V = np.linalg.eigh(generator.matrix)
    return DenseOp((V * np.exp(-1j * w * t)) @ V.conj().T)


def _scaled_cost(cost: CostLedger, epsilon: float | None) -> CostLedger:
    if epsilon is None:
        return cost.copy()
    return cost * math.ceil(1.0 / epsilon)


def frac_power_eig(U: UnitaryOp, t: float, epsilon: float | None = None) -> UnitaryOp:
    """``U**t`` on the principal branch.

    The cost tag is ``U.cost * ceil(1/epsilon)`` (simulation to precision
    ``epsilon``), or ``U.cost`` when no precision is configured.
    """
    if not 0.0 <= t <= 1.0:
        raise ValueError("t must lie in [0, 1]")
    if t == 0.0:
        return IdentityOp(U.dim)
    dec = eig_unitary(U)
    if t < 1.0 and _near_branch_cut(dec.phases):
        raise BranchAmbiguity("an eigenphase sits on the branch cut at pi")
    V = dec.vectors
    return DenseOp((V * np.exp(1j * dec.phases * t)) @ V.conj().T, cost=_scaled_cost(U.cost, epsilon))


def quantize_phase(phases, bits: int):
    """Round phases to the nearest multiple of ``2 pi / 2**bits``."""
    grid = 2**bits
    return TWO_PI * np.round(np.asarray(phases) * grid / TWO_PI) / grid


def frac_power_pe(U: UnitaryOp, t: float, bits: int) -> UnitaryOp:
    """``U**t`` with each eigenphase replaced by its ``bits``-bit estimate.

    Models ideal phase estimation; the cost tag counts ``2**bits`` controlled
    applications of ``U``.
    """
    if not 0.0 < t < 1.0:
        raise ValueError("t must lie in (0, 1)")
    if not 1 <= bits <= 20:
        raise ValueError("bits must lie in [1, 20]")
    dec = eig_unitary(U)
    q = quantize_phase(dec.phases, bits)
    V = dec.vectors
    return DenseOp((V * np.exp(1j * q * t)) @ V.conj().T, cost=U.cost * (2**bits))


@dataclass(frozen=True)
class RotationSpec:
    """Rotation ``R = (I - 2|b><b|)(I - 2|a><a|)`` in the real plane of a, b.

    ``plane`` holds ``a`` and the unit vector of ``b`` orthogonal to ``a``.
    ``angle = 2 acos(overlap)`` where ``overlap`` is the value of ``<a|b>``
    used to build the generator (exact, or an estimate); ``true_overlap``
    is the simulator's exact value.  The generator turns the true plane by
    ``angle * scale`` per unit time.
    """

    plane: tuple
    angle: float
    overlap: float
    true_overlap: float

    @property
    def scale(self) -> float:
        return _sin_from_cos(self.true_overlap) / _sin_from_cos(self.overlap)

    @property
    def a(self) -> np.ndarray:
        return self.plane[0].real

    @property
    def b(self) -> np.ndarray:
        c = self.true_overlap
        return c * self.plane[0].real + _sin_from_cos(c) * self.plane[1].real

    @property
    def generator(self) -> HermitianOp:
        """Dense ``-(4 theta / sin 2 theta) i (|a><b| - |b><a|)``."""
        a, b = self.a, self.b
        return HermitianOp(-(self.angle / _sin_from_cos(self.overlap)) * 1j * (np.outer(a, b) - np.outer(b, a)))

    def power(self, t: float, bits: int | None = None, cost: CostLedger | None = None) -> PlaneRotationOp:
        """``exp(-i A t)``; with ``bits`` the angle is quantized first."""
        angle = self.angle if bits is None else float(quantize_phase(self.angle, bits))
        return PlaneRotationOp(self.plane[0].real, self.plane[1].real, angle * self.scale * t, cost=cost)

    def iterate(self, k: int, cost: CostLedger | None = None) -> PlaneRotationOp:
        """``R**k``; integer powers need no angle information."""
        true_angle = 2.0 * math.acos(self.true_overlap)
        return PlaneRotationOp(self.plane[0].real, self.plane[1].real, true_angle * k, cost=cost)


def _sin_from_cos(c: float) -> float:
    return math.sqrt(max(0.0, 1.0 - c * c))


def residual_sin(a: StateVector, b: StateVector) -> float:
    """``sin`` of the angle between real states, from ``||b - <a|b> a||``.

    Unlike ``sqrt(1 - c**2)`` this stays accurate for nearly parallel states.
    """
    c = inner(a, b).real
    return float(np.linalg.norm(b.real - c * a.real))


def rotation_generator(a: StateVector, b: StateVector, overlap: float | None = None) -> RotationSpec:
    """Closed-form generator of ``R = (I - 2|b><b|)(I - 2|a><a|)``.

    ``overlap`` substitutes an estimated ``<a|b>`` for the exact one.
    """
    for s in (a, b):
        if not s.is_real():
            raise NonRealState("rotation generator needs real-amplitude states")
    c_true = max(-1.0, min(1.0, inner(a, b).real))
    s_true = residual_sin(a, b)
    if s_true <= COLLINEAR_TOL:
        raise CollinearStates("states are (anti)parallel; the rotation plane is undefined")
    c_used = c_true if overlap is None else max(-1.0, min(1.0, float(overlap)))
    if _sin_from_cos(c_used) <= COLLINEAR_TOL:
        raise CollinearStates("estimated overlap is +-1; the rotation angle is degenerate")
    e1 = a.real
    e2 = (b.real - c_true * e1) / s_true
    return RotationSpec(
        plane=(new_state(e1), new_state(e2)),
        angle=2.0 * math.acos(c_used),
        overlap=c_used,
        true_overlap=c_true,
    )


def circular_distance(x: float, y: float) -> float:
    return abs(math.remainder(x - y, TWO_PI))


def frac_power_iterate(spec: RotationSpec, t: float, tol: float, max_k: int) -> tuple[int, float]:
    """Smallest ``k`` in ``[1, max_k]`` whose ``k * angle`` is nearest ``t * angle`` mod 2 pi.

    Returns as soon as the distance drops to ``tol``; ties keep the smaller k.
    """
    if not 0.0 < t < 1.0:
        raise ValueError("t must lie in (0, 1)")
    if tol <= 0:
        raise ValueError("tol must be positive")
    target = t * spec.angle
    best_k, best_d = 0, math.inf
    for k in range(1, int(max_k) + 1):
        d = circular_distance(k * spec.angle, target)
        if d < best_d:
            best_k, best_d = k, d
        if d <= tol:
            return k, d
    raise NoApproximation(
        f"no k <= {max_k} within {tol:.3g} rad (best k={best_k}, error={best_d:.3g})",
        best_k=best_k,
        best_error=best_d,
    )
