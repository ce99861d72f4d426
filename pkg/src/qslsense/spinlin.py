"""Small dense complex linear algebra for spin-1/2 and spin-1 systems.

States are numpy complex128 vectors of length 2 or 3, operators are dense
complex128 matrices.  No sparse structure is used anywhere: every matrix in
this package is at most 3x3, so closed forms and direct eigendecompositions
beat any general-purpose machinery.

Conventions
-----------
* hbar = 1; Hermitian generators carry units of rad/s.
* Propagators are ``U = exp(-i H t)``.
* 2x2 exponentials use the exact Pauli decomposition
  ``exp(-i(aI + v.sigma)t) = e^{-iat}(cos|v|t I - i sin|v|t vhat.sigma)``,
  3x3 exponentials use a Hermitian eigendecomposition.  Both are free of
  series-truncation error, which matters in long step products.

Tolerances live in one module-global :data:`POLICY` record.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ContractViolation(ValueError):
    """An input violates a numerical contract (hermiticity, normalization, shape)."""


@dataclass
class NumericPolicy:
    """Global numeric tolerances. Mutate or replace :data:`POLICY` to adjust."""

    hermitian_tol: float = 1e-12
    unitary_tol: float = 1e-10
    norm_tol: float = 1e-10
    imag_tol: float = 1e-12


POLICY = NumericPolicy()

_SX_HALF = 0.5 * np.array([[0, 1], [1, 0]], dtype=complex)
_SY_HALF = 0.5 * np.array([[0, -1j], [1j, 0]], dtype=complex)
_SZ_HALF = 0.5 * np.array([[1, 0], [0, -1]], dtype=complex)

_SQRT2 = np.sqrt(2.0)
_SX_ONE = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=complex) / _SQRT2
_SY_ONE = np.array([[0, -1j, 0], [1j, 0, -1j], [0, 1j, 0]], dtype=complex) / _SQRT2
_SZ_ONE = np.array([[1, 0, 0], [0, 0, 0], [0, 0, -1]], dtype=complex)


def spin_operators(spin: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return (Sx, Sy, Sz) for ``spin`` in {"half", "one"}.

    The matrices are the standard angular-momentum representations with
    ``Sz = diag(1/2, -1/2)`` and ``Sz = diag(1, 0, -1)`` respectively; they
    satisfy ``[Si, Sj] = i eps_ijk Sk``.  Fresh copies are returned so callers
    may scale them in place.
    """
    if spin == "half":
        return _SX_HALF.copy(), _SY_HALF.copy(), _SZ_HALF.copy()
    if spin == "one":
        return _SX_ONE.copy(), _SY_ONE.copy(), _SZ_ONE.copy()
    raise ValueError(f"spin must be 'half' or 'one', got {spin!r}")


def is_hermitian(m: np.ndarray, tol: float | None = None) -> bool:
    tol = POLICY.hermitian_tol if tol is None else tol
    return bool(np.max(np.abs(m - m.conj().T)) <= tol)


def check_hermitian(m: np.ndarray, tol: float | None = None) -> None:
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ContractViolation(f"expected a square matrix, got shape {m.shape}")
    if not is_hermitian(m, tol):
        dev = np.max(np.abs(m - m.conj().T))
        raise ContractViolation(f"matrix is not Hermitian (max |M - M^dag| = {dev:.3e})")


def is_unitary(u: np.ndarray, tol: float | None = None) -> bool:
    tol = POLICY.unitary_tol if tol is None else tol
    eye = np.eye(u.shape[0])
    return bool(np.max(np.abs(u.conj().T @ u - eye)) <= tol)


def check_state(psi: np.ndarray, tol: float | None = None) -> None:
    psi = np.asarray(psi)
    tol = POLICY.norm_tol if tol is None else tol
    nrm = np.linalg.norm(psi)
    if abs(nrm - 1.0) > tol:
        raise ContractViolation(f"state is not normalized (||psi|| = {nrm:.12f})")


def _matexp2(h: np.ndarray, t: float) -> np.ndarray:
    # H = a I + v.sigma; exact Rodrigues form.
    a = 0.5 * (h[0, 0] + h[1, 1]).real
    vx = h[0, 1].real
    vy = -h[0, 1].imag
    vz = 0.5 * (h[0, 0] - h[1, 1]).real
    vn = np.sqrt(vx * vx + vy * vy + vz * vz)
    phase = np.exp(-1j * a * t)
    if vn == 0.0:
        return phase * np.eye(2, dtype=complex)
    c = np.cos(vn * t)
    s = np.sin(vn * t) / vn
    return phase * np.array(
        [[c - 1j * s * vz, -1j * s * (vx - 1j * vy)],
         [-1j * s * (vx + 1j * vy), c + 1j * s * vz]]
    )


def matexp_antihermitian(h: np.ndarray, t: float, tol: float | None = None) -> np.ndarray:
    """Unitary propagator ``exp(-i H t)`` for a Hermitian ``h`` (2x2 or 3x3).

    Raises :class:`ContractViolation` for non-Hermitian input.  The 2x2 case
    uses the closed Pauli form, the 3x3 case a Hermitian eigendecomposition;
    both return a matrix unitary to machine precision.
    """
    h = np.asarray(h, dtype=complex)
    check_hermitian(h, tol)
    if h.shape[0] == 2:
        return _matexp2(h, t)
    if h.shape[0] == 3:
        w, v = np.linalg.eigh(h)
        return (v * np.exp(-1j * w * t)) @ v.conj().T
    raise ContractViolation(f"only dimensions 2 and 3 are supported, got {h.shape[0]}")


def expectation(h: np.ndarray, psi: np.ndarray) -> float:
    """Real expectation value <psi|H|psi> of a Hermitian operator.

    The imaginary residue must not exceed ``POLICY.imag_tol``; it is checked
    and discarded.
    """
    h = np.asarray(h, dtype=complex)
    psi = np.asarray(psi, dtype=complex)
    if h.shape[0] != psi.shape[0]:
        raise ContractViolation(
            f"dimension mismatch: operator {h.shape[0]}, state {psi.shape[0]}")
    val = complex(psi.conj() @ (h @ psi))
    scale = max(abs(val), 1.0)
    if abs(val.imag) > POLICY.imag_tol * scale:
        raise ContractViolation(f"expectation has imaginary residue {val.imag:.3e}")
    return val.real


def overlap_probability(a: np.ndarray, b: np.ndarray) -> float:
    """``|<a|b>|^2`` for two normalized states of equal dimension, clipped to [0, 1]."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape != b.shape:
        raise ContractViolation(f"dimension mismatch: {a.shape} vs {b.shape}")
    check_state(a)
    check_state(b)
    p = abs(np.vdot(a, b)) ** 2
    return float(min(max(p, 0.0), 1.0))
