"""FIR transfer matrices and closed-loop system responses.

The closed-loop behaviour of a linear system under linear feedback is
captured by the *system response*: the set of transfer matrices from
the exogenous perturbations to the internal signals.  Working directly
with these maps (instead of with a controller) turns controller design
into a linear program over transfer-matrix coefficients.

All transfer matrices here are finite impulse responses (FIR) in
``1/z``: ``G = sum_{t=0}^{T} z^{-t} G[t]``.  A map is *strictly proper*
when ``G[0] = 0``.

For a state-feedback pair ``(Phi_xx, Phi_ux)`` achievability of the
closed loop is equivalent to the affine recursion

    Phi_xx[1] = I,
    Phi_xx[t+1] = A Phi_xx[t] + B2 Phi_ux[t],   1 <= t <= T-1,
    A Phi_xx[T] + B2 Phi_ux[T] = 0,

(the FIR closure makes the loop deadbeat).  The output-feedback
quadruple additionally satisfies a dual row-wise recursion; see
:func:`of_residual`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

__all__ = [
    "Fir",
    "SystemResponse",
    "ObservabilityWitness",
    "zi_minus",
    "sf_residual",
    "of_residual",
    "is_t_step_controllable",
    "is_t_step_observable",
    "compose_output_feedback",
]


class Fir:
    """Matrix-valued finite impulse response in powers of ``1/z``.

    Parameters
    ----------
    coeffs : array_like
        Stack of spectral components with shape ``(T+1, rows, cols)``;
        ``coeffs[t]`` is the coefficient of ``z**-t``.
    """

    __slots__ = ("coeffs",)

    def __init__(self, coeffs):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.ndim != 3:
            raise ValueError(
                f"coefficients must have shape (T+1, rows, cols), got {coeffs.shape}"
            )
        self.coeffs = coeffs

    # -- construction -------------------------------------------------
    @classmethod
    def zeros(cls, rows: int, cols: int, horizon: int) -> "Fir":
        return cls(np.zeros((horizon + 1, rows, cols)))

    @classmethod
    def from_static(cls, M) -> "Fir":
        """Constant (memoryless) transfer matrix."""
        M = np.atleast_2d(np.asarray(M, dtype=float))
        return cls(M[None, :, :].copy())

    @classmethod
    def delay_identity(cls, n: int, k: int = 1) -> "Fir":
        """``z**-k I``."""
        coeffs = np.zeros((k + 1, n, n))
        coeffs[k] = np.eye(n)
        return cls(coeffs)

    # -- basic queries ------------------------------------------------
    @property
    def horizon(self) -> int:
        return self.coeffs.shape[0] - 1

    @property
    def rows(self) -> int:
        return self.coeffs.shape[1]

    @property
    def cols(self) -> int:
        return self.coeffs.shape[2]

    @property
    def strictly_proper(self) -> bool:
        return not self.coeffs[0].any()

    def __getitem__(self, t: int) -> np.ndarray:
        """Spectral component ``t`` (zero matrix beyond the horizon)."""
        if t < 0:
            raise IndexError("spectral index must be nonnegative")
        if t > self.horizon:
            return np.zeros((self.rows, self.cols))
        return self.coeffs[t]

    def max_abs(self) -> float:
        """Largest coefficient magnitude over all spectral components."""
        return float(np.max(np.abs(self.coeffs))) if self.coeffs.size else 0.0

    def frob_sq(self) -> float:
        """Sum of squared Frobenius norms of all components."""
        return float(np.sum(self.coeffs**2))

    def allclose(self, other: "Fir", tol: float = 0.0) -> bool:
        T = max(self.horizon, other.horizon)
        return (self.pad(T) - other.pad(T)).max_abs() <= tol

    # -- reshaping ----------------------------------------------------
    def pad(self, horizon: int) -> "Fir":
        """Extend with zero components up to ``horizon``."""
        if horizon < self.horizon:
            raise ValueError("pad cannot shorten; use truncate")
        extra = horizon - self.horizon
        if extra == 0:
            return self
        tail = np.zeros((extra, self.rows, self.cols))
        return Fir(np.concatenate([self.coeffs, tail]))

    def truncate(self, horizon: int) -> "Fir":
        """Drop components beyond ``horizon``."""
        if horizon >= self.horizon:
            return self
        return Fir(self.coeffs[: horizon + 1].copy())

    def transpose(self) -> "Fir":
        """Componentwise transpose."""
        return Fir(np.transpose(self.coeffs, (0, 2, 1)).copy())

    def delay(self, k: int = 1) -> "Fir":
        """Multiply by ``z**-k`` (prepend ``k`` zero components)."""
        if k < 0:
            raise ValueError("delay must be nonnegative")
        head = np.zeros((k, self.rows, self.cols))
        return Fir(np.concatenate([head, self.coeffs]))

    def z_advance(self, k: int = 1, tol: float = 0.0) -> "Fir":
        """Multiply by ``z**k``, dropping the leading ``k`` components.

        The dropped components must vanish (up to ``tol``) for the
        product to stay causal; otherwise this raises.
        """
        if k < 0:
            raise ValueError("advance must be nonnegative")
        if k > self.horizon:
            raise ValueError("advance exceeds horizon")
        dropped = np.max(np.abs(self.coeffs[:k])) if k else 0.0
        if dropped > tol:
            raise ValueError(
                f"z_advance would discard nonzero components (max {dropped:.3e})"
            )
        return Fir(self.coeffs[k:].copy())

    # -- arithmetic ---------------------------------------------------
    # keep ndarray @ Fir from coercing the Fir: defer to __rmatmul__
    __array_ufunc__ = None

    def _binary(self, other: "Fir", op) -> "Fir":
        if (self.rows, self.cols) != (other.rows, other.cols):
            raise ValueError("shape mismatch")
        T = max(self.horizon, other.horizon)
        return Fir(op(self.pad(T).coeffs, other.pad(T).coeffs))

    def __add__(self, other: "Fir") -> "Fir":
        return self._binary(other, np.add)

    def __sub__(self, other: "Fir") -> "Fir":
        return self._binary(other, np.subtract)

    def __neg__(self) -> "Fir":
        return Fir(-self.coeffs)

    def __mul__(self, scalar) -> "Fir":
        return Fir(self.coeffs * float(scalar))

    __rmul__ = __mul__

    def __matmul__(self, other):
        if isinstance(other, Fir):
            if self.cols != other.rows:
                raise ValueError("inner dimension mismatch")
            T = self.horizon + other.horizon
            out = np.zeros((T + 1, self.rows, other.cols))
            for ta in range(self.horizon + 1):
                Ga = self.coeffs[ta]
                if not Ga.any():
                    continue
                out[ta : ta + other.horizon + 1] += np.einsum(
                    "ik,tkj->tij", Ga, other.coeffs
                )
            return Fir(out)
        other = np.atleast_2d(np.asarray(other, dtype=float))
        if self.cols != other.shape[0]:
            raise ValueError("inner dimension mismatch")
        return Fir(self.coeffs @ other)

    def __rmatmul__(self, other):
        other = np.atleast_2d(np.asarray(other, dtype=float))
        if other.shape[1] != self.rows:
            raise ValueError("inner dimension mismatch")
        return Fir(np.einsum("ik,tkj->tij", other, self.coeffs))

    def __repr__(self):
        return f"Fir(rows={self.rows}, cols={self.cols}, horizon={self.horizon})"


def zi_minus(A, G: Fir) -> Fir:
    """Spectral components of ``(z I - A) G`` for strictly proper ``G``.

    The product stays proper because the ``z`` shift only exposes
    ``G[1]`` at index zero.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if not G.strictly_proper:
        raise ValueError("(zI - A) G needs strictly proper G to stay causal")
    out = np.zeros((G.horizon + 1, G.rows, G.cols))
    out[: G.horizon] = G.coeffs[1:]
    out -= np.einsum("ik,tkj->tij", A, G.coeffs)
    return Fir(out)


@dataclass(frozen=True)
class SystemResponse:
    """Closed-loop maps from perturbations to state and control.

    ``Phi_xx`` and ``Phi_ux`` map the process perturbation ``dx`` to the
    state and control; ``Phi_xy`` and ``Phi_uy`` map the measurement
    perturbation ``dy`` and are present only for output feedback.  All
    blocks share one horizon; ``Phi_xx``, ``Phi_ux`` and ``Phi_xy`` are
    strictly proper while ``Phi_uy`` may have a static component.
    """

    Phi_xx: Fir
    Phi_ux: Fir
    Phi_xy: Optional[Fir] = None
    Phi_uy: Optional[Fir] = None

    def __post_init__(self):
        if (self.Phi_xy is None) != (self.Phi_uy is None):
            raise ValueError("Phi_xy and Phi_uy must be given together")
        T = max(b.horizon for b in self.blocks().values())
        for name, blk in self.blocks().items():
            object.__setattr__(self, name, blk.pad(T))
        nx = self.Phi_xx.rows
        if self.Phi_xx.cols != nx:
            raise ValueError("Phi_xx must be square")
        if self.Phi_ux.cols != nx:
            raise ValueError("Phi_ux must have nx columns")
        if self.is_output_feedback:
            if self.Phi_xy.rows != nx:
                raise ValueError("Phi_xy must have nx rows")
            if self.Phi_uy.rows != self.Phi_ux.rows:
                raise ValueError("Phi_uy must have nu rows")
            if self.Phi_uy.cols != self.Phi_xy.cols:
                raise ValueError("Phi_uy and Phi_xy must share ny columns")

    def blocks(self) -> dict:
        out = {"Phi_xx": self.Phi_xx, "Phi_ux": self.Phi_ux}
        if self.Phi_xy is not None:
            out["Phi_xy"] = self.Phi_xy
            out["Phi_uy"] = self.Phi_uy
        return out

    @property
    def is_output_feedback(self) -> bool:
        return self.Phi_xy is not None

    @property
    def horizon(self) -> int:
        return self.Phi_xx.horizon

    @property
    def nx(self) -> int:
        return self.Phi_xx.rows

    @property
    def nu(self) -> int:
        return self.Phi_ux.rows

    @property
    def ny(self) -> int:
        if not self.is_output_feedback:
            raise AttributeError("state-feedback response has no ny")
        return self.Phi_xy.cols


@dataclass(frozen=True)
class ObservabilityWitness:
    """Deadbeat estimation maps ``(Phi_xx, Phi_xy)``.

    Witness of ``T``-step observability: a strictly proper FIR pair with
    ``Phi_xx (zI - A) - Phi_xy C2 = I``.
    """

    Phi_xx: Fir
    Phi_xy: Fir


def _defect_max(*mats) -> float:
    return max(float(np.max(np.abs(M))) if M.size else 0.0 for M in mats)


def sf_residual(plant, resp: SystemResponse) -> float:
    """Worst-case defect of the state-feedback achievability recursion.

    Returns the largest absolute entry over all defects: strict
    properness of both blocks, ``Phi_xx[1] = I``, the one-step recursion
    for ``1 <= t < T``, and the deadbeat closure at ``T``.  A zero value
    certifies that ``(Phi_xx, Phi_ux)`` is achievable by some internally
    stabilizing state-feedback controller.
    """
    A, B2 = plant.A, plant.B2
    R, M = resp.Phi_xx, resp.Phi_ux
    T = resp.horizon
    worst = _defect_max(R[0], M[0], R[1] - np.eye(resp.nx))
    for t in range(1, T):
        worst = max(worst, _defect_max(R[t + 1] - A @ R[t] - B2 @ M[t]))
    worst = max(worst, _defect_max(A @ R[T] + B2 @ M[T]))
    return worst


def of_residual(plant, resp: SystemResponse) -> float:
    """Worst-case defect of the output-feedback achievability recursions.

    Checks both coupled families: the column recursion driven by
    ``(A, B2)``,

        Phi_xx[1] = I,      Phi_xx[t+1] = A Phi_xx[t] + B2 Phi_ux[t],
        Phi_xy[1] = B2 Phi_uy[0],
        Phi_xy[t+1] = A Phi_xy[t] + B2 Phi_uy[t],

    with deadbeat closures at ``T``, and the row recursion driven by
    ``(A, C2)``,

        Phi_xx[t+1] = Phi_xx[t] A + Phi_xy[t] C2,
        Phi_ux[1] = Phi_uy[0] C2,
        Phi_ux[t+1] = Phi_ux[t] A + Phi_uy[t] C2,

    again with closures at ``T``, plus strict properness of all blocks
    except ``Phi_uy``.  Returns the largest absolute defect entry.
    """
    if not resp.is_output_feedback:
        raise ValueError("response has no measurement blocks")
    A, B2, C2 = plant.A, plant.B2, plant.C2
    R, M, N, L = resp.Phi_xx, resp.Phi_ux, resp.Phi_xy, resp.Phi_uy
    T = resp.horizon
    I = np.eye(resp.nx)
    worst = _defect_max(R[0], M[0], N[0], R[1] - I, N[1] - B2 @ L[0], M[1] - L[0] @ C2)
    for t in range(1, T):
        worst = max(
            worst,
            _defect_max(
                R[t + 1] - A @ R[t] - B2 @ M[t],
                N[t + 1] - A @ N[t] - B2 @ L[t],
                R[t + 1] - R[t] @ A - N[t] @ C2,
                M[t + 1] - M[t] @ A - L[t] @ C2,
            ),
        )
    worst = max(
        worst,
        _defect_max(
            A @ R[T] + B2 @ M[T],
            A @ N[T] + B2 @ L[T],
            R[T] @ A + N[T] @ C2,
            M[T] @ A + L[T] @ C2,
        ),
    )
    return worst


def is_t_step_controllable(A, B2, T: int, tol: float = 1e-8):
    """Feasibility of driving any state to zero in ``T`` steps.

    Solves the state-feedback achievability recursion over horizon
    ``T`` with no objective; the system is ``T``-step controllable
    exactly when the equality system is consistent.

    Returns
    -------
    (bool, SystemResponse or None)
        Flag and, when controllable, a deadbeat witness response.
    """
    from . import slc as _slc
    from . import synth as _synth
    from .plant import PlantModel

    A = np.atleast_2d(np.asarray(A, dtype=float))
    B2 = np.atleast_2d(np.asarray(B2, dtype=float))
    if T < 1:
        raise ValueError("horizon must be at least 1")
    n = A.shape[0]
    plant = PlantModel.state_feedback(
        A,
        np.eye(n),
        B2,
        C1=np.zeros((0, n)),
        D11=np.zeros((0, n)),
        D12=np.zeros((0, B2.shape[1])),
    )
    problem = _synth.SynthesisProblem(plant, _slc.fir_slc(plant, T), mode="state-feedback")
    result = _synth.synthesize_sf_h2(problem, feas_tol=tol)
    if not result.feasible:
        return False, None
    return True, result.response


def is_t_step_observable(A, C2, T: int, tol: float = 1e-8):
    """Dual of :func:`is_t_step_controllable` via transposition.

    Solves the controllability problem for ``(A^T, C2^T)`` and
    transposes the witness into deadbeat estimation maps satisfying
    ``Phi_xx (zI - A) - Phi_xy C2 = I``.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    C2 = np.atleast_2d(np.asarray(C2, dtype=float))
    ok, wit = is_t_step_controllable(A.T, C2.T, T, tol=tol)
    if not ok:
        return False, None
    return True, ObservabilityWitness(
        Phi_xx=wit.Phi_xx.transpose(), Phi_xy=wit.Phi_ux.transpose()
    )


def compose_output_feedback(
    ctrl: SystemResponse,
    est: ObservabilityWitness,
    A,
    B2=None,
    C2=None,
    tol: float = 1e-8,
) -> SystemResponse:
    """Combine deadbeat control and estimation maps into output feedback.

    Given a state-feedback pair ``(R1, M1) = (ctrl.Phi_xx, ctrl.Phi_ux)``
    and an estimation pair ``(R2, N2) = (est.Phi_xx, est.Phi_xy)``, the
    quadruple

        Phi_xx = R1 + R2 - R1 (zI - A) R2
        Phi_ux = M1 - M1 (zI - A) R2
        Phi_xy = N2 - R1 (zI - A) N2
        Phi_uy = -M1 (zI - A) N2

    satisfies both output-feedback recursions with horizon equal to the
    sum of the input horizons.  When ``B2``/``C2`` are supplied the
    input pairs are validated against their own recursions first.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    R1, M1 = ctrl.Phi_xx, ctrl.Phi_ux
    R2, N2 = est.Phi_xx, est.Phi_xy

    if B2 is not None:
        from .plant import PlantModel

        n = A.shape[0]
        B2m = np.atleast_2d(np.asarray(B2, dtype=float))
        sf_plant = PlantModel.state_feedback(
            A, np.eye(n), B2m,
            C1=np.zeros((0, n)), D11=np.zeros((0, n)), D12=np.zeros((0, B2m.shape[1])),
        )
        res = sf_residual(sf_plant, ctrl)
        if res > tol:
            raise ValueError(f"control maps violate their recursion (residual {res:.3e})")
    if C2 is not None:
        C2m = np.atleast_2d(np.asarray(C2, dtype=float))
        dual = SystemResponse(Phi_xx=R2.transpose(), Phi_ux=N2.transpose())
        from .plant import PlantModel

        n = A.shape[0]
        est_plant = PlantModel.state_feedback(
            A.T, np.eye(n), C2m.T,
            C1=np.zeros((0, n)), D11=np.zeros((0, n)), D12=np.zeros((0, C2m.shape[0])),
        )
        res = sf_residual(est_plant, dual)
        if res > tol:
            raise ValueError(f"estimation maps violate their recursion (residual {res:.3e})")

    zR2 = zi_minus(A, R2)
    zN2 = zi_minus(A, N2)
    Phi_xx = R1 + R2 - R1 @ zR2
    Phi_ux = M1 - M1 @ zR2
    Phi_xy = N2 - R1 @ zN2
    Phi_uy = -(M1 @ zN2)
    return SystemResponse(Phi_xx=Phi_xx, Phi_ux=Phi_ux, Phi_xy=Phi_xy, Phi_uy=Phi_uy)
