"""Convex structural constraints on system responses.

Constraints are expressed as supports: boolean masks over the spectral
components of each response block.  An entry that is ``False`` forces
the corresponding coefficient to zero during synthesis.  Because the
constraints act directly on closed-loop maps they compose by simple
intersection, in contrast with constraints on controller gains which
are convex only under quadratic invariance (see :func:`is_qi`).

Supported constraint families:

* FIR horizon (everything allowed up to ``T``),
* ``d``-hop locality on an interconnection graph,
* communication-delay masks with propagation speed ``1/t_c`` hops per
  step (plus one sampling step), and
* arbitrary user-supplied sparsity patterns.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .plant import InterconnectionGraph, PlantModel, actuator_nodes, hop_distances, sensor_nodes
from .response import Fir, SystemResponse

__all__ = [
    "SupportMask",
    "SlcSet",
    "locality_mask",
    "delay_mask",
    "fir_slc",
    "locality_slc",
    "delay_slc",
    "pattern_slc",
    "intersect",
    "is_qi",
    "positivity_check",
]


@dataclass(frozen=True)
class SupportMask:
    """Allowed support of one response block over spectral indices.

    ``allowed[t, i, j]`` says whether coefficient ``(i, j)`` of the
    ``z**-t`` component may be nonzero.  Index 0 is all-``False`` for
    strictly proper blocks.
    """

    allowed: np.ndarray

    def __post_init__(self):
        allowed = np.asarray(self.allowed, dtype=bool)
        if allowed.ndim != 3:
            raise ValueError("mask must have shape (T+1, rows, cols)")
        object.__setattr__(self, "allowed", allowed)

    @classmethod
    def full(cls, rows: int, cols: int, horizon: int, static_ok: bool = False) -> "SupportMask":
        allowed = np.ones((horizon + 1, rows, cols), dtype=bool)
        if not static_ok:
            allowed[0] = False
        return cls(allowed)

    @property
    def horizon(self) -> int:
        return self.allowed.shape[0] - 1

    @property
    def rows(self) -> int:
        return self.allowed.shape[1]

    @property
    def cols(self) -> int:
        return self.allowed.shape[2]

    def pad(self, horizon: int) -> "SupportMask":
        """Extend with all-forbidden components up to ``horizon``."""
        if horizon < self.horizon:
            raise ValueError("pad cannot shorten a mask")
        extra = horizon - self.horizon
        if extra == 0:
            return self
        tail = np.zeros((extra, self.rows, self.cols), dtype=bool)
        return SupportMask(np.concatenate([self.allowed, tail]))

    def __and__(self, other: "SupportMask") -> "SupportMask":
        if (self.rows, self.cols) != (other.rows, other.cols):
            raise ValueError("mask shape mismatch")
        T = max(self.horizon, other.horizon)
        return SupportMask(self.pad(T).allowed & other.pad(T).allowed)

    def permits(self, fir: Fir, tol: float = 0.0) -> bool:
        """True when every forbidden coefficient of ``fir`` is within ``tol``."""
        T = max(self.horizon, fir.horizon)
        coeffs = fir.pad(T).coeffs
        blocked = ~self.pad(T).allowed
        if not blocked.any():
            return True
        return float(np.max(np.abs(coeffs[blocked]))) <= tol


def _node_distances(graph: InterconnectionGraph, row_nodes, col_nodes) -> np.ndarray:
    row_nodes = np.asarray(row_nodes, dtype=int)
    col_nodes = np.asarray(col_nodes, dtype=int)
    return graph.dist[np.ix_(row_nodes, col_nodes)]


def locality_mask(
    graph: InterconnectionGraph,
    d: float,
    row_nodes,
    col_nodes,
    horizon: int,
    static_ok: bool = False,
) -> SupportMask:
    """Allow entries within ``d`` hops on the interconnection graph.

    ``row_nodes`` and ``col_nodes`` attribute each row/column of the
    block to a graph node (states and sensors map to their own node,
    actuators to the node they drive).  The pattern is constant over
    ``t >= 1``; index 0 is forbidden unless ``static_ok``.
    """
    if d < 0:
        raise ValueError("locality radius must be nonnegative")
    dist = _node_distances(graph, row_nodes, col_nodes)
    pattern = dist <= d
    allowed = np.broadcast_to(pattern, (horizon + 1,) + pattern.shape).copy()
    if not static_ok:
        allowed[0] = False
    return SupportMask(allowed)


def delay_mask(
    graph: InterconnectionGraph,
    t_c: float,
    row_nodes,
    col_nodes,
    horizon: int,
    static_ok: bool = False,
) -> SupportMask:
    """Allow entries once information has had time to propagate.

    Information crossing one edge takes ``t_c`` time steps and anything
    received strictly between sampling instants is usable at the next
    one, so an entry at hop distance ``dist >= 1`` unlocks at

        t >= floor(t_c * dist) + 1,

    while co-located entries (``dist = 0``) follow the properness rule
    (``t >= 1``, or ``t >= 0`` when ``static_ok``).  ``t_c = 0`` models
    instantaneous communication.
    """
    if t_c < 0:
        raise ValueError("delay factor t_c must be nonnegative")
    if t_c >= 1:
        warnings.warn(
            "t_c >= 1: communication no faster than dynamics propagation; "
            "localized synthesis will generally be infeasible",
            stacklevel=2,
        )
    dist = _node_distances(graph, row_nodes, col_nodes)
    with np.errstate(invalid="ignore"):
        unlock = np.floor(t_c * dist) + 1.0
    unlock[dist == 0] = 0.0 if static_ok else 1.0
    if not static_ok:
        unlock = np.maximum(unlock, 1.0)
    t_axis = np.arange(horizon + 1, dtype=float)[:, None, None]
    return SupportMask(t_axis >= unlock[None, :, :])


@dataclass(frozen=True)
class SlcSet:
    """Bundle of support masks, one per response block.

    ``xx``/``ux`` constrain the maps from process perturbations;
    ``xy``/``uy`` (present only for output feedback) constrain the maps
    from measurement perturbations.  ``tags`` record which constraint
    families built the set.
    """

    xx: SupportMask
    ux: SupportMask
    xy: Optional[SupportMask] = None
    uy: Optional[SupportMask] = None
    tags: tuple = ()

    def __post_init__(self):
        if (self.xy is None) != (self.uy is None):
            raise ValueError("xy and uy masks must be given together")
        T = max(m.horizon for m in self.masks().values())
        for name, mask in self.masks().items():
            object.__setattr__(self, name, mask.pad(T))

    def masks(self) -> dict:
        out = {"xx": self.xx, "ux": self.ux}
        if self.xy is not None:
            out["xy"] = self.xy
            out["uy"] = self.uy
        return out

    @property
    def horizon(self) -> int:
        return self.xx.horizon

    @property
    def is_output_feedback(self) -> bool:
        return self.xy is not None

    def permits(self, resp: SystemResponse, tol: float = 0.0) -> bool:
        """True when all forbidden response coefficients are within ``tol``."""
        pairs = [(self.xx, resp.Phi_xx), (self.ux, resp.Phi_ux)]
        if self.is_output_feedback:
            if not resp.is_output_feedback:
                raise ValueError("output-feedback constraint vs state-feedback response")
            pairs += [(self.xy, resp.Phi_xy), (self.uy, resp.Phi_uy)]
        return all(mask.permits(fir, tol) for mask, fir in pairs)


def _block_nodes(plant: PlantModel, output_feedback: bool):
    states = np.arange(plant.nx)
    acts = actuator_nodes(plant)
    shapes = {"xx": (states, states), "ux": (acts, states)}
    if output_feedback:
        sens = sensor_nodes(plant)
        shapes["xy"] = (states, sens)
        shapes["uy"] = (acts, sens)
    return shapes


def _resolve_mode(plant: PlantModel, output_feedback) -> bool:
    if output_feedback is None:
        return not plant.is_state_feedback
    return bool(output_feedback)


def fir_slc(plant: PlantModel, horizon: int, output_feedback=None) -> SlcSet:
    """Pure FIR-horizon constraint: everything allowed up to ``horizon``.

    Needs no node attribution, so it works for arbitrary ``B2``/``C2``.
    """
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    of = _resolve_mode(plant, output_feedback)
    shapes = {"xx": (plant.nx, plant.nx), "ux": (plant.nu, plant.nx)}
    if of:
        shapes["xy"] = (plant.nx, plant.ny)
        shapes["uy"] = (plant.nu, plant.ny)
    masks = {
        name: SupportMask.full(r, c, horizon, static_ok=(name == "uy"))
        for name, (r, c) in shapes.items()
    }
    return SlcSet(**masks, tags=(f"fir(T={horizon})",))


def locality_slc(
    plant: PlantModel,
    d: float,
    horizon: int,
    graph: Optional[InterconnectionGraph] = None,
    output_feedback=None,
) -> SlcSet:
    """``d``-hop locality on the plant's interconnection graph."""
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    if graph is None:
        graph = hop_distances(plant.A)
    of = _resolve_mode(plant, output_feedback)
    masks = {
        name: locality_mask(graph, d, r, c, horizon, static_ok=(name == "uy"))
        for name, (r, c) in _block_nodes(plant, of).items()
    }
    return SlcSet(**masks, tags=(f"locality(d={d})",))


def delay_slc(
    plant: PlantModel,
    t_c: float,
    horizon: int,
    graph: Optional[InterconnectionGraph] = None,
    output_feedback=None,
) -> SlcSet:
    """Communication-delay constraint with per-hop delay ``t_c``."""
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    if graph is None:
        graph = hop_distances(plant.A)
    of = _resolve_mode(plant, output_feedback)
    masks = {
        name: delay_mask(graph, t_c, r, c, horizon, static_ok=(name == "uy"))
        for name, (r, c) in _block_nodes(plant, of).items()
    }
    return SlcSet(**masks, tags=(f"delay(t_c={t_c})",))


def pattern_slc(
    plant: PlantModel,
    patterns: dict,
    horizon: int,
    output_feedback=None,
) -> SlcSet:
    """Constraint from explicit sparsity patterns.

    ``patterns`` maps block names (``"xx"``, ``"ux"``, ``"xy"``,
    ``"uy"``) to either a single 2-D boolean pattern (repeated for every
    ``t >= 1``) or a full ``(T+1, rows, cols)`` stack.  Blocks not
    listed are unconstrained.
    """
    base = fir_slc(plant, horizon, output_feedback)
    masks = dict(base.masks())
    for name, pat in patterns.items():
        if name not in masks:
            raise ValueError(f"unknown block {name!r}")
        pat = np.asarray(pat, dtype=bool)
        ref = masks[name]
        if pat.ndim == 2:
            stack = np.broadcast_to(pat, (horizon + 1,) + pat.shape).copy()
            if name != "uy":
                stack[0] = False
            pat = stack
        if pat.shape != ref.allowed.shape:
            raise ValueError(
                f"pattern for {name!r} has shape {pat.shape}, expected {ref.allowed.shape}"
            )
        masks[name] = SupportMask(pat) & ref
    return SlcSet(**masks, tags=("pattern",))


def intersect(*sets: SlcSet) -> SlcSet:
    """Intersection of constraint sets (componentwise AND of masks).

    Masks with shorter horizons forbid everything beyond their own
    horizon, so the intersection is never more permissive than any of
    its arguments.
    """
    if not sets:
        raise ValueError("need at least one constraint set")
    of = sets[0].is_output_feedback
    if any(s.is_output_feedback != of for s in sets):
        raise ValueError("cannot intersect state- and output-feedback constraint sets")
    names = ["xx", "ux"] + (["xy", "uy"] if of else [])
    masks = {}
    for name in names:
        acc = getattr(sets[0], name)
        for s in sets[1:]:
            acc = acc & getattr(s, name)
        masks[name] = acc
    tags = tuple(tag for s in sets for tag in s.tags)
    return SlcSet(**masks, tags=tags)


def is_qi(K_pattern, P_pattern) -> bool:
    """Quadratic invariance of a controller pattern w.r.t. a plant pattern.

    Under the Boolean product, checks ``support(K P K) <= support(K)``
    for the given binary patterns.  This is the algebraic condition
    under which constraints imposed directly on controller gains remain
    convex; constraints on system responses need no such condition.
    """
    K = np.atleast_2d(np.asarray(K_pattern)).astype(bool)
    P = np.atleast_2d(np.asarray(P_pattern)).astype(bool)
    if K.shape[1] != P.shape[0] or P.shape[1] != K.shape[0]:
        raise ValueError(
            f"pattern shapes incompatible: K {K.shape} and P {P.shape}"
        )
    KPK = (K.astype(int) @ P.astype(int) @ K.astype(int)) > 0
    return bool(np.all(K[KPK]))


def positivity_check(plant: PlantModel, resp: SystemResponse, tol: float = 1e-12) -> bool:
    """Entrywise nonnegativity of the closed-loop disturbance response.

    Checks every spectral component of the map from ``w`` to ``zbar``,

        [C1 D12] [Phi_xx Phi_xy; Phi_ux Phi_uy] [B1; D21]   (t >= 1)

    and the static term ``D12 Phi_uy[0] D21 + D11``, allowing a small
    negative slack ``-tol``.
    """
    C1, D12, B1, D21, D11 = plant.C1, plant.D12, plant.B1, plant.D21, plant.D11
    T = resp.horizon
    static = D11.copy()
    if resp.is_output_feedback:
        static = static + D12 @ resp.Phi_uy[0] @ D21
    if static.size and float(np.min(static)) < -tol:
        return False
    for t in range(1, T + 1):
        comp = C1 @ resp.Phi_xx[t] @ B1 + D12 @ resp.Phi_ux[t] @ B1
        if resp.is_output_feedback:
            comp = comp + C1 @ resp.Phi_xy[t] @ D21 + D12 @ resp.Phi_uy[t] @ D21
        if comp.size and float(np.min(comp)) < -tol:
            return False
    return True
