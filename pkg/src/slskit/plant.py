"""Discrete-time LTI plant models and interconnection topology.

A plant is the nine-matrix generalized state-space system

    x[t+1] = A x[t] + B1 w[t] + B2 u[t]
    zbar[t] = C1 x[t] + D11 w[t] + D12 u[t]
    y[t]    = C2 x[t] + D21 w[t] + D22 u[t]

with state dimension ``nx``, disturbance ``nw``, control ``nu``,
regulated output ``nz`` and measurement ``ny``.  The module also
provides the banded chain network used throughout the benchmark
studies, spectral radius computation, and hop-distance graphs used to
express locality and communication-delay constraints.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

__all__ = [
    "PlantModel",
    "InterconnectionGraph",
    "build_chain",
    "spectral_radius",
    "hop_distances",
    "actuator_nodes",
    "sensor_nodes",
]


def _as_matrix(M, name: str) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim == 0:
        M = M.reshape(1, 1)
    if M.ndim != 2:
        raise ValueError(f"{name} must be a 2-D matrix, got shape {M.shape}")
    return M


@dataclass(frozen=True)
class PlantModel:
    """Generalized discrete-time LTI plant.

    Attributes
    ----------
    A, B1, B2 : ndarray
        State update matrices (state, disturbance and control inputs).
    C1, D11, D12 : ndarray
        Regulated-output matrices.
    C2, D21, D22 : ndarray
        Measurement matrices.  A state-feedback plant has ``C2 = I``,
        ``D21 = 0`` and ``D22 = 0``.
    """

    A: np.ndarray
    B1: np.ndarray
    B2: np.ndarray
    C1: np.ndarray
    D11: np.ndarray
    D12: np.ndarray
    C2: np.ndarray
    D21: np.ndarray
    D22: np.ndarray

    def __post_init__(self):
        for name in ("A", "B1", "B2", "C1", "D11", "D12", "C2", "D21", "D22"):
            object.__setattr__(self, name, _as_matrix(getattr(self, name), name))
        nx = self.A.shape[0]
        if self.A.shape != (nx, nx):
            raise ValueError(f"A must be square, got shape {self.A.shape}")
        nw, nu = self.B1.shape[1], self.B2.shape[1]
        nz, ny = self.C1.shape[0], self.C2.shape[0]
        expected = {
            "B1": (nx, nw),
            "B2": (nx, nu),
            "C1": (nz, nx),
            "D11": (nz, nw),
            "D12": (nz, nu),
            "C2": (ny, nx),
            "D21": (ny, nw),
            "D22": (ny, nu),
        }
        for name, shape in expected.items():
            got = getattr(self, name).shape
            if got != shape:
                raise ValueError(f"{name} has shape {got}, expected {shape}")

    @property
    def nx(self) -> int:
        return self.A.shape[0]

    @property
    def nw(self) -> int:
        return self.B1.shape[1]

    @property
    def nu(self) -> int:
        return self.B2.shape[1]

    @property
    def nz(self) -> int:
        return self.C1.shape[0]

    @property
    def ny(self) -> int:
        return self.C2.shape[0]

    @property
    def is_state_feedback(self) -> bool:
        """True when the controller sees the full state directly."""
        return (
            self.ny == self.nx
            and np.array_equal(self.C2, np.eye(self.nx))
            and not self.D21.any()
            and not self.D22.any()
        )

    @classmethod
    def state_feedback(cls, A, B1, B2, C1, D11, D12) -> "PlantModel":
        """Build a plant whose measurement is the state itself."""
        A = _as_matrix(A, "A")
        B1 = _as_matrix(B1, "B1")
        B2 = _as_matrix(B2, "B2")
        nx, nw, nu = A.shape[0], B1.shape[1], B2.shape[1]
        return cls(
            A=A,
            B1=B1,
            B2=B2,
            C1=C1,
            D11=D11,
            D12=D12,
            C2=np.eye(nx),
            D21=np.zeros((nx, nw)),
            D22=np.zeros((nx, nu)),
        )


@dataclass(frozen=True)
class InterconnectionGraph:
    """All-pairs hop distances of an interconnection topology.

    ``dist[i, j]`` is the number of edges on a shortest path between
    nodes ``i`` and ``j`` (``inf`` when disconnected).  Node indices are
    0-based positions in the state vector.
    """

    n: int
    dist: np.ndarray

    def __post_init__(self):
        dist = np.asarray(self.dist, dtype=float)
        if dist.shape != (self.n, self.n):
            raise ValueError("distance matrix shape mismatch")
        object.__setattr__(self, "dist", dist)

    def distance(self, i: int, j: int) -> float:
        return float(self.dist[i, j])


def spectral_radius(A) -> float:
    """Largest eigenvalue magnitude of a square matrix."""
    A = _as_matrix(A, "A")
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"spectral radius needs a square matrix, got {A.shape}")
    return float(np.max(np.abs(np.linalg.eigvals(A))))


def hop_distances(A) -> InterconnectionGraph:
    """Hop-distance graph induced by the sparsity of a dynamics matrix.

    Edges connect ``i`` and ``j`` whenever ``A[i, j]`` or ``A[j, i]`` is
    nonzero (the graph is undirected).  Distances are BFS hop counts.
    """
    A = _as_matrix(A, "A")
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError("dynamics matrix must be square")
    adj = (A != 0.0) | (A.T != 0.0)
    np.fill_diagonal(adj, False)
    dist = shortest_path(csr_matrix(adj.astype(float)), method="D", unweighted=True)
    np.fill_diagonal(dist, 0.0)
    return InterconnectionGraph(n=n, dist=dist)


def build_chain(
    n: int,
    kappa: float = 1.0,
    rho_target: float = 1.1,
    actuator_sites=None,
    gamma: float = 1.0,
) -> PlantModel:
    """Bidirectional chain network with scalar actuators at given sites.

    Node dynamics couple each state to its chain neighbours,

        x_i[t+1] = alpha (x_i[t] + kappa x_{i-1}[t] + kappa x_{i+1}[t])
                   + b_i u_i[t] + w_i[t],

    with ``x_0 = x_{n+1} = 0``, and ``alpha`` chosen so the open-loop
    spectral radius equals ``rho_target`` exactly.  The regulated output
    stacks the state on top of the weighted control,
    ``zbar = [x; sqrt(gamma) u]``, so that the closed-loop H2 cost is
    ``E[ ||x||^2 + gamma ||u||^2 ]`` under unit white process noise
    (``B1 = I``).

    Parameters
    ----------
    n : int
        Number of nodes.
    kappa : float
        Neighbour coupling strength, ``kappa >= 0``.
    rho_target : float
        Desired open-loop spectral radius, ``> 0``.
    actuator_sites : sequence of int, optional
        1-based node indices that carry an actuator.  Defaults to every
        node.  Must be nonempty, unique, and within ``1..n``.
    gamma : float
        Control penalty weight, ``>= 0``.  ``gamma = 0`` reads as a pure
        state cost (``C1 = I``, ``D12 = 0``).
    """
    if n < 1:
        raise ValueError("chain needs at least one node")
    if kappa < 0:
        raise ValueError("coupling kappa must be nonnegative")
    if rho_target <= 0:
        raise ValueError("rho_target must be positive")
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    if actuator_sites is None:
        actuator_sites = list(range(1, n + 1))
    sites = [int(s) for s in actuator_sites]
    if len(sites) == 0:
        raise ValueError("no actuation: actuator_sites must be nonempty")
    if len(set(sites)) != len(sites):
        raise ValueError("actuator_sites contains duplicates")
    if any(s < 1 or s > n for s in sites):
        raise ValueError(f"actuator_sites must lie in 1..{n}")

    base = np.eye(n)
    idx = np.arange(n - 1)
    base[idx, idx + 1] = kappa
    base[idx + 1, idx] = kappa
    alpha = rho_target / spectral_radius(base)
    A = alpha * base

    nu = len(sites)
    B2 = np.zeros((n, nu))
    for k, s in enumerate(sites):
        B2[s - 1, k] = 1.0

    C1 = np.vstack([np.eye(n), np.zeros((nu, n))])
    D12 = np.vstack([np.zeros((n, nu)), np.sqrt(gamma) * np.eye(nu)])
    D11 = np.zeros((n + nu, n))
    return PlantModel.state_feedback(A, np.eye(n), B2, C1, D11, D12)


def _single_node(vec: np.ndarray, what: str, k: int) -> int:
    nodes = np.nonzero(vec)[0]
    if len(nodes) == 0:
        raise ValueError(f"{what} {k} touches no node; cannot attribute it")
    if len(nodes) > 1:
        raise ValueError(f"{what} {k} touches several nodes; cannot attribute it")
    return int(nodes[0])


def actuator_nodes(plant: PlantModel) -> np.ndarray:
    """Node index driven by each control input (columns of B2)."""
    return np.array(
        [_single_node(plant.B2[:, k], "actuator", k) for k in range(plant.nu)],
        dtype=int,
    )


def sensor_nodes(plant: PlantModel) -> np.ndarray:
    """Node index observed by each measurement (rows of C2)."""
    return np.array(
        [_single_node(plant.C2[k, :], "sensor", k) for k in range(plant.ny)],
        dtype=int,
    )
