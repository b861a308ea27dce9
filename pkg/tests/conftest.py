import numpy as np
import pytest

import slskit as sk

from oracles import rank_controllable


def random_of_plant(
    rng,
    n=4,
    nu=2,
    ny=2,
    nw=None,
    horizon_check=None,
    stable=False,
    with_d21=True,
    with_d22=False,
    diag_b1=False,
):
    """Random plant, resampled until controllable and observable.

    With dense Gaussian matrices the rank conditions hold almost
    surely, so the loop is really just insurance.
    """
    nw = nw if nw is not None else n
    T = horizon_check if horizon_check is not None else n
    for _ in range(50):
        A = rng.standard_normal((n, n))
        if stable:
            A *= 0.7 / max(np.max(np.abs(np.linalg.eigvals(A))), 1e-9)
        B2 = rng.standard_normal((n, nu))
        C2 = rng.standard_normal((ny, n))
        if rank_controllable(A, B2, T) and rank_controllable(A.T, C2.T, T):
            break
    else:  # pragma: no cover
        raise RuntimeError("could not draw a controllable/observable plant")
    B1 = np.eye(n)[:, :nw] if diag_b1 else rng.standard_normal((n, nw))
    C1 = np.vstack([np.eye(n), np.zeros((nu, n))])
    D12 = np.vstack([np.zeros((n, nu)), np.eye(nu)])
    D11 = np.zeros((n + nu, nw))
    D21 = 0.3 * rng.standard_normal((ny, nw)) if with_d21 else np.zeros((ny, nw))
    D22 = 0.3 * rng.standard_normal((ny, nu)) if with_d22 else np.zeros((ny, nu))
    return sk.PlantModel(
        A=A, B1=B1, B2=B2, C1=C1, D11=D11, D12=D12, C2=C2, D21=D21, D22=D22
    )


def random_sf_plant(rng, n=5, nu=None, diag_b1=True):
    """Random state-feedback plant (C2 = I)."""
    nu = nu if nu is not None else n
    for _ in range(50):
        A = rng.standard_normal((n, n))
        B2 = rng.standard_normal((n, nu))
        if rank_controllable(A, B2, n):
            break
    else:  # pragma: no cover
        raise RuntimeError("could not draw a controllable pair")
    B1 = np.diag(rng.uniform(0.5, 2.0, size=n)) if diag_b1 else np.eye(n)
    C1 = np.vstack([np.eye(n), np.zeros((nu, n))])
    D12 = np.vstack([np.zeros((n, nu)), np.eye(nu)])
    D11 = np.zeros((n + nu, n))
    return sk.PlantModel.state_feedback(A, B1, B2, C1, D11, D12)


def scalar_unstable_plant(a=1.1):
    """The 1-state benchmark plant with full output feedback."""
    return sk.PlantModel(
        A=[[a]],
        B1=[[1.0]],
        B2=[[1.0]],
        C1=[[1.0], [0.0]],
        D11=[[0.0], [0.0]],
        D12=[[0.0], [1.0]],
        C2=[[1.0]],
        D21=[[0.0]],
        D22=[[0.0]],
    )


def scalar_hand_response(a=1.1):
    """Closed-form deadbeat quadruple for the scalar plant.

    ``Phi_xx = 1/z``, ``Phi_ux = Phi_xy = -a/z``, ``Phi_uy = -a + a^2/z``
    satisfies every achievability recursion exactly.
    """
    R = sk.Fir(np.array([[[0.0]], [[1.0]], [[0.0]]]))
    M = sk.Fir(np.array([[[0.0]], [[-a]], [[0.0]]]))
    N = sk.Fir(np.array([[[0.0]], [[-a]], [[0.0]]]))
    L = sk.Fir(np.array([[[-a]], [[a * a]], [[0.0]]]))
    return sk.SystemResponse(Phi_xx=R, Phi_ux=M, Phi_xy=N, Phi_uy=L)


def benchmark_actuators(n=100, spacing=5):
    """1-based actuator sites {spacing*j - (spacing-1), spacing*j}."""
    count = n // spacing
    sites = sorted(
        set(
            [spacing * j - (spacing - 1) for j in range(1, count + 1)]
            + [spacing * j for j in range(1, count + 1)]
        )
    )
    return sites


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
