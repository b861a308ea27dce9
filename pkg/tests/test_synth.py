import dataclasses
import math

import numpy as np
import pytest
from scipy.linalg import solve_discrete_are

import slskit as sk
from slskit import Fir

from conftest import random_of_plant, random_sf_plant
from oracles import h2_by_simulation, of_stacked_qp, scalar_dare_p, sf_stacked_qp


# ---------------------------------------------------------------------------
# equality-constrained least squares
# ---------------------------------------------------------------------------


def test_solve_eq_ls_unconstrained_regression():
    G = np.array([[1.0], [1.0]])
    sol = sk.solve_eq_ls(G, [1.0, 3.0], np.zeros((0, 1)), [])
    assert sol.x == pytest.approx([2.0])
    assert sol.eq_residual == 0.0 and not sol.degenerate


def test_solve_eq_ls_min_norm_feasible_point():
    sol = sk.solve_eq_ls(np.zeros((0, 2)), [], np.array([[1.0, 1.0]]), [2.0])
    assert sol.x == pytest.approx([1.0, 1.0])
    assert sol.eq_residual <= 1e-12


def test_solve_eq_ls_reports_inconsistency():
    E = np.array([[1.0, 0.0], [1.0, 0.0]])
    sol = sk.solve_eq_ls(np.zeros((0, 2)), [], E, [0.0, 1.0])
    # best split of the contradictory rows
    assert sol.x[0] == pytest.approx(0.5)
    assert sol.eq_residual == pytest.approx(0.5)


def test_solve_eq_ls_degenerate_objective():
    sol = sk.solve_eq_ls(np.array([[1.0, 0.0]]), [1.0], np.zeros((0, 2)), [])
    assert sol.degenerate
    assert sol.x == pytest.approx([1.0, 0.0])
    empty = sk.solve_eq_ls(np.zeros((0, 3)), [], np.zeros((0, 3)), [])
    assert empty.degenerate and np.array_equal(empty.x, np.zeros(3))


def test_solve_eq_ls_dense_and_sparse_agree(rng):
    nvar = 24
    E = rng.standard_normal((6, nvar))
    f = E @ rng.standard_normal(nvar)
    G = rng.standard_normal((40, nvar))
    h = rng.standard_normal(40)
    dense = sk.solve_eq_ls(G, h, E, f, dense_limit=10_000)
    sparse = sk.solve_eq_ls(G, h, E, f, dense_limit=0)
    assert not dense.degenerate and not sparse.degenerate
    assert np.allclose(dense.x, sparse.x, atol=1e-8)
    assert sparse.eq_residual <= 1e-8


def test_solve_eq_ls_shape_validation():
    with pytest.raises(ValueError):
        sk.solve_eq_ls(np.zeros((2, 2)), [1.0], np.zeros((0, 2)), [])
    with pytest.raises(ValueError):
        sk.solve_eq_ls(np.zeros((0, 2)), [], np.zeros((1, 2)), [1.0, 2.0])
    with pytest.raises(ValueError):
        sk.solve_eq_ls(np.zeros((0, 2)), [], np.zeros((1, 3)), [0.0])


# ---------------------------------------------------------------------------
# H2 cost
# ---------------------------------------------------------------------------


def test_h2_cost_hand_value():
    plant = sk.PlantModel.state_feedback(
        [[0.0]], [[1.0]], [[1.0]], C1=[[1.0]], D11=[[1.0]], D12=[[0.0]]
    )
    resp = sk.SystemResponse(
        Phi_xx=Fir(np.array([[[0.0]], [[1.0]], [[1.0]]])),
        Phi_ux=Fir.zeros(1, 1, 2),
    )
    # one unit from the feedthrough, one from each tap
    assert sk.h2_cost(plant, resp) == pytest.approx(np.sqrt(3.0))


def test_h2_cost_matches_simulation_state_feedback():
    plant = sk.build_chain(5)
    res = sk.synthesize_sf_h2(sk.SynthesisProblem(plant, sk.fir_slc(plant, 6)))
    assert res.feasible
    assert h2_by_simulation(plant, res.response) == pytest.approx(res.cost, abs=1e-8)


def test_h2_cost_matches_simulation_output_feedback(rng):
    plant = random_of_plant(rng, n=3, nu=2, ny=2)
    plant = dataclasses.replace(plant, D11=0.2 * rng.standard_normal((plant.nz, plant.nw)))
    slc = sk.fir_slc(plant, 5, output_feedback=True)
    res = sk.synthesize_of_h2(sk.SynthesisProblem(plant, slc, mode="output-feedback"))
    assert res.feasible
    assert h2_by_simulation(plant, res.response) == pytest.approx(res.cost, abs=1e-8)


# ---------------------------------------------------------------------------
# state-feedback synthesis vs the stacked dense program
# ---------------------------------------------------------------------------


def test_sf_synthesis_matches_stacked_qp(rng):
    checked_feasible = 0
    for k in range(12):
        n = int(rng.integers(2, 4))
        nu = int(rng.integers(1, n + 1))
        T = int(rng.integers(n, 8))
        plant = random_sf_plant(rng, n=n, nu=nu)
        if k % 2 == 0:
            slc = sk.fir_slc(plant, T)
        else:
            maskx = rng.uniform(size=(n, n)) < 0.7
            np.fill_diagonal(maskx, True)
            masku = rng.uniform(size=(nu, n)) < 0.8
            slc = sk.pattern_slc(plant, {"xx": maskx, "ux": masku}, T)
        res = sk.synthesize_sf_h2(sk.SynthesisProblem(plant, slc))
        R, M, cost, feasible, _ = sf_stacked_qp(plant, slc)
        assert res.feasible == feasible
        if not feasible:
            assert math.isnan(res.cost)
            continue
        checked_feasible += 1
        assert res.cost == pytest.approx(cost, rel=1e-7, abs=1e-7)
        assert np.allclose(res.response.Phi_xx.coeffs, R, atol=1e-6)
        assert np.allclose(res.response.Phi_ux.coeffs, M, atol=1e-6)
        # the column-weight accumulation agrees with the norm formula
        assert res.cost == pytest.approx(sk.h2_cost(plant, res.response), rel=1e-9)
    assert checked_feasible >= 6


def test_one_step_full_actuation_recovers_deadbeat_gain():
    plant = sk.build_chain(12, gamma=0.0)
    supp = (plant.A != 0.0) | np.eye(12, dtype=bool)
    slc = sk.pattern_slc(plant, {"xx": supp, "ux": supp}, 1)
    res = sk.synthesize_sf_h2(sk.SynthesisProblem(plant, slc))
    assert res.feasible
    assert np.allclose(res.response.Phi_xx[1], np.eye(12), atol=1e-8)
    assert np.allclose(res.response.Phi_ux[1], -plant.A, atol=1e-8)


def test_parallel_columns_bitwise_deterministic():
    plant = sk.build_chain(10)
    prob = sk.SynthesisProblem(plant, sk.locality_slc(plant, 2, 6))
    one = sk.synthesize_sf_h2(prob, workers=1)
    many = sk.synthesize_sf_h2(prob, workers=8)
    assert one.workers_used == 1 and many.workers_used == 8
    assert np.array_equal(one.response.Phi_xx.coeffs, many.response.Phi_xx.coeffs)
    assert np.array_equal(one.response.Phi_ux.coeffs, many.response.Phi_ux.coeffs)
    assert one.cost == many.cost


def test_infeasible_column_is_attributed():
    A = np.diag([1.0, 2.0])
    plant = sk.PlantModel.state_feedback(
        A,
        np.eye(2),
        [[1.0], [0.0]],
        C1=np.vstack([np.eye(2), np.zeros((1, 2))]),
        D11=np.zeros((3, 2)),
        D12=[[0.0], [0.0], [1.0]],
    )
    res = sk.synthesize_sf_h2(sk.SynthesisProblem(plant, sk.fir_slc(plant, 4)))
    assert not res.feasible
    assert math.isnan(res.cost)
    assert res.columns_infeasible == 1
    assert res.per_column[0].feasible and not res.per_column[1].feasible
    assert res.residual > 1e-3  # the unactuated growing mode cannot close


def test_blocked_diagonal_short_circuits():
    plant = sk.build_chain(3)
    slc = sk.pattern_slc(plant, {"xx": ~np.eye(3, dtype=bool)}, 3)
    res = sk.synthesize_sf_h2(sk.SynthesisProblem(plant, slc))
    assert res.columns_infeasible == 3
    assert all(c.residual == 1.0 for c in res.per_column)
    assert res.response.Phi_xx.max_abs() == 0.0


def test_nonorthogonal_disturbance_rows_rejected():
    plant = sk.PlantModel.state_feedback(
        0.5 * np.eye(2),
        [[1.0, 1.0], [0.0, 1.0]],
        np.eye(2),
        C1=np.eye(2),
        D11=np.zeros((2, 2)),
        D12=np.zeros((2, 2)),
    )
    with pytest.raises(ValueError, match="orthogonal"):
        sk.synthesize_sf_h2(sk.SynthesisProblem(plant, sk.fir_slc(plant, 2)))


def test_degenerate_flag_on_redundant_actuation():
    plant = sk.PlantModel.state_feedback(
        [[0.5]], [[1.0]], [[1.0, 1.0]], C1=[[1.0]], D11=[[0.0]], D12=[[0.0, 0.0]]
    )
    res = sk.synthesize_sf_h2(sk.SynthesisProblem(plant, sk.fir_slc(plant, 2)))
    assert res.feasible
    assert res.per_column[0].degenerate
    # minimum-norm tie-break splits the command across the twin actuators
    assert np.allclose(res.response.Phi_ux[1], [[-0.25, -0.25]], atol=1e-10)


# ---------------------------------------------------------------------------
# output-feedback synthesis vs the stacked dense program
# ---------------------------------------------------------------------------


def test_of_synthesis_matches_stacked_qp(rng):
    for _ in range(6):
        n = int(rng.integers(2, 4))
        plant = random_of_plant(rng, n=n, nu=2, ny=2)
        T = int(rng.integers(n, 6))
        slc = sk.fir_slc(plant, T, output_feedback=True)
        res = sk.synthesize_of_h2(sk.SynthesisProblem(plant, slc, mode="output-feedback"))
        stacks, cost, feasible, _ = of_stacked_qp(plant, slc)
        assert res.feasible == feasible
        assert feasible
        assert res.workers_used == 1
        assert res.cost == pytest.approx(cost, rel=1e-7, abs=1e-7)
        got = res.response
        assert np.allclose(got.Phi_xx.coeffs, stacks["xx"], atol=1e-6)
        assert np.allclose(got.Phi_ux.coeffs, stacks["ux"], atol=1e-6)
        assert np.allclose(got.Phi_xy.coeffs, stacks["xy"], atol=1e-6)
        assert np.allclose(got.Phi_uy.coeffs, stacks["uy"], atol=1e-6)
        assert sk.of_residual(plant, got) <= 1e-8


def test_state_measurement_embedding_matches_state_feedback():
    plant = sk.build_chain(6, actuator_sites=[1, 3, 5])
    T = 8
    sf = sk.synthesize_sf_h2(sk.SynthesisProblem(plant, sk.fir_slc(plant, T)))
    of = sk.synthesize_of_h2(
        sk.SynthesisProblem(
            plant, sk.fir_slc(plant, T, output_feedback=True), mode="output-feedback"
        )
    )
    assert sf.feasible and of.feasible
    assert of.cost == pytest.approx(sf.cost, rel=1e-7)
    assert of.response.Phi_xx.allclose(sf.response.Phi_xx, tol=1e-6)
    assert of.response.Phi_ux.allclose(sf.response.Phi_ux, tol=1e-6)


def test_of_variable_budget_guard(rng):
    plant = random_of_plant(rng, n=4, nu=2, ny=2)
    slc = sk.fir_slc(plant, 30, output_feedback=True)
    with pytest.raises(ValueError, match="budget"):
        sk.synthesize_of_h2(
            sk.SynthesisProblem(plant, slc, mode="output-feedback"), var_budget=500
        )


# ---------------------------------------------------------------------------
# problem validation and mode dispatch
# ---------------------------------------------------------------------------


def test_problem_validation(rng):
    plant = sk.build_chain(3)
    with pytest.raises(ValueError, match="unknown mode"):
        sk.SynthesisProblem(plant, sk.fir_slc(plant, 2), mode="h-infinity")
    with pytest.raises(ValueError, match="masks"):
        sk.SynthesisProblem(plant, sk.fir_slc(plant, 2, output_feedback=True))
    with pytest.raises(ValueError, match="xy and uy"):
        sk.SynthesisProblem(plant, sk.fir_slc(plant, 2), mode="output-feedback")
    of_plant = random_of_plant(rng, n=3)
    with pytest.raises(ValueError, match="C2"):
        sk.SynthesisProblem(of_plant, sk.fir_slc(of_plant, 2, output_feedback=False))
    other = sk.build_chain(4)
    with pytest.raises(ValueError, match="plant needs"):
        sk.SynthesisProblem(plant, sk.fir_slc(other, 2))


def test_mode_dispatch_guards():
    plant = sk.build_chain(3)
    sf_prob = sk.SynthesisProblem(plant, sk.fir_slc(plant, 2))
    of_prob = sk.SynthesisProblem(
        plant, sk.fir_slc(plant, 2, output_feedback=True), mode="output-feedback"
    )
    with pytest.raises(ValueError, match="state-feedback"):
        sk.synthesize_sf_h2(of_prob)
    with pytest.raises(ValueError, match="output-feedback"):
        sk.synthesize_of_h2(sf_prob)


# ---------------------------------------------------------------------------
# centralized baseline
# ---------------------------------------------------------------------------


def test_baseline_scalar_closed_form():
    plant = sk.build_chain(1)
    p = scalar_dare_p(1.1, 1.0, 1.0, 1.0)
    assert sk.centralized_baseline(plant) == pytest.approx(np.sqrt(p), rel=1e-9)


def test_baseline_memoryless_plant():
    n = 4
    plant = sk.PlantModel.state_feedback(
        np.zeros((n, n)), np.eye(n), np.eye(n),
        C1=np.eye(n), D11=np.zeros((n, n)), D12=np.zeros((n, n)),
    )
    assert sk.centralized_baseline(plant) == pytest.approx(np.sqrt(n), rel=1e-12)


def test_baseline_matches_scipy_riccati(rng):
    for _ in range(5):
        n = int(rng.integers(2, 5))
        nu = int(rng.integers(1, n + 1))
        plant = random_sf_plant(rng, n=n, nu=nu)
        P = solve_discrete_are(
            plant.A, plant.B2, plant.C1.T @ plant.C1, plant.D12.T @ plant.D12
        )
        expected = float(np.sqrt(np.trace(plant.B1.T @ P @ plant.B1)))
        assert sk.centralized_baseline(plant) == pytest.approx(expected, rel=1e-8)


def test_baseline_rejects_bad_plants(rng):
    with pytest.raises(ValueError, match="state-feedback"):
        sk.centralized_baseline(random_of_plant(rng, n=3))
    plant = sk.PlantModel.state_feedback(
        2.0 * np.eye(2),
        np.eye(2),
        [[1.0], [0.0]],
        C1=np.vstack([np.eye(2), np.zeros((1, 2))]),
        D11=np.zeros((3, 2)),
        D12=[[0.0], [0.0], [1.0]],
    )
    with pytest.raises(ValueError, match="stabilizable"):
        sk.centralized_baseline(plant)


def test_long_horizon_cost_approaches_baseline():
    plant = sk.build_chain(5)
    base = sk.centralized_baseline(plant)
    short = sk.synthesize_sf_h2(sk.SynthesisProblem(plant, sk.fir_slc(plant, 6)))
    long = sk.synthesize_sf_h2(sk.SynthesisProblem(plant, sk.fir_slc(plant, 30)))
    assert short.feasible and long.feasible
    assert long.cost <= short.cost + 1e-12
    assert base * (1.0 - 1e-9) <= long.cost <= base * 1.0001
