import csv

import numpy as np
import pytest

import slskit as sk
from slskit import Fir, Perturbations

from conftest import random_of_plant, scalar_hand_response, scalar_unstable_plant


def conv_series(fir, series):
    """Reference convolution of an FIR map with an input series."""
    H = series.shape[0] - 1
    out = np.zeros((H + 1, fir.rows))
    for t in range(H + 1):
        for s in range(min(t, fir.horizon) + 1):
            out[t] += fir[s] @ series[t - s]
    return out


def synth_of(plant, T):
    slc = sk.fir_slc(plant, T, output_feedback=True)
    res = sk.synthesize_of_h2(sk.SynthesisProblem(plant, slc, mode="output-feedback"))
    assert res.feasible
    return res.response


# ---------------------------------------------------------------------------
# realize: bank arithmetic and validation
# ---------------------------------------------------------------------------


def test_realize_of_banks_scalar_hand_case():
    a = 1.1
    resp = scalar_hand_response(a)
    real = sk.realize(resp, "of")
    assert real.kind == "of" and real.nu == 1
    assert real.banks["beta_beta"].max_abs() == 0.0
    assert real.banks["beta_y"][0] == pytest.approx(a)
    assert real.banks["beta_y"][1] == pytest.approx(0.0)
    assert real.banks["u_beta"][0] == pytest.approx(-a)
    assert real.banks["u_y"].allclose(resp.Phi_uy)


def test_realize_sf_banks_one_step_deadbeat():
    plant = sk.build_chain(4)
    A = plant.A
    resp = sk.SystemResponse(
        Phi_xx=Fir(np.stack([np.zeros((4, 4)), np.eye(4)])),
        Phi_ux=Fir(np.stack([np.zeros((4, 4)), -A])),
    )
    real = sk.realize(resp, plant=plant)  # achievability gate must accept
    assert real.kind == "sf"
    assert real.banks["u_dhat"].horizon == 0
    assert np.allclose(real.banks["u_dhat"][0], -A)
    assert real.banks["xhat_dhat"].max_abs() == 0.0


def test_realize_kind_validation(rng):
    of_resp = scalar_hand_response()
    sf_resp = sk.SystemResponse(Phi_xx=of_resp.Phi_xx, Phi_ux=of_resp.Phi_ux)
    plant = scalar_unstable_plant()
    with pytest.raises(ValueError, match="unknown realization"):
        sk.realize(of_resp, "sparse")
    with pytest.raises(ValueError, match="output-feedback response"):
        sk.realize(of_resp, "sf")
    with pytest.raises(ValueError, match="output-feedback response"):
        sk.realize(sf_resp, "structure1", plant)
    with pytest.raises(ValueError, match="pass the plant"):
        sk.realize(of_resp, "structure1")
    with pytest.raises(ValueError, match="needs the plant"):
        sk.realize(of_resp, "of_d22")
    fat = random_of_plant(rng, n=3, nu=2, ny=2, with_d22=True)
    with pytest.raises(ValueError, match="strictly proper"):
        sk.realize(synth_of(fat, 4), "imc", fat)


def test_realize_rejects_unachievable_response():
    plant = scalar_unstable_plant()
    resp = scalar_hand_response()
    bad = resp.Phi_xx.coeffs.copy()
    bad[2, 0, 0] += 1e-3
    broken = sk.SystemResponse(
        Phi_xx=Fir(bad), Phi_ux=resp.Phi_ux, Phi_xy=resp.Phi_xy, Phi_uy=resp.Phi_uy
    )
    with pytest.raises(ValueError, match="not achievable"):
        sk.realize(broken, "of", plant)
    # without the plant there is nothing to check against
    sk.realize(broken, "of")


# ---------------------------------------------------------------------------
# simulate: hand-stepped trajectories
# ---------------------------------------------------------------------------


def test_simulate_of_scalar_deadbeat_by_hand():
    a = 1.1
    plant = scalar_unstable_plant(a)
    real = sk.realize(scalar_hand_response(a), "of", plant)
    trace = sk.simulate(plant, real, Perturbations.impulse(plant, 8, "dx", 0), 8)
    # x follows Phi_xx = 1/z exactly, u follows Phi_ux = -a/z exactly
    assert trace.x[1, 0] == 1.0
    assert trace.u[1, 0] == -a
    assert not trace.x[2:].any() and not trace.u[2:].any()
    assert trace.horizon == 8
    assert trace.z[1] == pytest.approx([1.0, -a])


def test_simulate_sf_one_step_deadbeat_by_hand():
    plant = sk.build_chain(4)
    A = plant.A
    resp = sk.SystemResponse(
        Phi_xx=Fir(np.stack([np.zeros((4, 4)), np.eye(4)])),
        Phi_ux=Fir(np.stack([np.zeros((4, 4)), -A])),
    )
    real = sk.realize(resp, plant=plant)
    trace = sk.simulate(plant, real, Perturbations.impulse(plant, 6, "dy", 2), 6)
    # measurement error fools the estimator for exactly one step
    assert np.allclose(trace.u[0], -A[:, 2])
    assert np.allclose(trace.x[1], -A[:, 2])
    assert np.allclose(trace.u[1], A @ A[:, 2])
    assert np.allclose(trace.x[2:], 0.0, atol=1e-14)
    assert np.array_equal(trace.delta_hat[0], np.eye(4)[2])


def test_simulate_validates_perturbation_shapes(rng):
    plant = random_of_plant(rng, n=3, nu=2, ny=2)
    real = sk.realize(synth_of(plant, 4), "of")
    with pytest.raises(ValueError, match="dx must have shape"):
        sk.simulate(plant, real, Perturbations(dx=np.zeros((4, 3))), 6)
    with pytest.raises(ValueError, match="unknown channel"):
        Perturbations.impulse(plant, 6, "dw", 0)
    s2 = sk.realize(synth_of(plant, 4), "structure2", plant)
    with pytest.raises(ValueError, match="no dbeta"):
        sk.simulate(plant, s2, Perturbations.impulse(plant, 6, "dbeta", 0), 6)


def test_simulate_of_kind_refuses_feedthrough_plant(rng):
    plant = random_of_plant(rng, n=3, nu=2, ny=2, with_d22=True)
    resp = synth_of(plant, 4)
    real = sk.realize(resp, "of")
    with pytest.raises(ValueError, match="of_d22"):
        sk.simulate(plant, real, Perturbations.impulse(plant, 6, "dx", 0), 6)


# ---------------------------------------------------------------------------
# linearity: measured signals equal predicted-map convolutions
# ---------------------------------------------------------------------------


def test_simulation_matches_predicted_maps_on_random_series(rng):
    plant = random_of_plant(rng, n=3, nu=2, ny=2)
    resp = synth_of(plant, 4)
    real = sk.realize(resp, "of", plant)
    maps = sk.predicted_maps(plant, resp)
    H = 18
    pert = Perturbations(
        dx=rng.standard_normal((H + 1, 3)),
        dy=rng.standard_normal((H + 1, 2)),
        du=rng.standard_normal((H + 1, 2)),
        dbeta=rng.standard_normal((H + 1, 3)),
    )
    trace = sk.simulate(plant, real, pert, H)
    series = {"dx": pert.dx, "dy": pert.dy, "du": pert.du, "dbeta": pert.dbeta}
    measured = {"x": trace.x, "u": trace.u, "y": trace.y, "beta": trace.beta}
    for sig in ("x", "u", "y", "beta"):
        want = sum(conv_series(maps[(sig, ch)], series[ch]) for ch in series)
        assert np.allclose(measured[sig], want, atol=1e-8), sig


def test_sf_simulation_matches_predicted_maps(rng):
    plant = sk.build_chain(5, actuator_sites=[1, 3, 5])
    res = sk.synthesize_sf_h2(sk.SynthesisProblem(plant, sk.fir_slc(plant, 5)))
    assert res.feasible
    maps = sk.predicted_maps(plant, res.response)
    assert len(maps) == 9
    real = sk.realize(res.response, plant=plant)
    H = 16
    pert = Perturbations(
        dx=rng.standard_normal((H + 1, 5)),
        dy=rng.standard_normal((H + 1, 5)),
        du=rng.standard_normal((H + 1, 3)),
    )
    trace = sk.simulate(plant, real, pert, H)
    series = {"dx": pert.dx, "dy": pert.dy, "du": pert.du}
    measured = {"x": trace.x, "u": trace.u, "dhat": trace.delta_hat}
    for sig in ("x", "u", "dhat"):
        want = sum(conv_series(maps[(sig, ch)], series[ch]) for ch in series)
        assert np.allclose(measured[sig], want, atol=1e-8), sig


# ---------------------------------------------------------------------------
# verification
# ---------------------------------------------------------------------------


def test_verify_accepts_synthesized_response(rng):
    plant = random_of_plant(rng, n=3, nu=2, ny=2)
    resp = synth_of(plant, 4)
    report = sk.verify_internal_stability(plant, resp)
    assert report.passed
    assert report.max_deviation <= report.tol == 1e-8
    assert report.horizon == 3 * 4 + 3
    assert set(report.per_channel) == {"dx", "dy", "du", "dbeta"}
    assert report.failures == []


def test_verify_accepts_feedthrough_plant(rng):
    plant = random_of_plant(rng, n=3, nu=2, ny=2, with_d22=True)
    report = sk.verify_internal_stability(plant, synth_of(plant, 4))
    assert report.passed, report.max_deviation


def test_verify_flags_corrupted_response(rng):
    plant = random_of_plant(rng, n=3, nu=2, ny=2)
    resp = synth_of(plant, 4)
    bad = resp.Phi_xx.coeffs.copy()
    bad[2, 0, 1] += 1e-3
    broken = sk.SystemResponse(
        Phi_xx=Fir(bad), Phi_ux=resp.Phi_ux, Phi_xy=resp.Phi_xy, Phi_uy=resp.Phi_uy
    )
    report = sk.verify_internal_stability(plant, broken)
    assert not report.passed
    assert report.max_deviation > 1e-4
    assert report.failures
    ch, coord, sig, t, dev = report.failures[0]
    assert ch in report.per_channel and dev > report.tol
    assert any(f[0] == "dx" for f in report.failures)


def test_verify_state_feedback_and_deadbeat_decay():
    plant = sk.build_chain(6)
    res = sk.synthesize_sf_h2(sk.SynthesisProblem(plant, sk.locality_slc(plant, 2, 6)))
    assert res.feasible
    report = sk.verify_internal_stability(plant, res.response, horizon=40)
    assert report.passed and report.horizon == 40
    assert set(report.per_channel) == {"dx", "dy", "du"}


def test_impulse_response_confined_by_locality():
    plant = sk.build_chain(10)
    res = sk.synthesize_sf_h2(sk.SynthesisProblem(plant, sk.locality_slc(plant, 2, 6)))
    assert res.feasible
    real = sk.realize(res.response, plant=plant)
    H = 25
    trace = sk.simulate(plant, real, Perturbations.impulse(plant, H, "dx", 5), H)
    outside = [i for i in range(10) if abs(i - 5) > 2]
    assert np.max(np.abs(trace.x[:, outside])) <= 1e-10
    assert np.max(np.abs(trace.u[:, outside])) <= 1e-10
    # deadbeat: everything is extinguished after the FIR horizon
    assert np.max(np.abs(trace.x[7:])) <= 1e-10
    assert np.max(np.abs(trace.u[7:])) <= 1e-10


# ---------------------------------------------------------------------------
# trace serialization
# ---------------------------------------------------------------------------


def test_sim_trace_csv_roundtrip(tmp_path):
    plant = scalar_unstable_plant()
    real = sk.realize(scalar_hand_response(), "of", plant)
    pert = Perturbations(dx=np.linspace(0.0, 1.0, 7).reshape(7, 1) / 3.0)
    trace = sk.simulate(plant, real, pert, 6)
    path = tmp_path / "trace.csv"
    trace.to_csv(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "x1", "u1", "y1", "b1"]
    assert [r[0] for r in rows[1:]] == [str(t) for t in range(7)]
    vals = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
    stacked = np.hstack([trace.x, trace.u, trace.y, trace.beta])
    # repr round-trips doubles exactly
    assert np.array_equal(vals, stacked)


# ---------------------------------------------------------------------------
# robustness figure and alternate structures
# ---------------------------------------------------------------------------


def test_robustness_h2_scalar_closed_form():
    a = 1.1
    plant = scalar_unstable_plant(a)
    got = sk.robustness_h2(plant, scalar_hand_response(a))
    assert got == pytest.approx(np.sqrt(1.0 + 3.0 * a**2 + 2.0 * a**4), rel=1e-12)


def test_alt_structures_scalar_unstable():
    a = 1.1
    plant = scalar_unstable_plant(a)
    H = 40
    report = sk.compare_alt_structures(plant, scalar_hand_response(a), H)
    assert report.spectral_radius == pytest.approx(a)
    assert report.horizon == H
    # an impulse on the control summation excites the open-loop mode
    assert report.structure1_x_norms[0] == 0.0
    assert np.allclose(
        report.structure1_x_norms[1:], a ** np.arange(H, dtype=float), rtol=1e-9
    )
    assert report.structure1_max_x == pytest.approx(a ** (H - 1), rel=1e-9)
    # the measurement-loop structure hides the growth from the state...
    assert report.structure2_max_x == pytest.approx(1.0, abs=1e-9)
    # ...but its internal signal grows at the open-loop rate
    assert report.structure2_max_beta == pytest.approx(a ** (H - 1), rel=1e-9)
    # the reference realization stays deadbeat
    assert report.reference_max_x_after_T == 0.0
    assert report.imc_vs_structure1 is None


def test_alt_structures_stable_plant_imc_equivalence(rng):
    plant = random_of_plant(rng, n=3, nu=2, ny=2, stable=True)
    resp = synth_of(plant, 5)
    report = sk.compare_alt_structures(plant, resp, 30)
    assert report.spectral_radius < 1.0
    assert report.imc_vs_structure1 is not None
    assert report.imc_vs_structure1 <= 1e-8
    assert report.reference_max_x_after_T <= 1e-10
    assert np.isfinite(report.structure1_max_x)
    assert report.structure2_max_beta < 1e6
