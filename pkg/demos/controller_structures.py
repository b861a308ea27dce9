"""Not every algebraically-correct controller survives its own noise.

Three implementations of the same closed-loop response are compared on a
scalar unstable plant (a = 1.1).  All three produce identical behavior
for disturbances entering the plant.  They differ the moment the
controller's *own* internal state is perturbed -- quantization, dropped
packets, finite-word arithmetic:

  * the reference realization drives the perturbation to exact zero in
    T steps (deadbeat, by construction);
  * "structure1" cancels the unstable plant pole against a zero, so the
    perturbation rides the open-loop dynamics and grows like 1.1^t;
  * "structure2" keeps the state bounded but hides the same geometric
    growth in its internal signal beta -- invisible until overflow.

On a stable plant the reference realization coincides with classical
internal model control, coefficient for coefficient.
"""

import numpy as np

import slskit as sk


def scalar_plant(a):
    return sk.PlantModel(
        A=np.array([[a]]),
        B1=np.eye(1),
        B2=np.eye(1),
        C1=np.array([[1.0], [0.0]]),
        D11=np.zeros((2, 1)),
        D12=np.array([[0.0], [1.0]]),
        C2=np.eye(1),
        D21=np.zeros((1, 1)),
        D22=np.zeros((1, 1)),
    )


def main():
    a = 1.1
    plant = scalar_plant(a)
    # C2 = I here, so force output-feedback masks instead of the
    # state-feedback shortcut the auto-detection would pick
    result = sk.synthesize_of_h2(
        sk.SynthesisProblem(
            plant,
            sk.fir_slc(plant, 4, output_feedback=True),
            mode="output-feedback",
        )
    )
    print(f"scalar plant x' = {a} x + u, synthesized with T=4, "
          f"H2 cost {result.cost:.4f}")

    horizon = 30
    rep = sk.compare_alt_structures(plant, result.response, horizon)
    # reference and structure1 take a unit hit on the controller state;
    # structure2 exposes no such channel, so it is hit on the process
    # side, where the cancelled mode grows in beta instead of x
    print(f"\nunit internal impulse (process-side for structure2), "
          f"{horizon} steps:")
    print(f"{'t':>4} {'reference |x|':>14} {'structure1 |x|':>15} "
          f"{'structure2 |x|':>15} {'structure2 |b|':>15}")
    ref = sk.simulate(
        plant,
        sk.realize(result.response, "of"),
        sk.Perturbations.impulse(plant, horizon, "dbeta", 0),
        horizon,
    )
    s1 = sk.simulate(
        plant,
        sk.realize(result.response, "structure1", plant=plant),
        sk.Perturbations.impulse(plant, horizon, "dbeta", 0, beta_dim=plant.nu),
        horizon,
    )
    s2 = sk.simulate(
        plant,
        sk.realize(result.response, "structure2", plant=plant),
        sk.Perturbations.impulse(plant, horizon, "dx", 0),
        horizon,
    )
    for t in range(0, horizon + 1, 3):
        print(f"{t:>4} {abs(ref.x[t, 0]):>14.2e} {abs(s1.x[t, 0]):>15.2e} "
              f"{abs(s2.x[t, 0]):>15.2e} {abs(s2.beta[t, 0]):>15.2e}")
    print(f"\ngrowth rate of structure1 |x|: "
          f"{abs(s1.x[horizon, 0] / s1.x[horizon - 1, 0]):.4f} "
          f"(plant pole at {a})")
    print(f"reference max |x| after T+3: "
          f"{rep.reference_max_x_after_T:.1e} (deadbeat to roundoff)")

    # stable plant: the reference realization IS internal model control
    rng = np.random.default_rng(11)
    n = 3
    A = rng.normal(size=(n, n))
    A *= 0.5 / max(abs(np.linalg.eigvals(A)))
    stable = sk.PlantModel(
        A=A,
        B1=np.eye(n),
        B2=rng.normal(size=(n, 2)),
        C1=np.vstack([np.eye(n), np.zeros((2, n))]),
        D11=np.zeros((n + 2, n)),
        D12=np.vstack([np.zeros((n, 2)), np.eye(2)]),
        C2=rng.normal(size=(2, n)),
        D21=np.zeros((2, n)),
        D22=np.zeros((2, 2)),
    )
    res2 = sk.synthesize_of_h2(
        sk.SynthesisProblem(stable, sk.fir_slc(stable, 6), mode="output-feedback")
    )
    rep2 = sk.compare_alt_structures(stable, res2.response, 25)
    print(f"\nstable 3-state plant (spectral radius 0.5):")
    print(f"  max |IMC trace - structure1 trace| = {rep2.imc_vs_structure1:.2e}")


if __name__ == "__main__":
    main()
