"""Cost of communication delay on the 100-node chain benchmark.

The delay constraint forbids the response at node i to a disturbance at
node j from moving before t_c * dist(i, j) steps have passed: controllers
may only use information that has had time to travel.  With t_c = 0
communication is instantaneous; t_c = 0.9 means information barely
outruns the dynamics themselves (one hop per step).  The punchline is
that even nearly-dynamics-speed communication costs only about 2% extra.
"""

import numpy as np

import slskit as sk
from locality_tradeoff import benchmark_sites


D_HOPS = 8
HORIZON = 20


def main():
    sites = benchmark_sites(100, 5)
    plant = sk.build_chain(100, actuator_sites=sites)
    baseline = sk.centralized_baseline(plant)

    print(f"chain n=100, {len(sites)} actuators, d={D_HOPS}, T={HORIZON}")
    print(f"{'t_c':>6} {'normalized cost':>16} {'vs t_c=0':>10}")
    reference = None
    for t_c in (0.0, 0.5, 0.9):
        parts = [
            sk.locality_slc(plant, D_HOPS, HORIZON),
            sk.fir_slc(plant, HORIZON),
        ]
        if t_c > 0:
            parts.append(sk.delay_slc(plant, t_c, HORIZON))
        result = sk.synthesize_sf_h2(
            sk.SynthesisProblem(plant, sk.intersect(*parts)), workers=8
        )
        if not result.feasible:
            print(f"{t_c:>6.1f} {'infeasible':>16}")
            continue
        norm = result.cost / baseline
        if reference is None:
            reference = norm
        print(f"{t_c:>6.1f} {norm:>16.6f} {norm / reference:>9.4f}x")

    # sanity: the delay masks really do gate the response in time
    graph = sk.hop_distances(plant.A)
    nodes = np.arange(100)
    mask = sk.delay_mask(graph, 0.9, nodes, nodes, HORIZON)
    first_allowed = np.argmax(mask.allowed, axis=0)
    print("\nfirst step the response may move, by hop distance "
          "(t_c = 0.9):")
    for d in range(0, 10, 3):
        print(f"  dist {d:>2d}: t >= {first_allowed[0, d]}")


if __name__ == "__main__":
    main()
