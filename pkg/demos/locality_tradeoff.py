"""Sweep locality radius and FIR horizon on the 100-node chain benchmark.

For each (d, T) pair the synthesized H2 cost is normalized by the
centralized infinite-horizon optimum.  The table shows the central
empirical fact about localized synthesis on this benchmark: already at
d=5, T=15 the localized FIR controller is within a fraction of a percent
of the unconstrained optimum, and widening either budget only moves the
cost monotonically toward 1.  Infeasible pairs (locality region too small
for the actuation pattern to close the loop) print as "--".

Writes locality_tradeoff.png next to this script when matplotlib is
importable; the printed table carries the same numbers either way.
"""

import math
import os
import time

import numpy as np

import slskit as sk


N = 100
SPACING = 5
D_GRID = [1, 3, 5, 7, 9, 99]
T_GRID = [5, 10, 15, 20, 30]


def benchmark_sites(n, spacing):
    # two actuators per block of `spacing` nodes: the first and the last
    sites = []
    for j in range(1, n // spacing + 1):
        sites += [spacing * (j - 1) + 1, spacing * j]
    return sorted(set(sites))


def main():
    sites = benchmark_sites(N, SPACING)
    plant = sk.build_chain(N, actuator_sites=sites)
    baseline = sk.centralized_baseline(plant)
    print(f"chain n={N}, {len(sites)} actuators, "
          f"spectral radius {max(abs(np.linalg.eigvals(plant.A))):.2f}, "
          f"centralized H2 cost {baseline:.6f}")
    print()

    header = "  d \\ T " + "".join(f"{T:>10d}" for T in T_GRID)
    print(header)
    print("  " + "-" * (len(header) - 2))
    table = np.full((len(D_GRID), len(T_GRID)), math.inf)
    t0 = time.perf_counter()
    for i, d in enumerate(D_GRID):
        cells = []
        for j, T in enumerate(T_GRID):
            slc = sk.intersect(
                sk.locality_slc(plant, d, T), sk.fir_slc(plant, T)
            )
            result = sk.synthesize_sf_h2(
                sk.SynthesisProblem(plant, slc), workers=8
            )
            if result.feasible:
                table[i, j] = result.cost / baseline
                cells.append(f"{table[i, j]:>10.6f}")
            else:
                cells.append(f"{'--':>10}")
        print(f"  {d:>5d} " + "".join(cells))
    print(f"\nswept {table.size} points in {time.perf_counter() - t0:.1f}s")

    best = np.nanmin(np.where(np.isfinite(table), table, np.nan))
    print(f"best normalized cost: {best:.8f}")

    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        print("matplotlib not available; skipping the figure")
        return
    fig, ax = plt.subplots(figsize=(6, 4))
    for i, d in enumerate(D_GRID):
        mask = np.isfinite(table[i])
        if not mask.any():
            continue
        ax.plot(
            np.asarray(T_GRID)[mask],
            table[i, mask],
            marker="o",
            label=f"d = {d}",
        )
    ax.set_xlabel("FIR horizon T")
    ax.set_ylabel("H2 cost / centralized optimum")
    ax.set_yscale("log")
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    out = os.path.join(os.path.dirname(os.path.abspath(__file__)),
                       "locality_tradeoff.png")
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
