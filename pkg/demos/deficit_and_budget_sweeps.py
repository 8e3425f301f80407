"""How the regions respond to the receiver deficits and the transmit budget.

Produces three families of curves:
  * all-TS regions at deficit levels (30,15), (60,30), (120,60) uW,
  * all-PS regions at the same levels,
  * the mixed PS/TS region at budgets 10 W and 15 W.
"""

import argparse
import sys
from pathlib import Path

from swipt import SystemConfig, discretize_exponential, joint_product, trace_region
from swipt.units import kbps_to_nats, nats_to_kbps


def build_dist(step, cap):
    return joint_product([
        discretize_exponential(0.8, step, cap, user=0),
        discretize_exponential(0.5, step, cap, user=1),
    ])


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--full", action="store_true")
    ap.add_argument("--points", type=int, default=17)
    ap.add_argument("--out", default="demo_output/deficit_budget_sweeps")
    args = ap.parse_args()

    dist = build_dist(0.1 if args.full else 0.5, 10.0 if args.full else 7.5)
    rho = [kbps_to_nats(300.0), kbps_to_nats(150.0)]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    def cfg(arch, deficits_uw, budget=10.0):
        return SystemConfig(num_users=2, noise_vars=[0.8, 1.6], min_rates=rho,
                            deficits=[d * 1e-6 for d in deficits_uw],
                            efficiency=1e-4, tx_budget=budget,
                            architectures=arch)

    runs = {}
    for arch_name, arch in (("ts", ["time_switching"] * 2),
                            ("ps", ["power_splitting"] * 2)):
        for level in ((30, 15), (60, 30), (120, 60)):
            name = f"{arch_name}_deficit_{level[0]}_{level[1]}uW"
            print("tracing", name, flush=True)
            runs[name] = trace_region(cfg(arch, level), dist, args.points)
    mixed = ["power_splitting", "time_switching"]
    for budget in (10.0, 15.0):
        name = f"mixed_ps_ts_{budget:g}W"
        print("tracing", name, flush=True)
        runs[name] = trace_region(cfg(mixed, (60, 30), budget), dist, args.points)

    for name, tr in runs.items():
        tr.to_csv(out / f"{name}.csv")

    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        print("matplotlib not available; CSVs written to", out)
        return 0

    fig, axes = plt.subplots(1, 3, figsize=(15, 4.5))
    panels = (
        (axes[0], "all time-switching", [k for k in runs if k.startswith("ts_")]),
        (axes[1], "all power-splitting", [k for k in runs if k.startswith("ps_")]),
        (axes[2], "mixed PS/TS", [k for k in runs if k.startswith("mixed")]),
    )
    for ax, title, keys in panels:
        for key in keys:
            r = runs[key].rates_matrix()
            ax.plot(nats_to_kbps(r[:, 0]), nats_to_kbps(r[:, 1]), marker=".",
                    label=key)
        ax.set_title(title)
        ax.set_xlabel("receiver 1 rate [kbps]")
        ax.set_ylabel("receiver 2 rate [kbps]")
        ax.legend(fontsize=7)
        ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(out / "sweeps.png", dpi=150)
    print("wrote", out / "sweeps.png")
    return 0


if __name__ == "__main__":
    sys.exit(main())
