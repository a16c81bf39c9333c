"""When the common coding conditions are not enough.

On the 3x4 grid, N6 receives P1 only inside a coded frame from N5 and then
mixes it with P2 for N9. The common conditions approve, because N9 is a
neighbor of N5, but N9 never heard P1 and cannot decode. COPE keeps making
this mistake. FlexONC-SR counts NACKs on such suspect mixes and, past the
threshold, switches that flow to the stricter recoding rule.

    python3 demos/twelve_node_switchrule.py [--interval 0.07] [--seed 0]
"""

import argparse
from dataclasses import replace

from flexonc import run, set_path
from flexonc.scenario import resolve


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--interval", type=float, default=0.07)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    base = set_path(resolve("12node").config, "flows.interval", args.interval)
    print(f"12-node grid, inter-arrival {args.interval} s, seed {args.seed}\n")
    print(f"{'scheme':<11} {'fail@9':>7} {'NACKs':>6} {'retx':>6} {'delivered':>10}")
    records = {}
    for scheme in ("cope", "flexonc", "flexonc-sr"):
        rec = records[scheme] = run(replace(base, scheme=scheme, seed=args.seed))
        print(f"{scheme:<11} {rec.decoding_failures[9]:>7} {rec.nacks:>6} {rec.retransmissions:>6} "
              f"{rec.delivered:>10}")

    sr = records["flexonc-sr"]
    print("\nSwitchRule events (time, node, flow, event):")
    for t, node, flow, what in sr.switch_events:
        print(f"  {t:8.3f}  N{node}  F{flow}  {what}")
    ons = [t for t, _, _, what in sr.switch_events if what == "on"]
    if ons:
        later = [t for t in sr.failure_times.get(9, []) if t > ons[0]]
        print(f"\nN9 failures after the first activation at {ons[0]:.2f} s: {len(later)}")
        for t in later:
            print(f"  at {t:.3f} s")


if __name__ == "__main__":
    main()
