"""Why ranked backups help: delivery probability of a coded packet.

A coded packet needs every partner to get through at each hop. BEND relies
on one designated forwarder per hop, while FlexONC lets any of N eligible
forwarders carry it. The closed forms below show the gap, which is largest
on lossy links and vanishes when links are perfect.

    python3 demos/delivery_gap.py
"""

from flexonc.analysis import (DeliveryParams, monte_carlo_delivery, p_deliver_coded_bend,
                              p_deliver_coded_flexonc, verify_inequality)


def main():
    print(f"{'p':>5} {'BEND':>9} {'FlexONC':>9} {'gap':>8} {'MC FlexONC':>11}")
    for p in (0.6, 0.7, 0.8, 0.9, 0.95, 0.99, 1.0):
        q = DeliveryParams(p, N=2, H=3, m=2)
        mc = monte_carlo_delivery(q, "flexonc", 200_000, seed=1)
        bend, flex = p_deliver_coded_bend(q), p_deliver_coded_flexonc(q)
        print(f"{p:>5} {bend:>9.6f} {flex:>9.6f} {flex - bend:>8.4f} {mc.value:>11.6f}")
    print("\nN=2 forwarders, H=3 hops, m=2 partners.")
    print(verify_inequality([DeliveryParams(p, N, H, m) for p in (0.6, 0.8, 0.9, 0.99, 1.0)
                             for N in (1, 2, 3) for H in (2, 3, 5) for m in (1, 2, 3)]).summary())


if __name__ == "__main__":
    main()
