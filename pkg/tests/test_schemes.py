"""Per-scheme behavior, driven either by injecting frames into a live
simulator or by short end-to-end runs."""

from dataclasses import replace

import pytest

from flexonc import CbrSource, FlowId, RunConfig, Simulator, TopologySpec, run, set_path
from flexonc.packets import AckKind, Acknowledgment, NativePacket, PacketId
from flexonc.phy import ChannelParams
from flexonc.schemes import sender_window
from flexonc.schemes.base import Frame, PendingTransmission

from support import eight_node_config

FWD, REV = FlowId(0, 4, 1), FlowId(4, 0, 2)


def idle_sim(scheme="flexonc"):
    """An 8-node simulator with no traffic, for hand-injected frames."""
    return Simulator(eight_node_config(scheme, flow_duration=0.0))


def packet(flow, seq, prev_hop, next_hop):
    return NativePacket(PacketId(flow, seq), prev_hop=prev_hop, next_hop=next_hop, size=1000, birth=0.0)


def coded_from_n1(sim):
    """N1 mixes a forward packet for N2 with a reverse packet for N0."""
    pa = packet(FWD, 0, 0, 2)
    pb = packet(REV, 0, 2, 0)
    frame = Frame(sim.new_tx_id(), 1, coded=sim.nodes[1].build_coded_frame([pa, pb]))
    return frame, pa, pb


def inject(sim, sender, frame, receivers, t=0.0):
    for r in receivers:
        sim.nodes[r].on_frame(sender, frame, t)


class TestSenderWindow:
    def test_two_partners_two_eligible(self):
        ch = ChannelParams()
        assert sender_window(ch, 2, 2) == pytest.approx(4 * ch.ack_slot + ch.guard)

    def test_native(self):
        ch = ChannelParams()
        assert sender_window(ch, 1) == pytest.approx(ch.ack_slot + ch.guard)

    def test_third_next_hop_waits(self):
        ch = ChannelParams()
        assert sender_window(ch, 3) == pytest.approx(3 * ch.ack_slot + ch.guard)

    def test_deadline_after_last_slot(self):
        ch = ChannelParams()
        last_slot_end = (2 + 2 - 1) * ch.ack_slot + ch.ack_slot - ch.propagation
        assert sender_window(ch, 2, 2) > last_slot_end

    def test_empty_frame(self):
        with pytest.raises(ValueError):
            sender_window(ChannelParams(), 0)


class TestCodedHeaders:
    def test_n1_bitmap_is_n6(self):
        frame, _, _ = coded_from_n1(idle_sim())
        assert frame.coded.header.eligible == {6}

    def test_n2_bitmap(self):
        sim = idle_sim()
        a = packet(FWD, 0, 1, 3)
        b = packet(REV, 0, 3, 1)
        assert sim.nodes[2].build_coded_frame([a, b]).header.eligible == {5, 7}

    def test_bend_has_no_bitmap(self):
        sim = idle_sim("bend")
        frame, _, _ = coded_from_n1(sim)
        assert frame.coded.header.eligible == frozenset()


class TestBackupForwarding:
    def test_backup_fires_when_intended_misses(self):
        sim = idle_sim()
        frame, pa, pb = coded_from_n1(sim)
        sim.nodes[6].buffer.add(pb, 0.0)
        sim.nodes[0].buffer.add(pa, 0.0)    # the source still holds its own packet
        fired = []
        original = sim.nodes[6].on_backup_fire
        sim.nodes[6].on_backup_fire = lambda duty, now: (fired.append(duty), original(duty, now))
        inject(sim, 1, frame, [0, 6])    # N2 misses it
        sim.run()
        assert [(d.rank, d.second_next_hop) for d in fired] == [(2, 3)]
        assert sim.metrics.backup_firings == 1
        assert pa.id in sim.delivered and pb.id in sim.delivered
        assert sim.metrics.duplicates == 0

    def test_intended_ack_cancels_backup(self):
        sim = idle_sim()
        frame, pa, pb = coded_from_n1(sim)
        for node in (2, 6):
            sim.nodes[node].buffer.add(pb, 0.0)
        inject(sim, 1, frame, [0, 2, 6])
        sim.run()
        assert sim.metrics.backup_firings == 0
        assert not sim.nodes[6].duties
        assert pa.id in sim.delivered and sim.metrics.duplicates == 0

    def test_intended_without_partner_nacks(self):
        sim = idle_sim()
        frame, pa, pb = coded_from_n1(sim)
        inject(sim, 1, frame, [2])
        sim.run()
        assert sim.metrics.nacks_sent == 1
        assert sim.metrics.decoding_failures[2] == 1

    def test_bend_helper_discards_coded(self):
        sim = idle_sim("bend")
        frame, pa, pb = coded_from_n1(sim)
        sim.nodes[6].buffer.add(pb, 0.0)
        inject(sim, 1, frame, [0, 6])
        assert len(sim.nodes[6].queues) == 0
        sim.run()
        assert pa.id not in sim.delivered


class TestOverhearing:
    @pytest.mark.parametrize("scheme", ["bend", "flexonc"])
    def test_eligible_neighbor_keeps_helper_copy(self, scheme):
        sim = idle_sim(scheme)
        p = packet(FWD, 0, 0, 2)
        inject(sim, 1, Frame(sim.new_tx_id(), 1, native=p), [6])
        (copy,) = sim.nodes[6].queues.q2
        assert copy.behalf_of == 2 and copy.next_hop == 3

    def test_non_eligible_neighbor_only_buffers(self):
        sim = idle_sim()
        p = packet(FWD, 0, 0, 2)
        inject(sim, 1, Frame(sim.new_tx_id(), 1, native=p), [5])
        assert not sim.nodes[5].queues.q2 and p.id in sim.nodes[5].buffer

    def test_cope_keeps_no_helpers(self):
        sim = idle_sim("cope")
        p = packet(FWD, 0, 0, 2)
        inject(sim, 1, Frame(sim.new_tx_id(), 1, native=p), [6])
        assert not sim.nodes[6].queues.q2

    def test_cached_ack_blocks_helper_copy(self):
        sim = idle_sim()
        p = packet(FWD, 0, 0, 2)
        sim.nodes[6].ack_cache.add(p.id, 2)
        inject(sim, 1, Frame(sim.new_tx_id(), 1, native=p), [6])
        assert not sim.nodes[6].queues.q2

    def test_ack_from_next_hop_purges_queue(self):
        sim = idle_sim()
        p = packet(FWD, 0, 0, 2)
        inject(sim, 1, Frame(sim.new_tx_id(), 1, native=p), [6])
        sim.nodes[6].on_ack(Acknowledgment(AckKind.ACK, 3, p.id), 0.01)
        assert not sim.nodes[6].queues.q2


class TestTimeouts:
    def test_unheard_coded_frame_is_resent_whole(self):
        sim = idle_sim()
        frame, _, _ = coded_from_n1(sim)
        node = sim.nodes[1]
        node._coded_timeout(frame, PendingTransmission(frame, 0.0), 0.0)
        assert list(node.queues.retx) == [frame]
        assert sim.metrics.fate["unheard"] == 1

    def test_partial_ack_requeues_the_rest_natively(self):
        sim = idle_sim()
        frame, pa, pb = coded_from_n1(sim)
        node = sim.nodes[1]
        pend = PendingTransmission(frame, 0.0, acked={pb.id: 0})
        node._coded_timeout(frame, pend, 0.0)
        assert [p.id for p in node.queues.q1] == [pa.id]
        assert not node.queues.retx

    def test_backup_ack_counts_as_backup_only(self):
        sim = idle_sim()
        frame, pa, pb = coded_from_n1(sim)
        sim.nodes[1]._coded_timeout(frame, PendingTransmission(frame, 0.0, acked={pa.id: 6}), 0.0)
        assert sim.metrics.fate["backup_only"] == 1

    def test_native_at_max_retries_is_dropped(self):
        sim = idle_sim()
        p = replace(packet(FWD, 0, 0, 1), attempts=sim.params.max_retries + 1)
        frame = Frame(0, 0, native=p)
        sim.nodes[0]._native_timeout(frame, PendingTransmission(frame, 0.0))
        assert sim.metrics.flows[1].drop_events == 1
        assert not sim.nodes[0].queues.retx


class TestSwitchRuleNode:
    def test_nack_without_suspect_changes_nothing(self):
        sim = idle_sim("flexonc-sr")
        frame, pa, _ = coded_from_n1(sim)
        node = sim.nodes[1]
        for _ in range(10):
            node._on_nack(frame, Acknowledgment(AckKind.NACK, 2, pa.id), 0.0)
        assert not node.switch.nack_count and not node.switch.recoding_active

    def test_suspect_nacks_switch_on(self):
        sim = idle_sim("flexonc-sr")
        frame, pa, pb = coded_from_n1(sim)
        frame = replace(frame, coded=replace(frame.coded, suspects=frozenset({pb.id})))
        node = sim.nodes[1]
        for _ in range(6):
            node._on_nack(frame, Acknowledgment(AckKind.NACK, 2, pa.id), 0.0)
        assert node.switch.active(REV)
        assert sim.metrics.switch_events[-1][3] == "on"


def line_config(scheme, hops, interval=0.05, duration=20.0, ber=0.0, **params):
    n = hops + 1
    spec = TopologySpec(kind="edges", node_count=n, edges=tuple((i, i + 1) for i in range(hops)))
    flow = CbrSource(FlowId(0, hops, 1), interval, duration=duration)
    return RunConfig(spec, (flow,), scheme=scheme, channel=ChannelParams(ber=ber, ack_loss=False),
                     duration=duration + 2.0)


class TestEndToEnd:
    def test_noncoding_lossless_single_flow(self):
        rec = run(line_config("noncoding", 3))
        assert rec.delivered == rec.generated > 0

    def test_noncoding_without_retries_delivers_p_to_the_h(self):
        length = 1000 + 24
        p = 0.9
        ber = 1 - p ** (1 / (8 * length))
        cfg = line_config("noncoding", 3, interval=0.05, duration=150.0, ber=ber)
        cfg = set_path(cfg, "params.max_retries", 0)
        rec = run(cfg)
        assert rec.delivered / rec.generated == pytest.approx(p ** 3, abs=0.03)

    def test_noncoding_never_fails_to_decode(self):
        cfg = set_path(eight_node_config("noncoding", ber=5e-5, flow_duration=10.0), "seed", 1)
        assert sum(run(cfg).decoding_failures.values()) == 0

    def test_noncoding_uses_more_transmissions_than_flexonc_on_x(self):
        edges = ((0, 2), (1, 2), (2, 3), (2, 4), (0, 4), (1, 3))
        spec = TopologySpec(kind="edges", node_count=5, edges=edges)
        flows = (CbrSource(FlowId(0, 3, 1), 0.05, duration=10.0),
                 CbrSource(FlowId(1, 4, 2), 0.05, duration=10.0))
        recs = {s: run(RunConfig(spec, flows, scheme=s, duration=12.0)) for s in ("noncoding", "flexonc")}
        assert recs["flexonc"].coded_sent > 0
        assert recs["noncoding"].transmissions > recs["flexonc"].transmissions
        assert recs["noncoding"].delivered == recs["flexonc"].delivered

    def test_core_one_forwarder_per_hop(self):
        rec = run(line_config("core", 2))
        assert rec.delivered == rec.generated
        assert rec.transmissions == 2 * rec.generated

    def test_core_never_retransmits(self):
        cfg = eight_node_config("core", ber=5e-5, flow_duration=10.0)
        rec = run(cfg)
        assert rec.transmissions <= 4 * rec.generated
        assert rec.retransmissions == 0

    def test_core_slower_at_low_rate(self):
        cfg = eight_node_config(interval=0.15, flow_duration=20.0)
        core = run(replace(cfg, scheme="core"))
        flex = run(cfg)
        assert core.mean_delay > flex.mean_delay

    def test_core_delivers_less_under_loss(self):
        cfg = eight_node_config(ber=5e-5, flow_duration=20.0)
        assert run(replace(cfg, scheme="core")).delivered < run(cfg).delivered

    def test_cope_reproduces_the_twelve_node_failure(self):
        from flexonc.scenario import resolve
        scn = resolve("12node", [("flows.duration", 20.0), ("duration", 21.0), ("flows.interval", 0.07)])
        rec = run(replace(scn.config, scheme="cope"))
        assert rec.decoding_failures[9] > 0

    def test_bend_matches_flexonc_on_a_perfect_channel(self):
        cfg = eight_node_config(flow_duration=20.0)
        bend, flex = run(replace(cfg, scheme="bend")), run(cfg)
        assert flex.backup_firings == 0
        assert flex.delivered == bend.delivered == flex.generated
