import pytest

from flexonc.errors import PreconditionError
from flexonc.packets import (CodedHeader, CodedPacket, FlowId, NativePacket, PacketId, rank_of,
                             xor_decode)

F1, F2, F3 = FlowId(0, 7, 1), FlowId(7, 9, 2), FlowId(2, 0, 3)


def pid(flow, seq=0):
    return PacketId(flow, seq)


def native(flow, prev_hop, next_hop, seq=0, **kw):
    return NativePacket(pid(flow, seq), prev_hop=prev_hop, next_hop=next_hop, size=1000, birth=0.0, **kw)


class TestXorDecode:
    def test_one_missing_partner_decodes(self):
        a, b = pid(F1), pid(F2)
        assert xor_decode({a, b}, {b}) == a

    def test_two_missing_is_undecodable(self):
        assert xor_decode({pid(F1), pid(F2)}, set()) is None

    def test_twelve_node_sink_with_nothing_overheard(self):
        # N9 overheard only P1 xor P3 and holds neither
        p1 = native(F1, prev_hop=5, next_hop=7)
        p3 = native(F3, prev_hop=2, next_hop=9)
        coded = CodedPacket(CodedHeader(((p1.id, 7), (p3.id, 9))), sender=6, natives=(p1, p3))
        assert xor_decode(coded, set()) is None

    def test_all_known_gives_none(self):
        a, b = pid(F1), pid(F2)
        assert xor_decode([a, b], {a, b}) is None

    def test_order_and_repeat_do_not_matter(self):
        a, b, c = pid(F1), pid(F2), pid(F3)
        known = {a, c}
        assert xor_decode([a, b, c], known) == xor_decode([c, b, a], known) == b
        assert xor_decode([a, b, c], known) == b


class TestRankOf:
    def test_only_bitmap_node_is_rank_two(self):
        h = CodedHeader(((pid(F1), 2), (pid(F2), 0)), eligible=frozenset({6}))
        assert rank_of(6, h, pid(F1)) == 2

    def test_intended_is_rank_one(self):
        h = CodedHeader(((pid(F1), 2), (pid(F2), 0)), eligible=frozenset({6}))
        assert rank_of(2, h, pid(F1)) == 1

    def test_ascending_index_order(self):
        h = CodedHeader(((pid(F1), 5), (pid(F2), 1)), eligible=frozenset({3, 7}))
        assert rank_of(3, h, pid(F1)) == 2
        assert rank_of(7, h, pid(F1)) == 3

    def test_empty_bitmap_rejects_non_intended(self):
        h = CodedHeader(((pid(F1), 5), (pid(F2), 1)))
        with pytest.raises(PreconditionError):
            rank_of(3, h, pid(F1))

    def test_unknown_partner(self):
        h = CodedHeader(((pid(F1), 5), (pid(F2), 1)))
        with pytest.raises(PreconditionError):
            rank_of(5, h, pid(F3))

    def test_bijection_onto_ranks(self):
        h = CodedHeader(((pid(F1), 5), (pid(F2), 1)), eligible=frozenset({9, 3, 7}))
        ranks = sorted(rank_of(r, h, pid(F1)) for r in (5, 3, 7, 9))
        assert ranks == [1, 2, 3, 4]


class TestHeader:
    def test_single_partner_rejected(self):
        with pytest.raises(PreconditionError):
            CodedHeader(((pid(F1), 2),))

    def test_duplicate_next_hops_rejected(self):
        with pytest.raises(PreconditionError):
            CodedHeader(((pid(F1), 2), (pid(F2), 2)))

    def test_bitmap_may_not_name_a_next_hop(self):
        with pytest.raises(PreconditionError):
            CodedHeader(((pid(F1), 2), (pid(F2), 3)), eligible=frozenset({3}))

    def test_positions_and_bitmap(self):
        h = CodedHeader(((pid(F1), 1), (pid(F2), 3)), eligible=frozenset({5, 7}))
        assert h.position(1) == 1 and h.position(3) == 2 and h.position(5) is None
        assert h.bitmap(8) == (1 << 5) | (1 << 7)
        with pytest.raises(PreconditionError):
            h.bitmap(6)

    def test_payloads_must_match_header(self):
        p1 = native(F1, 5, 7)
        p2 = native(F2, 7, 9)
        with pytest.raises(PreconditionError):
            CodedPacket(CodedHeader(((p1.id, 7), (p2.id, 9))), sender=6, natives=(p2, p1))


def test_flow_needs_distinct_endpoints():
    with pytest.raises(PreconditionError):
        FlowId(3, 3)


def test_decoded_native_needs_origin():
    with pytest.raises(PreconditionError):
        native(F1, 5, 7, decoded_native=True)
    p = native(F1, 6, 7, decoded_native=True, origin_prev_hop=5)
    assert p.coding_prev_hop == 5


def test_only_decoded_natives_are_suspect():
    with pytest.raises(PreconditionError):
        native(F1, 5, 7, suspect=True)
