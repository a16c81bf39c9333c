import pytest

from flexonc.errors import ConfigurationError
from flexonc.packets import FlowId
from flexonc.topology import (build_grid, compute_routes, eligible_forwarders, from_edges,
                              routing_view, second_next_hop)


class TestBuild:
    def test_eight_node_layout_neighbors(self, eight):
        assert eight.neighbors(1) == {0, 2, 5, 6}
        assert eight.neighbors(6) == {1, 2, 3, 5, 7}
        assert eight.neighbors(0) == {1, 5}

    def test_two_by_four_grid_is_eight_connected(self):
        g = build_grid(2, 4, 150)
        # the diagonal to node 4 is within range on a full grid
        assert g.neighbors(1) == {0, 2, 4, 5, 6}

    def test_single_cell(self):
        assert build_grid(1, 1, 150).neighbors(0) == frozenset()

    def test_corner_has_three_neighbors(self):
        g = build_grid(5, 5, 150)
        assert len(g.neighbors(0)) == 3
        assert len(g.neighbors(24)) == 3
        assert len(g.neighbors(12)) == 8

    def test_bad_sizes(self):
        with pytest.raises(ConfigurationError):
            build_grid(0, 3)
        with pytest.raises(ConfigurationError):
            build_grid(2, 2, spacing=0)

    def test_edges(self):
        t = from_edges(3, [(0, 1), (1, 2)])
        assert t.neighbors(1) == {0, 2}
        with pytest.raises(ConfigurationError):
            from_edges(3, [(0, 3)])
        with pytest.raises(ConfigurationError):
            from_edges(3, [(1, 1)])


class TestRoutes:
    def test_lowest_index_tie_break(self, eight):
        routes = compute_routes(eight, [FlowId(0, 4, 1)])
        assert routes[0].next_hop(4) == 1
        high = compute_routes(eight, [FlowId(0, 4, 1)], tie_break="highest")
        assert high[0].next_hop(4) in {1, 5}

    def test_lookup_at_destination_is_error(self, eight):
        routes = compute_routes(eight, [FlowId(0, 4, 1)])
        with pytest.raises(LookupError):
            routes[4].next_hop(4)

    def test_pinned_twelve_node_route(self, twelve):
        f = FlowId(0, 7, 1)
        routes = compute_routes(twelve, [f], pinned={f: (0, 5, 6, 7)})
        assert [routes[0].next_hop(7), routes[5].next_hop(7), routes[6].next_hop(7)] == [5, 6, 7]

    def test_pinned_route_must_use_links(self, twelve):
        f = FlowId(0, 7, 1)
        with pytest.raises(ConfigurationError):
            compute_routes(twelve, [f], pinned={f: (0, 6, 7)})

    def test_unknown_tie_break(self, eight):
        with pytest.raises(ConfigurationError):
            compute_routes(eight, [FlowId(0, 4, 1)], tie_break="random")

    def test_unreachable_destination(self):
        t = from_edges(3, [(0, 1)])
        with pytest.raises(ConfigurationError):
            compute_routes(t, [FlowId(0, 2, 1)])


class TestSecondNextHop:
    def test_owner_six_intended_two(self, eight_view):
        assert second_next_hop(eight_view(6), 2, 4) == 3

    def test_intended_next_to_destination(self, eight_view):
        assert second_next_hop(eight_view(2), 3, 4) == 4

    def test_intended_not_a_neighbor(self, eight_view):
        with pytest.raises(LookupError):
            second_next_hop(eight_view(0), 6, 4)

    def test_agrees_with_intended_table(self, eight, eight_routes, eight_view):
        for u in eight.nodes:
            view = eight_view(u)
            for v in eight.neighbors(u):
                for d in (0, 4):
                    if v != d:
                        assert second_next_hop(view, v, d) == eight_routes[v].next_hop(d)


class TestEligible:
    def test_only_n6_can_stand_in_for_n2(self, eight, eight_view):
        assert eligible_forwarders(eight_view(1), eight, 1, 2, 4) == {6}

    def test_n2_coding_toward_n1_and_n3(self, eight, eight_view):
        view = eight_view(2)
        toward_n1 = eligible_forwarders(view, eight, 2, 1, 0)
        toward_n3 = eligible_forwarders(view, eight, 2, 3, 4)
        assert toward_n1 | toward_n3 == {5, 7}

    def test_no_common_neighbor(self):
        line = from_edges(4, [(0, 1), (1, 2), (2, 3)])
        routes = compute_routes(line, [FlowId(0, 3, 1)])
        assert eligible_forwarders(routing_view(routes, line, 0), line, 0, 1, 3) == frozenset()

    def test_next_hop_is_destination(self, eight, eight_view):
        assert eligible_forwarders(eight_view(3), eight, 3, 4, 4) == frozenset()

    def test_subset_of_common_neighbors(self, eight, eight_view):
        for s in eight.nodes:
            for nh in eight.neighbors(s):
                for d in (0, 4):
                    if nh in (d,) or s == d:
                        continue
                    e = eligible_forwarders(eight_view(s), eight, s, nh, d)
                    assert e <= eight.neighbors(s) & eight.neighbors(nh)
