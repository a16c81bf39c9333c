"""Helpers shared by the test modules."""

from flexonc import CbrSource, FlowId, RunConfig, TopologySpec
from flexonc.phy import ChannelParams

EIGHT_NODE_POSITIONS = (
    (0.0, 0.0), (150.0, 0.0), (300.0, 0.0), (450.0, 0.0), (600.0, 0.0),
    (150.0, 150.0), (300.0, 150.0), (450.0, 150.0),
)


def eight_node_spec():
    return TopologySpec(kind="positions", positions=EIGHT_NODE_POSITIONS)


def eight_node_config(scheme="flexonc", interval=0.07, flow_duration=5.0, ber=0.0, **kw):
    """Two opposing flows N0<->N4 pinned along the bottom row."""
    flows = (CbrSource(FlowId(0, 4, 1), interval, duration=flow_duration, route=(0, 1, 2, 3, 4)),
             CbrSource(FlowId(4, 0, 2), interval, duration=flow_duration, route=(4, 3, 2, 1, 0)))
    return RunConfig(eight_node_spec(), flows, scheme=scheme, channel=ChannelParams(ber=ber),
                     duration=flow_duration + 2.0, **kw)


# criterion number -> (title, passed, detail); filled by test_acceptance
ACCEPTANCE = {}


def record(number: int, title: str, passed: bool, detail: str):
    ACCEPTANCE[number] = (title, passed, detail)
