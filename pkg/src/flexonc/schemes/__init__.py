"""Per-scheme node state machines."""

from ..config import SchemeKind
from .base import Frame, MacNode, PendingTransmission, sender_window
from .baselines import BendNode, CopeNode, CoreNode, NonCodingNode
from .flexonc import AckCache, BackupDuty, FlexoncNode, FlexoncSrNode

NODE_CLASSES = {
    SchemeKind.NONCODING: NonCodingNode,
    SchemeKind.COPE: CopeNode,
    SchemeKind.BEND: BendNode,
    SchemeKind.CORE: CoreNode,
    SchemeKind.FLEXONC: FlexoncNode,
    SchemeKind.FLEXONC_SR: FlexoncSrNode,
}


def make_node(kind, node_id: int, sim):
    return NODE_CLASSES[SchemeKind.parse(kind)](node_id, sim)


__all__ = ["AckCache", "BackupDuty", "BendNode", "CopeNode", "CoreNode", "Frame", "FlexoncNode",
           "FlexoncSrNode", "MacNode", "NODE_CLASSES", "NonCodingNode", "PendingTransmission",
           "make_node", "sender_window"]
