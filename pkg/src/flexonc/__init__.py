"""Discrete-event simulator for inter-flow network coding with cooperative forwarding."""

from .config import CbrSource, RunConfig, SchemeKind, SchemeParams, TopologySpec
from .errors import ConfigurationError, PreconditionError
from .metrics import MetricsRecord, throughput, throughput_gain
from .packets import FlowId, PacketId
from .phy import ChannelParams
from .sim import Simulator, run, set_path, sweep

__version__ = "0.1.0"

__all__ = [
    "CbrSource", "ChannelParams", "ConfigurationError", "FlowId", "MetricsRecord", "PacketId",
    "PreconditionError", "RunConfig", "SchemeKind", "SchemeParams", "Simulator", "TopologySpec",
    "run", "set_path", "sweep", "throughput", "throughput_gain",
]
