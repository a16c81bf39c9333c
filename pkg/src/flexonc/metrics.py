"""Per-run aggregation of throughput, delay, duplicates and coding statistics."""

from __future__ import annotations

import csv
import io
import json
import math
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Dict, Iterable, List, Optional

FATES = ("intended", "backup_only", "unheard")


@dataclass
class FlowStats:
    source: int
    destination: int
    payload: int
    active: float
    generated: int = 0
    delivered: int = 0
    duplicates: int = 0
    delay_sum: float = 0.0
    retransmissions: int = 0
    nacks: int = 0
    drop_events: int = 0
    lost: int = 0
    in_flight: int = 0

    @property
    def mean_delay(self) -> float:
        return self.delay_sum / self.delivered if self.delivered else math.nan

    @property
    def throughput(self) -> float:
        return 8 * self.payload * self.delivered / self.active if self.active > 0 else 0.0


@dataclass
class CodingOpportunity:
    node: int
    time: float
    partners: int


@dataclass
class MetricsRecord:
    scheme: str = ""
    seed: int = 0
    flows: Dict[int, FlowStats] = field(default_factory=dict)
    transmissions: int = 0
    decoding_failures: Counter = field(default_factory=Counter)
    failure_times: Dict[int, List[float]] = field(default_factory=dict)
    coded_received: Counter = field(default_factory=Counter)
    coding_opportunities: Counter = field(default_factory=Counter)
    partner_histogram: Counter = field(default_factory=Counter)
    backup_firings: int = 0
    coded_sent: int = 0
    fate: Counter = field(default_factory=Counter)
    acks_sent: int = 0
    nacks_sent: int = 0
    lost_acks: int = 0
    switch_events: List[tuple] = field(default_factory=list)
    trace_hash: str = ""
    events: int = 0

    # -- recording, used by the simulator ----------------------------------

    def opportunity(self, node: int, time: float, partners: int):
        self.coding_opportunities[node] += 1
        self.partner_histogram[partners] += 1

    def decoding_failure(self, node: int, time: float):
        self.decoding_failures[node] += 1
        self.failure_times.setdefault(node, []).append(time)

    # -- totals -------------------------------------------------------------

    def total(self, name: str) -> float:
        return sum(getattr(f, name) for f in self.flows.values())

    @property
    def generated(self) -> int:
        return int(self.total("generated"))

    @property
    def delivered(self) -> int:
        return int(self.total("delivered"))

    @property
    def duplicates(self) -> int:
        return int(self.total("duplicates"))

    @property
    def mean_delay(self) -> float:
        n = self.delivered
        return self.total("delay_sum") / n if n else math.nan

    @property
    def nacks(self) -> int:
        return int(self.total("nacks"))

    @property
    def retransmissions(self) -> int:
        return int(self.total("retransmissions"))

    def fate_fractions(self) -> Dict[str, float]:
        if not self.coded_sent:
            return {k: math.nan for k in FATES}
        return {k: self.fate[k] / self.coded_sent for k in FATES}

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        d = asdict(self)
        d["flows"] = {str(k): asdict(v) for k, v in self.flows.items()}
        for key in ("decoding_failures", "coded_received", "coding_opportunities", "partner_histogram"):
            d[key] = {str(k): v for k, v in sorted(getattr(self, key).items())}
        d["failure_times"] = {str(k): v for k, v in self.failure_times.items()}
        d["fate"] = {k: self.fate[k] for k in FATES}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsRecord":
        rec = cls(scheme=d["scheme"], seed=d["seed"])
        rec.flows = {int(k): FlowStats(**v) for k, v in d["flows"].items()}
        for key in ("decoding_failures", "coded_received", "coding_opportunities", "partner_histogram"):
            setattr(rec, key, Counter({int(k): v for k, v in d[key].items()}))
        rec.failure_times = {int(k): list(v) for k, v in d["failure_times"].items()}
        rec.fate = Counter(d["fate"])
        rec.switch_events = [tuple(e) for e in d["switch_events"]]
        for key in ("transmissions", "backup_firings", "coded_sent", "acks_sent", "nacks_sent",
                    "lost_acks", "trace_hash", "events"):
            setattr(rec, key, d[key])
        return rec


def throughput(record: MetricsRecord, flows: Optional[Iterable[int]] = None) -> float:
    """Unique delivered payload bits per second of flow activity (bit/s).

    Over a flow subset, the per-flow rates are summed.
    """
    keys = record.flows.keys() if flows is None else flows
    return sum(record.flows[k].throughput for k in keys)


def throughput_gain(flexonc: MetricsRecord | float, baseline: MetricsRecord | float) -> Optional[float]:
    """Percent gain of the first over the second; None when the baseline is 0."""
    a = flexonc if isinstance(flexonc, (int, float)) else throughput(flexonc)
    b = baseline if isinstance(baseline, (int, float)) else throughput(baseline)
    if b == 0:
        return None
    return 100.0 * (a - b) / b


def count_decoding_failures(record: MetricsRecord, node: int) -> int:
    return record.decoding_failures.get(node, 0)


CSV_COLUMNS = (
    "generated", "delivered", "duplicates", "throughput_bps", "mean_delay_s",
    "retransmissions", "nacks", "lost", "in_flight", "transmissions", "coded_sent",
    "fate_intended", "fate_backup_only", "fate_unheard", "coding_opportunities",
    "decoding_failures", "backup_firings", "acks_sent", "nacks_sent", "lost_acks",
)


def summary_row(record: MetricsRecord) -> dict:
    return {
        "generated": record.generated,
        "delivered": record.delivered,
        "duplicates": record.duplicates,
        "throughput_bps": throughput(record),
        "mean_delay_s": record.mean_delay,
        "retransmissions": record.retransmissions,
        "nacks": record.nacks,
        "lost": int(record.total("lost")),
        "in_flight": int(record.total("in_flight")),
        "transmissions": record.transmissions,
        "coded_sent": record.coded_sent,
        "fate_intended": record.fate["intended"],
        "fate_backup_only": record.fate["backup_only"],
        "fate_unheard": record.fate["unheard"],
        "coding_opportunities": sum(record.coding_opportunities.values()),
        "decoding_failures": sum(record.decoding_failures.values()),
        "backup_firings": record.backup_firings,
        "acks_sent": record.acks_sent,
        "nacks_sent": record.nacks_sent,
        "lost_acks": record.lost_acks,
    }


def _fmt(value) -> str:
    if isinstance(value, float):
        return "nan" if math.isnan(value) else f"{value:.6g}"
    return str(value)


def write_csv(rows: Iterable[dict], stream, lead: Iterable[str]):
    """Rows are dicts with the ``lead`` keys followed by :data:`CSV_COLUMNS`."""
    lead = list(lead)
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(lead + list(CSV_COLUMNS))
    for row in rows:
        writer.writerow([_fmt(row[k]) for k in lead + list(CSV_COLUMNS)])


def to_json(records: Dict[str, MetricsRecord]) -> str:
    return json.dumps({k: r.to_dict() for k, r in records.items()}, indent=1, sort_keys=True)


def csv_text(rows, lead) -> str:
    buf = io.StringIO()
    write_csv(rows, buf, lead)
    return buf.getvalue()
