"""TOML scenario files: load, validate, dump and expand into run configurations.

A scenario is one base :class:`RunConfig` plus the experiment around it: the
schemes to compare, the seeds, and optional sweep axes given as dotted
override paths (``channel.ber``, ``flows.interval`` ...).

Layout::

    name = "8node"
    description = "..."
    schemes = ["bend", "flexonc"]
    seeds = [0, 1, 2]
    duration = 152.0

    [topology]          # kind = "grid" | "positions" | "edges"
    [channel]           # ChannelParams fields
    [params]            # SchemeParams fields
    [[flows]]           # number, source, destination, interval, ... route
    [sweep]             # "channel.ber" = [1e-5, 5e-5]
    [output]            # dir = "results"
"""

from __future__ import annotations

import dataclasses
import hashlib
import itertools
import re
import sys
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Iterator, List, Optional, Sequence, Tuple

import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .config import CbrSource, RunConfig, SchemeKind, SchemeParams, TopologySpec
from .errors import ConfigurationError
from .packets import FlowId
from .phy import ChannelParams
from .sim import set_path

TOP_KEYS = {"name", "description", "schemes", "seeds", "duration", "tie_break",
            "topology", "channel", "params", "flows", "sweep", "output"}
FLOW_KEYS = {"number", "source", "destination", "interval", "payload", "start", "duration", "route"}
OUTPUT_KEYS = {"dir"}


@dataclass(frozen=True)
class Scenario:
    name: str
    config: RunConfig
    schemes: Tuple[SchemeKind, ...]
    seeds: Tuple[int, ...] = (0,)
    sweep: Tuple[Tuple[str, tuple], ...] = ()
    description: str = ""
    output_dir: str = "results"

    @property
    def axis_names(self) -> List[str]:
        return [path for path, _ in self.sweep]

    def runs(self) -> Iterator[Tuple[dict, RunConfig]]:
        """Every (scheme, axis point, seed) cell as ``(key, config)``."""
        axes = [values for _, values in self.sweep]
        for scheme in self.schemes:
            for combo in itertools.product(*axes):
                cfg = replace(self.config, scheme=scheme)
                for path, value in zip(self.axis_names, combo):
                    cfg = set_path(cfg, path, value)
                for seed in self.seeds:
                    key = {"scheme": str(scheme), **dict(zip(self.axis_names, combo)), "seed": seed}
                    yield key, replace(cfg, seed=seed)


def config_hash(config: RunConfig) -> str:
    """Stable digest of everything that determines a run."""
    return hashlib.sha256(repr(config).encode()).hexdigest()[:16]


# -- typed field coercion ------------------------------------------------------


def _coerce(value, default, path: str):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigurationError("expected true or false", path)
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigurationError("expected an integer", path)
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigurationError("expected a number", path)
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigurationError("expected a string", path)
        return value
    return value


def _section(cls, table, path: str, special=None):
    """Build dataclass ``cls`` from a TOML table, rejecting unknown keys."""
    if not isinstance(table, dict):
        raise ConfigurationError("expected a table", path)
    special = special or {}
    fields = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in table.items():
        where = f"{path}.{key}"
        if key not in fields:
            raise ConfigurationError(f"unknown key (expected one of {', '.join(sorted(fields))})", where)
        if key in special:
            kwargs[key] = special[key](value, where)
            continue
        f = fields[key]
        default = f.default if f.default is not dataclasses.MISSING else None
        kwargs[key] = _coerce(value, default, where)
    return cls(**kwargs)


def _pairs(kind):
    def convert(value, where):
        if not isinstance(value, list) or any(not isinstance(v, list) or len(v) != 2 for v in value):
            raise ConfigurationError("expected a list of pairs", where)
        return tuple(tuple(kind(x) for x in v) for v in value)
    return convert


def _flow(table, index: int) -> CbrSource:
    path = f"flows[{index}]"
    if not isinstance(table, dict):
        raise ConfigurationError("expected a table", path)
    for key in table:
        if key not in FLOW_KEYS:
            raise ConfigurationError("unknown key", f"{path}.{key}")
    for key in ("source", "destination", "interval"):
        if key not in table:
            raise ConfigurationError("missing required key", f"{path}.{key}")
    ints = {k: _coerce(table[k], 0, f"{path}.{k}") for k in ("source", "destination")}
    number = _coerce(table.get("number", index + 1), 0, f"{path}.number")
    route = table.get("route")
    if route is not None:
        if not isinstance(route, list) or any(isinstance(v, bool) or not isinstance(v, int) for v in route):
            raise ConfigurationError("expected a list of node ids", f"{path}.route")
        route = tuple(route)
    try:
        flow = FlowId(ints["source"], ints["destination"], number)
    except ValueError as exc:
        raise ConfigurationError(str(exc), f"{path}.destination") from None
    try:
        return CbrSource(
            flow,
            interval=_coerce(table["interval"], 0.0, f"{path}.interval"),
            payload=_coerce(table.get("payload", 1000), 0, f"{path}.payload"),
            start=_coerce(table.get("start", 0.0), 0.0, f"{path}.start"),
            duration=_coerce(table.get("duration", 150.0), 0.0, f"{path}.duration"),
            route=route,
        )
    except ConfigurationError as exc:
        raise ConfigurationError(str(exc).split(": ", 1)[-1], f"{path}.{exc.field.split('.')[-1]}") from None


def _list_of(kind, path, value):
    if not isinstance(value, list) or not value:
        raise ConfigurationError("expected a non-empty list", path)
    return [kind(v, path) for v in value]


def from_dict(doc: dict, name: Optional[str] = None) -> Scenario:
    for key in doc:
        if key not in TOP_KEYS:
            raise ConfigurationError("unknown key", key)
    if "topology" not in doc:
        raise ConfigurationError("missing required table", "topology")
    if not doc.get("flows"):
        raise ConfigurationError("at least one [[flows]] entry is required", "flows")
    topology = _section(TopologySpec, doc["topology"], "topology",
                        {"positions": _pairs(float), "edges": _pairs(int)})
    channel = _section(ChannelParams, doc.get("channel", {}), "channel")
    params = _section(SchemeParams, doc.get("params", {}), "params")
    if not isinstance(doc["flows"], list):
        raise ConfigurationError("expected an array of tables", "flows")
    flows = tuple(_flow(t, i) for i, t in enumerate(doc["flows"]))

    schemes = tuple(_list_of(lambda v, p: SchemeKind.parse(v), "schemes", doc.get("schemes", ["flexonc"])))
    seeds = tuple(_list_of(lambda v, p: _coerce(v, 0, p), "seeds", doc.get("seeds", [0])))
    default_duration = max(s.end for s in flows)
    duration = _coerce(doc.get("duration", default_duration), 0.0, "duration")
    tie_break = _coerce(doc.get("tie_break", "lowest"), "", "tie_break")
    scen_name = _coerce(doc.get("name", name or ""), "", "name")
    config = RunConfig(topology, flows, scheme=schemes[0], channel=channel, params=params,
                       seed=seeds[0], duration=duration, tie_break=tie_break, name=scen_name)
    config.validate()

    sweep = doc.get("sweep", {})
    if not isinstance(sweep, dict):
        raise ConfigurationError("expected a table", "sweep")
    axes = []
    for path, values in sweep.items():
        if path == "scheme":
            raise ConfigurationError("use the top-level schemes list", "sweep.scheme")
        values = _list_of(lambda v, p: v, f"sweep.{path}", values)
        for v in values:
            set_path(config, path, v).validate()   # fail early on bad paths or values
        axes.append((path, tuple(values)))

    output = doc.get("output", {})
    for key in output:
        if key not in OUTPUT_KEYS:
            raise ConfigurationError("unknown key", f"output.{key}")
    out_dir = _coerce(output.get("dir", "results"), "", "output.dir")
    return Scenario(scen_name, config, schemes, seeds, tuple(axes),
                    _coerce(doc.get("description", ""), "", "description"), out_dir)


def _line_of(text: str, field_path: Optional[str]) -> Optional[int]:
    """Best-effort source line for a dotted field path."""
    if not field_path:
        return None
    leaf = re.sub(r"\[\d+\]", "", field_path).split(".")[-1]
    pattern = re.compile(rf'^\s*"?{re.escape(leaf)}"?\s*=')
    for i, line in enumerate(text.splitlines(), start=1):
        if pattern.match(line):
            return i
    return None


class ScenarioError(ConfigurationError):
    """A scenario that failed to parse or validate, with its source location."""

    def __init__(self, message, field=None, source: str = "<scenario>", line: Optional[int] = None):
        where = source if line is None else f"{source}:{line}"
        ValueError.__init__(self, f"{where}: {message}")
        self.field = field
        self.line = line


def parse_value(raw: str):
    """A ``--set`` value: any TOML scalar or array, else the bare string."""
    try:
        return tomllib.loads(f"v = {raw}")["v"]
    except tomllib.TOMLDecodeError:
        return raw


def apply_override(doc: dict, path: str, value):
    """Set dotted ``path`` in a raw scenario document.

    ``flows.<key>`` sets the key on every flow; ``flows[i].<key>`` on one.
    """
    parts = path.split(".")
    if not all(parts):
        raise ConfigurationError("empty path component", path)
    head = parts[0]
    m = re.fullmatch(r"flows\[(\d+)\]", head)
    if head == "flows" or m:
        if len(parts) != 2:
            raise ConfigurationError("expected flows.<key>", path)
        flows = doc.get("flows") or []
        targets = flows if m is None else flows[int(m.group(1)):int(m.group(1)) + 1]
        if not targets:
            raise ConfigurationError("no such flow", path)
        for t in targets:
            t[parts[1]] = value
        return
    node = doc
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigurationError("not a table", path)
    node[parts[-1]] = value


def loads(text: str, source: str = "<scenario>", name: Optional[str] = None,
          overrides: Sequence[Tuple[str, object]] = ()) -> Scenario:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ScenarioError(f"TOML syntax error: {exc}", None, source, int(m.group(1)) if m else None) from None
    try:
        for path, value in overrides:
            apply_override(doc, path, value)
        return from_dict(doc, name)
    except ConfigurationError as exc:
        overridden = any(exc.field and exc.field.endswith(p.split(".")[-1]) for p, _ in overrides)
        line = None if overridden else _line_of(text, exc.field)
        raise ScenarioError(str(exc), exc.field, source, line) from None


def load(path, overrides: Sequence[Tuple[str, object]] = ()) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario: {exc.strerror}", None, str(path)) from None
    return loads(text, str(path), name=path.stem, overrides=overrides)


# -- serialization ---------------------------------------------------------------------


def _plain(obj) -> dict:
    out = {}
    for f in dataclasses.fields(obj):
        v = getattr(obj, f.name)
        if isinstance(v, tuple):
            v = [list(x) if isinstance(x, tuple) else x for x in v]
        out[f.name] = v
    return out


def to_dict(scn: Scenario) -> dict:
    cfg = scn.config
    doc = {
        "name": scn.name,
        "description": scn.description,
        "schemes": [str(s) for s in scn.schemes],
        "seeds": list(scn.seeds),
        "duration": cfg.duration,
        "tie_break": cfg.tie_break,
        "topology": _plain(cfg.topology),
        "channel": _plain(cfg.channel),
        "params": _plain(cfg.params),
        "flows": [],
    }
    for s in cfg.flows:
        row = {"number": s.flow.number, "source": s.flow.source, "destination": s.flow.destination,
               "interval": s.interval, "payload": s.payload, "start": s.start, "duration": s.duration}
        if s.route is not None:
            row["route"] = list(s.route)
        doc["flows"].append(row)
    if scn.sweep:
        doc["sweep"] = {path: list(values) for path, values in scn.sweep}
    doc["output"] = {"dir": scn.output_dir}
    return doc


def dumps(scn: Scenario) -> str:
    return tomli_w.dumps(to_dict(scn))


# -- bundled scenarios -------------------------------------------------------------------

BUNDLED = {
    "8node": "two opposing flows on a line with a parallel helper row",
    "12node": "3x4 grid where common coding conditions cause decoding failures at N9",
    "12node-alt": "12-node variant in which N9 overhears the third flow",
    "grid5x5-a": "5x5 grid, 8 flows along rows 2, 4 and columns 2, 4",
    "grid5x5-b": "5x5 grid, 8 crossing flows for the SwitchRule comparison",
    "xtopo": "X topology: two flows crossing one relay",
    "cross": "cross topology: four flows through a central relay",
}


ALIASES = {"12node_switchrule": "12node"}


def bundled_path(name: str) -> Path:
    name = ALIASES.get(name, name)
    if name not in BUNDLED:
        raise ScenarioError(f"unknown scenario {name!r} (bundled: {', '.join(BUNDLED)})", "scenario")
    return Path(str(resources.files("flexonc") / "scenarios" / f"{name}.toml"))


def resolve(name_or_path: str, overrides: Sequence[Tuple[str, object]] = ()) -> Scenario:
    """A bundled scenario name or a path to a TOML file."""
    if name_or_path in BUNDLED or name_or_path in ALIASES:
        return load(bundled_path(name_or_path), overrides)
    path = Path(name_or_path)
    if path.exists():
        return load(path, overrides)
    stem = path.stem.replace("_", "-") if path.stem.replace("_", "-") in BUNDLED else path.stem
    if path.suffix == ".toml" and (stem in BUNDLED or stem in ALIASES):
        # a bundled file named by its path, e.g. scenarios/8node.toml
        return load(bundled_path(stem), overrides)
    if path.suffix == ".toml":
        return load(path, overrides)
    return load(bundled_path(name_or_path), overrides)
