"""Closed-form delivery probabilities for native, BEND-coded and FlexONC-coded
packets, an exact check of the FlexONC > BEND inequality, and a Monte Carlo
estimator of the idealized hop-by-hop model behind the formulas.

Model: every hop but the last has a forwarder set of ``N`` nodes, any of
which may carry the packet on; the last hop reaches the destination alone.
A coded hop needs all ``m`` partners through, so each forwarder succeeds with
probability ``p**m``.
"""

from __future__ import annotations

import hashlib
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigurationError, PreconditionError

MODELS = ("forward", "native", "bend", "flexonc")


@dataclass(frozen=True)
class DeliveryParams:
    p: float
    N: int = 1
    H: int = 1
    m: int = 1

    def __post_init__(self):
        if not 0 <= self.p <= 1:
            raise ConfigurationError("link success must lie in [0, 1]", "p")
        for name in ("N", "H", "m"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ConfigurationError("must be an integer >= 1", name)


def p_forward_native(params: DeliveryParams, p=None):
    """Probability that at least one forwarder hears a native transmission."""
    p = params.p if p is None else p
    return 1 - (1 - p) ** params.N


def p_deliver_native(params: DeliveryParams, p=None):
    p = params.p if p is None else p
    return p_forward_native(params, p) ** (params.H - 1) * p


def p_deliver_coded_bend(params: DeliveryParams, p=None):
    """Native first hop, then one coded forwarder per hop."""
    p = params.p if p is None else p
    return p_forward_native(params, p) * (p ** params.m) ** (params.H - 1)


def p_deliver_coded_flexonc(params: DeliveryParams, p=None):
    """Native first hop, ``H - 2`` coded hops with ``N`` candidate forwarders,
    and a final coded hop to the destination."""
    if params.H < 2:
        raise PreconditionError("the coded FlexONC model needs H >= 2")
    p = params.p if p is None else p
    pm = p ** params.m
    return p_forward_native(params, p) * (1 - (1 - pm) ** params.N) ** (params.H - 2) * pm


CLOSED_FORMS = {
    "forward": p_forward_native,
    "native": p_deliver_native,
    "bend": p_deliver_coded_bend,
    "flexonc": p_deliver_coded_flexonc,
}


# -- inequality ------------------------------------------------------------------


@dataclass
class GridPoint:
    params: DeliveryParams
    bend: Fraction
    flexonc: Fraction
    status: str   # "strict", "equal-expected" or "violation"

    @property
    def gap(self) -> Fraction:
        return self.flexonc - self.bend


@dataclass
class InequalityReport:
    points: List[GridPoint] = field(default_factory=list)
    violations: List[GridPoint] = field(default_factory=list)
    peaks: dict = field(default_factory=dict)          # (N, H, m) -> p with the largest gap
    widening_violations: List[Tuple] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations and not self.widening_violations

    def summary(self) -> str:
        strict = sum(1 for g in self.points if g.status == "strict")
        equal = sum(1 for g in self.points if g.status == "equal-expected")
        lines = [f"{len(self.points)} grid points: {strict} strict, {equal} expected equalities, "
                 f"{len(self.violations)} violations, "
                 f"{len(self.widening_violations)} gap-widening violations above the peak"]
        for g in self.violations:
            q = g.params
            lines.append(f"VIOLATION p={q.p} N={q.N} H={q.H} m={q.m}: "
                         f"flexonc={float(g.flexonc):.6g} bend={float(g.bend):.6g}")
        for key, p, nxt in self.widening_violations:
            lines.append(f"GAP NARROWS N={key[0]} H={key[1]} m={key[2]} between p={p} and p={nxt}")
        return "\n".join(lines)


def _exact(p: float) -> Fraction:
    return Fraction(str(p))


def _expected_equal(q: DeliveryParams) -> bool:
    # p = 1, a single forwarder, no middle hop, or p**m == 1 collapse both formulas
    return q.p in (0, 1) or q.N == 1 or q.H == 2


def verify_inequality(grid: Iterable[DeliveryParams]) -> InequalityReport:
    """Check FlexONC > BEND with exact rational arithmetic.

    Points where the formulas must coincide (p in {0, 1}, N = 1, H = 2) are
    required to be exactly equal; all others strictly ordered. For each
    (N, H, m) the gap is also required to widen as p decreases from 1 down to
    the p that maximizes it on the grid.
    """
    report = InequalityReport()
    series = {}
    for q in grid:
        if q.H < 2:
            raise ConfigurationError("inequality grid needs H >= 2", "H")
        p = _exact(q.p)
        bend = p_deliver_coded_bend(q, p)
        flex = p_deliver_coded_flexonc(q, p)
        if _expected_equal(q):
            status = "equal-expected" if flex == bend else "violation"
        else:
            status = "strict" if flex > bend else "violation"
        point = GridPoint(q, bend, flex, status)
        report.points.append(point)
        if status == "violation":
            report.violations.append(point)
        series.setdefault((q.N, q.H, q.m), []).append(point)
    for key, pts in series.items():
        pts.sort(key=lambda g: g.params.p)
        peak = max(pts, key=lambda g: g.gap)
        report.peaks[key] = peak.params.p
        above = [g for g in pts if g.params.p >= peak.params.p]
        for a, b in zip(above, above[1:]):
            if b.gap > a.gap:
                report.widening_violations.append((key, a.params.p, b.params.p))
    return report


def default_grid(ps: Sequence[float] = (0.6, 0.7, 0.8, 0.9, 0.99, 1.0),
                 Ns: Sequence[int] = (1, 2, 3), Hs: Sequence[int] = (2, 3, 5),
                 ms: Sequence[int] = (1, 2, 3)) -> List[DeliveryParams]:
    return [DeliveryParams(p, N, H, m) for p, N, H, m in itertools.product(ps, Ns, Hs, ms)]


# -- Monte Carlo -------------------------------------------------------------------


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float
    trials: int

    def agrees(self, exact: float, sigmas: float = 3.0) -> bool:
        """Within ``sigmas`` standard errors of ``exact``.

        The standard error is taken under the exact value (binomial), so a
        degenerate sample (all hits or all misses) is still judged fairly.
        """
        se = math.sqrt(exact * (1 - exact) / self.trials)
        if se == 0:
            return self.value == exact
        return abs(self.value - exact) <= sigmas * se


def derived_seed(seed: int, params: DeliveryParams, model: str) -> int:
    """A stable per-(params, model) stream so grid points are independent."""
    text = f"{seed}|{params.p!r}|{params.N}|{params.H}|{params.m}|{model}"
    return int.from_bytes(hashlib.blake2b(text.encode(), digest_size=8).digest(), "little")


def _any_forwarder(rng, alive: int, n_forwarders: int, p_each: float, draws: int = 1) -> np.ndarray:
    """Bernoulli hop outcomes for ``alive`` packets.

    Each forwarder succeeds only if all ``draws`` independent links succeed;
    the hop succeeds if any forwarder does.
    """
    u = rng.random((alive, n_forwarders, draws), dtype=np.float32)
    return (u < p_each).all(axis=2).any(axis=1)


def monte_carlo_delivery(params: DeliveryParams, model: str, trials: int, seed: int = 0,
                         batch: int = 1 << 18) -> Estimate:
    """Estimate end-to-end delivery by drawing every link outcome.

    Packets are followed hop by hop and only survivors are simulated further.
    """
    if trials < 1:
        raise ConfigurationError("trials must be >= 1", "trials")
    if model not in MODELS:
        raise ConfigurationError(f"unknown model {model!r}", "model")
    if model == "flexonc" and params.H < 2:
        raise PreconditionError("the coded FlexONC model needs H >= 2")
    q = params
    if model == "forward":
        hops = [(q.N, 1)]
    elif model == "native":
        hops = [(q.N, 1)] * (q.H - 1) + [(1, 1)]
    elif model == "bend":
        hops = [(q.N, 1)] + [(1, q.m)] * (q.H - 1)
    else:
        hops = [(q.N, 1)] + [(q.N, q.m)] * (q.H - 2) + [(1, q.m)]
    rng = np.random.default_rng(seed)
    delivered = 0
    done = 0
    while done < trials:
        alive = min(batch, trials - done)
        done += alive
        for forwarders, draws in hops:
            if alive == 0:
                break
            alive = int(_any_forwarder(rng, alive, forwarders, q.p, draws).sum())
        delivered += alive
    value = delivered / trials
    stderr = math.sqrt(value * (1 - value) / trials) if trials > 1 else 0.0
    return Estimate(value, stderr, trials)


@dataclass
class OracleRow:
    params: DeliveryParams
    model: str
    exact: float
    estimate: Estimate

    @property
    def ok(self) -> bool:
        return self.estimate.agrees(self.exact)


def oracle_table(grid: Iterable[DeliveryParams], trials: int = 10 ** 6, seed: int = 0,
                 models: Sequence[str] = MODELS) -> List[OracleRow]:
    """Closed form versus Monte Carlo for each distinct (model, relevant params)."""
    rows = []
    seen = set()
    for q in grid:
        for model in models:
            if model == "forward":
                key = (model, q.p, q.N)
                sub = DeliveryParams(q.p, q.N, 1, 1)
            elif model == "native":
                key = (model, q.p, q.N, q.H)
                sub = DeliveryParams(q.p, q.N, q.H, 1)
            else:
                if model == "flexonc" and q.H < 2:
                    continue
                key = (model, q.p, q.N, q.H, q.m)
                sub = q
            if key in seen:
                continue
            seen.add(key)
            exact = float(CLOSED_FORMS[model](sub))
            est = monte_carlo_delivery(sub, model, trials, derived_seed(seed, sub, model))
            rows.append(OracleRow(sub, model, exact, est))
    return rows


def parse_grid(text: Optional[str]) -> List[DeliveryParams]:
    """``"p=0.6,0.9;N=1,2;H=3;m=1,2"``; omitted axes use the defaults."""
    axes = {"p": [0.6, 0.7, 0.8, 0.9, 0.99, 1.0], "N": [1, 2, 3], "H": [2, 3, 5], "m": [1, 2, 3]}
    if text:
        for part in text.split(";"):
            part = part.strip()
            if not part:
                continue
            name, sep, values = part.partition("=")
            name = name.strip()
            if not sep or name not in axes:
                raise ConfigurationError(f"bad grid axis {part!r}", "grid")
            try:
                cast = float if name == "p" else int
                parsed = [cast(v) for v in values.split(",") if v.strip()]
            except ValueError:
                raise ConfigurationError(f"bad value in {part!r}", f"grid.{name}") from None
            if not parsed:
                raise ConfigurationError("empty axis", f"grid.{name}")
            axes[name] = parsed
    return [DeliveryParams(p, N, H, m) for p, N, H, m in
            itertools.product(axes["p"], axes["N"], axes["H"], axes["m"])]
