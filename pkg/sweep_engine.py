"""
Capacity evaluation and parameter sweeps
========================================

``evaluate_capacity`` answers one capacity query, using a closed form where
one exists (two-qubit quasi-classical or fully correlated channel with a Bell
or Werner resource) and the optimizer otherwise. ``SweepEngine`` runs the
query over a 1-D or 2-D grid of (p, mu, eta) and writes CSV or JSON.
"""

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd

from channels import (
    CorrelatedPauliSpec,
    KrausMap,
    quasi_classical_spec,
)
from holevo import (
    analytic_capacity_fully_correlated,
    analytic_capacity_quasi,
    binary_entropy,
    capacity_nonunitary,
    capacity_unitary,
    eig23,
    transferred_info_preprocessed,
)
from optimize import OptimizerConfig, minimize_cptp, minimize_unitary, serial_restarts, worker_count
from qmat import ParameterRangeError, ValidationError, shannon_entropy
from states import bell_phi_plus, max_entangled, werner

logger = logging.getLogger(__name__)

CHANNEL_CHOICES = ("quasi-classical", "fully-correlated")
STATE_CHOICES = ("bell", "werner")
ENCODING_CHOICES = ("unitary", "preprocessed", "optimize-unitary", "optimize-cptp")
SWEEP_PARAMETERS = ("p", "mu", "eta")


@dataclass(frozen=True)
class CapacityQuery:
    channel: str = "quasi-classical"
    d: int = 2
    p: float = 0.0
    mu: float = 0.0
    state: str = "werner"
    eta: float = 1.0
    encoding: str = "unitary"
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    # overrides ``channel``/``p``/``mu`` when loaded from JSON
    channel_spec: CorrelatedPauliSpec = None

    def __post_init__(self):
        if self.channel not in CHANNEL_CHOICES:
            raise ValidationError(f"unknown channel {self.channel!r}")
        if self.state not in STATE_CHOICES:
            raise ValidationError(f"unknown state {self.state!r}")
        if self.encoding not in ENCODING_CHOICES:
            raise ValidationError(f"unknown encoding {self.encoding!r}")
        if self.state == "werner" and self.d != 2:
            raise ParameterRangeError("Werner states are defined for d = 2 only")
        for name in SWEEP_PARAMETERS:
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ParameterRangeError(f"{name} must lie in [0, 1], got {value}")


def build_channel(query: CapacityQuery) -> CorrelatedPauliSpec:
    if query.channel_spec is not None:
        return query.channel_spec
    mu = 1.0 if query.channel == "fully-correlated" else query.mu
    return CorrelatedPauliSpec(quasi_classical_spec(query.d, query.p), mu)


def build_state(query: CapacityQuery):
    if query.state == "werner":
        return werner(query.eta)
    return bell_phi_plus() if query.d == 2 else max_entangled(query.d)


def _effective_eta(query: CapacityQuery) -> float:
    return query.eta if query.state == "werner" else 1.0


def _has_closed_form(query: CapacityQuery) -> bool:
    return query.channel_spec is None and query.d == 2


def _result(capacity, bob, min_entropy, query, analytic, converged=None) -> dict:
    out = {
        "capacity_bits": float(capacity),
        "bob_term_bits": float(bob),
        "min_entropy_bits": float(min_entropy),
        "encoding": query.encoding,
        "analytic": analytic,
    }
    if converged is not None:
        out["converged"] = bool(converged)
    return out


def _closed_form_unitary(query: CapacityQuery) -> dict:
    eta = _effective_eta(query)
    if query.channel == "fully-correlated":
        capacity = analytic_capacity_fully_correlated(eta)
        min_entropy = 2.0 - capacity
    else:
        min_entropy = shannon_entropy(eig23(eta, query.mu, query.p, 0.0))
        capacity = analytic_capacity_quasi(eta, query.mu, query.p)
    # Bob's leg stays maximally mixed for every Werner state
    return _result(capacity, 1.0, min_entropy, query, analytic=True)


def _optimized(query: CapacityQuery, cptp: bool) -> dict:
    channel = build_channel(query)
    rho = build_state(query)
    if cptp:
        found = minimize_cptp(channel, rho, cfg=query.optimizer)
        report = capacity_nonunitary(channel, rho, found.encoder)
    else:
        found = minimize_unitary(channel, rho, query.optimizer)
        report = capacity_unitary(channel, rho, found.encoder)
    return _result(report.capacity_bits, report.bob_term_bits, report.min_entropy_bits,
                   query, analytic=False, converged=found.converged)


def evaluate_capacity(query: CapacityQuery) -> dict:
    """
    Answer one capacity query.

    Args:
        query (CapacityQuery): channel, state, encoding and optimizer settings

    Returns:
        dict: capacity_bits, bob_term_bits, min_entropy_bits, encoding,
        analytic, and converged when the optimizer ran
    """
    if query.encoding == "unitary":
        if _has_closed_form(query):
            return _closed_form_unitary(query)
        logger.info("no closed form for this channel/state, falling back to unitary search")
        return _optimized(query, cptp=False)

    if query.encoding == "preprocessed":
        if _has_closed_form(query) and _effective_eta(query) == 1.0:
            if query.channel == "quasi-classical":
                capacity = transferred_info_preprocessed(query.p)
                return _result(capacity, 1.0, 1.0 + binary_entropy(query.p), query, analytic=True)
        channel = build_channel(query)
        report = capacity_nonunitary(channel, build_state(query), KrausMap.reset(channel.d))
        return _result(report.capacity_bits, report.bob_term_bits, report.min_entropy_bits, query, analytic=False)

    return _optimized(query, cptp=query.encoding == "optimize-cptp")


@dataclass(frozen=True)
class AxisSpec:
    name: str
    start: float
    stop: float
    steps: int

    @property
    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.steps)


def parse_axis(text: str) -> AxisSpec:
    """'p:0:1:101' -> AxisSpec('p', 0.0, 1.0, 101)"""
    parts = text.split(":")
    if len(parts) != 4:
        raise ValidationError(f"axis must look like name:start:stop:steps, got {text!r}")
    name, start, stop, steps = parts
    try:
        return AxisSpec(name.strip(), float(start), float(stop), int(steps))
    except ValueError as e:
        raise ValidationError(f"bad axis {text!r}: {e}") from e


def parse_fixed(items) -> dict:
    """['eta=1', 'mu=0.2'] -> {'eta': 1.0, 'mu': 0.2}"""
    fixed = {}
    for item in items or []:
        name, sep, value = item.partition("=")
        if not sep:
            raise ValidationError(f"fixed parameter must look like name=value, got {item!r}")
        try:
            fixed[name.strip()] = float(value)
        except ValueError as e:
            raise ValidationError(f"bad fixed value {item!r}") from e
    return fixed


@dataclass(frozen=True)
class SweepSpec:
    axis1: AxisSpec
    axis2: AxisSpec = None
    fixed: dict = field(default_factory=dict)

    def __post_init__(self):
        axes = [a for a in (self.axis1, self.axis2) if a is not None]
        for axis in axes:
            if axis.name not in SWEEP_PARAMETERS:
                raise ValidationError(f"unknown sweep parameter {axis.name!r}")
            if axis.steps < 2:
                raise ValidationError(f"axis {axis.name} needs at least 2 steps")
            if not axis.start < axis.stop:
                raise ValidationError(f"axis {axis.name} needs start < stop")
        names = [a.name for a in axes] + list(self.fixed)
        if len(names) != len(set(names)):
            raise ValidationError(f"sweep parameters overlap: {names}")
        if set(names) != set(SWEEP_PARAMETERS):
            raise ValidationError(f"sweep axes and fixed values must cover {SWEEP_PARAMETERS}, got {sorted(names)}")

    @property
    def axes(self) -> list:
        return [a for a in (self.axis1, self.axis2) if a is not None]

    def points(self) -> list:
        """Grid points in row-major axis order"""
        if self.axis2 is None:
            return [{self.axis1.name: float(v)} for v in self.axis1.values]
        return [
            {self.axis1.name: float(v1), self.axis2.name: float(v2)}
            for v1 in self.axis1.values
            for v2 in self.axis2.values
        ]


def sweep_spec_from_flags(axis1: str, axis2: str, fix_items, base: CapacityQuery) -> SweepSpec:
    """Parameters missing from the axes and --fix take the capacity flags' values"""
    a1 = parse_axis(axis1)
    a2 = parse_axis(axis2) if axis2 else None
    fixed = parse_fixed(fix_items)
    used = {a1.name} | ({a2.name} if a2 else set()) | set(fixed)
    if base.channel_spec is not None and used & {"p", "mu"}:
        raise ValidationError(
            f"--channel-json fixes the channel; p and mu cannot be swept or fixed, got {sorted(used & {'p', 'mu'})}"
        )
    for name in SWEEP_PARAMETERS:
        if name not in used:
            fixed[name] = float(getattr(base, name))
    return SweepSpec(a1, a2, fixed)


class SweepEngine:
    """
    Grid evaluation of capacity queries.

    Points run on a thread pool capped by DENSECODE_THREADS, with optimizer
    restarts inside a pooled point run serially. The table is always
    assembled in grid order.
    """

    def __init__(self, base_query: CapacityQuery):
        self.base_query = base_query
        self.threads = worker_count()

    @staticmethod
    def _evaluate_point(base: CapacityQuery, point: dict) -> dict:
        return evaluate_capacity(replace(base, **point))

    @staticmethod
    def _evaluate_pooled_point(base: CapacityQuery, point: dict) -> dict:
        # the sweep pool already holds DENSECODE_THREADS workers
        with serial_restarts():
            return evaluate_capacity(replace(base, **point))

    def run(self, spec: SweepSpec) -> pd.DataFrame:
        base = replace(self.base_query, **spec.fixed)
        points = spec.points()
        logger.info(f"sweeping {len(points)} grid points on {self.threads} thread(s)")

        if self.threads > 1:
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                results = list(pool.map(lambda point: self._evaluate_pooled_point(base, point), points))
        else:
            results = [self._evaluate_point(base, point) for point in points]

        unconverged = sum(1 for r in results if r.get("converged") is False)
        if unconverged:
            logger.warning(f"⚠️ optimizer did not converge at {unconverged} grid points")

        rows = []
        for point, result in zip(points, results):
            row = {"axis1": point[spec.axis1.name]}
            if spec.axis2 is not None:
                row["axis2"] = point[spec.axis2.name]
            row["capacity_bits"] = result["capacity_bits"]
            row["encoding"] = result["encoding"]
            rows.append(row)
        return pd.DataFrame(rows)

    @staticmethod
    def write(table: pd.DataFrame, path, fmt: str = "csv"):
        """Write the sweep table; raises OSError when the path is unwritable"""
        if fmt == "csv":
            table.to_csv(path, index=False, float_format="%.12g", lineterminator="\n", encoding="utf-8")
        elif fmt == "json":
            records = table.to_dict(orient="records")
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(json.dumps(records, indent=2))
                fh.write("\n")
        else:
            raise ValidationError(f"unknown output format {fmt!r}")
