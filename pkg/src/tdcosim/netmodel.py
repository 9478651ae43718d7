"""Transmission network domain types, per-unit normalization and validation.

Powers (loads, generator limits and setpoints) are carried in MW/MVAr in a
freshly parsed case and in per-unit after :func:`to_per_unit`.  Branch
impedances are per-unit on the system MVA base in both forms, which is how
the bundled case files state them.  Generator cost coefficients are always
on a $/MWh basis and are never rescaled.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np


class BusKind(enum.Enum):
    SLACK = "slack"
    PV = "pv"
    PQ = "pq"


class ZeroSeqPath(enum.Enum):
    """Transformer winding effect on the zero-sequence network.

    THROUGH stamps the branch normally; OPEN contributes nothing (both ends
    isolated); GROUNDED stamps ``1/z0`` as a shunt at the *to* bus only,
    modelling a delta / wye-grounded unit with the wye on the *to* side.
    """

    OPEN = "open"
    GROUNDED = "grounded"
    THROUGH = "through"


class Units(enum.Enum):
    PHYSICAL = "physical"  # MW / MVAr
    PER_UNIT = "pu"


@dataclass(frozen=True)
class Bus:
    id: int
    kind: BusKind
    base_kv: float
    v_setpoint: float | None = None  # pu, PV and slack
    angle_setpoint: float | None = None  # rad, slack only


@dataclass(frozen=True, eq=False)
class Branch:
    from_bus: int
    to_bus: int
    z1: complex
    z2: complex | None = None  # defaults to z1
    z0: complex | None = None  # defaults to z1
    b1_shunt: float = 0.0  # total line charging, pu
    b0_shunt: float = 0.0
    tap: float = 1.0
    zero_seq_path: ZeroSeqPath = ZeroSeqPath.THROUGH
    untransposed: bool = False
    coupling: np.ndarray | None = None  # 3x3 off-diagonal sequence Z block

    @property
    def z2_eff(self) -> complex:
        return self.z1 if self.z2 is None else self.z2

    @property
    def z0_eff(self) -> complex:
        return self.z1 if self.z0 is None else self.z0


@dataclass(frozen=True)
class CostCurve:
    """Quadratic production cost a*P^2 + b*P + c with P in MW."""

    a: float  # $/MW^2 h
    b: float  # $/MWh
    c: float  # $/h


@dataclass(frozen=True)
class Generator:
    bus: int
    p_min: float
    p_max: float
    q_min: float
    q_max: float
    cost: CostCurve
    p_set: float = 0.0
    q_set: float = 0.0


@dataclass(frozen=True)
class LoadAttachment:
    """Either a lumped PQ load or a feeder binding that makes the bus a PCC."""

    bus: int
    p: float = 0.0
    q: float = 0.0
    feeder_id: str | None = None
    loadshape_id: str | None = None

    @property
    def is_feeder(self) -> bool:
        return self.feeder_id is not None


@dataclass(frozen=True)
class TransmissionCase:
    base_mva: float
    buses: tuple[Bus, ...]
    branches: tuple[Branch, ...]
    generators: tuple[Generator, ...]
    loads: tuple[LoadAttachment, ...]
    units: Units = Units.PHYSICAL

    def bus_ids(self) -> list[int]:
        return [b.id for b in self.buses]

    def bus_by_id(self, bus_id: int) -> Bus:
        for b in self.buses:
            if b.id == bus_id:
                return b
        raise KeyError(f"no bus {bus_id} in case")

    def slack_bus(self) -> Bus:
        for b in self.buses:
            if b.kind is BusKind.SLACK:
                return b
        raise ValueError("case has no slack bus")

    def pcc_buses(self) -> list[int]:
        return [ld.bus for ld in self.loads if ld.is_feeder]


def validate_case(case: TransmissionCase) -> list[str]:
    """Check every structural invariant; violations are returned, not raised."""
    violations: list[str] = []
    ids = case.bus_ids()
    id_set = set(ids)
    if len(ids) != len(id_set):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        violations.append(f"duplicate bus ids: {dupes}")

    slacks = [b.id for b in case.buses if b.kind is BusKind.SLACK]
    if len(slacks) != 1:
        violations.append(f"expected exactly one slack bus, found {slacks}")

    if case.base_mva <= 0:
        violations.append(f"base_mva must be positive, got {case.base_mva}")

    for b in case.buses:
        if b.base_kv <= 0:
            violations.append(f"bus {b.id}: base_kv must be positive")
        if b.kind in (BusKind.PV, BusKind.SLACK):
            if b.v_setpoint is None or b.v_setpoint <= 0:
                violations.append(f"bus {b.id}: {b.kind.value} bus needs v_setpoint > 0")
        if b.kind is BusKind.SLACK and b.angle_setpoint is None:
            violations.append(f"bus {b.id}: slack bus needs angle_setpoint")

    for br in case.branches:
        tag = f"branch {br.from_bus}-{br.to_bus}"
        if br.from_bus == br.to_bus:
            violations.append(f"{tag}: from and to bus coincide")
        for end in (br.from_bus, br.to_bus):
            if end not in id_set:
                violations.append(f"{tag}: references nonexistent bus {end}")
        for name, z in (("z1", br.z1), ("z2", br.z2_eff), ("z0", br.z0_eff)):
            if abs(z) == 0.0:
                violations.append(f"{tag}: |{name}| must be nonzero")
        if br.coupling is not None and not br.untransposed:
            violations.append(f"{tag}: coupling block on a transposed line")
        if br.coupling is not None and np.asarray(br.coupling).shape != (3, 3):
            violations.append(f"{tag}: coupling block must be 3x3")

    for g in case.generators:
        if g.bus not in id_set:
            violations.append(f"generator at nonexistent bus {g.bus}")
        if not (g.p_min <= g.p_set <= g.p_max):
            violations.append(
                f"generator at bus {g.bus}: p_set {g.p_set} outside "
                f"[{g.p_min}, {g.p_max}]"
            )
        if g.cost.a < 0:
            violations.append(f"generator at bus {g.bus}: cost a must be >= 0")

    feeder_buses: list[int] = []
    for ld in case.loads:
        if ld.bus not in id_set:
            violations.append(f"load at nonexistent bus {ld.bus}")
        if ld.is_feeder:
            feeder_buses.append(ld.bus)
    dupes = sorted({b for b in feeder_buses if feeder_buses.count(b) > 1})
    if dupes:
        violations.append(f"more than one feeder attached at buses {dupes}")

    if id_set and not _connected(case):
        violations.append("network graph is not connected")

    return violations


def _connected(case: TransmissionCase) -> bool:
    ids = set(case.bus_ids())
    adj: dict[int, list[int]] = {i: [] for i in ids}
    for br in case.branches:
        if br.from_bus in ids and br.to_bus in ids:
            adj[br.from_bus].append(br.to_bus)
            adj[br.to_bus].append(br.from_bus)
    start = next(iter(ids))
    seen = {start}
    stack = [start]
    while stack:
        for nxt in adj[stack.pop()]:
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return seen == ids


def to_per_unit(case: TransmissionCase) -> TransmissionCase:
    """Express all powers on the system base; idempotent on normalized input."""
    if case.base_mva <= 0:
        raise ValueError(f"base_mva must be positive, got {case.base_mva}")
    if case.units is Units.PER_UNIT:
        return case
    s = 1.0 / case.base_mva
    gens = tuple(
        replace(
            g,
            p_min=g.p_min * s,
            p_max=g.p_max * s,
            q_min=g.q_min * s,
            q_max=g.q_max * s,
            p_set=g.p_set * s,
            q_set=g.q_set * s,
        )
        for g in case.generators
    )
    loads = tuple(replace(ld, p=ld.p * s, q=ld.q * s) for ld in case.loads)
    return replace(case, generators=gens, loads=loads, units=Units.PER_UNIT)


def to_physical(case: TransmissionCase) -> TransmissionCase:
    """Inverse of :func:`to_per_unit`; idempotent on physical input."""
    if case.base_mva <= 0:
        raise ValueError(f"base_mva must be positive, got {case.base_mva}")
    if case.units is Units.PHYSICAL:
        return case
    s = case.base_mva
    gens = tuple(
        replace(
            g,
            p_min=g.p_min * s,
            p_max=g.p_max * s,
            q_min=g.q_min * s,
            q_max=g.q_max * s,
            p_set=g.p_set * s,
            q_set=g.q_set * s,
        )
        for g in case.generators
    )
    loads = tuple(replace(ld, p=ld.p * s, q=ld.q * s) for ld in case.loads)
    return replace(case, generators=gens, loads=loads, units=Units.PHYSICAL)


def with_dispatch(case: TransmissionCase, p_set_mw) -> TransmissionCase:
    """Return a copy with generator active-power setpoints replaced.

    ``p_set_mw`` is a sequence aligned with ``case.generators``; the case must
    be in physical units (setpoints are MW).
    """
    if case.units is not Units.PHYSICAL:
        raise ValueError("dispatch setpoints are MW; normalize afterwards")
    if len(p_set_mw) != len(case.generators):
        raise ValueError("one setpoint per generator required")
    gens = tuple(
        replace(g, p_set=p) for g, p in zip(case.generators, p_set_mw)
    )
    return replace(case, generators=gens)
