"""Three-phase unbalanced power flow for radial feeders.

The solver is a backward/forward sweep over constant-PQ loads: load and
branch currents are accumulated leaf-to-root at the present voltages, node
voltages are refreshed root-to-leaf from the head voltage, and the two
passes alternate until the largest per-phase voltage change falls below
tolerance.  After convergence one extra backward pass recomputes all branch
currents at the reported voltages, so the returned state satisfies KCL at
every node to machine precision regardless of the sweep tolerance.

Feeders carry per-phase quantities in padded (n, 3) arrays with absent
phases masked to zero; per-unit uses a line-to-neutral voltage base and a
per-phase power base of ``base_mva / 3``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, VoltageCollapseError
from .seqxform import VOLTAGE_FLOOR, PhasePowers, PhaseVoltages

PHASE_INDEX = {"a": 0, "b": 1, "c": 2}
SWEEP_TOL = 1e-6
SWEEP_MAX_ITER = 100
COLLAPSE_FLOOR = 0.5


@dataclass(frozen=True, eq=False)
class FeederLine:
    from_node: str
    to_node: str
    phases: str  # subset of "abc", in that order
    z_abc: np.ndarray  # (k, k) complex ohms for the present phases


@dataclass(frozen=True)
class PhaseLoad:
    node: str
    s: dict[str, complex]  # MVA per present phase

    def total(self) -> complex:
        return sum(self.s.values(), 0j)


@dataclass(eq=False)
class Feeder:
    """Radial feeder; treat as immutable, derived copies share topology."""

    base_kv: float
    base_mva: float
    head: str
    lines: tuple[FeederLine, ...]
    loads: tuple[PhaseLoad, ...]
    name: str = "feeder"
    _topo: "_Topology | None" = field(default=None, repr=False, compare=False)

    def topology(self) -> "_Topology":
        if self._topo is None:
            self._topo = _compile_topology(self.head, self.lines)
        return self._topo

    def nodes(self) -> list[str]:
        return list(self.topology().node_order)

    def with_loads(self, loads) -> "Feeder":
        clone = Feeder(
            self.base_kv, self.base_mva, self.head, self.lines, tuple(loads), self.name
        )
        clone._topo = self._topo
        return clone


@dataclass(eq=False)
class _Topology:
    node_order: tuple[str, ...]
    node_index: dict[str, int]
    mask: np.ndarray  # (n, 3) bool, phases present at each node
    parent: np.ndarray  # (L,) int, line parent node index
    child: np.ndarray  # (L,) int
    z_pu_factor: np.ndarray  # (L, 3, 3) complex, padded per-unit impedances
    levels: list[slice]  # line slices grouped by child depth, shallow first
    line_names: tuple[tuple[str, str], ...]


def _compile_topology(head: str, lines: tuple[FeederLine, ...]) -> _Topology:
    adj: dict[str, list[tuple[int, str]]] = {head: []}
    for k, ln in enumerate(lines):
        adj.setdefault(ln.from_node, []).append((k, ln.to_node))
        adj.setdefault(ln.to_node, []).append((k, ln.from_node))

    order = [head]
    depth = {head: 0}
    via_line: dict[str, int] = {}
    seen_lines: set[int] = set()
    q = 0
    while q < len(order):
        node = order[q]
        q += 1
        for k, other in adj[node]:
            if k in seen_lines:
                continue
            seen_lines.add(k)
            if other in depth:
                raise ValueError(
                    f"feeder is not radial: line {lines[k].from_node}-"
                    f"{lines[k].to_node} closes a loop"
                )
            depth[other] = depth[node] + 1
            via_line[other] = k
            order.append(other)

    unreached = sorted(set(adj) - set(depth))
    if unreached:
        raise ValueError(f"nodes not reachable from head {head!r}: {unreached}")

    node_index = {name: i for i, name in enumerate(order)}
    n = len(order)
    mask = np.zeros((n, 3), dtype=bool)
    mask[0, :] = True

    # Orient lines parent -> child and sort by child depth.
    oriented = []
    for child_name, k in via_line.items():
        ln = lines[k]
        parent_name = ln.from_node if ln.to_node == child_name else ln.to_node
        oriented.append((depth[child_name], node_index[parent_name],
                         node_index[child_name], k))
    oriented.sort(key=lambda t: (t[0], t[2]))

    L = len(oriented)
    parent = np.zeros(L, dtype=int)
    child = np.zeros(L, dtype=int)
    z_pad = np.zeros((L, 3, 3), dtype=complex)
    levels: list[slice] = []
    level_start = 0
    current_depth = 1
    for j, (d, p, c, k) in enumerate(oriented):
        if d != current_depth:
            levels.append(slice(level_start, j))
            level_start = j
            current_depth = d
        ln = lines[k]
        parent[j] = p
        child[j] = c
        idx = [PHASE_INDEX[ph] for ph in ln.phases]
        z = np.asarray(ln.z_abc, dtype=complex)
        z_pad[j][np.ix_(idx, idx)] = z
        mask[c, idx] = True
    if L:
        levels.append(slice(level_start, L))

    return _Topology(
        node_order=tuple(order),
        node_index=node_index,
        mask=mask,
        parent=parent,
        child=child,
        z_pu_factor=z_pad,
        levels=levels,
        line_names=tuple((order[p], order[c]) for p, c in zip(parent, child)),
    )


def validate_feeder(feeder: Feeder) -> list[str]:
    """Structural checks; violations are returned as strings."""
    violations: list[str] = []
    if feeder.base_kv <= 0:
        violations.append("base_kv must be positive")
    if feeder.base_mva <= 0:
        violations.append("base_mva must be positive")
    try:
        topo = feeder.topology()
    except ValueError as exc:
        violations.append(str(exc))
        return violations

    for ln, (p, c) in zip(_oriented_lines(feeder), zip(topo.parent, topo.child)):
        tag = f"line {ln.from_node}-{ln.to_node}"
        idx = [PHASE_INDEX[ph] for ph in ln.phases]
        if not ln.phases or any(ph not in PHASE_INDEX for ph in ln.phases):
            violations.append(f"{tag}: invalid phase set {ln.phases!r}")
            continue
        z = np.asarray(ln.z_abc, dtype=complex)
        if z.shape != (len(idx), len(idx)):
            violations.append(f"{tag}: impedance matrix shape {z.shape} does not "
                              f"match phases {ln.phases!r}")
            continue
        if not np.allclose(z, z.T):
            violations.append(f"{tag}: impedance matrix is not symmetric")
        if np.any(np.abs(np.diag(z)) == 0.0):
            violations.append(f"{tag}: zero self-impedance on a present phase")
        parent_mask = topo.mask[p]
        if not all(parent_mask[i] for i in idx):
            violations.append(f"{tag}: phases {ln.phases!r} not all present on "
                              f"parent path")

    for ld in feeder.loads:
        if ld.node not in topo.node_index:
            violations.append(f"load at unknown node {ld.node!r}")
            continue
        node_mask = topo.mask[topo.node_index[ld.node]]
        for ph in ld.s:
            if ph not in PHASE_INDEX:
                violations.append(f"load at {ld.node}: unknown phase {ph!r}")
            elif not node_mask[PHASE_INDEX[ph]]:
                violations.append(f"load at {ld.node}: phase {ph} not present there")
    return violations


def _oriented_lines(feeder: Feeder):
    """Lines in topology order (parent -> child)."""
    topo = feeder.topology()
    by_pair = {}
    for ln in feeder.lines:
        by_pair[frozenset((ln.from_node, ln.to_node))] = ln
    return [by_pair[frozenset(pair)] for pair in topo.line_names]


@dataclass
class FeederSolution:
    node_order: tuple[str, ...]
    v: np.ndarray  # (n, 3) complex pu, absent phases zero
    i_line: np.ndarray  # (L, 3) complex pu, aligned with line_names
    line_names: tuple[tuple[str, str], ...]
    head_power: PhasePowers  # MVA
    iterations: int
    converged: bool
    mask: np.ndarray
    _feeder: Feeder = field(repr=False)

    def voltage_at(self, node: str) -> np.ndarray:
        return self.v[self._feeder.topology().node_index[node]]

    def kcl_residuals(self) -> np.ndarray:
        """Per node/phase current balance at the reported state (pu)."""
        topo = self._feeder.topology()
        s_pu = _load_array(self._feeder, topo)
        i_load = _load_currents(s_pu, self.v, topo.mask)
        resid = -i_load.copy()
        np.subtract.at(resid, topo.parent, self.i_line)
        resid[topo.child] += self.i_line
        resid[topo.node_index[self._feeder.head]] = 0.0  # balance closed by source
        return resid


def _load_array(feeder: Feeder, topo: _Topology) -> np.ndarray:
    """Per-node per-phase load in pu on the per-phase power base."""
    s = np.zeros((len(topo.node_order), 3), dtype=complex)
    per_phase_base = feeder.base_mva / 3.0
    for ld in feeder.loads:
        i = topo.node_index[ld.node]
        for ph, val in ld.s.items():
            s[i, PHASE_INDEX[ph]] += val / per_phase_base
    return s


def _load_currents(s_pu: np.ndarray, v: np.ndarray, mask: np.ndarray) -> np.ndarray:
    out = np.zeros_like(s_pu)
    ok = mask & (np.abs(v) > VOLTAGE_FLOOR)
    np.divide(s_pu, v, out=out, where=ok)
    return np.conj(out)


def _backward(i_load: np.ndarray, topo: _Topology) -> tuple[np.ndarray, np.ndarray]:
    acc = i_load.copy()
    i_line = np.zeros((len(topo.parent), 3), dtype=complex)
    for sl in reversed(topo.levels):
        i_line[sl] = acc[topo.child[sl]]
        np.add.at(acc, topo.parent[sl], i_line[sl])
    return i_line, acc


def sweep_solve(
    feeder: Feeder,
    head_v: PhaseVoltages,
    tol: float = SWEEP_TOL,
    max_iter: int = SWEEP_MAX_ITER,
) -> FeederSolution:
    """Backward/forward sweep power flow from a fixed head voltage."""
    head_arr = head_v.as_array()
    head_mag = np.abs(head_arr)
    if np.any(head_mag <= COLLAPSE_FLOOR) or np.any(head_mag >= 1.5):
        raise ValueError(
            f"head voltage magnitudes {head_mag} outside the supported "
            f"({COLLAPSE_FLOOR}, 1.5) pu band"
        )
    topo = feeder.topology()
    mask = topo.mask
    n = len(topo.node_order)
    z_base = feeder.base_kv**2 / feeder.base_mva
    z_pu = topo.z_pu_factor / z_base
    s_pu = _load_array(feeder, topo)

    v = np.where(mask, head_arr[None, :], 0.0).astype(complex)
    iterations = 0
    converged = False
    history: list[float] = []
    for _ in range(max_iter):
        iterations += 1
        i_load = _load_currents(s_pu, v, mask)
        i_line, _ = _backward(i_load, topo)
        v_new = np.zeros_like(v)
        v_new[0] = head_arr
        for sl in topo.levels:
            drop = np.einsum("lij,lj->li", z_pu[sl], i_line[sl])
            v_new[topo.child[sl]] = (v_new[topo.parent[sl]] - drop) * mask[topo.child[sl]]
        v_new[0] = head_arr * mask[0]
        delta = float(np.max(np.abs(v_new - v))) if n else 0.0
        history.append(delta)
        v = v_new
        low = np.abs(v[mask])
        if low.size and np.min(low) < COLLAPSE_FLOOR:
            worst = float(np.min(low))
            raise VoltageCollapseError(
                f"feeder {feeder.name!r}: voltage collapsed to {worst:.3f} pu "
                f"during sweep {iterations}"
            )
        if delta < tol:
            converged = True
            break
    if not converged:
        raise ConvergenceError(
            f"feeder {feeder.name!r} sweep did not converge in {max_iter} "
            f"iterations (last change {history[-1]:.3e} pu)",
            history,
        )

    # Final consistency pass: currents recomputed at the reported voltages so
    # KCL holds exactly at every node.
    i_load = _load_currents(s_pu, v, mask)
    i_line, acc = _backward(i_load, topo)
    i_head = acc[0]
    s_head_pu = v[0] * np.conj(i_head)
    head_power = PhasePowers.from_array(s_head_pu * (feeder.base_mva / 3.0))

    return FeederSolution(
        node_order=topo.node_order,
        v=v,
        i_line=i_line,
        line_names=topo.line_names,
        head_power=head_power,
        iterations=iterations,
        converged=True,
        mask=mask,
        _feeder=feeder,
    )


def head_power(solution: FeederSolution) -> PhasePowers:
    """Per-phase complex power (MVA) drawn at the substation head."""
    if not solution.converged:
        raise ValueError("head power of an unconverged solution is undefined")
    return solution.head_power


def aggregate_load(feeder: Feeder) -> PhasePowers:
    """Sum of all attached loads per phase (MVA); the decoupled-model proxy."""
    s = np.zeros(3, dtype=complex)
    for ld in feeder.loads:
        for ph, val in ld.s.items():
            s[PHASE_INDEX[ph]] += val
    return PhasePowers.from_array(s)


def scale_loads(feeder: Feeder, multiplier: float) -> Feeder:
    """Uniformly scale every load; used to apply loadshape multipliers."""
    if multiplier < 0:
        raise ValueError("load multiplier must be non-negative")
    loads = tuple(
        PhaseLoad(ld.node, {ph: val * multiplier for ph, val in ld.s.items()})
        for ld in feeder.loads
    )
    return feeder.with_loads(loads)


def apply_unbalance(feeder: Feeder, alpha: float) -> Feeder:
    """Shift three-phase loads toward phase a, conserving per-node totals.

    Each load present on all three phases is reshaped around its per-phase
    mean ``m``: phase a gets ``(1 + alpha) * m``, phases b and c get
    ``(1 - alpha/2) * m``.  Single- and two-phase loads are untouched.
    """
    if not 0.0 <= alpha <= 0.5:
        raise ValueError(f"alpha must be within [0, 0.5], got {alpha}")
    loads = []
    for ld in feeder.loads:
        if set(ld.s) == {"a", "b", "c"}:
            m = ld.total() / 3.0
            loads.append(
                PhaseLoad(
                    ld.node,
                    {
                        "a": (1.0 + alpha) * m,
                        "b": (1.0 - alpha / 2.0) * m,
                        "c": (1.0 - alpha / 2.0) * m,
                    },
                )
            )
        else:
            loads.append(ld)
    return feeder.with_loads(loads)


TWO_PHASE_SETS = ("ab", "bc", "ac")
SINGLE_PHASES = ("a", "b", "c")


def synth_feeder(
    nodes: int,
    total_p_mw: float,
    total_q_mvar: float,
    base_kv: float,
    base_mva: float = 100.0,
    phase_mix: tuple[float, float, float] = (0.6, 0.15, 0.25),
    seed: int = 0,
    name: str = "synthetic",
    target_drop: float = 0.04,
) -> Feeder:
    """Deterministic synthetic radial feeder with the requested aggregates.

    ``phase_mix`` splits the total demand over three-, two- and single-phase
    leaves; categories without leaves fold into the widest available one.
    Impedances are rescaled so the full-load head voltage drop lands between
    2 and 6 percent.
    """
    if nodes < 2:
        raise ValueError("a feeder needs at least two nodes")
    total = complex(total_p_mw, total_q_mvar)
    if total.real <= 0:
        raise ValueError("total active demand must be positive")
    mix = np.asarray(phase_mix, dtype=float)
    if np.any(mix < 0) or mix.sum() <= 0:
        raise ValueError("phase mix fractions must be non-negative, not all zero")
    mix = mix / mix.sum()

    rng = np.random.default_rng(seed)
    n_other = nodes - 1
    backbone_len = min(30, max(1, n_other // 4 if n_other >= 4 else n_other))

    names = ["head"] + [f"n{i}" for i in range(1, nodes)]
    lines: list[FeederLine] = []
    node_phase = {"head": "abc"}

    # Ohm scale chosen so the trunk drop at full load starts near the target
    # band; the calibration loop below trims the remainder.
    trunk_ohm = target_drop * base_kv**2 / abs(total) / backbone_len

    def z_matrix(phases: str, scale: float) -> np.ndarray:
        k = len(phases)
        length = rng.uniform(0.5, 1.5)
        z_self = trunk_ohm * (0.45 + 0.9j) * scale * length
        z_mut = 0.25 * z_self
        z = np.full((k, k), z_mut, dtype=complex)
        np.fill_diagonal(z, z_self)
        return z

    backbone = ["head"]
    for i in range(backbone_len):
        child = names[1 + i]
        lines.append(FeederLine(backbone[-1], child, "abc", z_matrix("abc", 1.0)))
        node_phase[child] = "abc"
        backbone.append(child)

    # Laterals hang off random backbone nodes.  Single- and two-phase
    # laterals are generated as phase-rotated triples sharing one impedance
    # draw, so the feeder's response at alpha = 0 is exactly balanced even
    # though individual customers are not three-phase (Table-1 behaviour:
    # near-identical phase voltages before unbalance is applied).
    leaf_groups: list[tuple[int, list[str]]] = []  # (category, leaf of each chain)
    next_i = 1 + backbone_len
    while next_i < nodes:
        anchor = backbone[int(rng.integers(0, len(backbone)))]
        cat = int(rng.choice(3, p=[0.5, 0.2, 0.3]))
        chain_len = int(rng.integers(1, 4))
        left = nodes - next_i
        if cat != 0 and 3 * chain_len > left:
            cat = 0  # no room for a symmetric triple; fall back to three-phase
        if cat == 0:
            parent = anchor
            for _ in range(min(chain_len, left)):
                child = names[next_i]
                next_i += 1
                lines.append(FeederLine(parent, child, "abc", z_matrix("abc", 2.0)))
                node_phase[child] = "abc"
                parent = child
            leaf_groups.append((0, [parent]))
        else:
            phase_sets = TWO_PHASE_SETS if cat == 1 else SINGLE_PHASES
            z_draws = [z_matrix(phase_sets[0], 2.0) for _ in range(chain_len)]
            leaves: list[str] = []
            for phases in phase_sets:
                parent = anchor
                for z in z_draws:
                    child = names[next_i]
                    next_i += 1
                    lines.append(FeederLine(parent, child, phases, z))
                    node_phase[child] = phases
                    parent = child
                leaves.append(parent)
            leaf_groups.append((cat, leaves))
    if not leaf_groups:
        leaf_groups.append((0, [backbone[-1]]))

    skeleton = Feeder(base_kv, base_mva, "head", tuple(lines), (), name)
    topo = skeleton.topology()

    by_cat: dict[int, list[list[str]]] = {0: [], 1: [], 2: []}
    for cat, leaves in leaf_groups:
        by_cat[cat].append(leaves)

    shares = mix.astype(complex) * total
    for cat in (2, 1, 0):
        if not by_cat[cat] and shares[cat] != 0:
            fold = next(c for c in (0, 1, 2) if by_cat[c])
            shares[fold] += shares[cat]
            shares[cat] = 0

    loads: list[PhaseLoad] = []
    for cat, groups in by_cat.items():
        if not groups or shares[cat] == 0:
            continue
        w = rng.uniform(0.5, 1.5, size=len(groups))
        w = w / w.sum()
        for leaves, wi in zip(groups, w):
            s_group = shares[cat] * wi
            for leaf in leaves:
                phases = node_phase[leaf]
                s_leaf = s_group / len(leaves)
                loads.append(
                    PhaseLoad(leaf, {ph: s_leaf / len(phases) for ph in phases})
                )

    # Close the floating-point gap so aggregates equal the spec exactly.
    widest = max(range(len(loads)), key=lambda j: len(loads[j].s))
    for _ in range(3):
        residual = total - sum(ld.total() for ld in loads)
        if residual == 0:
            break
        ld = loads[widest]
        k = len(ld.s)
        loads[widest] = PhaseLoad(
            ld.node, {ph: val + residual / k for ph, val in ld.s.items()}
        )

    feeder = skeleton.with_loads(loads)

    # Rescale impedances so the full-load drop hits the target band.
    for _ in range(6):
        try:
            sol = sweep_solve(feeder, PhaseVoltages.balanced(1.0), tol=1e-8, max_iter=200)
        except (ConvergenceError, VoltageCollapseError):
            factor = 0.25  # overshot badly; soften and retry
        else:
            drop = 1.0 - float(np.min(np.abs(sol.v[sol.mask])))
            if 0.025 <= drop <= 0.055:
                break
            factor = target_drop / max(drop, 1e-9)
        lines = tuple(
            FeederLine(ln.from_node, ln.to_node, ln.phases, ln.z_abc * factor)
            for ln in feeder.lines
        )
        feeder = Feeder(base_kv, base_mva, "head", lines, feeder.loads, name)
    return feeder
