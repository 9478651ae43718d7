"""Master algorithm: iterative PCC coupling, time coordination and sweeps.

Within one time step the transmission case and the attached feeders exchange
boundary variables until fixed point: the three-sequence solve produces PCC
phase voltages, every feeder is swept at its commanded head voltage (feeders
run concurrently, merging at a barrier), and the per-phase head powers feed
the next transmission solve.  Convergence is declared when, for every PCC
and phase, successive transmission-side voltage magnitudes differ by less
than ``eps``; the first round bootstraps from each feeder's aggregate load,
mirroring the decoupled model's starting point.

Time coordination runs the coupled load flow every power-flow interval and a
fresh economic dispatch every dispatch interval; the clock only advances
past a step once that step's coupling has converged.
"""
from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import dsolve, ed, tsolve
from .errors import ConvergenceError, TdcosimError
from .netmodel import TransmissionCase, to_per_unit, validate_case, with_dispatch
from .seqxform import PhasePowers, PhaseVoltages, sequence_to_phase

COUPLING_EPS = 1e-4
MAX_ROUNDS = 50


@dataclass(frozen=True)
class BoundaryState:
    """One PCC's exchange record for one coupling iteration."""

    pcc_bus: int
    iteration: int
    v_abc_sent: PhaseVoltages
    s_abc_returned: PhasePowers


@dataclass(frozen=True)
class TraceRow:
    pcc_bus: int
    iteration: int
    v_trans_mag: tuple[float, float, float]
    v_dist_mag: tuple[float, float, float]
    mismatch: float  # max per-phase |V| change vs previous iteration


@dataclass
class CouplingTrace:
    rows: list[TraceRow] = field(default_factory=list)
    iterations_to_converge: dict[int, int] = field(default_factory=dict)
    overall_iterations: int = 0

    def rows_for(self, pcc_bus: int) -> list[TraceRow]:
        return [r for r in self.rows if r.pcc_bus == pcc_bus]


@dataclass
class CoupledState:
    """Converged in-step state: both network solutions plus the exchange."""

    seq: tsolve.SequenceSolution
    feeder_solutions: dict[int, dsolve.FeederSolution]
    boundary: list[BoundaryState]
    pcc_voltages: dict[int, PhaseVoltages]
    pcc_powers: dict[int, PhasePowers]


@dataclass
class StepResult:
    t_min: int
    converged: bool
    trace: CouplingTrace
    state: CoupledState | None
    dispatch: ed.DispatchResult | None
    dispatched: bool  # True when the dispatch was computed at this step
    gen_buses: tuple[int, ...]
    wall_s: float


@dataclass
class CosimResult:
    steps: list[StepResult]
    eps: float
    aborted_at: int | None = None

    def converged_steps(self) -> list[StepResult]:
        return [s for s in self.steps if s.converged]


def _default_jobs(n_feeders: int) -> int:
    env = os.environ.get("TDCOSIM_JOBS")
    if env:
        return max(1, int(env))
    return max(1, min(n_feeders, os.cpu_count() or 1))


def _sweep_one(bus, feeder, head_v, sweep_tol, sweep_max_iter):
    try:
        return dsolve.sweep_solve(feeder, head_v, sweep_tol, sweep_max_iter)
    except TdcosimError as exc:
        exc.args = (f"PCC bus {bus}: {exc.args[0]}",) + exc.args[1:]
        exc.pcc_bus = bus
        raise


def _solve_feeders(feeders, head_voltages, sweep_tol, sweep_max_iter, jobs):
    """Sweep every feeder at its commanded head voltage; barrier-merge."""
    buses = sorted(feeders)
    if jobs <= 1 or len(buses) == 1:
        return {
            b: _sweep_one(b, feeders[b], head_voltages[b], sweep_tol, sweep_max_iter)
            for b in buses
        }
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        futures = {
            b: pool.submit(
                _sweep_one, b, feeders[b], head_voltages[b], sweep_tol, sweep_max_iter
            )
            for b in buses
        }
        return {b: futures[b].result() for b in buses}


def couple_step(
    case: TransmissionCase,
    feeders: dict[int, dsolve.Feeder],
    dispatch: ed.DispatchResult | None = None,
    eps: float = COUPLING_EPS,
    max_rounds: int = MAX_ROUNDS,
    sweep_tol: float = dsolve.SWEEP_TOL,
    sweep_max_iter: int = dsolve.SWEEP_MAX_ITER,
    jobs: int | None = None,
    warm: tsolve.SequenceSolution | None = None,
) -> tuple[CoupledState, CouplingTrace]:
    """Iterate one transmission/distribution exchange to convergence.

    Raises :class:`ConvergenceError` (with the trace attached as
    ``exc.trace``) if ``max_rounds`` is exhausted.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    attach_buses = set(case.pcc_buses())
    for bus in feeders:
        if bus not in attach_buses:
            raise ValueError(
                f"bus {bus} has a feeder bound but no Feeder attachment in the case"
            )
    missing = attach_buses - set(feeders)
    if missing:
        raise ValueError(f"case expects feeders at buses {sorted(missing)}")

    if dispatch is not None:
        case = with_dispatch(case, dispatch.p_set)
    pu_case = to_per_unit(case)
    ybus = tsolve.build_sequence_ybus(pu_case)
    jobs = jobs if jobs is not None else _default_jobs(len(feeders))

    # Round-1 bootstrap: feeders enter as their aggregate PQ, the same
    # starting point the decoupled model uses.
    s_pcc: dict[int, PhasePowers] = {
        bus: dsolve.aggregate_load(f) for bus, f in feeders.items()
    }

    trace = CouplingTrace()
    boundary: list[BoundaryState] = []
    prev_mag: dict[int, np.ndarray] = {}
    converged_at: dict[int, int] = {}
    seq = warm
    fsols: dict[int, dsolve.FeederSolution] = {}

    for k in range(1, max_rounds + 1):
        # (i) transmission solve with the most recent PCC powers; on exit the
        # converged transmission model has consumed them verbatim.
        seq = tsolve.solve_three_sequence(
            pu_case,
            pcc_loads=[(bus, s_pcc[bus]) for bus in sorted(feeders)],
            ybus=ybus,
            warm=seq,
        )
        v_sent = {bus: sequence_to_phase(seq.at(bus)) for bus in feeders}

        all_ok = k >= 2
        for bus in sorted(feeders):
            mags = v_sent[bus].magnitudes()
            if bus in prev_mag:
                mismatch = float(np.max(np.abs(mags - prev_mag[bus])))
            else:
                mismatch = float("inf")
            # distribution side: head voltage of the latest feeder solve
            # (one exchange behind the transmission iterate, like Table 1)
            if bus in fsols:
                head_mags = tuple(float(m) for m in np.abs(fsols[bus].v[0]))
            else:
                head_mags = tuple(float(m) for m in mags)
            trace.rows.append(
                TraceRow(
                    pcc_bus=bus,
                    iteration=k,
                    v_trans_mag=tuple(float(m) for m in mags),
                    v_dist_mag=head_mags,
                    mismatch=mismatch,
                )
            )
            if mismatch < eps:
                converged_at.setdefault(bus, k)
            else:
                converged_at.pop(bus, None)
                all_ok = False
            prev_mag[bus] = mags

        if not feeders:
            # Degenerate but legal: nothing to couple, one solve suffices.
            trace.overall_iterations = k
            return CoupledState(seq, {}, [], {}, {}), trace

        if all_ok:
            trace.overall_iterations = k
            trace.iterations_to_converge = dict(converged_at)
            state = CoupledState(
                seq=seq,
                feeder_solutions=fsols,
                boundary=boundary,
                pcc_voltages=v_sent,
                pcc_powers=dict(s_pcc),
            )
            return state, trace

        # (ii)-(iv) send voltages down, sweep every feeder, feed powers back.
        fsols = _solve_feeders(feeders, v_sent, sweep_tol, sweep_max_iter, jobs)
        s_pcc = {bus: dsolve.head_power(sol) for bus, sol in fsols.items()}
        for bus in sorted(feeders):
            boundary.append(
                BoundaryState(
                    pcc_bus=bus,
                    iteration=k,
                    v_abc_sent=v_sent[bus],
                    s_abc_returned=s_pcc[bus],
                )
            )

    trace.overall_iterations = max_rounds
    err = ConvergenceError(
        f"PCC coupling did not converge within {max_rounds} rounds at eps={eps:g}",
        [r.mismatch for r in trace.rows if np.isfinite(r.mismatch)],
    )
    err.trace = trace
    raise err


def _scale_case_loads(case: TransmissionCase, shapes, t_min: int) -> TransmissionCase:
    from dataclasses import replace

    loads = []
    for ld in case.loads:
        if ld.loadshape_id and not ld.is_feeder:
            m = shapes[ld.loadshape_id].multiplier(t_min)
            loads.append(replace(ld, p=ld.p * m, q=ld.q * m))
        else:
            loads.append(ld)
    return replace(case, loads=tuple(loads))


def _scaled_feeders(case, feeders, shapes, t_min):
    by_bus = {ld.bus: ld for ld in case.loads if ld.is_feeder}
    out = {}
    for bus, f in feeders.items():
        shape_id = by_bus[bus].loadshape_id if bus in by_bus else None
        if shape_id:
            out[bus] = dsolve.scale_loads(f, shapes[shape_id].multiplier(t_min))
        else:
            out[bus] = f
    return out


def _forecast_demand_mw(case, feeders, shapes, t_min) -> float:
    demand = 0.0
    for ld in case.loads:
        m = shapes[ld.loadshape_id].multiplier(t_min) if ld.loadshape_id else 1.0
        if ld.is_feeder:
            demand += dsolve.aggregate_load(feeders[ld.bus]).total().real * m
        else:
            demand += ld.p * m
    return demand


def _check_shape_coverage(case, shapes, start_min, horizon_min):
    needed = {ld.loadshape_id for ld in case.loads if ld.loadshape_id}
    for shape_id in sorted(needed):
        if shape_id not in shapes:
            raise ValueError(f"case references unknown loadshape {shape_id!r}")
        if not shapes[shape_id].covers(start_min, horizon_min):
            raise ValueError(
                f"loadshape {shape_id!r} does not cover minutes "
                f"[{start_min}, {start_min + horizon_min})"
            )


def run_timeseries(
    case: TransmissionCase,
    feeders: dict[int, dsolve.Feeder],
    loadshapes: dict[str, object] | None = None,
    start_min: int = 0,
    horizon_min: int = 60,
    ed_interval_min: int = 5,
    pf_interval_min: int = 1,
    eps: float = COUPLING_EPS,
    max_rounds: int = MAX_ROUNDS,
    sweep_tol: float = dsolve.SWEEP_TOL,
    jobs: int | None = None,
    on_fail: str = "abort",
) -> CosimResult:
    """Coupled time-series simulation per the dispatch/load-flow cadence.

    Dispatch runs at every ``ed_interval_min`` boundary on the forecast
    demand; the coupled load flow runs every ``pf_interval_min``.  On a
    coupling failure the run either stops with partial results (``abort``)
    or records the failed step and continues (``continue``).
    """
    if horizon_min <= 0:
        raise ValueError("horizon must be positive")
    if pf_interval_min <= 0 or ed_interval_min <= 0:
        raise ValueError("intervals must be positive")
    if ed_interval_min % pf_interval_min != 0:
        raise ValueError("pf interval must divide the ed interval")
    if on_fail not in ("abort", "continue"):
        raise ValueError("on_fail must be 'abort' or 'continue'")
    loadshapes = loadshapes or {}
    _check_shape_coverage(case, loadshapes, start_min, horizon_min)

    problems = validate_case(case)
    if problems:
        raise ValueError("invalid case: " + "; ".join(problems))

    gen_buses = tuple(g.bus for g in case.generators)
    steps: list[StepResult] = []
    dispatch: ed.DispatchResult | None = None
    warm: tsolve.SequenceSolution | None = None
    aborted_at: int | None = None

    for t in range(start_min, start_min + horizon_min, pf_interval_min):
        began = time.perf_counter()
        dispatched = False
        if (t - start_min) % ed_interval_min == 0:
            demand = _forecast_demand_mw(case, feeders, loadshapes, t)
            dispatch = ed.dispatch(case.generators, demand)
            dispatched = True
        step_case = _scale_case_loads(case, loadshapes, t)
        step_feeders = _scaled_feeders(case, feeders, loadshapes, t)
        try:
            state, trace = couple_step(
                step_case,
                step_feeders,
                dispatch=dispatch,
                eps=eps,
                max_rounds=max_rounds,
                sweep_tol=sweep_tol,
                jobs=jobs,
                warm=warm,
            )
            warm = state.seq
            steps.append(
                StepResult(
                    t_min=t,
                    converged=True,
                    trace=trace,
                    state=state,
                    dispatch=dispatch,
                    dispatched=dispatched,
                    gen_buses=gen_buses,
                    wall_s=time.perf_counter() - began,
                )
            )
        except ConvergenceError as exc:
            trace = getattr(exc, "trace", CouplingTrace())
            steps.append(
                StepResult(
                    t_min=t,
                    converged=False,
                    trace=trace,
                    state=None,
                    dispatch=dispatch,
                    dispatched=dispatched,
                    gen_buses=gen_buses,
                    wall_s=time.perf_counter() - began,
                )
            )
            if on_fail == "abort":
                aborted_at = t
                break
    return CosimResult(steps=steps, eps=eps, aborted_at=aborted_at)


def run_decoupled_baseline(
    case: TransmissionCase,
    feeders: dict[int, dsolve.Feeder],
    loadshapes: dict[str, object] | None = None,
    start_min: int = 0,
    horizon_min: int = 60,
    ed_interval_min: int = 5,
    eps: float = COUPLING_EPS,
) -> CosimResult:
    """Decoupled reference: feeders as static aggregate PQ, 5-min cadence.

    No iteration happens; each step is a single transmission solve whose
    trace carries one round so the result shares the coupled run's shape.
    """
    if horizon_min <= 0:
        raise ValueError("horizon must be positive")
    loadshapes = loadshapes or {}
    _check_shape_coverage(case, loadshapes, start_min, horizon_min)
    gen_buses = tuple(g.bus for g in case.generators)
    shape_by_bus = {ld.bus: ld.loadshape_id for ld in case.loads if ld.is_feeder}

    steps: list[StepResult] = []
    warm: tsolve.SequenceSolution | None = None
    dispatch: ed.DispatchResult | None = None
    for t in range(start_min, start_min + horizon_min, ed_interval_min):
        began = time.perf_counter()
        demand = _forecast_demand_mw(case, feeders, loadshapes, t)
        dispatch = ed.dispatch(case.generators, demand)
        step_case = _scale_case_loads(case, loadshapes, t)
        pu_case = to_per_unit(with_dispatch(step_case, dispatch.p_set))

        pcc_loads = []
        for bus in sorted(feeders):
            agg = dsolve.aggregate_load(feeders[bus])
            shape_id = shape_by_bus.get(bus)
            m = loadshapes[shape_id].multiplier(t) if shape_id else 1.0
            pcc_loads.append((bus, agg.scaled(m)))

        seq = tsolve.solve_three_sequence(pu_case, pcc_loads=pcc_loads, warm=warm)
        warm = seq
        trace = CouplingTrace(overall_iterations=1)
        v_sent = {}
        for bus, s_abc in pcc_loads:
            v = sequence_to_phase(seq.at(bus))
            v_sent[bus] = v
            mags = tuple(float(m) for m in v.magnitudes())
            trace.rows.append(
                TraceRow(
                    pcc_bus=bus, iteration=1, v_trans_mag=mags,
                    v_dist_mag=mags, mismatch=0.0,
                )
            )
            trace.iterations_to_converge[bus] = 1
        state = CoupledState(
            seq=seq,
            feeder_solutions={},
            boundary=[],
            pcc_voltages=v_sent,
            pcc_powers=dict(pcc_loads),
        )
        steps.append(
            StepResult(
                t_min=t,
                converged=True,
                trace=trace,
                state=state,
                dispatch=dispatch,
                dispatched=True,
                gen_buses=gen_buses,
                wall_s=time.perf_counter() - began,
            )
        )
    return CosimResult(steps=steps, eps=eps)


@dataclass(frozen=True)
class SweepEntry:
    alpha: float
    converged: bool
    n_per_pcc: dict[int, int]
    overall_n: int
    error: str | None = None


@dataclass
class UnbalanceSweep:
    pcc_buses: tuple[int, ...]
    rows: list[SweepEntry]


def sweep_unbalance(
    case: TransmissionCase,
    feeders: dict[int, dsolve.Feeder],
    alphas,
    dispatch: ed.DispatchResult | None = None,
    eps: float = COUPLING_EPS,
    max_rounds: int = MAX_ROUNDS,
    sweep_tol: float = dsolve.SWEEP_TOL,
    jobs: int | None = None,
) -> UnbalanceSweep:
    """Coupling iteration counts across load-unbalance levels (Table-2 shape)."""
    buses = tuple(sorted(feeders))
    rows: list[SweepEntry] = []
    for alpha in alphas:
        shifted = {b: dsolve.apply_unbalance(f, alpha) for b, f in feeders.items()}
        try:
            _, trace = couple_step(
                case, shifted, dispatch=dispatch, eps=eps,
                max_rounds=max_rounds, sweep_tol=sweep_tol, jobs=jobs,
            )
            rows.append(
                SweepEntry(
                    alpha=float(alpha),
                    converged=True,
                    n_per_pcc=dict(trace.iterations_to_converge),
                    overall_n=trace.overall_iterations,
                )
            )
        except ConvergenceError as exc:
            rows.append(
                SweepEntry(
                    alpha=float(alpha),
                    converged=False,
                    n_per_pcc={},
                    overall_n=0,
                    error=str(exc),
                )
            )
    return UnbalanceSweep(pcc_buses=buses, rows=rows)
