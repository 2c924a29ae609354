"""Static per-unit network model: case data, Y-bus assembly, Newton power flow,
and event application.

All impedances are per-unit on the system base ``s_base``; generator inertia
constants are seconds on the machine base ``s_machine``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class CaseError(ValueError):
    """Structurally invalid or inconsistent network case data."""


class PowerFlowError(RuntimeError):
    """Newton power flow failed or the network is unsolvable."""


@dataclass(frozen=True)
class BusSpec:
    id: int
    kind: str  # "slack" | "pv" | "pq"
    base_kv: float
    subnet: str
    v_set: float | None = None


@dataclass(frozen=True)
class LineSpec:
    from_bus: int
    to_bus: int
    r: float
    x: float
    b_sh: float = 0.0  # total line charging susceptance
    tap: float = 1.0
    in_service: bool = True

    @property
    def key(self) -> tuple[int, int]:
        return (self.from_bus, self.to_bus)


@dataclass(frozen=True)
class GovernorSpec:
    r_gov: float  # droop, per-unit
    t_gov: float  # servo time constant, s


@dataclass(frozen=True)
class ExciterSpec:
    k_ex: float
    t_ex: float
    v_ref: float | None = None  # None: take the power-flow terminal voltage


@dataclass(frozen=True)
class GeneratorSpec:
    bus: int
    h: float          # inertia constant, s on machine base
    d: float          # damping torque coefficient, p.u.
    xdp: float        # transient reactance x'd, p.u. on system base
    s_machine: float  # machine MVA base
    p_set: float = 0.0  # scheduled active power, p.u. on system base
    governor: GovernorSpec | None = None
    exciter: ExciterSpec | None = None


@dataclass(frozen=True)
class LoadSpec:
    bus: int
    p: float
    q: float


EVENT_KINDS = ("load_scale", "line_trip", "q_injection_step")


@dataclass(frozen=True)
class Event:
    time: float
    kind: str
    params: dict
    description: str = ""


@dataclass
class NetworkCase:
    s_base: float
    f_nominal: float
    buses: list[BusSpec]
    lines: list[LineSpec]
    generators: list[GeneratorSpec]
    loads: list[LoadSpec]
    subnets: dict[str, list[int]]
    events: list[Event] = field(default_factory=list)

    @property
    def omega_s(self) -> float:
        return 2.0 * math.pi * self.f_nominal

    @property
    def n_bus(self) -> int:
        return len(self.buses)

    def bus_index(self) -> dict[int, int]:
        return {b.id: i for i, b in enumerate(self.buses)}

    def validate(self) -> None:
        if self.s_base <= 0:
            raise CaseError("s_base must be > 0")
        if self.f_nominal <= 0:
            raise CaseError("f_nominal must be > 0")
        ids = [b.id for b in self.buses]
        if len(set(ids)) != len(ids):
            raise CaseError("duplicate bus ids")
        known = set(ids)
        slacks = [b.id for b in self.buses if b.kind == "slack"]
        if len(slacks) == 0:
            raise CaseError("no slack bus")
        if len(slacks) > 1:
            raise CaseError(f"multiple slack buses: {slacks}")
        for b in self.buses:
            if b.kind not in ("slack", "pv", "pq"):
                raise CaseError(f"bus {b.id}: unknown kind {b.kind!r}")
            if b.kind in ("slack", "pv") and b.v_set is None:
                raise CaseError(f"bus {b.id}: {b.kind} bus requires v_set")
        for ln in self.lines:
            if ln.from_bus == ln.to_bus:
                raise CaseError(f"line {ln.key}: from == to")
            for end in ln.key:
                if end not in known:
                    raise CaseError(f"line {ln.key}: unknown bus {end}")
        for g in self.generators:
            if g.bus not in known:
                raise CaseError(f"generator at unknown bus {g.bus}")
            if g.h <= 0:
                raise CaseError(f"generator at bus {g.bus}: H must be > 0")
            if g.d < 0:
                raise CaseError(f"generator at bus {g.bus}: D must be >= 0")
            if g.xdp <= 0:
                raise CaseError(f"generator at bus {g.bus}: xdp must be > 0")
            if g.governor is not None and g.governor.r_gov <= 0:
                raise CaseError(f"generator at bus {g.bus}: R_gov must be > 0")
        for ld in self.loads:
            if ld.bus not in known:
                raise CaseError(f"load at unknown bus {ld.bus}")
        covered: set[int] = set()
        for name, members in self.subnets.items():
            for m in members:
                if m not in known:
                    raise CaseError(f"subnet {name}: unknown bus {m}")
            covered.update(members)
        if covered != known:
            missing = sorted(known - covered)
            raise CaseError(f"subnets do not cover buses {missing}")
        line_keys = {frozenset(ln.key) for ln in self.lines}
        for ev in self.events:
            if ev.time < 0:
                raise CaseError("event time must be >= 0")
            if ev.kind not in EVENT_KINDS:
                raise CaseError(f"unknown event kind {ev.kind!r}")
            if ev.kind in ("load_scale", "q_injection_step"):
                if ev.params["bus"] not in known:
                    raise CaseError(f"event at unknown bus {ev.params['bus']}")
            elif ev.kind == "line_trip":
                k = frozenset((ev.params["from"], ev.params["to"]))
                if k not in line_keys:
                    raise CaseError(
                        f"event references unknown line "
                        f"({ev.params['from']}, {ev.params['to']})"
                    )


@dataclass
class AdmittanceMatrix:
    n: int
    entries: np.ndarray  # dense complex (n, n)


def _line_stamp(ln: LineSpec, i: int, j: int, n: int) -> np.ndarray:
    """Additive Y-bus contribution of a single line."""
    stamp = np.zeros((n, n), dtype=complex)
    ys = 1.0 / complex(ln.r, ln.x)
    ysh = 0.5j * ln.b_sh
    t = ln.tap
    stamp[i, i] += ys / (t * t) + ysh
    stamp[j, j] += ys + ysh
    stamp[i, j] -= ys / t
    stamp[j, i] -= ys / t
    return stamp


def build_ybus(
    case: NetworkCase,
    in_service_override: dict[tuple[int, int], bool] | None = None,
) -> AdmittanceMatrix:
    """Assemble the bus admittance matrix from in-service lines."""
    ids = [b.id for b in case.buses]
    if len(set(ids)) != len(ids):
        raise CaseError("duplicate bus ids")
    idx = case.bus_index()
    n = case.n_bus
    y = np.zeros((n, n), dtype=complex)
    override = in_service_override or {}
    for ln in case.lines:
        if ln.from_bus not in idx or ln.to_bus not in idx:
            raise CaseError(f"line {ln.key}: endpoint not in bus list")
        status = override.get(ln.key, ln.in_service)
        if not status:
            continue
        y += _line_stamp(ln, idx[ln.from_bus], idx[ln.to_bus], n)
    return AdmittanceMatrix(n=n, entries=y)


@dataclass
class PowerFlowSolution:
    v: np.ndarray        # p.u. magnitude per bus
    theta: np.ndarray    # rad per bus
    p_inj: np.ndarray    # net active injection, p.u.
    q_inj: np.ndarray    # net reactive injection, p.u.
    iterations: int
    max_mismatch: float


def _check_connected(case: NetworkCase, y: np.ndarray) -> None:
    idx = case.bus_index()
    slack = next(b for b in case.buses if b.kind == "slack")
    n = case.n_bus
    seen = {idx[slack.id]}
    frontier = [idx[slack.id]]
    adj = np.abs(y) > 1e-12
    np.fill_diagonal(adj, False)
    while frontier:
        i = frontier.pop()
        for j in np.nonzero(adj[i])[0]:
            if j not in seen:
                seen.add(j)
                frontier.append(int(j))
    if len(seen) != n:
        unreached = min(b.id for b in case.buses if idx[b.id] not in seen)
        raise PowerFlowError(f"bus {unreached} is disconnected from the slack")


def solve_power_flow(
    case: NetworkCase, tol: float = 1e-8, max_iter: int = 20
) -> PowerFlowSolution:
    """Newton-Raphson power flow on polar mismatch equations, flat start."""
    case.validate()
    ybus = build_ybus(case)
    y = ybus.entries
    _check_connected(case, y)
    idx = case.bus_index()
    n = case.n_bus

    kinds = np.array([b.kind for b in case.buses])
    pv = np.nonzero(kinds == "pv")[0]
    pq = np.nonzero(kinds == "pq")[0]
    pvpq = np.concatenate([pv, pq])

    p_spec = np.zeros(n)
    q_spec = np.zeros(n)
    for g in case.generators:
        b = case.buses[idx[g.bus]]
        if b.kind == "pq":
            raise CaseError(f"generator at pq bus {g.bus} is not supported")
        p_spec[idx[g.bus]] += g.p_set
    for ld in case.loads:
        p_spec[idx[ld.bus]] -= ld.p
        q_spec[idx[ld.bus]] -= ld.q

    vm = np.array([b.v_set if b.v_set is not None else 1.0 for b in case.buses])
    va = np.zeros(n)

    npq = len(pq)
    npvpq = len(pvpq)
    max_mis = math.inf
    for it in range(1, max_iter + 1):
        vc = vm * np.exp(1j * va)
        ibus = y @ vc
        s = vc * np.conj(ibus)
        dp = s.real - p_spec
        dq = s.imag - q_spec
        f = np.concatenate([dp[pvpq], dq[pq]])
        max_mis = float(np.max(np.abs(f))) if f.size else 0.0
        if max_mis < tol:
            return PowerFlowSolution(
                v=vm.copy(), theta=va.copy(),
                p_inj=s.real.copy(), q_inj=s.imag.copy(),
                iterations=it, max_mismatch=max_mis,
            )
        # complex power derivatives (dense, standard polar forms)
        diag_v = np.diag(vc)
        diag_i = np.diag(ibus)
        diag_e = np.diag(vc / vm)
        ds_dva = 1j * diag_v @ np.conj(diag_i - y @ diag_v)
        ds_dvm = diag_e @ np.conj(diag_i) + diag_v @ np.conj(y @ diag_e)
        j11 = ds_dva[np.ix_(pvpq, pvpq)].real
        j12 = ds_dvm[np.ix_(pvpq, pq)].real
        j21 = ds_dva[np.ix_(pq, pvpq)].imag
        j22 = ds_dvm[np.ix_(pq, pq)].imag
        jac = np.block([[j11, j12], [j21, j22]])
        try:
            dx = np.linalg.solve(jac, -f)
        except np.linalg.LinAlgError as exc:
            raise PowerFlowError(f"singular Jacobian at iteration {it}") from exc
        va[pvpq] += dx[:npvpq]
        vm[pq] += dx[npvpq:npvpq + npq]

    raise PowerFlowError(
        f"power flow did not converge after {max_iter} iterations "
        f"(max mismatch {max_mis:.3e} p.u.)"
    )


def load_admittances(case: NetworkCase, pf: PowerFlowSolution) -> np.ndarray:
    """Constant-admittance load conversion at the power-flow operating point:
    y_load = (p - jq) / v^2 per bus."""
    idx = case.bus_index()
    y = np.zeros(case.n_bus, dtype=complex)
    for ld in case.loads:
        i = idx[ld.bus]
        y[i] += complex(ld.p, -ld.q) / (pf.v[i] ** 2)
    return y


def apply_event(
    ybus: AdmittanceMatrix,
    load_adm: np.ndarray,
    event: Event,
    case: NetworkCase,
) -> tuple[AdmittanceMatrix, np.ndarray]:
    """Apply a timed event, returning updated (Y-bus, per-bus load admittance).

    Inputs are not mutated. q_injection_step adds a shunt reactive injection
    evaluated at 1 p.u. voltage.
    """
    idx = case.bus_index()
    y_new = AdmittanceMatrix(n=ybus.n, entries=ybus.entries.copy())
    adm = load_adm.copy()
    if event.kind == "load_scale":
        bus = event.params["bus"]
        if bus not in idx:
            raise CaseError(f"unknown bus {bus}")
        i = idx[bus]
        adm[i] = (adm[i].real * event.params["p_factor"]
                  + 1j * adm[i].imag * event.params["q_factor"])
    elif event.kind == "line_trip":
        fb, tb = event.params["from"], event.params["to"]
        match = None
        for ln in case.lines:
            if {ln.from_bus, ln.to_bus} == {fb, tb} and ln.in_service:
                match = ln
                break
        if match is None:
            raise CaseError(f"unknown line ({fb}, {tb})")
        y_new.entries -= _line_stamp(
            match, idx[match.from_bus], idx[match.to_bus], ybus.n
        )
    elif event.kind == "q_injection_step":
        bus = event.params["bus"]
        if bus not in idx:
            raise CaseError(f"unknown bus {bus}")
        # injecting dq lowers consumed reactive power: y -> y + j*dq at v = 1
        adm[idx[bus]] += 1j * event.params["dq"]
    else:
        raise CaseError(f"unknown event kind {event.kind!r}")
    return y_new, adm
