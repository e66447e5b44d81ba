"""Worst-case load-redistribution attack against DC state estimation.

The attacker biases the estimated bus angles by a vector ``c`` (reference
entry fixed at zero).  The implied flow deviations ``dp`` and load deviations
follow from the network equations, so the tampered measurement set stays
perfectly consistent and invisible to residual-based bad-data screens.  The
attack maximizes the hidden flow deviation on a chosen target branch, subject
to a per-bus load-shift bound and an l1 budget on the angle bias; buses
without load must see no injection change at all, because their (trusted)
generator and zero-injection telemetry cannot be forged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import lp
from .cases import Network
from .estimation import FLOW, INJECTION, MeasurementSet, wls_estimate

AUDIT_TOL = 1e-7


class ContractError(Exception):
    """Mismatched network / measurement / attack dimensions."""


class AuditError(Exception):
    """A solved attack failed its independent constraint re-check."""


@dataclass(frozen=True)
class AttackSpec:
    target_branch: int        # 1-based file ordinal
    load_shift_factor: float  # fraction of each true load the attacker may shift
    l1_limit: float           # budget on sum |c_n| (rad)
    base_flows: np.ndarray    # p.u. per in-service branch, observed at t=0
    base_loads: np.ndarray    # MW per bus, true loads at t=0

    def validate(self, net: Network):
        if not 0.0 <= self.load_shift_factor <= 1.0:
            raise ValueError(
                f"load shift factor must be in [0, 1], got {self.load_shift_factor}"
            )
        if self.l1_limit < 0.0:
            raise ValueError(f"l1 budget must be nonnegative, got {self.l1_limit}")
        n_active = len(net.in_service_branches)
        if np.asarray(self.base_flows).shape != (n_active,):
            raise ContractError("base_flows length does not match in-service branches")
        if np.asarray(self.base_loads).shape != (net.n_bus,):
            raise ContractError("base_loads length does not match bus count")
        net.branch_position(self.target_branch)  # raises if out of service

    def target_flow(self, net: Network) -> float:
        """Pre-attack flow on the target branch (p.u.)."""
        return float(self.base_flows[net.branch_position(self.target_branch)])


@dataclass(frozen=True)
class AttackResult:
    c: np.ndarray              # rad per bus (angle bias)
    s: np.ndarray              # absolute-value auxiliaries per bus
    delta_p: np.ndarray        # p.u. per in-service branch (hidden flow deltas)
    delta_d: np.ndarray        # MW per bus (malicious load deviations)
    objective: float           # sgn(target base flow) * delta_p on the target
    tampered_loads: np.ndarray # MW per bus
    cyber_flows: np.ndarray    # p.u. per in-service branch, what the EMS sees
    base_mva: float


def _divergence(net: Network, delta_p: np.ndarray) -> np.ndarray:
    """Net outflow delta per bus implied by branch flow deltas."""
    div = np.zeros(net.n_bus)
    for k, br in enumerate(net.in_service_branches):
        div[br.from_bus] += delta_p[k]
        div[br.to_bus] -= delta_p[k]
    return div


def build_attack_lp(net: Network, spec: AttackSpec) -> lp.LinearProgram:
    """Assemble the attack LP over variables [c, s, dp].

    Rows: dp tied to angle biases per branch; per load bus the dp divergence
    (the malicious load deviation) bounded by +-L_S * d_n0; zero divergence at
    non-load buses; |c| <= s elementwise with sum(s) capped by the l1 budget;
    c fixed to zero at the reference bus.
    """
    spec.validate(net)
    branches = net.in_service_branches
    n, m = net.n_bus, len(branches)
    base = net.base_mva
    d0_pu = np.asarray(spec.base_loads, dtype=float) / base
    target_pos = net.branch_position(spec.target_branch)
    sgn = float(np.sign(spec.target_flow(net)))

    problem = lp.LinearProgram(sense="max")
    cs = problem.add_variables("c", n)
    ss = problem.add_variables("s", n, lower=0.0)
    dps = problem.add_variables("dp", m)
    problem.fix_variable(cs.start + net.reference_bus, 0.0)
    problem.objective[dps.start + target_pos] = sgn

    width = problem.n_var

    # dp_k - (-c_from + c_to)/x_k = 0
    for k, br in enumerate(branches):
        row = np.zeros(width)
        row[dps.start + k] = 1.0
        row[cs.start + br.from_bus] += 1.0 / br.reactance
        row[cs.start + br.to_bus] -= 1.0 / br.reactance
        problem.add_constraint(row, lp.EQ, 0.0)

    # Divergence rows: bounded at load buses, zero elsewhere.
    div_rows = np.zeros((n, width))
    for k, br in enumerate(branches):
        div_rows[br.from_bus, dps.start + k] += 1.0
        div_rows[br.to_bus, dps.start + k] -= 1.0
    ls = spec.load_shift_factor
    for bus in net.buses:
        row = div_rows[bus.internal_index]
        if bus.is_load_bus:
            bound = ls * d0_pu[bus.internal_index]
            problem.add_constraint(row, lp.LE, bound)
            problem.add_constraint(-row, lp.LE, bound)
        else:
            problem.add_constraint(row, lp.EQ, 0.0)

    # l1 budget: -c <= s, c <= s, sum(s) <= N1.
    for i in range(n):
        row = np.zeros(width)
        row[cs.start + i] = -1.0
        row[ss.start + i] = -1.0
        problem.add_constraint(row, lp.LE, 0.0)
        row = np.zeros(width)
        row[cs.start + i] = 1.0
        row[ss.start + i] = -1.0
        problem.add_constraint(row, lp.LE, 0.0)
    budget = np.zeros(width)
    budget[ss] = 1.0
    problem.add_constraint(budget, lp.LE, spec.l1_limit)

    return problem


def solve_attack(net: Network, spec: AttackSpec, engine: str = "auto") -> AttackResult:
    """Solve the attack LP and reconstruct the consistent tampered state.

    Flow and load deltas are recomputed from the solved angle bias so the
    network-equation invariants hold to machine precision; the result is then
    audited against every constraint before being returned.
    """
    problem = build_attack_lp(net, spec)
    sol = lp.solve_lp(problem, engine=engine)
    if sol.status != lp.OPTIMAL:
        raise lp.SolverError(f"attack LP terminated {sol.status}")

    n = net.n_bus
    c = sol.values[0:n]
    s = sol.values[n : 2 * n]
    branches = net.in_service_branches
    delta_p = np.array(
        [(-c[br.from_bus] + c[br.to_bus]) / br.reactance for br in branches]
    )
    div_pu = _divergence(net, delta_p)
    is_load = np.array([b.is_load_bus for b in net.buses])
    delta_d = np.where(is_load, div_pu, 0.0) * net.base_mva

    target_pos = net.branch_position(spec.target_branch)
    sgn = float(np.sign(spec.target_flow(net)))
    result = AttackResult(
        c=c,
        s=s,
        delta_p=delta_p,
        delta_d=delta_d,
        objective=sgn * delta_p[target_pos],
        tampered_loads=np.asarray(spec.base_loads, dtype=float) + delta_d,
        cyber_flows=np.asarray(spec.base_flows, dtype=float) - delta_p,
        base_mva=net.base_mva,
    )
    audit_attack(net, spec, result)
    return result


def audit_attack(net: Network, spec: AttackSpec, result: AttackResult,
                 tol: float = AUDIT_TOL) -> None:
    """Independent re-check of every attack constraint; raises on violation."""
    base = net.base_mva
    branches = net.in_service_branches
    c, s, dp = result.c, result.s, result.delta_p

    if abs(c[net.reference_bus]) > tol:
        raise AuditError("reference-bus bias not zero")
    for k, br in enumerate(branches):
        expect = (-c[br.from_bus] + c[br.to_bus]) / br.reactance
        if abs(dp[k] - expect) > tol:
            raise AuditError(f"flow-delta equation violated on branch {br.ordinal}")

    div_pu = _divergence(net, dp)
    ls = spec.load_shift_factor
    for bus in net.buses:
        i = bus.internal_index
        if bus.is_load_bus:
            bound = ls * spec.base_loads[i] / base
            if abs(div_pu[i]) > bound + tol:
                raise AuditError(f"load shift bound violated at bus {bus.external_id}")
            if abs(result.delta_d[i] / base - div_pu[i]) > tol:
                raise AuditError(f"load deviation mismatch at bus {bus.external_id}")
        else:
            if abs(div_pu[i]) > tol:
                raise AuditError(
                    f"injection change at no-load bus {bus.external_id}"
                )

    if np.any(np.abs(c) > s + tol):
        raise AuditError("absolute-value auxiliaries below |c|")
    if s.sum() > spec.l1_limit + tol:
        raise AuditError("l1 budget exceeded")

    expect_cyber = np.asarray(spec.base_flows) - dp
    if np.max(np.abs(result.cyber_flows - expect_cyber)) > tol:
        raise AuditError("cyber flows inconsistent with flow deltas")


def apply_attack(clean: MeasurementSet, result: AttackResult) -> MeasurementSet:
    """Swap true measurements for the attacker's consistent false ones.

    Flow entries drop by the hidden flow delta; injection entries at load
    buses drop by the malicious load deviation (higher cyber load means lower
    net injection).  Generator-only buses are untouched.
    """
    n_flow = sum(1 for k in clean.kinds if k == FLOW)
    if n_flow and n_flow != len(result.delta_p):
        raise ContractError(
            f"measurement set has {n_flow} flow entries, attack has"
            f" {len(result.delta_p)} branches"
        )
    delta_d_pu = result.delta_d / result.base_mva
    values = clean.values.copy()
    for i, (kind, idx) in enumerate(zip(clean.kinds, clean.indices)):
        if kind == FLOW:
            values[i] -= result.delta_p[idx]
        elif kind == INJECTION:
            if idx >= len(delta_d_pu):
                raise ContractError("injection index outside attack bus range")
            values[i] -= delta_d_pu[idx]
    return clean.with_values(values)


def check_unobservability(
    net: Network, result: AttackResult, clean: MeasurementSet
) -> float:
    """|J(tampered) - J(clean)| from full WLS runs; ~0 for a consistent attack."""
    tampered = apply_attack(clean, result)
    j_clean = wls_estimate(clean, net).weighted_residual_norm
    j_tampered = wls_estimate(tampered, net).weighted_residual_norm
    return abs(j_tampered - j_clean)
