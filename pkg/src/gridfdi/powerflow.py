"""DC (B-theta) power flow, PTDF sensitivities and critical-load-bus sets."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .cases import Network

# A load bus belongs to a branch's critical set when the magnitude of its
# transfer sensitivity reaches this threshold.
CRITICAL_PTDF = 0.01

# Branches with fewer critical load buses than this are excluded from the
# system-wide deviation metric.
MIN_CRITICAL_SET = 5

BALANCE_TOL = 1e-9


class NumericError(Exception):
    """Singular or numerically unusable system matrix."""


@dataclass(frozen=True)
class DcSolution:
    angles: np.ndarray   # rad per bus, reference fixed at 0
    flows: np.ndarray    # p.u. per in-service branch


@dataclass(frozen=True)
class Ptdf:
    """Branch x bus transfer sensitivities for one network topology.

    ``matrix[k, n]`` is the change of flow on in-service branch position k
    per 1 p.u. injected at bus n and withdrawn at the reference bus; the
    reference column is identically zero.
    """

    matrix: np.ndarray
    reference_bus: int
    critical_sets: tuple[np.ndarray, ...]  # load-bus indices per branch
    nl_sizes: np.ndarray                   # len(critical_sets[k])
    eligible: np.ndarray                   # nl_sizes >= MIN_CRITICAL_SET

    @property
    def n_branches(self):
        return self.matrix.shape[0]


def _incidence(net: Network):
    """Weighted incidence Bf (flows = Bf @ angles) and nodal B matrix."""
    branches = net.in_service_branches
    n, m = net.n_bus, len(branches)
    bf = np.zeros((m, n))
    for k, br in enumerate(branches):
        w = 1.0 / br.reactance
        bf[k, br.from_bus] += w
        bf[k, br.to_bus] -= w
    a = np.zeros((m, n))
    for k, br in enumerate(branches):
        a[k, br.from_bus] = 1.0
        a[k, br.to_bus] = -1.0
    b = a.T @ bf
    return bf, b


def _reduced_factor(net: Network):
    bf, b = _incidence(net)
    keep = np.array([i for i in range(net.n_bus) if i != net.reference_bus])
    b_red = b[np.ix_(keep, keep)]
    try:
        factor = lu_factor(b_red)
    except Exception as exc:  # pragma: no cover - connected nets never hit this
        raise NumericError(f"reduced susceptance matrix not factorizable: {exc}")
    if not np.all(np.isfinite(factor[0])):
        raise NumericError("reduced susceptance matrix is singular")
    return bf, keep, factor


def solve_dc(net: Network, injections: np.ndarray) -> DcSolution:
    """Solve B*theta = injection with theta_ref = 0 (all quantities p.u.).

    The injection vector must be balanced; imbalances are the caller's job
    (conventionally absorbed at the reference bus).
    """
    injections = np.asarray(injections, dtype=float)
    if injections.shape != (net.n_bus,):
        raise ValueError(f"expected {net.n_bus} injections, got {injections.shape}")
    total = float(injections.sum())
    if abs(total) > max(BALANCE_TOL, 1e-12 * np.abs(injections).sum()):
        raise ValueError(f"injections are unbalanced by {total:.3e} p.u.")

    bf, keep, factor = _reduced_factor(net)
    angles = np.zeros(net.n_bus)
    angles[keep] = lu_solve(factor, injections[keep])
    return DcSolution(angles=angles, flows=bf @ angles)


def compute_ptdf(net: Network) -> Ptdf:
    """Transfer sensitivities of every in-service branch to every bus.

    One LU factorization of the reduced susceptance matrix is reused for all
    columns.  Critical sets collect the load buses whose absolute sensitivity
    reaches ``CRITICAL_PTDF``.
    """
    bf, keep, factor = _reduced_factor(net)
    n = net.n_bus
    # Response of non-reference angles to a unit injection at each kept bus.
    theta = lu_solve(factor, np.eye(len(keep)))
    matrix = np.zeros((bf.shape[0], n))
    matrix[:, keep] = bf[:, keep] @ theta

    load_buses = net.load_buses
    critical = []
    for k in range(matrix.shape[0]):
        mask = np.abs(matrix[k, load_buses]) >= CRITICAL_PTDF
        critical.append(load_buses[mask])
    nl_sizes = np.array([len(c) for c in critical])
    return Ptdf(
        matrix=matrix,
        reference_bus=net.reference_bus,
        critical_sets=tuple(critical),
        nl_sizes=nl_sizes,
        eligible=nl_sizes >= MIN_CRITICAL_SET,
    )


def flows_from_ptdf(ptdf: Ptdf, injections: np.ndarray) -> np.ndarray:
    """Branch flows for a balanced injection vector via the PTDF identity."""
    return ptdf.matrix @ np.asarray(injections, dtype=float)


def nodal_imbalance(net: Network, injections: np.ndarray, flows: np.ndarray) -> float:
    """Max-norm of injection minus branch-flow divergence (conservation check)."""
    div = np.zeros(net.n_bus)
    for k, br in enumerate(net.in_service_branches):
        div[br.from_bus] += flows[k]
        div[br.to_bus] -= flows[k]
    return float(np.max(np.abs(np.asarray(injections) - div)))
