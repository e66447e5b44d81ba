"""DC weighted-least-squares state estimation and the largest-normalized-
residual bad-data screen.

The measurement set pairs one flow measurement per in-service branch with one
net-injection measurement per bus.  Gross random errors trip the LNR test;
network-consistent tampering does not, which is exactly what the attack
builder exploits and the detector metrics are for.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy import linalg

from .cases import Network

LNR_THRESHOLD = 3.0

FLOW = "flow"
INJECTION = "injection"


class ObservabilityError(Exception):
    """Measurement set cannot determine all non-reference angles."""


@dataclass(frozen=True)
class MeasurementSet:
    """Parallel arrays: kind ('flow'|'injection'), index (in-service branch
    position or bus index), value (p.u.) and weight (1/sigma^2)."""

    kinds: tuple[str, ...]
    indices: np.ndarray
    values: np.ndarray
    weights: np.ndarray

    def __len__(self):
        return len(self.kinds)

    def with_values(self, values: np.ndarray) -> "MeasurementSet":
        return replace(self, values=np.asarray(values, dtype=float))


@dataclass(frozen=True)
class SeResult:
    angles: np.ndarray            # rad per bus, reference = 0
    residuals: np.ndarray         # z - H x_hat
    weighted_residual_norm: float # J = r' W r
    lnr_value: float
    lnr_index: int

    @property
    def bad_data(self) -> bool:
        return self.lnr_value > LNR_THRESHOLD


def build_measurements(
    net: Network,
    flows_pu: np.ndarray,
    loads_mw: np.ndarray,
    gen_mw: np.ndarray,
    noise_sigma: dict | None = None,
    seed=None,
) -> MeasurementSet:
    """One flow measurement per in-service branch plus one net-injection
    measurement per bus (generation minus load, p.u.).

    ``noise_sigma`` maps 'flow'/'injection' to a Gaussian sigma in p.u.;
    zero or missing means noiseless.  Same seed, same set.
    """
    flows_pu = np.asarray(flows_pu, dtype=float)
    branches = net.in_service_branches
    if flows_pu.shape != (len(branches),):
        raise ValueError(
            f"expected {len(branches)} branch flows, got {flows_pu.shape}"
        )
    loads_mw = np.asarray(loads_mw, dtype=float)
    gen_mw = np.asarray(gen_mw, dtype=float)
    inj_pu = (gen_mw - loads_mw) / net.base_mva

    sigma = {FLOW: 0.0, INJECTION: 0.0}
    if noise_sigma:
        sigma.update(noise_sigma)
    rng = np.random.default_rng(seed)

    kinds: list[str] = []
    indices: list[int] = []
    values: list[float] = []
    weights: list[float] = []
    for k in range(len(branches)):
        kinds.append(FLOW)
        indices.append(k)
        values.append(flows_pu[k])
        weights.append(_weight(sigma[FLOW]))
    for n in range(net.n_bus):
        kinds.append(INJECTION)
        indices.append(n)
        values.append(inj_pu[n])
        weights.append(_weight(sigma[INJECTION]))

    values = np.array(values)
    noise_scale = np.array(
        [sigma[k] for k in kinds]
    )
    if np.any(noise_scale > 0):
        values = values + rng.standard_normal(len(values)) * noise_scale

    return MeasurementSet(
        kinds=tuple(kinds),
        indices=np.array(indices),
        values=values,
        weights=np.array(weights),
    )


def _weight(sigma: float) -> float:
    return 1.0 / sigma**2 if sigma > 0 else 1.0


def measurement_matrix(meas: MeasurementSet, net: Network) -> np.ndarray:
    """Dense H over all bus angles (the reference column is dropped when
    estimating)."""
    branches = net.in_service_branches
    h = np.zeros((len(meas), net.n_bus))
    for i, (kind, idx) in enumerate(zip(meas.kinds, meas.indices)):
        if kind == FLOW:
            br = branches[idx]
            w = 1.0 / br.reactance
            h[i, br.from_bus] += w
            h[i, br.to_bus] -= w
        elif kind == INJECTION:
            for br in branches:
                w = 1.0 / br.reactance
                if br.from_bus == idx:
                    h[i, br.from_bus] += w
                    h[i, br.to_bus] -= w
                elif br.to_bus == idx:
                    h[i, br.to_bus] += w
                    h[i, br.from_bus] -= w
        else:
            raise ValueError(f"unknown measurement kind {kind!r}")
    return h


def wls_estimate(meas: MeasurementSet, net: Network) -> SeResult:
    """Weighted least squares with theta_ref = 0; residual covariance feeds
    the largest-normalized-residual statistic."""
    h_full = measurement_matrix(meas, net)
    keep = [i for i in range(net.n_bus) if i != net.reference_bus]
    h = h_full[:, keep]
    w = meas.weights
    z = meas.values

    g = (h * w[:, None]).T @ h
    try:
        cho = linalg.cho_factor(g)
    except linalg.LinAlgError:
        raise ObservabilityError(
            f"measurement set rank {np.linalg.matrix_rank(h)} < {len(keep)}"
        )
    x = linalg.cho_solve(cho, (h * w[:, None]).T @ z)

    angles = np.zeros(net.n_bus)
    angles[keep] = x
    residuals = z - h @ x
    j_value = float(residuals @ (w * residuals))

    # Residual covariance: Omega = W^-1 - H G^-1 H'.
    hg = linalg.cho_solve(cho, h.T)       # G^-1 H'
    omega = 1.0 / w - np.einsum("ij,ji->i", h, hg)
    omega = np.maximum(omega, 1e-12)
    normalized = np.abs(residuals) / np.sqrt(omega)
    lnr_index = int(np.argmax(normalized))
    return SeResult(
        angles=angles,
        residuals=residuals,
        weighted_residual_norm=j_value,
        lnr_value=float(normalized[lnr_index]),
        lnr_index=lnr_index,
    )


def estimated_flows(net: Network, angles: np.ndarray) -> np.ndarray:
    """Branch flows implied by estimated angles."""
    branches = net.in_service_branches
    out = np.empty(len(branches))
    for k, br in enumerate(branches):
        out[k] = (angles[br.from_bus] - angles[br.to_bus]) / br.reactance
    return out
