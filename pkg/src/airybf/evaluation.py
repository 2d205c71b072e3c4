"""Rates, bounds, and end-to-end baseline pipelines.

Per-user rates follow the SINR form log2(1 + S_k / (I_k + sigma^2)) with
S_k = |h_k^H F_A f_D,k|^2 and I_k the summed cross-terms. The received gain
of any power-P codeword is bounded by P*||h_k||^2 (Cauchy-Schwarz), with
equality at the matched (MRT) beam.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericalError
from .hybrid import altmin_analog, effective_channel, zf_digital
from .scene import ArrayGeometry
from .training import (BeamSelection, TrainingConfig, exhaustive_search,
                       hierarchical_search)
from .wavefront import (AiryParams, Codeword, airy_codeword, build_codebook,
                        focused_codeword, steered_codeword)


@dataclass(frozen=True)
class RateReport:
    """Per-user rate decomposition for one scheme on one scenario."""

    scheme: str
    power: float
    sigma2: float
    rates: np.ndarray
    signal: np.ndarray
    interference: np.ndarray
    scenario_hash: str = ""

    @property
    def sum_rate(self) -> float:
        return float(np.sum(self.rates))

    @property
    def num_users(self) -> int:
        return len(self.rates)

    def rows(self):
        """CSV rows: one per user plus a sum row."""
        out = []
        for k in range(self.num_users):
            out.append([self.scheme, self.num_users, f"{self.power:.9g}", f"{self.sigma2:.9g}",
                        str(k), f"{self.rates[k]:.9g}", f"{self.signal[k]:.9g}",
                        f"{self.interference[k]:.9g}"])
        out.append([self.scheme, self.num_users, f"{self.power:.9g}", f"{self.sigma2:.9g}",
                    "sum", f"{self.sum_rate:.9g}", "", ""])
        return out


RATE_CSV_HEADER = ["scheme", "K", "P", "sigma2", "user", "rate_bps_hz", "signal_w", "interference_w"]


def _as_matrix(H) -> np.ndarray:
    return np.asarray(getattr(H, "H", H))


def _signal_interference(H, W: np.ndarray):
    mat = _as_matrix(H)
    cross = np.abs(mat.conj().T @ W) ** 2          # (K, K): |h_k^H w_j|^2
    signal = np.diag(cross).copy()
    interference = cross.sum(axis=1) - signal
    return signal, interference


def user_rate(k: int, H, F_A: np.ndarray, F_D: np.ndarray, sigma2: float) -> float:
    """Achievable rate of user k in bits/s/Hz."""
    if sigma2 <= 0:
        raise ConfigError("sigma2 must be > 0")
    signal, interference = _signal_interference(H, F_A @ F_D)
    return float(np.log2(1.0 + signal[k] / (interference[k] + sigma2)))


def sum_rate(H, F_A: np.ndarray, F_D: np.ndarray, sigma2: float,
             scheme: str = "", power: float | None = None,
             scenario_hash: str = "") -> RateReport:
    if sigma2 <= 0:
        raise ConfigError("sigma2 must be > 0")
    W = F_A @ F_D
    signal, interference = _signal_interference(H, W)
    rates = np.log2(1.0 + signal / (interference + sigma2))
    if power is None:
        power = float(np.linalg.norm(W) ** 2)
    return RateReport(scheme=scheme, power=power, sigma2=sigma2, rates=rates,
                      signal=signal, interference=interference, scenario_hash=scenario_hash)


def gain_bound(h: np.ndarray, power: float) -> float:
    """Cauchy-Schwarz cap on the received gain of any power-P beam: P*||h||^2."""
    return float(power * np.linalg.norm(h) ** 2)


def mrt_codeword(h: np.ndarray, power: float) -> Codeword:
    """Matched beam w = sqrt(P) h/||h||; attains the gain bound exactly."""
    h = np.asarray(h, dtype=complex)
    norm = np.linalg.norm(h)
    if norm == 0.0:
        raise NumericalError("MRT undefined for a zero channel")
    return Codeword(w=np.sqrt(power) * h / norm, kind="mrt", params=None, power=power)


def _digital_zf_columns(H, power: float) -> np.ndarray:
    """Fully digital ZF directions with an equal per-user power split."""
    mat = _as_matrix(H)
    k = mat.shape[1]
    cond = float(np.linalg.cond(mat.conj().T))
    if cond > 1e8:
        raise NumericalError(f"channel matrix rank-deficient for digital ZF (cond={cond:.3e})",
                             condition_number=cond)
    raw = mat @ np.linalg.inv(mat.conj().T @ mat)
    cols = raw / np.linalg.norm(raw, axis=0)[None, :]
    return np.sqrt(power / k) * cols


def perfect_csi_digital(H, power: float, sigma2: float, scenario_hash: str = "") -> RateReport:
    """Fully digital zero-forcing upper bound with equal power allocation."""
    mat = _as_matrix(H)
    W = _digital_zf_columns(H, power)
    n = mat.shape[0]
    return sum_rate(H, np.eye(n, dtype=complex), W, sigma2,
                    scheme="perfect-csi-digital", power=power, scenario_hash=scenario_hash)


def perfect_csi_hybrid(H, n_rf: int, power: float, sigma2: float, seed: int = 0,
                       iters: int = 50, scenario_hash: str = "") -> RateReport:
    """Hybrid upper bound: alternating minimization toward the digital ZF target."""
    target = _digital_zf_columns(H, power)
    result = altmin_analog(target, n_rf, iters=iters, seed=seed)
    h_eq = effective_channel(H, result.F_A)
    f_d = zf_digital(h_eq, power, result.F_A)
    return sum_rate(H, result.F_A, f_d, sigma2, scheme="perfect-csi-hybrid",
                    power=power, scenario_hash=scenario_hash)


def target_matrix(selection: BeamSelection, kind: str, geometry: ArrayGeometry,
                  wavelength: float, power: float) -> np.ndarray:
    """Assemble the fully digital target from trained selections.

    Columns are the selected codewords rescaled so each carries P/K, keeping
    the approximation stage user-symmetric.
    """
    k = len(selection.users)
    cols = []
    for u in selection.users:
        if kind == "airy":
            cw = airy_codeword(u.params, geometry, wavelength, power)
        elif kind == "focused":
            theta, r = u.params
            cw = focused_codeword(theta, r, geometry, wavelength, power)
        elif kind == "steered":
            cw = steered_codeword(u.params, geometry, wavelength, power)
        else:
            raise ConfigError(f"unknown pipeline kind: {kind}")
        cols.append(cw.w / np.sqrt(k))
    return np.column_stack(cols)


def baseline_pipeline(kind: str, H, specs: dict, n_rf: int, power: float, sigma2: float,
                      config: TrainingConfig, geometry: ArrayGeometry, wavelength: float,
                      altmin_iters: int = 50, scenario_hash: str = "") -> RateReport:
    """End-to-end codebook pipeline: train, approximate, zero-force, rate.

    kind selects the wavefront family: `airy` trains hierarchically over the
    four-parameter codebook; `focused`/`steered` run exhaustive sweeps over
    the polar/steered codebooks.
    """
    mat = _as_matrix(H)
    users = range(mat.shape[1])
    if kind == "airy":
        selection = hierarchical_search(users, specs["polar"], specs["airy"], H, config,
                                        geometry, wavelength, power)
    elif kind == "focused":
        book = build_codebook(specs["polar"], geometry, wavelength, power)
        selection = exhaustive_search(users, book, H, config)
    elif kind == "steered":
        book = build_codebook(specs["dft"], geometry, wavelength, power)
        selection = exhaustive_search(users, book, H, config)
    else:
        raise ConfigError(f"unknown pipeline kind: {kind}")
    f_t = target_matrix(selection, kind, geometry, wavelength, power)
    result = altmin_analog(f_t, n_rf, iters=altmin_iters, seed=config.seed)
    h_eq = effective_channel(H, result.F_A)
    f_d = zf_digital(h_eq, power, result.F_A)
    return sum_rate(H, result.F_A, f_d, sigma2, scheme=f"{kind}-pipeline",
                    power=power, scenario_hash=scenario_hash)
