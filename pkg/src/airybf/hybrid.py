"""Hybrid analog/digital realization of target wavefronts.

The analog stage is a constant-modulus phase-shifter network (every entry
has magnitude 1/sqrt(N)); the digital stage is a low-dimensional precoder.
Single codewords are approximated by orthogonal matching pursuit over a
steered-vector dictionary; multi-column targets by alternating
minimization with an SVD digital update and per-entry phase projection.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NumericalError
from .scene import ArrayGeometry
from .wavefront import steering_phase

ZF_CONDITION_LIMIT = 1e6


@dataclass(frozen=True)
class HybridBeamformer:
    """Analog network F_A (N x N_RF, constant modulus) + digital precoder F_D."""

    F_A: np.ndarray
    F_D: np.ndarray
    power: float

    def __post_init__(self):
        n = self.F_A.shape[0]
        if not np.allclose(np.abs(self.F_A), 1.0 / np.sqrt(n), rtol=0, atol=1e-12):
            raise ConfigError("analog beamformer violates the constant-modulus constraint")
        if self.F_A.shape[1] != self.F_D.shape[0]:
            raise ConfigError("F_A / F_D dimension mismatch")

    @property
    def effective(self) -> np.ndarray:
        return self.F_A @ self.F_D


@dataclass(frozen=True)
class DftDictionary:
    """Steered-vector dictionary with sin(theta) uniform over [-1, 1)."""

    D: np.ndarray
    sines: np.ndarray

    @property
    def size(self) -> int:
        return self.D.shape[1]


def dft_dictionary(geometry: ArrayGeometry, wavelength: float, oversampling: int = 2) -> DftDictionary:
    n = geometry.num_elements
    g = oversampling * n
    sines = -1.0 + 2.0 * np.arange(g) / g
    thetas = np.arcsin(sines)
    cols = np.empty((n, g), dtype=complex)
    for j, th in enumerate(thetas):
        cols[:, j] = np.exp(1j * steering_phase(geometry.indices, geometry.spacing, wavelength, th))
    return DftDictionary(D=cols / np.sqrt(n), sines=sines)


def phase_project(M: np.ndarray) -> np.ndarray:
    """Entrywise projection onto the constant-modulus set, magnitude 1/sqrt(N).

    Zero entries map to phase 0 (np.angle(0) == 0), a deterministic
    tie-break among the equally optimal choices.
    """
    n = M.shape[0]
    return np.exp(1j * np.angle(M)) / np.sqrt(n)


@dataclass(frozen=True)
class OmpResult:
    F_A: np.ndarray
    f_D: np.ndarray
    indices: tuple[int, ...]
    residual_norms: tuple[float, ...]
    regularized: bool


def _regularized_ls(basis: np.ndarray, target: np.ndarray) -> tuple[np.ndarray, bool]:
    gram = basis.conj().T @ basis
    rhs = basis.conj().T @ target
    regularized = False
    if np.linalg.cond(gram) > 1e12:
        gram = gram + (1e-12 * np.trace(gram).real) * np.eye(gram.shape[0])
        regularized = True
    return np.linalg.solve(gram, rhs), regularized


def omp_codeword(w_target: np.ndarray, dictionary: DftDictionary, n_rf: int,
                 power: float = 1.0) -> OmpResult:
    """Greedy sparse approximation of a codeword on the hybrid architecture.

    Iteratively appends the dictionary column most correlated with the
    residual, refits the digital coefficients by least squares, and finally
    rescales so ||F_A f_D||^2 equals the power budget. An index already
    selected is skipped in favor of the next-best column, so the N_RF atoms
    are always distinct.
    """
    w_target = np.asarray(w_target, dtype=complex)
    if n_rf < 1:
        raise ConfigError("n_rf must be >= 1")
    if dictionary.size < n_rf:
        raise ConfigError("dictionary smaller than the number of RF chains")
    residual = w_target.copy()
    chosen: list[int] = []
    norms: list[float] = []
    regularized = False
    f_d = np.zeros(0, dtype=complex)
    for _ in range(n_rf):
        corr = np.abs(dictionary.D.conj().T @ residual)
        corr[chosen] = -1.0
        chosen.append(int(np.argmax(corr)))
        basis = dictionary.D[:, chosen]
        f_d, reg = _regularized_ls(basis, w_target)
        regularized = regularized or reg
        residual = w_target - basis @ f_d
        norms.append(float(np.linalg.norm(residual)))
    f_a = dictionary.D[:, chosen]
    scale = np.linalg.norm(f_a @ f_d)
    if scale == 0.0:
        raise NumericalError("OMP produced a zero beam for the requested target")
    f_d = f_d * (np.sqrt(power) / scale)
    return OmpResult(F_A=f_a, f_D=f_d, indices=tuple(chosen),
                     residual_norms=tuple(norms), regularized=regularized)


@dataclass(frozen=True)
class AltminResult:
    F_A: np.ndarray
    objective_trace: np.ndarray


def altmin_analog(F_T: np.ndarray, n_rf: int, iters: int = 50, seed: int = 0) -> AltminResult:
    """Constant-modulus approximation of a multi-column target.

    Alternates an SVD-based semi-unitary digital update with phase
    projection of the unconstrained analog solution, for a fixed iteration
    count from a seeded random phase start.

    The analog phases are invariant to the target's global scale (scaling
    only stretches the SVD's singular values), while the semi-unitary
    digital factor pins ||F_A F_D||_F^2 = N_RF. The working target is
    therefore rescaled to that norm so the reported objective trace
    measures shape mismatch rather than an arbitrary scale offset; divide
    the trace by N_RF for the relative error.
    """
    F_T = np.asarray(F_T, dtype=complex)
    n, k = F_T.shape
    if n_rf < k:
        raise ConfigError("n_rf must be >= number of target columns")
    if iters < 1:
        raise ConfigError("iters must be >= 1")
    norm = np.linalg.norm(F_T)
    if norm == 0.0:
        raise NumericalError("alternating minimization target is zero")
    work = F_T * (np.sqrt(n_rf) / norm)
    rng = np.random.default_rng(seed)
    f_a = np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, size=(n, n_rf))) / np.sqrt(n)
    trace = []
    for _ in range(iters):
        u, _, vh = np.linalg.svd(work.conj().T @ f_a, full_matrices=True)
        f_d = vh.conj().T[:, :k] @ u.conj().T
        f_a = phase_project(work @ f_d.conj().T)
        trace.append(float(np.linalg.norm(work - f_a @ f_d) ** 2))
    return AltminResult(F_A=f_a, objective_trace=np.array(trace))


def effective_channel(H, F_A: np.ndarray) -> np.ndarray:
    """Low-dimensional channel H^H F_A seen by the digital stage.

    Accepts the raw N x K matrix or a ChannelMatrix wrapper.
    """
    mat = np.asarray(getattr(H, "H", H))
    return mat.conj().T @ F_A


def power_allocate(F_A: np.ndarray, F_D_unscaled: np.ndarray, power: float,
                   policy: str = "equal") -> tuple[np.ndarray, np.ndarray]:
    """Scale digital columns so each user radiates an equal share of the budget.

    Returns (diagonal allocation, scaled F_D) with ||F_A f_D,k||^2 = P/K per
    user and hence ||F_A F_D||_F^2 = P.
    """
    if policy != "equal":
        raise ConfigError(f"unknown power allocation policy: {policy}")
    k = F_D_unscaled.shape[1]
    col_norms = np.linalg.norm(F_A @ F_D_unscaled, axis=0)
    if np.any(col_norms == 0.0):
        raise NumericalError("power allocation hit a zero effective column")
    lam = np.sqrt(power / k) / col_norms
    return lam, F_D_unscaled * lam[None, :]


def zf_digital(H_eq: np.ndarray, power: float, F_A: np.ndarray,
               ridge: bool = False) -> np.ndarray:
    """Zero-forcing digital precoder H_eq^H (H_eq H_eq^H)^-1 Lambda.

    Requires a well-conditioned effective channel (condition number <= 1e6)
    unless `ridge` enables the regularized pseudo-inverse fallback.
    """
    H_eq = np.asarray(H_eq, dtype=complex)
    k = H_eq.shape[0]
    cond = float(np.linalg.cond(H_eq))
    if cond > ZF_CONDITION_LIMIT and not ridge:
        raise NumericalError(
            f"effective channel too ill-conditioned for zero forcing (cond={cond:.3e})",
            condition_number=cond)
    gram = H_eq @ H_eq.conj().T
    if ridge:
        gram = gram + (1e-6 * np.linalg.norm(H_eq) ** 2 / k) * np.eye(k)
    directions = H_eq.conj().T @ np.linalg.inv(gram)
    _, f_d = power_allocate(F_A, directions, power)
    return f_d


def export_beamformer(bf: HybridBeamformer, path, scene_hash: str = "", grid_hash: str = ""):
    """Write analog phases and digital coefficients as structured text."""
    n, n_rf = bf.F_A.shape
    k = bf.F_D.shape[1]
    with open(path, "w") as fh:
        fh.write(f"airybf-beamformer v1 N={n} NRF={n_rf} K={k} P={bf.power:.9g}\n")
        fh.write(f"scene {scene_hash or '-'} grid {grid_hash or '-'}\n")
        fh.write("analog_phases_rad\n")
        for row in np.angle(bf.F_A):
            fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")
        fh.write("digital\n")
        for row in bf.F_D:
            fh.write(" ".join(f"{v.real:.17g} {v.imag:.17g}" for v in row) + "\n")
