"""Downlink beam training: codeword power measurement, exhaustive search,
and the three-stage hierarchical search with overhead accounting.

Stage 1 sweeps the focused (polar) codebook once for all users to lock the
focal point; stage 2 scans the bend parameter per user with the decay fixed
at zero; stage 3 scans the decay. The measurement count is
N_theta*N_r + K*(N_s + N_a) instead of the product over all four sets.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError
from .scene import ArrayGeometry
from .wavefront import (AiryParams, Codebook, CodebookSpec, airy_codeword,
                        build_codebook, focused_codeword, steered_codeword)
from .hybrid import DftDictionary, dft_dictionary, omp_codeword


@dataclass(frozen=True)
class TrainingConfig:
    """How training sweeps are run and how codewords reach the array."""

    mode: str = "hierarchical"        # hierarchical | exhaustive
    realization: str = "ideal"        # ideal (fully digital) | omp (hybrid)
    n_rf: int = 4                     # RF chains for the omp realization
    dictionary_oversampling: int = 2
    noise_power: float = 0.0          # measurement-noise variance, 0 disables
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("hierarchical", "exhaustive"):
            raise ConfigError(f"training mode must be hierarchical/exhaustive, got {self.mode!r}")
        if self.realization not in ("ideal", "omp"):
            raise ConfigError(f"realization must be ideal/omp, got {self.realization!r}")
        if self.noise_power < 0:
            raise ConfigError("noise_power must be >= 0")


@dataclass(frozen=True)
class UserSelection:
    """Chosen parameters and per-stage measurement record for one user."""

    user: int
    params: object                     # AiryParams / (theta, r) / theta
    stage_indices: dict
    stage_powers: dict


@dataclass(frozen=True)
class BeamSelection:
    mode: str
    users: tuple[UserSelection, ...]
    total_measurements: int

    def params(self, user: int):
        for u in self.users:
            if u.user == user:
                return u.params
        raise ConfigError(f"no selection recorded for user {user}")


def measure_power(user: int, realization, H, config: TrainingConfig, rng=None) -> float:
    """Received power |h_k^H F_A f_D|^2 of one realized codeword.

    With measurement noise enabled the returned comparison metric is the
    power plus the real part of a complex Gaussian sample.
    """
    f_a, f_d = realization
    h = np.asarray(getattr(H, "H", H))[:, user]
    w_eff = f_a @ f_d if f_d is not None else f_a
    p = float(np.abs(np.vdot(h, w_eff)) ** 2)
    if config.noise_power > 0:
        if rng is None:
            rng = np.random.default_rng(config.seed)
        p += float(rng.normal(0.0, np.sqrt(config.noise_power / 2.0)))
    return p


def _realize_columns(vectors: np.ndarray, config: TrainingConfig, dictionary) -> np.ndarray:
    """Effective on-air vectors for a block of codewords under the config."""
    if config.realization == "ideal":
        return vectors
    out = np.empty_like(vectors)
    for j in range(vectors.shape[1]):
        res = omp_codeword(vectors[:, j], dictionary, config.n_rf,
                           power=float(np.linalg.norm(vectors[:, j]) ** 2))
        out[:, j] = res.F_A @ res.f_D
    return out


def _need_dictionary(config: TrainingConfig, geometry: ArrayGeometry, wavelength: float):
    if config.realization != "omp":
        return None
    return dft_dictionary(geometry, wavelength, config.dictionary_oversampling)


def sweep_powers(codebook: Codebook, H, config: TrainingConfig, rng=None) -> np.ndarray:
    """Measured power of every codeword at every user, shape (K, len(codebook)).

    The fully digital airy sweep factorizes into (focal phase) x (envelope)
    products, turning the full parameter grid into two small matrix
    products per user; other paths materialize codewords in blocks.
    """
    mat = np.asarray(getattr(H, "H", H))
    k_users = mat.shape[1]
    if config.realization == "ideal" and codebook.kind == "airy":
        powers = _airy_powers_factorized(codebook, mat)
    else:
        dictionary = _need_dictionary(config, codebook.geometry, codebook.wavelength)
        powers = np.empty((k_users, len(codebook)))
        block = 2048
        for start in range(0, len(codebook), block):
            cols = codebook.block(start, start + block)
            eff = _realize_columns(cols, config, dictionary)
            powers[:, start:start + cols.shape[1]] = np.abs(mat.conj().T @ eff) ** 2
    if config.noise_power > 0:
        if rng is None:
            rng = np.random.default_rng(config.seed)
        powers = powers + rng.normal(0.0, np.sqrt(config.noise_power / 2.0), size=powers.shape)
    return powers


def _airy_powers_factorized(codebook: Codebook, mat: np.ndarray) -> np.ndarray:
    spec = codebook.spec
    phases = codebook.phase_profiles()          # (Nt*Nr, N)
    envelopes = codebook.envelopes()            # (Ns*Na, N)
    env_norms = np.linalg.norm(envelopes, axis=1)
    k_users = mat.shape[1]
    n_phase, n_env = phases.shape[0], envelopes.shape[0]
    powers = np.empty((k_users, n_phase * n_env))
    for k in range(k_users):
        cross = (phases * mat[:, k].conj()[None, :]) @ envelopes.T   # (Nph, Nenv)
        p = codebook.power * (np.abs(cross) / env_norms[None, :]) ** 2
        powers[k] = p.reshape(-1)
    return powers


def exhaustive_search(users, codebook: Codebook, H, config: TrainingConfig) -> BeamSelection:
    """Argmax received power over the whole codebook, one shared sweep.

    All users measure every transmitted codeword, so the downlink overhead
    equals the codebook size regardless of the number of users. Ties break
    toward the lowest codeword index.
    """
    if len(codebook) == 0:
        raise ConfigError("exhaustive search over an empty codebook")
    rng = np.random.default_rng(config.seed) if config.noise_power > 0 else None
    powers = sweep_powers(codebook, H, config, rng)
    selections = []
    for k in users:
        best = int(np.argmax(powers[k]))
        selections.append(UserSelection(
            user=k, params=codebook.params(best),
            stage_indices={"exhaustive": best},
            stage_powers={"exhaustive": float(powers[k, best])}))
    return BeamSelection(mode="exhaustive", users=tuple(selections),
                         total_measurements=len(codebook))


def _stage_sweep(vectors: np.ndarray, h: np.ndarray, config: TrainingConfig,
                 dictionary, rng) -> np.ndarray:
    eff = _realize_columns(vectors, config, dictionary)
    p = np.abs(h.conj() @ eff) ** 2
    if config.noise_power > 0:
        p = p + rng.normal(0.0, np.sqrt(config.noise_power / 2.0), size=p.shape)
    return p


def hierarchical_search(users, polar_spec: CodebookSpec, airy_spec: CodebookSpec,
                        H, config: TrainingConfig, geometry: ArrayGeometry,
                        wavelength: float, power: float = 1.0) -> BeamSelection:
    """Three-stage search: focal point for all users, then bend and decay per user."""
    if not (np.array_equal(polar_spec.thetas, airy_spec.thetas)
            and np.array_equal(polar_spec.radii, airy_spec.radii)):
        raise ConfigError("polar and airy specs must share the angle and distance sets")
    mat = np.asarray(getattr(H, "H", H))
    rng = np.random.default_rng(config.seed) if config.noise_power > 0 else None
    dictionary = _need_dictionary(config, geometry, wavelength)

    polar_book = build_codebook(polar_spec, geometry, wavelength, power)
    stage1 = sweep_powers(polar_book, H, config, rng)

    selections = []
    for k in users:
        i1 = int(np.argmax(stage1[k]))
        theta_k, r_k = polar_book.params(i1)
        h = mat[:, k]

        svals = airy_spec.scalings
        vec2 = np.column_stack([
            airy_codeword(AiryParams(theta=theta_k, r=r_k, s=float(sv), a=0.0),
                          geometry, wavelength, power).w for sv in svals])
        p2 = _stage_sweep(vec2, h, config, dictionary, rng)
        i2 = int(np.argmax(p2))
        s_k = float(svals[i2])

        avals = airy_spec.decays
        vec3 = np.column_stack([
            airy_codeword(AiryParams(theta=theta_k, r=r_k, s=s_k, a=float(av)),
                          geometry, wavelength, power).w for av in avals])
        p3 = _stage_sweep(vec3, h, config, dictionary, rng)
        i3 = int(np.argmax(p3))
        a_k = float(avals[i3])

        selections.append(UserSelection(
            user=k,
            params=AiryParams(theta=theta_k, r=r_k, s=s_k, a=a_k),
            stage_indices={"focal": i1, "bend": i2, "decay": i3},
            stage_powers={"focal": float(stage1[k, i1]),
                          "bend": float(p2[i2]),
                          "decay": float(p3[i3])}))

    total = training_overhead("hierarchical", polar_spec, airy_spec, len(list(users)))
    return BeamSelection(mode="hierarchical", users=tuple(selections), total_measurements=total)


def training_overhead(mode: str, polar_spec: CodebookSpec, airy_spec: CodebookSpec,
                      num_users: int) -> int:
    """Downlink measurement count of a training mode."""
    n_theta = len(airy_spec.thetas)
    n_r = len(airy_spec.radii)
    if mode == "exhaustive":
        return n_theta * n_r * len(airy_spec.scalings) * len(airy_spec.decays)
    if mode == "hierarchical":
        return n_theta * n_r + num_users * (len(airy_spec.scalings) + len(airy_spec.decays))
    raise ConfigError(f"unknown training mode: {mode}")


def export_selection(selection: BeamSelection, path):
    """Write per-user stage indices, parameters and powers (dB) as text."""
    with open(path, "w") as fh:
        fh.write(f"airybf-selection v1 mode={selection.mode} "
                 f"measurements={selection.total_measurements}\n")
        for u in selection.users:
            fh.write(f"user {u.user}\n")
            if isinstance(u.params, AiryParams):
                fh.write(f"  params theta={u.params.theta:.9g} r={u.params.r:.9g} "
                         f"s={u.params.s:.9g} a={u.params.a:.9g}\n")
            else:
                fh.write(f"  params {u.params}\n")
            for stage, idx in u.stage_indices.items():
                p = u.stage_powers[stage]
                p_db = 10.0 * np.log10(p) if p > 0 else float("-inf")
                fh.write(f"  stage {stage} index={idx} power_db={p_db:.6f}\n")
