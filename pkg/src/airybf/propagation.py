"""Plane-by-plane field propagation through a masked medium.

The marching engine advances a transverse field line in downrange steps.
Each step applies the free-space transfer spectrum (angular spectrum method)
followed by pointwise blockage masking at the arrival plane:

    E(x + dx, y) = B(x + dx, y) * IFFT( M(f_y) * FFT(E(x, y)) )

with M(f_y) = exp(-j*kappa*dx*sqrt(1 - (lambda*f_y)^2)) on the propagating
band |lambda*f_y| <= 1 and zero on the evanescent band. `rs_step_direct`
performs the same single step by direct spatial quadrature of the
line-source diffraction kernel and serves as the engine's independent
oracle.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.fft import fft, ifft
from scipy.special import hankel2

from .errors import ConfigError
from .scene import PropagationGrid, Scene, validate_pairing

DB_FLOOR = -200.0


@dataclass(frozen=True)
class FieldPlane:
    """Complex field samples along the (padded) transverse grid at depth x."""

    x: float
    samples: np.ndarray
    grid: PropagationGrid

    def __post_init__(self):
        if self.samples.shape != (self.grid.size,):
            raise ConfigError("field samples do not match grid size")

    def energy(self) -> float:
        """Total field energy sum |E|^2 * dy over the padded line."""
        return float(np.sum(np.abs(self.samples) ** 2) * self.grid.dy)

    def propagating_energy(self, wavelength: float) -> float:
        """Energy restricted to the propagating spectral band."""
        spec = fft(self.samples)
        band = np.abs(wavelength * self.grid.fy) <= 1.0
        return float(np.sum(np.abs(spec[band]) ** 2) * self.grid.dy / self.grid.size)


@dataclass(frozen=True)
class TransferSpectrum:
    """Spectral multiplier of one free-space step of length `step`."""

    multiplier: np.ndarray
    fy: np.ndarray
    step: float


def build_kernel(grid: PropagationGrid, wavelength: float, step: float | None = None) -> TransferSpectrum:
    if step is None:
        step = grid.dx
    if step <= 0:
        raise ConfigError("propagation step must be > 0")
    if grid.dy > wavelength / 2.0:
        raise ConfigError("grid.dy_m: exceeds lambda/2 (propagating-spectrum Nyquist)")
    fy = grid.fy
    kappa = 2.0 * np.pi / wavelength
    arg = 1.0 - (wavelength * fy) ** 2
    mult = np.zeros(grid.size, dtype=complex)
    prop = arg >= 0.0
    mult[prop] = np.exp(-1j * kappa * step * np.sqrt(arg[prop]))
    return TransferSpectrum(multiplier=mult, fy=fy, step=step)


def _mask_vector(scene: Scene, grid: PropagationGrid, x: float):
    """Blockage samples at plane x, or None when no obstacle spans it."""
    if not any(obs.spans_plane(x) for obs in scene.obstacles):
        return None
    return scene.mask(x, grid.y)


def asm_step(field: FieldPlane, kernel: TransferSpectrum, scene: Scene, x_next: float) -> FieldPlane:
    """One spectral propagation step followed by masking at the arrival plane."""
    if abs(field.x + kernel.step - x_next) > 1e-9 * max(1.0, abs(x_next)):
        raise ConfigError("kernel step does not reach x_next from field.x")
    if kernel.fy.shape != field.grid.fy.shape:
        raise ConfigError("kernel built for a different grid")
    out = ifft(kernel.multiplier * fft(field.samples))
    mask = _mask_vector(scene, field.grid, x_next)
    if mask is not None:
        out = out * mask
    return FieldPlane(x=x_next, samples=out, grid=field.grid)


def rs_step_direct(field: FieldPlane, scene: Scene, x_next: float) -> FieldPlane:
    """One step by midpoint quadrature of the line-source diffraction kernel.

    The kernel -(j*kappa*dx/2) * H1^(2)(kappa*r)/r, r = sqrt((y-y')^2 + dx^2),
    is the exact spatial-domain counterpart of the propagating transfer
    spectrum, so this route checks `asm_step` through an independent
    computation (direct summation instead of spectral transforms).
    """
    step = x_next - field.x
    if step <= 0:
        raise ConfigError("x_next must exceed field.x")
    grid = field.grid
    kappa = 2.0 * np.pi / scene.wavelength
    m = grid.size
    offsets = (np.arange(2 * m - 1) - (m - 1)) * grid.dy
    r = np.sqrt(offsets**2 + step**2)
    kern = -0.5j * kappa * step * hankel2(1, kappa * r) / r
    out = np.convolve(field.samples, kern)[m - 1 : 2 * m - 1] * grid.dy
    mask = _mask_vector(scene, grid, x_next)
    if mask is not None:
        out = out * mask
    return FieldPlane(x=x_next, samples=out, grid=grid)


def deposit(w: np.ndarray, scene: Scene, grid: PropagationGrid) -> FieldPlane:
    """Place the transmit vector on the aperture plane (nearest grid points)."""
    w = np.asarray(w, dtype=complex)
    n = scene.geometry.num_elements
    if w.shape != (n,):
        raise ConfigError(f"transmit vector must have length {n}")
    idx = _aperture_indices(scene, grid)
    samples = np.zeros(grid.size, dtype=complex)
    samples[idx] = w
    return FieldPlane(x=0.0, samples=samples, grid=grid)


def _aperture_indices(scene: Scene, grid: PropagationGrid) -> np.ndarray:
    idx = np.array([grid.nearest_y_index(y) for y in scene.geometry.positions_y])
    if len(np.unique(idx)) != len(idx):
        raise ConfigError("grid.dy_m: too coarse, antenna elements collide on the grid")
    return idx


def march(w, scene: Scene, grid: PropagationGrid, until_x: float):
    """Yield the field plane at x=0 and after every step up to until_x."""
    if until_x <= 0:
        raise ConfigError("until_x must be > 0")
    plane = deposit(w, scene, grid)
    yield plane
    kernel = build_kernel(grid, scene.wavelength)
    steps = int(np.floor(until_x / grid.dx + 1e-9))
    for p in range(1, steps + 1):
        plane = asm_step(plane, kernel, scene, grid.plane_x(p))
        yield plane
    remainder = until_x - steps * grid.dx
    if remainder > 1e-9 * grid.dx:
        tail = build_kernel(grid, scene.wavelength, step=remainder)
        plane = asm_step(plane, tail, scene, until_x)
        yield plane


def propagate(w, scene: Scene, grid: PropagationGrid, until_x: float) -> FieldPlane:
    """Propagate a transmit vector to depth until_x and return the final plane."""
    plane = None
    for plane in march(w, scene, grid, until_x):
        pass
    return plane


@dataclass(frozen=True)
class ChannelMatrix:
    """Equivalent channel H (N x K): E(x_k, y_k) = h_k^H w for every w."""

    H: np.ndarray
    scene_hash: str
    grid_hash: str

    @property
    def num_elements(self) -> int:
        return self.H.shape[0]

    @property
    def num_users(self) -> int:
        return self.H.shape[1]

    @property
    def amplitudes(self) -> np.ndarray:
        return np.abs(self.H)

    @property
    def phases(self) -> np.ndarray:
        return np.angle(self.H)

    def column(self, k: int) -> np.ndarray:
        return self.H[:, k]


def _user_plane_indices(scene: Scene, grid: PropagationGrid):
    planes = [grid.nearest_plane(xk) for xk, _ in scene.users]
    y_idx = [grid.nearest_y_index(yk) for _, yk in scene.users]
    return planes, y_idx


def channel_matrix(scene: Scene, grid: PropagationGrid, method: str = "auto") -> ChannelMatrix:
    """Simulate the equivalent channel for every (element, user) pair.

    forward: one propagation per antenna element, reading every user plane
    as it is crossed. adjoint: one reverse-ordered masked propagation per
    user applying the conjugate-transposed step operators. The two agree to
    floating-point roundoff; `auto` picks whichever needs fewer runs.
    """
    validate_pairing(scene, grid)
    if method == "auto":
        method = "adjoint" if scene.num_users <= scene.geometry.num_elements else "forward"
    if method == "forward":
        H = _channel_forward(scene, grid)
    elif method == "adjoint":
        H = _channel_adjoint(scene, grid)
    else:
        raise ConfigError(f"unknown channel method: {method}")
    return ChannelMatrix(H=H, scene_hash=scene.hash(), grid_hash=grid.hash())


def _channel_forward(scene: Scene, grid: PropagationGrid) -> np.ndarray:
    n = scene.geometry.num_elements
    k_users = scene.num_users
    planes, y_idx = _user_plane_indices(scene, grid)
    by_plane: dict[int, list[int]] = {}
    for k, p in enumerate(planes):
        by_plane.setdefault(p, []).append(k)
    max_plane = max(planes) if planes else 0
    kernel = build_kernel(grid, scene.wavelength)
    H = np.zeros((n, k_users), dtype=complex)
    basis = np.eye(n, dtype=complex)
    for i in range(n):
        plane = deposit(basis[i], scene, grid)
        for k in by_plane.get(0, []):
            H[i, k] = np.conj(plane.samples[y_idx[k]])
        for p in range(1, max_plane + 1):
            plane = asm_step(plane, kernel, scene, grid.plane_x(p))
            for k in by_plane.get(p, []):
                H[i, k] = np.conj(plane.samples[y_idx[k]])
    return H


def adjoint_to_aperture(v: np.ndarray, scene: Scene, grid: PropagationGrid, plane_index: int) -> np.ndarray:
    """Apply the conjugate transpose of the aperture->plane map to a plane vector."""
    kernel = build_kernel(grid, scene.wavelength)
    conj_mult = np.conj(kernel.multiplier)
    t = np.asarray(v, dtype=complex).copy()
    for p in range(plane_index, 0, -1):
        mask = _mask_vector(scene, grid, grid.plane_x(p))
        if mask is not None:
            t = t * mask
        t = ifft(conj_mult * fft(t))
    return t[_aperture_indices(scene, grid)]


def _channel_adjoint(scene: Scene, grid: PropagationGrid) -> np.ndarray:
    n = scene.geometry.num_elements
    planes, y_idx = _user_plane_indices(scene, grid)
    H = np.zeros((n, scene.num_users), dtype=complex)
    for k, (p, j) in enumerate(zip(planes, y_idx)):
        delta = np.zeros(grid.size, dtype=complex)
        delta[j] = 1.0
        H[:, k] = adjoint_to_aperture(delta, scene, grid, p)
    return H


@dataclass(frozen=True)
class GainMap:
    """Received power |E|^2 over the cropped (x, y) region, linear and dB."""

    x: np.ndarray
    y: np.ndarray
    power: np.ndarray  # shape (len(x), len(y))
    power_db: np.ndarray

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x_m", "y_m", "power_linear", "power_db"])
            for i, xv in enumerate(self.x):
                for j, yv in enumerate(self.y):
                    writer.writerow([f"{xv:.9g}", f"{yv:.9g}",
                                     f"{self.power[i, j]:.10e}", f"{self.power_db[i, j]:.6f}"])


def field_map(w, scene: Scene, grid: PropagationGrid, x_max: float) -> GainMap:
    """Render |E|^2 over every plane up to x_max, pad region cropped."""
    if x_max <= 0:
        raise ConfigError("x_max must be > 0")
    xs, rows = [], []
    core = grid.core
    for plane in march(w, scene, grid, x_max):
        xs.append(plane.x)
        rows.append(np.abs(plane.samples[core]) ** 2)
    power = np.array(rows)
    peak = power.max()
    with np.errstate(divide="ignore"):
        db = 10.0 * np.log10(power / peak) if peak > 0 else np.full_like(power, -np.inf)
    db = np.maximum(db, DB_FLOOR)
    return GainMap(x=np.array(xs), y=grid.y[core].copy(), power=power, power_db=db)


def save_channel(channel: ChannelMatrix, path):
    """Write a channel matrix as structured text (re/im interleaved)."""
    n, k = channel.H.shape
    with open(path, "w") as fh:
        fh.write("airybf-channel v1\n")
        fh.write(f"N {n} K {k}\n")
        fh.write(f"scene {channel.scene_hash} grid {channel.grid_hash}\n")
        for i in range(n):
            for j in range(k):
                v = channel.H[i, j]
                fh.write(f"{v.real:.17g} {v.imag:.17g}\n")


def load_channel(path) -> ChannelMatrix:
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "airybf-channel v1":
            raise ConfigError(f"unrecognized channel file header: {header!r}")
        parts = fh.readline().split()
        n, k = int(parts[1]), int(parts[3])
        prov = fh.readline().split()
        scene_hash, grid_hash = prov[1], prov[3]
        H = np.zeros((n, k), dtype=complex)
        for i in range(n):
            for j in range(k):
                re, im = fh.readline().split()
                H[i, j] = float(re) + 1j * float(im)
    return ChannelMatrix(H=H, scene_hash=scene_hash, grid_hash=grid_hash)
