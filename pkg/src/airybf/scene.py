"""Scenario geometry: antenna array, rectangular obstacles, users, and the
discretized propagation region.

All types are immutable after construction and all operations are pure, so
scenes can be shared freely across worker processes.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import yaml

from .errors import ConfigError

SPEED_OF_LIGHT = 299792458.0  # m/s


@dataclass(frozen=True)
class ArrayGeometry:
    """Uniform linear array along the y-axis, centered at the origin.

    Element indices run over {-(N-1)/2, ..., (N-1)/2} in unit steps
    (half-integers when N is even); element n sits at (0, n*spacing).
    """

    num_elements: int
    spacing: float  # m

    def __post_init__(self):
        if self.num_elements < 1:
            raise ConfigError("num_elements: must be >= 1")
        if self.spacing <= 0:
            raise ConfigError("spacing_m: must be > 0")

    @cached_property
    def indices(self) -> np.ndarray:
        n = self.num_elements
        return np.arange(n) - (n - 1) / 2.0

    @cached_property
    def positions_y(self) -> np.ndarray:
        return self.indices * self.spacing

    @property
    def aperture(self) -> float:
        """Physical span of the array along y."""
        return (self.num_elements - 1) * self.spacing


@dataclass(frozen=True)
class Obstacle:
    """Axis-aligned rectangle, treated as a closed set (boundaries block)."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def validate(self, path: str = "obstacle"):
        if not (self.x_min < self.x_max):
            raise ConfigError(f"{path}.x_range: requires x_min < x_max")
        if not (self.y_min < self.y_max):
            raise ConfigError(f"{path}.y_range: requires y_min < y_max")
        if self.x_min <= 0:
            raise ConfigError(f"{path}.x_range: must lie strictly in front of the aperture (x_min > 0)")

    def contains(self, x: float, y: float) -> bool:
        return self.x_min <= x <= self.x_max and self.y_min <= y <= self.y_max

    def spans_plane(self, x: float) -> bool:
        return self.x_min <= x <= self.x_max


@dataclass(frozen=True)
class Scene:
    """Full physical scenario: array, obstacles, users, carrier wavelength."""

    geometry: ArrayGeometry
    obstacles: tuple[Obstacle, ...]
    users: tuple[tuple[float, float], ...]
    wavelength: float  # m

    def __post_init__(self):
        if self.wavelength <= 0:
            raise ConfigError("wavelength: must be > 0")
        for i, obs in enumerate(self.obstacles):
            obs.validate(f"obstacles[{i}]")
        for k, (xk, yk) in enumerate(self.users):
            if xk <= 0:
                raise ConfigError(f"users[{k}]: x must be > 0")
            for i, obs in enumerate(self.obstacles):
                if obs.contains(xk, yk):
                    raise ConfigError(f"users[{k}]: lies inside obstacles[{i}]")

    @property
    def wavenumber(self) -> float:
        return 2.0 * math.pi / self.wavelength

    @property
    def num_users(self) -> int:
        return len(self.users)

    def mask(self, x, y):
        """Spatial blockage indicator: 0 inside any obstacle (closed), else 1.

        Accepts scalars or arrays (broadcast); returns float 0.0/1.0.
        """
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        inside = np.zeros(np.broadcast(x, y).shape, dtype=bool)
        for obs in self.obstacles:
            inside |= (x >= obs.x_min) & (x <= obs.x_max) & (y >= obs.y_min) & (y <= obs.y_max)
        out = np.where(inside, 0.0, 1.0)
        return float(out) if out.ndim == 0 else out

    def los_blocked(self, element_index: float, user_index: int) -> bool:
        """True iff the open segment from element n to user k crosses an obstacle."""
        y_n = element_index * self.geometry.spacing
        xk, yk = self.users[user_index]
        return any(_segment_hits_rect(0.0, y_n, xk, yk, obs) for obs in self.obstacles)

    def blockage_ratio(self, user_index: int) -> float:
        """Fraction of array elements whose LoS segment to user k is blocked."""
        blocked = sum(self.los_blocked(n, user_index) for n in self.geometry.indices)
        return blocked / self.geometry.num_elements

    def hash(self) -> str:
        payload = {
            "n": self.geometry.num_elements,
            "d": repr(self.geometry.spacing),
            "lam": repr(self.wavelength),
            "obstacles": [[repr(o.x_min), repr(o.x_max), repr(o.y_min), repr(o.y_max)]
                          for o in self.obstacles],
            "users": [[repr(x), repr(y)] for x, y in self.users],
        }
        return _sha(payload)


def _segment_hits_rect(xa, ya, xb, yb, obs: Obstacle) -> bool:
    """Open segment (A,B) vs closed rectangle, by parametric slab clipping."""
    dx = xb - xa
    dy = yb - ya
    # x axis: dx > 0 always holds here (users have x > 0, elements sit at x = 0)
    t_lo = (obs.x_min - xa) / dx
    t_hi = (obs.x_max - xa) / dx
    if dy == 0.0:
        if not (obs.y_min <= ya <= obs.y_max):
            return False
    else:
        u0 = (obs.y_min - ya) / dy
        u1 = (obs.y_max - ya) / dy
        if u0 > u1:
            u0, u1 = u1, u0
        t_lo = max(t_lo, u0)
        t_hi = min(t_hi, u1)
    # nonempty overlap of [t_lo, t_hi] with the open interval (0, 1)
    return t_lo <= t_hi and t_hi > 0.0 and t_lo < 1.0


@dataclass(frozen=True)
class PropagationGrid:
    """Transverse sampling line and downrange step for the marching engine.

    The transverse grid carries a zero-pad region on both sides of the core
    extent [y_lo, y_hi] to suppress wrap-around of the spectral transform;
    outputs are cropped back to the core.
    """

    dy: float  # m, transverse sample spacing
    dx: float  # m, downrange plane step
    y_lo: float
    y_hi: float
    pad_factor: float = 2.0

    def __post_init__(self):
        if self.dy <= 0 or self.dx <= 0:
            raise ConfigError("grid: dy_m and dx_m must be > 0")
        if not (self.y_lo < self.y_hi):
            raise ConfigError("grid.y_extent_m: requires y_lo < y_hi")
        if self.pad_factor < 1.0:
            raise ConfigError("grid.pad_factor: must be >= 1")

    @cached_property
    def _layout(self):
        from scipy.fft import next_fast_len

        j_lo = math.floor(self.y_lo / self.dy)
        j_hi = math.ceil(self.y_hi / self.dy)
        n_core = j_hi - j_lo + 1
        n_total = next_fast_len(int(math.ceil(self.pad_factor * n_core)))
        left = (n_total - n_core) // 2
        j_start = j_lo - left
        return j_start, n_core, n_total, left

    @cached_property
    def y(self) -> np.ndarray:
        """Transverse coordinates of the full padded grid."""
        j_start, _, n_total, _ = self._layout
        return (j_start + np.arange(n_total)) * self.dy

    @property
    def size(self) -> int:
        return self._layout[2]

    @property
    def core(self) -> slice:
        j_start, n_core, _, left = self._layout
        return slice(left, left + n_core)

    @cached_property
    def fy(self) -> np.ndarray:
        """Spatial frequencies (cycles/m) matching the padded grid."""
        return np.fft.fftfreq(self.size, self.dy)

    def nearest_y_index(self, y: float) -> int:
        j_start, _, n_total, _ = self._layout
        idx = int(round(y / self.dy)) - j_start
        if not (0 <= idx < n_total):
            raise ConfigError(f"coordinate y={y} outside grid extent")
        return idx

    def nearest_plane(self, x: float) -> int:
        return int(round(x / self.dx))

    def plane_x(self, index: int) -> float:
        return index * self.dx

    def hash(self) -> str:
        payload = {"dy": repr(self.dy), "dx": repr(self.dx),
                   "y_lo": repr(self.y_lo), "y_hi": repr(self.y_hi),
                   "pad": repr(self.pad_factor)}
        return _sha(payload)


def make_grid(scene: Scene, dy=None, dx=None, y_extent=None, pad_factor=2.0) -> PropagationGrid:
    """Build a grid with the standard defaults for a scene.

    dy defaults to lambda/4, dx to 5 mm, and the transverse extent to 1.5x
    the largest of the aperture half-span, user offsets, and obstacle edges.
    """
    if dy is None:
        dy = scene.wavelength / 4.0
    if dx is None:
        dx = 5e-3
    if y_extent is None:
        reach = scene.geometry.aperture / 2.0
        for _, yk in scene.users:
            reach = max(reach, abs(yk))
        for obs in scene.obstacles:
            reach = max(reach, abs(obs.y_min), abs(obs.y_max))
        y_extent = 1.5 * reach
    return PropagationGrid(dy=dy, dx=dx, y_lo=-y_extent, y_hi=y_extent, pad_factor=pad_factor)


def validate_pairing(scene: Scene, grid: PropagationGrid):
    """Check grid invariants that depend on the scene."""
    if grid.dy > scene.wavelength / 2.0:
        raise ConfigError("grid.dy_m: exceeds lambda/2 (propagating-spectrum Nyquist)")
    y = grid.y
    if scene.geometry.positions_y.min() < y[0] or scene.geometry.positions_y.max() > y[-1]:
        raise ConfigError("grid.y_extent_m: does not span the antenna array")
    core_y = y[grid.core]
    for k, (xk, yk) in enumerate(scene.users):
        if not (core_y[0] <= yk <= core_y[-1]):
            raise ConfigError(f"users[{k}]: outside grid extent")


@dataclass(frozen=True)
class Scenario:
    """A loaded scenario file: scene + grid + experiment parameters."""

    scene: Scene
    grid: PropagationGrid
    power: float = 1.0
    noise_power: float | None = None
    seed: int | None = None


def wavelength_from_ghz(frequency_ghz: float) -> float:
    return SPEED_OF_LIGHT / (frequency_ghz * 1e9)


def load_scenario(path) -> Scenario:
    """Parse and validate a scenario file (YAML or JSON key/value document)."""
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ConfigError(f"scenario file not found: {path}")
    except yaml.YAMLError as exc:
        raise ConfigError(f"scenario parse failure: {exc}")
    if not isinstance(raw, dict):
        raise ConfigError("scenario root: expected a mapping")
    return scenario_from_dict(raw)


def scenario_from_dict(raw: dict) -> Scenario:
    freq = _require_number(raw, "frequency_ghz")
    if freq <= 0:
        raise ConfigError("frequency_ghz: must be > 0")
    lam = wavelength_from_ghz(freq)

    n = raw.get("num_elements")
    if not isinstance(n, int) or isinstance(n, bool):
        raise ConfigError("num_elements: required integer")
    spacing = raw.get("spacing_m", lam / 2.0)
    _check_number(spacing, "spacing_m")
    geometry = ArrayGeometry(num_elements=n, spacing=float(spacing))

    obstacles = []
    for i, entry in enumerate(raw.get("obstacles", []) or []):
        if not isinstance(entry, dict) or "x" not in entry or "y" not in entry:
            raise ConfigError(f"obstacles[{i}]: expected mapping with 'x' and 'y' ranges")
        xr = _pair(entry["x"], f"obstacles[{i}].x_range")
        yr = _pair(entry["y"], f"obstacles[{i}].y_range")
        obs = Obstacle(x_min=xr[0], x_max=xr[1], y_min=yr[0], y_max=yr[1])
        obs.validate(f"obstacles[{i}]")
        obstacles.append(obs)

    users = []
    for k, entry in enumerate(raw.get("users", []) or []):
        users.append(tuple(_pair(entry, f"users[{k}]", ordered=False)))

    scene = Scene(geometry=geometry, obstacles=tuple(obstacles), users=tuple(users), wavelength=lam)

    gcfg = raw.get("grid", {}) or {}
    if not isinstance(gcfg, dict):
        raise ConfigError("grid: expected a mapping")
    grid = make_grid(
        scene,
        dy=_opt_number(gcfg, "dy_m"),
        dx=_opt_number(gcfg, "dx_m"),
        y_extent=_opt_number(gcfg, "y_extent_m"),
        pad_factor=gcfg.get("pad_factor", 2.0),
    )
    validate_pairing(scene, grid)

    power = raw.get("power", 1.0)
    _check_number(power, "power")
    if power <= 0:
        raise ConfigError("power: must be > 0")
    noise = raw.get("noise_power")
    if noise is not None:
        _check_number(noise, "noise_power")
        if noise <= 0:
            raise ConfigError("noise_power: must be > 0")
    seed = raw.get("seed")
    if seed is not None and (not isinstance(seed, int) or isinstance(seed, bool)):
        raise ConfigError("seed: must be an integer")

    return Scenario(scene=scene, grid=grid, power=float(power),
                    noise_power=None if noise is None else float(noise), seed=seed)


def _sha(payload) -> str:
    blob = json.dumps(payload, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _require_number(raw, key):
    if key not in raw:
        raise ConfigError(f"{key}: required")
    _check_number(raw[key], key)
    return float(raw[key])


def _check_number(value, path):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a number")


def _opt_number(cfg, key):
    if key not in cfg or cfg[key] is None:
        return None
    _check_number(cfg[key], f"grid.{key}")
    return float(cfg[key])


def _pair(value, path, ordered=True):
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ConfigError(f"{path}: expected [lo, hi] pair" if ordered else f"{path}: expected [x, y] pair")
    for v in value:
        _check_number(v, path)
    lo, hi = float(value[0]), float(value[1])
    if ordered and not (lo < hi):
        raise ConfigError(f"{path}: requires lo < hi")
    return lo, hi
