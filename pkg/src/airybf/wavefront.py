"""Airy-envelope wavefront synthesis and transmit codebooks.

Codewords combine a real amplitude envelope Ai(nd/s)*exp(a*nd/s) with the
near-field focusing phase (2*pi/lambda)*(-n*d*sin(theta) + (n*d*cos(theta))^2/(2r)),
normalized to the transmit power budget. Focused (uniform amplitude) and
steered (far-field) codewords share the same phase machinery.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import ConfigError, NumericalError
from .scene import ArrayGeometry

# Ai(0) = 3^(-2/3)/Gamma(2/3) and Ai'(0) = -3^(-1/3)/Gamma(1/3)
_AI0 = 0.35502805388781723926
_AIP0 = -0.25881940379280679841
_SERIES_EDGE = 6.0


def _ai_series_pair(x: float) -> tuple[float, float]:
    """Maclaurin value and derivative of Ai, accurate for |x| <= 6."""
    f_sum, g_sum = 1.0, x
    fp_sum, gp_sum = 0.0, 1.0
    c_k, d_k = 1.0, 1.0
    xp_f = 1.0  # x^(3k)
    for k in range(1, 60):
        c_k /= (3 * k) * (3 * k - 1)
        d_k /= (3 * k + 1) * (3 * k)
        xp_f *= x * x * x
        f_sum += c_k * xp_f
        g_sum += d_k * xp_f * x
        fp_sum += 3 * k * c_k * xp_f / x if x != 0.0 else 0.0
        gp_sum += (3 * k + 1) * d_k * xp_f
        if abs(c_k * xp_f) < 1e-18 and abs(d_k * xp_f * x) < 1e-18:
            break
    return _AI0 * f_sum + _AIP0 * g_sum, _AI0 * fp_sum + _AIP0 * gp_sum


def _ai_series_vec(x: np.ndarray) -> np.ndarray:
    f_term = np.ones_like(x)
    g_term = x.copy()
    f_sum = f_term.copy()
    g_sum = g_term.copy()
    x3 = x**3
    for k in range(1, 60):
        f_term = f_term * x3 / ((3 * k) * (3 * k - 1))
        g_term = g_term * x3 / ((3 * k + 1) * (3 * k))
        f_sum += f_term
        g_sum += g_term
    return _AI0 * f_sum + _AIP0 * g_sum


def _ai_asymptotic_pos(x: float) -> float:
    """Exponential asymptotic branch for x > 6."""
    zeta = (2.0 / 3.0) * x**1.5
    if zeta > 700.0:
        return 0.0
    total, term, prev = 1.0, 1.0, math.inf
    for k in range(1, 40):
        term *= -(6 * k - 5) * (6 * k - 3) * (6 * k - 1) / (216.0 * k * (2 * k - 1)) / zeta
        if abs(term) > prev:
            break
        total += term
        prev = abs(term)
    return math.exp(-zeta) * total / (2.0 * math.sqrt(math.pi) * x**0.25)


@lru_cache(maxsize=1)
def _march_seed() -> tuple[float, float]:
    return _ai_series_pair(-_SERIES_EDGE)


def _ai_taylor_march(x: float) -> float:
    """Recentered Taylor marching of y'' = x*y from -6 down to x < -6.

    The oscillatory large-|x| asymptotic saturates near 1e-9 absolute at the
    series edge, short of the accuracy target, so the negative branch
    advances the local Taylor solution in half-unit steps instead.
    """
    x0 = -_SERIES_EDGE
    y, yp = _march_seed()
    n_coef = 30
    while x0 - x > 1e-12:
        h = -min(0.5, x0 - x)
        a = np.empty(n_coef)
        a[0], a[1] = y, yp
        a[2] = x0 * a[0] / 2.0
        for n in range(1, n_coef - 2):
            a[n + 2] = (x0 * a[n] + a[n - 1]) / ((n + 2) * (n + 1))
        y = 0.0
        yp = 0.0
        for n in range(n_coef - 1, 0, -1):
            y = y * h + a[n]
            yp = yp * h + n * a[n]
        y = y * h + a[0]
        x0 += h
    return y


def airy_ai(x):
    """Airy function Ai(x), accurate to better than 1e-10 absolute on [-20, 10].

    Piecewise evaluation: Maclaurin series for |x| <= 6, the exponential
    asymptotic expansion for x > 6, and recentered Taylor marching for
    x < -6. Accepts scalars or arrays.
    """
    arr = np.asarray(x, dtype=float)
    scalar = arr.ndim == 0
    flat = np.atleast_1d(arr).astype(float)
    out = np.empty_like(flat)
    mid = np.abs(flat) <= _SERIES_EDGE
    if mid.any():
        out[mid] = _ai_series_vec(flat[mid])
    for i in np.nonzero(~mid)[0]:
        v = flat[i]
        out[i] = _ai_asymptotic_pos(v) if v > 0 else _ai_taylor_march(v)
    return float(out[0]) if scalar else out.reshape(arr.shape)


def airy_amplitude(n_index, spacing: float, s: float, a: float):
    """Raw envelope Ai(n*d/s) * exp(a*n*d/s); no normalization applied."""
    if s == 0:
        raise ConfigError("spatial scaling s must be nonzero")
    u = np.asarray(n_index, dtype=float) * spacing / s
    return airy_ai(u) * np.exp(a * u)


def focusing_phase(n_index, spacing: float, wavelength: float, r: float, theta: float):
    """Near-field focusing phase profile in radians, unreduced."""
    if r <= 0:
        raise ConfigError("focal distance r must be > 0")
    nd = np.asarray(n_index, dtype=float) * spacing
    return (2.0 * np.pi / wavelength) * (-nd * np.sin(theta) + (nd * np.cos(theta)) ** 2 / (2.0 * r))


def steering_phase(n_index, spacing: float, wavelength: float, theta: float):
    """Far-field linear phase profile (the r -> infinity focusing limit)."""
    nd = np.asarray(n_index, dtype=float) * spacing
    return (2.0 * np.pi / wavelength) * (-nd * np.sin(theta))


@dataclass(frozen=True)
class AiryParams:
    """Wavefront parameters: focal point (theta, r), bend (s), decay (a)."""

    theta: float  # rad
    r: float      # m
    s: float      # m, sign selects the bend direction
    a: float      # dimensionless, <= 0

    def __post_init__(self):
        if self.r <= 0:
            raise ConfigError("AiryParams.r: must be > 0")
        if self.s == 0:
            raise ConfigError("AiryParams.s: must be nonzero")
        if self.a > 0:
            raise ConfigError("AiryParams.a: must be <= 0")


@dataclass(frozen=True)
class Codeword:
    """A transmit vector tagged with its generating parameters."""

    w: np.ndarray
    kind: str  # airy | focused | steered | mrt | custom
    params: object
    power: float


def _normalize(v: np.ndarray, power: float) -> np.ndarray:
    norm = np.linalg.norm(v)
    if not np.isfinite(norm) or norm == 0.0:
        raise NumericalError("degenerate codeword: zero or non-finite envelope")
    return np.sqrt(power) * v / norm


def airy_codeword(params: AiryParams, geometry: ArrayGeometry, wavelength: float,
                  power: float = 1.0) -> Codeword:
    """Airy envelope with superimposed focusing phase, scaled to ||w||^2 = P."""
    idx = geometry.indices
    amp = airy_amplitude(idx, geometry.spacing, params.s, params.a)
    phase = focusing_phase(idx, geometry.spacing, wavelength, params.r, params.theta)
    w = _normalize(amp * np.exp(1j * phase), power)
    return Codeword(w=w, kind="airy", params=params, power=power)


def focused_codeword(theta: float, r: float, geometry: ArrayGeometry, wavelength: float,
                     power: float = 1.0) -> Codeword:
    """Uniform-amplitude codeword with the near-field focusing phase."""
    phase = focusing_phase(geometry.indices, geometry.spacing, wavelength, r, theta)
    w = _normalize(np.exp(1j * phase), power)
    return Codeword(w=w, kind="focused", params=(theta, r), power=power)


def steered_codeword(theta: float, geometry: ArrayGeometry, wavelength: float,
                     power: float = 1.0) -> Codeword:
    """Uniform-amplitude far-field codeword steered toward angle theta."""
    phase = steering_phase(geometry.indices, geometry.spacing, wavelength, theta)
    w = _normalize(np.exp(1j * phase), power)
    return Codeword(w=w, kind="steered", params=theta, power=power)


def theta_grid(n: int, sin_lo: float = -math.sqrt(0.5), sin_hi: float = math.sqrt(0.5)) -> np.ndarray:
    """Angles uniform in sin(theta), inclusive endpoints."""
    return np.arcsin(np.linspace(sin_lo, sin_hi, n))


def radius_grid(n: int, r_min: float, r_max: float) -> np.ndarray:
    """Focal distances uniform in 1/r (denser close to the array), ascending."""
    return np.sort(1.0 / np.linspace(1.0 / r_min, 1.0 / r_max, n))


def scaling_grid(n: int, s_min_abs: float, s_max_abs: float) -> np.ndarray:
    """Sign-symmetric log-spaced scaling factors, ascending, zero excluded."""
    if n % 2 != 0:
        raise ConfigError("scaling set size must be even (sign-symmetric)")
    if not (0 < s_min_abs < s_max_abs):
        raise ConfigError("scaling range: requires 0 < s_min < s_max")
    pos = np.geomspace(s_min_abs, s_max_abs, n // 2)
    return np.concatenate([-pos[::-1], pos])


def decay_grid(n: int, a_min: float = -2.0, a_max: float = 0.0) -> np.ndarray:
    return np.linspace(a_min, a_max, n)


@dataclass(frozen=True)
class CodebookSpec:
    """Parameter sampling sets for one codebook family."""

    kind: str  # airy | polar | dft
    thetas: np.ndarray
    radii: np.ndarray = field(default_factory=lambda: np.array([]))
    scalings: np.ndarray = field(default_factory=lambda: np.array([]))
    decays: np.ndarray = field(default_factory=lambda: np.array([]))

    def __post_init__(self):
        if self.kind not in ("airy", "polar", "dft"):
            raise ConfigError(f"codebook kind must be airy/polar/dft, got {self.kind!r}")
        needed = {"airy": ("thetas", "radii", "scalings", "decays"),
                  "polar": ("thetas", "radii"),
                  "dft": ("thetas",)}[self.kind]
        for name in needed:
            if len(getattr(self, name)) == 0:
                raise ConfigError(f"codebook spec: empty sampling set {name}")
        if len(self.radii) and np.any(self.radii <= 0):
            raise ConfigError("codebook spec: radii must be > 0")
        if len(self.scalings) and np.any(self.scalings == 0):
            raise ConfigError("codebook spec: scalings must exclude zero")

    @property
    def size(self) -> int:
        if self.kind == "airy":
            return len(self.thetas) * len(self.radii) * len(self.scalings) * len(self.decays)
        if self.kind == "polar":
            return len(self.thetas) * len(self.radii)
        return len(self.thetas)

    @staticmethod
    def default(kind: str, scale: float = 1.0, n_theta: int = 90, n_r: int = 6,
                n_s: int = 20, n_a: int = 10) -> "CodebookSpec":
        """Standard sampling (angles in +-45 deg, r in [1,5] m, |s| in [0.05,0.3] m,
        a in [-2,0]); `scale` shrinks the metric ranges for small-aperture setups."""
        thetas = theta_grid(n_theta)
        radii = radius_grid(n_r, 1.0 * scale, 5.0 * scale)
        if kind == "dft":
            return CodebookSpec(kind="dft", thetas=thetas)
        if kind == "polar":
            return CodebookSpec(kind="polar", thetas=thetas, radii=radii)
        return CodebookSpec(kind="airy", thetas=thetas, radii=radii,
                            scalings=scaling_grid(n_s, 0.05 * scale, 0.3 * scale),
                            decays=decay_grid(n_a))


class Codebook:
    """Indexed codeword family over a parameter grid.

    Ordering is deterministic lexicographic over (theta, r, s, a) with theta
    outermost; vectors are materialized on demand (the full family can be
    large).
    """

    def __init__(self, spec: CodebookSpec, geometry: ArrayGeometry, wavelength: float,
                 power: float = 1.0):
        self.spec = spec
        self.geometry = geometry
        self.wavelength = wavelength
        self.power = power

    @property
    def kind(self) -> str:
        return self.spec.kind

    def __len__(self) -> int:
        return self.spec.size

    def _split(self, i: int):
        s = self.spec
        if s.kind == "airy":
            ia = i % len(s.decays)
            i //= len(s.decays)
            is_ = i % len(s.scalings)
            i //= len(s.scalings)
            ir = i % len(s.radii)
            it = i // len(s.radii)
            return it, ir, is_, ia
        if s.kind == "polar":
            return i // len(s.radii), i % len(s.radii)
        return (i,)

    def params(self, i: int):
        s = self.spec
        if not (0 <= i < len(self)):
            raise ConfigError(f"codeword index {i} out of range")
        if s.kind == "airy":
            it, ir, is_, ia = self._split(i)
            return AiryParams(theta=float(s.thetas[it]), r=float(s.radii[ir]),
                              s=float(s.scalings[is_]), a=float(s.decays[ia]))
        if s.kind == "polar":
            it, ir = self._split(i)
            return (float(s.thetas[it]), float(s.radii[ir]))
        return float(s.thetas[i])

    def codeword(self, i: int) -> Codeword:
        p = self.params(i)
        if self.spec.kind == "airy":
            return airy_codeword(p, self.geometry, self.wavelength, self.power)
        if self.spec.kind == "polar":
            return focused_codeword(p[0], p[1], self.geometry, self.wavelength, self.power)
        return steered_codeword(p, self.geometry, self.wavelength, self.power)

    def vector(self, i: int) -> np.ndarray:
        return self.codeword(i).w

    def block(self, start: int, stop: int) -> np.ndarray:
        """Codeword vectors start..stop-1 as columns of an (N, B) matrix."""
        stop = min(stop, len(self))
        out = np.empty((self.geometry.num_elements, stop - start), dtype=complex)
        for j, i in enumerate(range(start, stop)):
            out[:, j] = self.vector(i)
        return out

    def phase_profiles(self) -> np.ndarray:
        """Unit-modulus focusing factors, one row per (theta, r) pair."""
        s = self.spec
        if s.kind == "dft":
            rows = [np.exp(1j * steering_phase(self.geometry.indices, self.geometry.spacing,
                                               self.wavelength, th)) for th in s.thetas]
        else:
            rows = [np.exp(1j * focusing_phase(self.geometry.indices, self.geometry.spacing,
                                               self.wavelength, r, th))
                    for th in s.thetas for r in s.radii]
        return np.array(rows)

    def envelopes(self) -> np.ndarray:
        """Raw amplitude profiles, one row per (s, a) pair (airy kind only)."""
        s = self.spec
        if s.kind != "airy":
            raise ConfigError("envelopes are defined for the airy kind only")
        rows = [airy_amplitude(self.geometry.indices, self.geometry.spacing, sv, av)
                for sv in s.scalings for av in s.decays]
        return np.array(rows)


def build_codebook(spec: CodebookSpec, geometry: ArrayGeometry, wavelength: float,
                   power: float = 1.0) -> Codebook:
    return Codebook(spec, geometry, wavelength, power)


def export_codebook(codebook: Codebook, path, dump_coefficients: bool = False):
    """Write the indexed parameter list (optionally with full coefficients)."""
    with open(path, "w") as fh:
        fh.write(f"airybf-codebook v1 kind={codebook.kind} size={len(codebook)} "
                 f"N={codebook.geometry.num_elements} P={codebook.power:.9g}\n")
        for i in range(len(codebook)):
            p = codebook.params(i)
            if codebook.kind == "airy":
                fh.write(f"{i} airy theta={p.theta:.9g} r={p.r:.9g} s={p.s:.9g} a={p.a:.9g}")
            elif codebook.kind == "polar":
                fh.write(f"{i} focused theta={p[0]:.9g} r={p[1]:.9g}")
            else:
                fh.write(f"{i} steered theta={p:.9g}")
            if dump_coefficients:
                coeffs = " ".join(f"{v.real:.9g}{v.imag:+.9g}j" for v in codebook.vector(i))
                fh.write(f" | {coeffs}")
            fh.write("\n")
