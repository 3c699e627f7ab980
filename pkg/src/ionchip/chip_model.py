"""Refractive-index geometry of the multiscan addressing chip.

Everything a solver needs to know about the chip is expressed here as
sampled refractive-index maps: multiscan channel cross-sections built from
Gaussian index blobs, step-index references (fiber cores), adiabatic taper
interpolation, and the routing geometry that funnels the channels from the
fiber-array pitch down to the ion-chain pitch.

Units are micrometres throughout; refractive indices are dimensionless.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import eigh_tridiagonal

# Borosilicate glass at 532 nm and the composite core index of the
# high-contrast multiscan channel design.
N_CLAD = 1.51
N_CORE = 1.525

# Commercial single-mode fiber at 532 nm.
SMF_N_CLAD = 1.455
SMF_N_CORE = 1.4607
SMF_CORE_DIAMETER = 3.0

MAX_DELTA_N = 0.05


class WindowTooSmallError(ValueError):
    """Raised when a grid window clips a scan's 4-sigma footprint."""


@dataclass(frozen=True)
class GridWindow:
    """Rectangular sampling window: [x_min, x_max] x [y_min, y_max]."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float
    dx: float = 0.05
    dy: float = 0.05

    def __post_init__(self):
        if self.x_max <= self.x_min or self.y_max <= self.y_min:
            raise ValueError("window extents must be positive")
        if self.dx <= 0 or self.dy <= 0:
            raise ValueError("grid spacings must be positive")

    @property
    def x(self) -> np.ndarray:
        n = int(round((self.x_max - self.x_min) / self.dx)) + 1
        return self.x_min + self.dx * np.arange(n)

    @property
    def y(self) -> np.ndarray:
        n = int(round((self.y_max - self.y_min) / self.dy)) + 1
        return self.y_min + self.dy * np.arange(n)


def centered_window(half_x: float, half_y: float, dx: float = 0.05,
                    dy: float | None = None) -> GridWindow:
    return GridWindow(-half_x, half_x, -half_y, half_y, dx, dx if dy is None else dy)


@dataclass(frozen=True)
class RIProfile1D:
    """Sampled refractive index n(x) on a uniform grid."""

    x0: float
    dx: float
    n: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "n", np.asarray(self.n, dtype=float))
        if self.dx <= 0:
            raise ValueError("dx must be positive")
        if not np.all(np.isfinite(self.n)):
            raise ValueError("index samples must be finite")

    @property
    def x(self) -> np.ndarray:
        return self.x0 + self.dx * np.arange(self.n.size)

    @property
    def n_clad(self) -> float:
        return float(self.n.min())

    @property
    def n_peak(self) -> float:
        return float(self.n.max())


@dataclass(frozen=True)
class RIProfile2D:
    """Sampled refractive index n(x, y); samples indexed [iy, ix]."""

    x0: float
    y0: float
    dx: float
    dy: float
    n: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "n", np.asarray(self.n, dtype=float))
        if self.dx <= 0 or self.dy <= 0:
            raise ValueError("grid spacings must be positive")
        if self.n.ndim != 2:
            raise ValueError("2D profile requires a 2D sample array")
        if not np.all(np.isfinite(self.n)):
            raise ValueError("index samples must be finite")

    @property
    def x(self) -> np.ndarray:
        return self.x0 + self.dx * np.arange(self.n.shape[1])

    @property
    def y(self) -> np.ndarray:
        return self.y0 + self.dy * np.arange(self.n.shape[0])

    @property
    def n_clad(self) -> float:
        return float(self.n.min())

    @property
    def n_peak(self) -> float:
        return float(self.n.max())


@dataclass(frozen=True)
class ScanSpec:
    """One Gaussian index blob left by a single writing scan."""

    center_x: float
    center_y: float
    delta_n_peak: float
    sigma_x: float
    sigma_y: float

    def __post_init__(self):
        if self.sigma_x <= 0 or self.sigma_y <= 0:
            raise ValueError("scan widths must be positive")
        if abs(self.delta_n_peak) > MAX_DELTA_N:
            raise ValueError(f"|delta_n_peak| = {abs(self.delta_n_peak)} exceeds {MAX_DELTA_N}")

    def delta_n(self, x: np.ndarray, y: np.ndarray | float = 0.0) -> np.ndarray:
        """Index increment of this scan sampled at (x, y)."""
        gx = np.exp(-((np.asarray(x) - self.center_x) ** 2) / (2 * self.sigma_x**2))
        gy = np.exp(-((np.asarray(y) - self.center_y) ** 2) / (2 * self.sigma_y**2))
        return self.delta_n_peak * gx * gy


@dataclass(frozen=True)
class ChannelCrossSection:
    """A guiding channel: superposition of scans over a uniform cladding."""

    scans: tuple[ScanSpec, ...]
    n_clad: float = N_CLAD

    def __post_init__(self):
        object.__setattr__(self, "scans", tuple(self.scans))
        if self.n_clad <= 1:
            raise ValueError("cladding index must exceed 1")
        if self.scans and self.peak_index() > self.n_clad + MAX_DELTA_N + 1e-12:
            raise ValueError("composite peak index exceeds the allowed contrast")

    def delta_n(self, x: np.ndarray, y: np.ndarray | float = 0.0) -> np.ndarray:
        """Total index increment over the cladding at (x, y)."""
        out = np.zeros(np.broadcast(np.asarray(x), np.asarray(y)).shape)
        for s in self.scans:
            out = out + s.delta_n(x, y)
        return out

    def peak_index(self, resolution: float = 0.005) -> float:
        """Composite peak index, located by dense sampling over the scan footprint."""
        if not self.scans:
            return self.n_clad
        cx = np.array([s.center_x for s in self.scans])
        cy = np.array([s.center_y for s in self.scans])
        x = np.arange(cx.min() - 1.0, cx.max() + 1.0, resolution)
        y = np.arange(cy.min() - 1.0, cy.max() + 1.0, resolution)
        dn = self.delta_n(x[None, :], y[:, None])
        return self.n_clad + float(dn.max())

    def footprint(self, n_sigma: float = 4.0) -> tuple[float, float, float, float]:
        """(x_min, x_max, y_min, y_max) covering all scans to n_sigma widths."""
        xs_lo = min(s.center_x - n_sigma * s.sigma_x for s in self.scans)
        xs_hi = max(s.center_x + n_sigma * s.sigma_x for s in self.scans)
        ys_lo = min(s.center_y - n_sigma * s.sigma_y for s in self.scans)
        ys_hi = max(s.center_y + n_sigma * s.sigma_y for s in self.scans)
        return xs_lo, xs_hi, ys_lo, ys_hi


def _solved_amplitude(offsets_x: Sequence[float], sigma_x: float, sigma_y: float,
                      contrast: float) -> float:
    # Per-scan amplitude such that the composite peak (not each blob) hits
    # the target contrast.  Scans share a row, so the peak lies on y = 0.
    span = max(abs(o) for o in offsets_x) + 1.0
    x = np.linspace(-span, span, 4001)
    unit = np.zeros_like(x)
    for ox in offsets_x:
        unit += np.exp(-((x - ox) ** 2) / (2 * sigma_x**2))
    return contrast / float(unit.max())


def four_scan_channel(n_clad: float = N_CLAD, n_core: float = N_CORE,
                      separation: float = 0.4, sigma_x: float = 0.35,
                      sigma_y: float = 0.9) -> ChannelCrossSection:
    """High-contrast output channel: four scans at 0.4 um core separation.

    Per-scan amplitudes are solved numerically so the composite peak index
    equals ``n_core`` over the ``n_clad`` background.
    """
    offsets = (np.arange(4) - 1.5) * separation
    amp = _solved_amplitude(offsets, sigma_x, sigma_y, n_core - n_clad)
    scans = tuple(ScanSpec(ox, 0.0, amp, sigma_x, sigma_y) for ox in offsets)
    return ChannelCrossSection(scans, n_clad)


def six_scan_channel(n_clad: float = N_CLAD, n_core: float = N_CORE,
                     separation: float = 0.4, outer_factor: float = 1.5,
                     sigma_x: float = 0.35, sigma_y: float = 0.9) -> ChannelCrossSection:
    """Mode-matched input channel: the four-scan core plus one extra scan on
    each side, spaced ``outer_factor`` times wider than the core scans."""
    inner = (np.arange(4) - 1.5) * separation
    outer_off = inner[-1] + outer_factor * separation
    offsets = np.concatenate(([-outer_off], inner, [outer_off]))
    amp = _solved_amplitude(offsets, sigma_x, sigma_y, n_core - n_clad)
    scans = tuple(ScanSpec(ox, 0.0, amp, sigma_x, sigma_y) for ox in offsets)
    return ChannelCrossSection(scans, n_clad)


def conventional_channel(n_clad: float = N_CLAD, delta_n: float = 0.006,
                         sigma: float = 0.9) -> ChannelCrossSection:
    """Single-blob channel standing in for a conventionally written guide.

    The contrast is mid-range of the 2-3x reduction relative to the
    multiscan design; the width keeps the guide single-mode at 532 nm.
    """
    return ChannelCrossSection((ScanSpec(0.0, 0.0, delta_n, sigma, sigma),), n_clad)


def build_cross_section(cs: ChannelCrossSection, window: GridWindow) -> RIProfile2D:
    """Sample a channel cross-section onto a window.

    The window must cover every scan's +-4 sigma footprint; a clipped scan
    raises :class:`WindowTooSmallError` naming the offender.
    """
    x, y = window.x, window.y
    for k, s in enumerate(cs.scans):
        if (s.center_x - 4 * s.sigma_x < window.x_min
                or s.center_x + 4 * s.sigma_x > window.x_max
                or s.center_y - 4 * s.sigma_y < window.y_min
                or s.center_y + 4 * s.sigma_y > window.y_max):
            raise WindowTooSmallError(
                f"window clips scan {k} (center ({s.center_x}, {s.center_y}), "
                f"4-sigma footprint exceeds window)")
    n = cs.n_clad + cs.delta_n(x[None, :], y[:, None])
    return RIProfile2D(window.x_min, window.y_min, window.dx, window.dy, n)


def conventional_cross_section(window: GridWindow, n_clad: float = N_CLAD,
                               delta_n: float = 0.006) -> RIProfile2D:
    return build_cross_section(conventional_channel(n_clad, delta_n), window)


def step_index_profile(diameter: float, n_core: float, n_clad: float,
                       window: GridWindow, subsamples: int = 8) -> RIProfile2D:
    """Circular step-index core, area-averaged onto the grid.

    Cells straddling the core boundary get the area-weighted mean of n^2
    (computed by ``subsamples x subsamples`` sub-sampling), which removes
    most of the staircase error from eigenvalue estimates.
    """
    x, y = window.x, window.y
    r2_core = (diameter / 2) ** 2
    off = (np.arange(subsamples) + 0.5) / subsamples - 0.5
    n2 = np.zeros((y.size, x.size))
    for oy in off:
        yy = (y + oy * window.dy)[:, None]
        for ox in off:
            xx = (x + ox * window.dx)[None, :]
            n2 += np.where(xx**2 + yy**2 <= r2_core, n_core**2, n_clad**2)
    n2 /= subsamples**2
    return RIProfile2D(window.x_min, window.y_min, window.dx, window.dy, np.sqrt(n2))


def slab_profile(width: float, n_core: float, n_clad: float, half_span: float,
                 dx: float = 0.05, subsamples: int = 32) -> RIProfile1D:
    """Symmetric slab of full width ``width``, edge-averaged like the circular core."""
    n = int(round(2 * half_span / dx)) + 1
    x = -half_span + dx * np.arange(n)
    off = (np.arange(subsamples) + 0.5) / subsamples - 0.5
    n2 = np.zeros(n)
    for ox in off:
        n2 += np.where(np.abs(x + ox * dx) <= width / 2, n_core**2, n_clad**2)
    n2 /= subsamples
    return RIProfile1D(-half_span, dx, np.sqrt(n2))


def smf_profile(window: GridWindow | None = None, dx: float = 0.05) -> RIProfile2D:
    """Step-index profile of the commercial single-mode fiber feeding the chip."""
    if window is None:
        window = centered_window(6.0, 6.0, dx)
    return step_index_profile(SMF_CORE_DIAMETER, SMF_N_CORE, SMF_N_CLAD, window)


# ---------------------------------------------------------------------------
# Tapers

@dataclass(frozen=True)
class TaperSpec:
    """Adiabatic interpolation between two channel cross-sections."""

    input_cs: ChannelCrossSection
    output_cs: ChannelCrossSection
    length: float
    interpolation: str = "cosine"

    def __post_init__(self):
        if self.length <= 0:
            raise ValueError("taper length must be positive")
        if self.interpolation not in ("linear", "cosine"):
            raise ValueError(f"unknown interpolation {self.interpolation!r}")


def _pair_scans(a: tuple[ScanSpec, ...], b: tuple[ScanSpec, ...]):
    """Pair scans of the longer list onto the shorter by center order.

    The shorter list is aligned as a contiguous run inside the longer one at
    the offset minimising total center distance; unpaired scans of either
    end fade to zero amplitude.
    """
    swap = len(a) < len(b)
    longer, shorter = (b, a) if swap else (a, b)
    idx_l = sorted(range(len(longer)), key=lambda i: longer[i].center_x)
    idx_s = sorted(range(len(shorter)), key=lambda i: shorter[i].center_x)
    best_off, best_cost = 0, np.inf
    for off in range(len(longer) - len(shorter) + 1):
        cost = sum(abs(longer[idx_l[off + j]].center_x - shorter[idx_s[j]].center_x)
                   for j in range(len(shorter)))
        if cost < best_cost:
            best_off, best_cost = off, cost
    pairs = []  # (scan_a, scan_b_or_None) in a->b orientation
    matched = {idx_l[best_off + j]: idx_s[j] for j in range(len(shorter))}
    for i in range(len(longer)):
        partner = shorter[matched[i]] if i in matched else None
        pairs.append((partner, longer[i]) if swap else (longer[i], partner))
    return pairs


def taper_profile(t: TaperSpec, z: float) -> ChannelCrossSection:
    """Cross-section of a taper at station z in [0, length].

    Scalar scan parameters interpolate between the endpoint values; scans
    present at only one end keep their geometry and ramp their amplitude
    to zero toward the other end.
    """
    if not 0 <= z <= t.length:
        raise ValueError(f"z = {z} outside taper [0, {t.length}]")
    u = z / t.length
    if t.interpolation == "cosine":
        u = 0.5 * (1 - np.cos(np.pi * u))
    scans = []
    for sa, sb in _pair_scans(t.input_cs.scans, t.output_cs.scans):
        if sa is None:
            ref, amp = sb, u * sb.delta_n_peak
            scans.append(replace(ref, delta_n_peak=amp))
        elif sb is None:
            ref, amp = sa, (1 - u) * sa.delta_n_peak
            scans.append(replace(ref, delta_n_peak=amp))
        else:
            scans.append(ScanSpec(
                center_x=(1 - u) * sa.center_x + u * sb.center_x,
                center_y=(1 - u) * sa.center_y + u * sb.center_y,
                delta_n_peak=(1 - u) * sa.delta_n_peak + u * sb.delta_n_peak,
                sigma_x=(1 - u) * sa.sigma_x + u * sb.sigma_x,
                sigma_y=(1 - u) * sa.sigma_y + u * sb.sigma_y))
    # Zero-amplitude scans at the exact endpoints are dropped so that the
    # boundary cross-sections compare equal to the specified designs.
    scans = [s for s in scans if s.delta_n_peak != 0.0]
    return ChannelCrossSection(tuple(scans), t.output_cs.n_clad)


def default_input_taper(length: float = 2200.0,
                        interpolation: str = "cosine") -> TaperSpec:
    """The chip's input-facet mode converter: six-scan to four-scan."""
    return TaperSpec(six_scan_channel(), four_scan_channel(), length, interpolation)


# ---------------------------------------------------------------------------
# Chip routing

@dataclass(frozen=True)
class ChipLayout:
    """Straight-curve-straight routing from fiber-array pitch to output pitch."""

    n_channels: int = 8
    input_pitch: float = 127.0
    output_pitch: float = 8.0
    len_straight_in: float = 2200.0
    len_curve: float = 7200.0
    len_straight_out: float = 200.0

    def __post_init__(self):
        if self.n_channels < 1:
            raise ValueError("need at least one channel")
        if min(self.input_pitch, self.output_pitch) <= 0:
            raise ValueError("pitches must be positive")
        if min(self.len_straight_in, self.len_curve, self.len_straight_out) <= 0:
            raise ValueError("segment lengths must be positive")

    @property
    def length(self) -> float:
        return self.len_straight_in + self.len_curve + self.len_straight_out

    @property
    def min_bend_radius(self) -> float:
        """Smallest radius of curvature over all channel paths.

        The raised-cosine transition has zero end slope and its extreme
        curvature at the curve ends: R = 2 L^2 / (pi^2 |dx|).
        """
        half = (self.n_channels - 1) / 2
        max_shift = half * abs(self.input_pitch - self.output_pitch)
        if max_shift == 0:
            return np.inf
        return 2 * self.len_curve**2 / (np.pi**2 * max_shift)


@dataclass(frozen=True)
class ChannelPath:
    """Lateral position x(z) of one channel through the chip."""

    layout: ChipLayout
    index: int

    def __post_init__(self):
        if not 0 <= self.index < self.layout.n_channels:
            raise ValueError(f"channel index {self.index} out of range")

    @property
    def x_in(self) -> float:
        return (self.index - (self.layout.n_channels - 1) / 2) * self.layout.input_pitch

    @property
    def x_out(self) -> float:
        return (self.index - (self.layout.n_channels - 1) / 2) * self.layout.output_pitch

    def x(self, z):
        """Vectorised lateral position; raised-cosine in the curve region."""
        lay = self.layout
        z = np.asarray(z, dtype=float)
        z1 = lay.len_straight_in
        z2 = z1 + lay.len_curve
        u = np.clip((z - z1) / lay.len_curve, 0.0, 1.0)
        blend = 0.5 * (1 - np.cos(np.pi * u))
        return self.x_in + (self.x_out - self.x_in) * blend

    @property
    def min_bend_radius(self) -> float:
        shift = abs(self.x_out - self.x_in)
        if shift == 0:
            return np.inf
        return 2 * self.layout.len_curve**2 / (np.pi**2 * shift)


def channel_path(layout: ChipLayout, i: int) -> ChannelPath:
    return ChannelPath(layout, i)


# ---------------------------------------------------------------------------
# Effective-index reduction

def effective_index_reduce(p: RIProfile2D, lam_um: float) -> RIProfile1D:
    """Collapse a 2D cross-section to a 1D horizontal profile.

    For each x column the vertical slab problem
    ``psi'' + k0^2 n(y)^2 psi = beta^2 psi`` is solved (3-point stencil,
    reflecting boundaries) and the fundamental's effective index becomes
    n(x).  Reflecting boundaries make a y-invariant column reduce to its
    own index exactly; columns guiding no vertical mode map to the cladding
    index.
    """
    k0 = 2 * np.pi / lam_um
    n_clad = p.n_clad
    ny = p.n.shape[0]
    off = np.full(ny - 1, 1.0 / p.dy**2)
    lap_diag = np.full(ny, -2.0 / p.dy**2)
    lap_diag[0] = lap_diag[-1] = -1.0 / p.dy**2
    out = np.full(p.n.shape[1], n_clad)
    for ix in range(p.n.shape[1]):
        col = p.n[:, ix]
        if col.max() <= n_clad + 1e-12:
            continue
        diag = lap_diag + k0**2 * col**2
        w = eigh_tridiagonal(diag, off, select="i",
                             select_range=(ny - 1, ny - 1),
                             eigvals_only=True)
        n_eff = np.sqrt(max(w[0], 0.0)) / k0
        out[ix] = max(n_eff, n_clad)
    return RIProfile1D(p.x0, p.dx, out)
