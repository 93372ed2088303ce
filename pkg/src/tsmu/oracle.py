"""Closed-form two-slit arrival model used as an independent cross-check.

Each slit is a Gaussian aperture source of amplitude std sqrt(2)*w (so the
initial intensity has std w), evolved by the exact free 1-D propagator for
the flight time T = L / k_x.  The transverse problem separates from the
longitudinal motion, so a single complex Gaussian per slit gives the
arrival amplitude; coherent and incoherent combinations give the fringed
and fringe-free patterns.  None of the grid machinery is used here: this
module is the second, independent route against which the PDE pipeline is
measured.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class OracleSpec:
    """Two Gaussian slit sources a distance d apart, observed after a free
    flight of length L at mean wavenumber k_x."""

    slit_center_y: float
    separation: float
    width: float  # intensity std of each aperture
    flight_length: float
    k_x: float
    flight_time: float | None = None  # override; defaults to L / k_x

    def __post_init__(self):
        if min(self.separation, self.width, self.flight_length, self.k_x) <= 0:
            raise ConfigError("oracle parameters d, w, L, k_x must be positive")

    @property
    def y_upper(self) -> float:
        return self.slit_center_y + self.separation / 2

    @property
    def y_lower(self) -> float:
        return self.slit_center_y - self.separation / 2

    @property
    def time_of_flight(self) -> float:
        return self.flight_time if self.flight_time is not None else self.flight_length / self.k_x

    @property
    def fringe_period(self) -> float:
        """Two-source spacing 2 pi T / d of the arrival-intensity fringes."""
        return 2 * math.pi * self.time_of_flight / self.separation


def _free_gaussian(y: np.ndarray, center: float, w: float, t: float) -> np.ndarray:
    # Unit-norm Gaussian of intensity std w after free evolution for time t:
    # spreading factor gamma = 1 + i t / (2 w^2).
    gamma = 1.0 + 0.5j * t / (w * w)
    norm = (2 * math.pi * w * w) ** -0.25 / np.sqrt(gamma)
    return norm * np.exp(-((y - center) ** 2) / (4 * w * w * gamma))


def oracle_amplitudes(spec: OracleSpec, y) -> tuple[np.ndarray, np.ndarray]:
    """Single-slit arrival amplitudes (psi_upper, psi_lower) at position y."""
    y = np.asarray(y, dtype=np.float64)
    t = spec.time_of_flight
    return (
        _free_gaussian(y, spec.y_upper, spec.width, t),
        _free_gaussian(y, spec.y_lower, spec.width, t),
    )


@dataclass(frozen=True)
class OracleTable:
    """Binned arrival probabilities plus the raw per-sample densities."""

    y_centers: np.ndarray  # bin centers
    probabilities: np.ndarray  # normalized, sums to 1
    sample_y: np.ndarray
    sample_density: np.ndarray  # unnormalized |psi|^2 at the sample points


def oracle_distribution(
    spec: OracleSpec,
    coherent: bool,
    bin_edges: np.ndarray,
    samples_per_bin: int = 8,
) -> OracleTable:
    """Normalized binned arrival distribution over the given Y intervals.

    coherent=True bins |psi_U + psi_L|^2 (the fringed pattern); False bins
    |psi_U|^2 + |psi_L|^2, which is not an interference pattern.
    """
    bin_edges = np.asarray(bin_edges, dtype=np.float64)
    if bin_edges.ndim != 1 or bin_edges.size < 2:
        raise ConfigError("need at least one bin")
    if samples_per_bin < 1:
        raise ConfigError("samples_per_bin must be positive")
    n_bins = bin_edges.size - 1
    # midpoint subsamples inside every bin, uniform within each interval
    widths = np.diff(bin_edges)
    offsets = (np.arange(samples_per_bin) + 0.5) / samples_per_bin
    y = (bin_edges[:-1, None] + widths[:, None] * offsets[None, :]).ravel()
    psi_u, psi_l = oracle_amplitudes(spec, y)
    if coherent:
        density = np.abs(psi_u + psi_l) ** 2
    else:
        density = np.abs(psi_u) ** 2 + np.abs(psi_l) ** 2
    binned = density.reshape(n_bins, samples_per_bin).mean(axis=1) * widths
    total = binned.sum()
    if total <= 0:
        raise ConfigError("oracle distribution vanished on the requested bins")
    centers = 0.5 * (bin_edges[:-1] + bin_edges[1:])
    return OracleTable(centers, binned / total, y, density)


def interference_term(spec: OracleSpec, y) -> np.ndarray:
    """Pointwise cross term 2 Re(conj(psi_U) psi_L): coherent density equals
    incoherent density plus this, before any normalization."""
    psi_u, psi_l = oracle_amplitudes(spec, y)
    return 2.0 * np.real(np.conj(psi_u) * psi_l)


def binned_components(
    spec: OracleSpec, bin_edges: np.ndarray, samples_per_bin: int = 8
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-bin single-slit weights and cross term (u_upper, u_lower, cross),
    unnormalized, on the same subsampling as oracle_distribution.  A record
    of strength theta suppresses the cross term by cos(theta)^2 while
    leaving the single-slit weights untouched."""
    bin_edges = np.asarray(bin_edges, dtype=np.float64)
    if bin_edges.ndim != 1 or bin_edges.size < 2:
        raise ConfigError("need at least one bin")
    n_bins = bin_edges.size - 1
    widths = np.diff(bin_edges)
    offsets = (np.arange(samples_per_bin) + 0.5) / samples_per_bin
    y = (bin_edges[:-1, None] + widths[:, None] * offsets[None, :]).ravel()
    psi_u, psi_l = oracle_amplitudes(spec, y)

    def _bin(values: np.ndarray) -> np.ndarray:
        return values.reshape(n_bins, samples_per_bin).mean(axis=1) * widths

    return (
        _bin(np.abs(psi_u) ** 2),
        _bin(np.abs(psi_l) ** 2),
        _bin(2.0 * np.real(np.conj(psi_u) * psi_l)),
    )
