"""Closed-form analytics of the phase-modulated lattice.

A drive cos(2x + a*sin(wt)) decomposes into a static carrier plus
Bessel-weighted harmonics: even harmonics ride on cos(2x) and couple bands
of equal parity, odd harmonics ride on sin(2x) and couple opposite parity.
These weights, the band-to-band matrix elements of sin(2x)/cos(2x), and
the golden-rule rates built from them are what single out the handful of
drive frequencies worth optimizing over.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special

from .lattice import BlochSolution, LatticeConfig, solve_bloch

SUBSPACE_KINDS = ("all_band", "band", "half_band", "band_plus_half", "select")

# Matrix-element magnitude above which a transition counts as "strong".
SELECT_THRESHOLD = 0.1

# Default shaking window (in 1/w_R) used for the dense frequency grid;
# 0.5 ms at the 87Rb/852 nm recoil frequency.
DEFAULT_SHAKE_DURATION = 9.934

PARITY_EVEN_COSINE = "even-cosine"
PARITY_ODD_SINE = "odd-sine"


@dataclass(frozen=True)
class BesselWeight:
    harmonic_k: int
    value: float
    parity: str


@dataclass(frozen=True)
class JacobiAngerDecomposition:
    """Bessel weights of the harmonics of a sinusoidal phase modulation."""

    alpha: float
    weights: tuple[BesselWeight, ...]
    truncation_kmax: int

    def weight(self, k: int) -> float:
        return self.weights[k].value


@dataclass(frozen=True)
class TransitionElement:
    """Squared sin/cos matrix elements between two bands at q = 0."""

    r: int
    r_prime: int
    m_sin: float
    m_cos: float


@dataclass(frozen=True)
class FrequencySubspace:
    """A labeled set of drive frequencies (angular, in w_R units)."""

    kind: str
    frequencies: tuple[tuple[str, float], ...]

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(label for label, _ in self.frequencies)

    @property
    def omegas(self) -> np.ndarray:
        return np.array([omega for _, omega in self.frequencies])

    def __len__(self) -> int:
        return len(self.frequencies)


@dataclass(frozen=True)
class MovingLatticeDecomposition:
    """Carrier plus two counterpropagating lattices of a shaken potential."""

    carrier_depth: float
    traveling_depth: float
    velocities: tuple[float, float]


def jacobi_anger(alpha: float, kmax: int) -> JacobiAngerDecomposition:
    """Bessel weights J_k(alpha) for harmonics k = 0..kmax.

    Even k multiplies cos(2x) (same-parity drive), odd k multiplies sin(2x)
    (opposite-parity drive).
    """
    if kmax < 2:
        raise ValueError(f"kmax must be >= 2, got {kmax}")
    ks = np.arange(kmax + 1)
    values = special.jv(ks, alpha)
    weights = tuple(
        BesselWeight(
            harmonic_k=int(k),
            value=float(v),
            parity=PARITY_EVEN_COSINE if k % 2 == 0 else PARITY_ODD_SINE,
        )
        for k, v in zip(ks, values)
    )
    return JacobiAngerDecomposition(alpha=float(alpha), weights=weights, truncation_kmax=kmax)


@lru_cache(maxsize=64)
def _bloch_q0(config: LatticeConfig) -> BlochSolution:
    return solve_bloch(config, q=0.0)


def _sin_cos_operators(nmax: int) -> tuple[np.ndarray, np.ndarray]:
    """sin(2x) and cos(2x) in the plane-wave basis (couple n <-> n+/-1)."""
    dim = 2 * nmax + 1
    up = np.arange(1, dim), np.arange(dim - 1)  # row n+1, col n
    dn = np.arange(dim - 1), np.arange(1, dim)
    s = np.zeros((dim, dim), dtype=complex)
    s[up] = -0.5j
    s[dn] = +0.5j
    c = np.zeros((dim, dim), dtype=complex)
    c[up] = 0.5
    c[dn] = 0.5
    return s, c


def matrix_elements(config: LatticeConfig, r: int, r_prime: int) -> TransitionElement:
    """|<r'|sin(2x)|r>|^2 and |<r'|cos(2x)|r>|^2 at q = 0.

    Parity selection is not imposed: one of the two comes out at round-off
    level because the Bloch states have definite parity.
    """
    sol = _bloch_q0(config)
    vr = sol.state(r).amplitudes
    vrp = sol.state(r_prime).amplitudes
    s_op, c_op = _sin_cos_operators(config.basis_cutoff_nmax)
    m_sin = abs(np.vdot(vrp, s_op @ vr)) ** 2
    m_cos = abs(np.vdot(vrp, c_op @ vr)) ** 2
    return TransitionElement(r=r, r_prime=r_prime, m_sin=float(m_sin), m_cos=float(m_cos))


def _lorentzian(x: float, fwhm: float) -> float:
    half = 0.5 * fwhm
    return half / (math.pi * (x * x + half * half))


def fgr_rate(
    config: LatticeConfig,
    alpha: float,
    omega: float,
    r: int,
    r_prime: int,
    linewidth: float = 0.05,
    elements: TransitionElement | None = None,
    energy_gap: float | None = None,
) -> float:
    """Golden-rule transition rate r -> r' for drive alpha*sin(omega*t).

    Sums even harmonics (cos-coupled, resonant at gap/2k) and odd harmonics
    (sin-coupled, resonant at gap/(2k-1)), each weighted by J_k(alpha)^2 and
    regularized by a unit-area Lorentzian of the given FWHM.  All quantities
    in recoil units.  ``elements``/``energy_gap`` override the values derived
    from ``config`` (useful with precomputed tables).
    """
    if linewidth <= 0:
        raise ValueError(f"linewidth must be > 0, got {linewidth}")
    if elements is None:
        elements = matrix_elements(config, r, r_prime)
    if energy_gap is None:
        sol = _bloch_q0(config)
        energy_gap = abs(sol.energy(r_prime) - sol.energy(r))
    kmax = max(12, int(math.ceil(abs(alpha))) + 10)
    bessel = jacobi_anger(alpha, 2 * kmax)
    rate = 0.0
    for k in range(1, kmax + 1):
        rate += (
            bessel.weight(2 * k) ** 2
            * elements.m_cos
            * _lorentzian(energy_gap - 2 * k * omega, linewidth)
        )
        rate += (
            bessel.weight(2 * k - 1) ** 2
            * elements.m_sin
            * _lorentzian(energy_gap - (2 * k - 1) * omega, linewidth)
        )
    return 2.0 * math.pi * config.depth_V0**2 * rate


def strong_transitions(
    config: LatticeConfig, max_band: int = 5, threshold: float = SELECT_THRESHOLD
) -> list[TransitionElement]:
    """Band pairs (r < r' <= max_band) with a sin or cos element above threshold."""
    picked = []
    for r in range(max_band + 1):
        for rp in range(r + 1, max_band + 1):
            el = matrix_elements(config, r, rp)
            if max(el.m_sin, el.m_cos) > threshold:
                picked.append(el)
    return picked


def build_subspace(
    config: LatticeConfig,
    kind: str,
    duration_T: float = DEFAULT_SHAKE_DURATION,
) -> FrequencySubspace:
    """Construct one of the drive-frequency classes (angular, w_R units).

    band            the 10 pairwise transition frequencies among bands 0-4
    half_band       the same frequencies divided by two
    band_plus_half  union of the previous two (20 entries)
    select          strong transitions only: sin-coupled pairs at the full
                    frequency, cos-coupled pairs at half (two-photon)
    all_band        the Fourier grid of the shaking window, multiples of
                    2*pi/duration_T up to the band-0-to-5 frequency
    """
    if kind not in SUBSPACE_KINDS:
        raise ValueError(f"unknown subspace kind {kind!r}; expected one of {SUBSPACE_KINDS}")
    sol = _bloch_q0(config)
    entries: list[tuple[str, float]] = []
    if kind in ("band", "half_band", "band_plus_half"):
        for r in range(5):
            for rp in range(r + 1, 5):
                gap = abs(sol.energy(rp) - sol.energy(r))
                if kind in ("band", "band_plus_half"):
                    entries.append((f"band:{r}:{rp}", gap))
                if kind in ("half_band", "band_plus_half"):
                    entries.append((f"half:{r}:{rp}", gap / 2.0))
    elif kind == "select":
        for el in strong_transitions(config):
            gap = abs(sol.energy(el.r_prime) - sol.energy(el.r))
            if el.m_sin > el.m_cos:
                entries.append((f"band:{el.r}:{el.r_prime}", gap))
            else:
                entries.append((f"half:{el.r}:{el.r_prime}", gap / 2.0))
    else:  # all_band
        if duration_T <= 0:
            raise ValueError(f"duration_T must be > 0, got {duration_T}")
        omega_top = abs(sol.energy(5) - sol.energy(0))
        domega = 2.0 * math.pi / duration_T
        j = 1
        while j * domega <= omega_top:
            entries.append((f"grid:{j}", j * domega))
            j += 1
    entries.sort(key=lambda item: item[1])
    deduped: list[tuple[str, float]] = []
    for label, omega in entries:
        if deduped and omega == deduped[-1][1]:
            continue
        deduped.append((label, omega))
    return FrequencySubspace(kind=kind, frequencies=tuple(deduped))


def moving_lattice(
    alpha: float, omega: float, config: LatticeConfig
) -> MovingLatticeDecomposition:
    """Carrier + counterpropagating-lattice picture of a single-tone drive.

    Keeping the first two Bessel orders, the drive splits into a static
    carrier of coefficient V0*J0(alpha)/2 and two lattices of coefficient
    V0*J1(alpha)/2 traveling at +/- omega/2 recoil velocities (hbar k_L/m).
    """
    if alpha <= 0:
        raise ValueError(f"alpha must be > 0, got {alpha}")
    if omega <= 0:
        raise ValueError(f"omega must be > 0, got {omega}")
    j0, j1 = special.jv([0, 1], alpha)
    v = omega / 2.0
    return MovingLatticeDecomposition(
        carrier_depth=config.depth_V0 * float(j0) / 2.0,
        traveling_depth=config.depth_V0 * float(j1) / 2.0,
        velocities=(+v, -v),
    )


def matrix_element_rows(
    config: LatticeConfig, max_band: int = 5, threshold: float | None = SELECT_THRESHOLD
) -> list[dict]:
    """Rows for the matrix-element table: r, r_prime, m_sin, m_cos[, select]."""
    rows = []
    for r in range(max_band + 1):
        for rp in range(r + 1, max_band + 1):
            el = matrix_elements(config, r, rp)
            row = {"r": el.r, "r_prime": el.r_prime, "m_sin": el.m_sin, "m_cos": el.m_cos}
            if threshold is not None:
                row["select"] = int(max(el.m_sin, el.m_cos) > threshold)
            rows.append(row)
    return rows


def subspace_rows(subspace: FrequencySubspace, config: LatticeConfig) -> list[dict]:
    """JSON-ready rows {label, freq_wr, freq_khz} for a frequency subspace."""
    return [
        {
            "label": label,
            "freq_wr": omega,
            "freq_khz": omega * config.recoil_frequency_hz / 1e3,
        }
        for label, omega in subspace.frequencies
    ]
