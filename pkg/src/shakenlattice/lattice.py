"""Plane-wave description of a 1-D optical lattice at fixed quasimomentum.

All internal quantities are dimensionless: energies in recoil energies E_R,
angular frequencies in recoil frequencies w_R = E_R/hbar, momenta on the
2n*hbar*k_L ladder, quasimomentum in hbar*k_L.  Hz/kHz appear only when
converting through ``LatticeConfig.recoil_frequency_hz``.
"""

from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

# w_R / 2pi for 87Rb in an 852 nm lattice.
RB87_852NM_RECOIL_HZ = 3162.0

# Reported momentum populations are truncated at |n| <= 5.
POPULATION_CUTOFF = 5

_TWO_PI = 2.0 * math.pi
_SQRT_HALF = 1.0 / math.sqrt(2.0)


class PhaseUndefinedError(ValueError):
    """Relative phase requested between arms with vanishing amplitude."""


class EigensolverError(RuntimeError):
    """Diagonalization failed; message carries basic conditioning info."""


def wrap_phase(theta: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    theta = theta % _TWO_PI
    if theta > math.pi:
        theta -= _TWO_PI
    return theta


def _frozen(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class LatticeConfig:
    """Static problem definition.

    Attributes
    ----------
    depth_V0 : float
        Lattice depth in recoil energies.
    basis_cutoff_nmax : int
        Plane waves n = -nmax..+nmax are kept in diagonalizations.
    recoil_frequency_hz : float
        w_R / 2pi, used to express transition frequencies in Hz.
    lattice_wavelength_m : float
        Metadata only; never enters the dimensionless computation.
    """

    depth_V0: float = 10.0
    basis_cutoff_nmax: int = 10
    recoil_frequency_hz: float = RB87_852NM_RECOIL_HZ
    lattice_wavelength_m: float = 852e-9

    def __post_init__(self) -> None:
        if self.depth_V0 < 0:
            raise ValueError(f"depth_V0 must be >= 0, got {self.depth_V0}")
        if self.basis_cutoff_nmax < 5:
            raise ValueError(
                f"basis_cutoff_nmax must be >= 5, got {self.basis_cutoff_nmax}"
            )
        if self.recoil_frequency_hz <= 0:
            raise ValueError(
                f"recoil_frequency_hz must be > 0, got {self.recoil_frequency_hz}"
            )

    @property
    def dim(self) -> int:
        return 2 * self.basis_cutoff_nmax + 1

    @property
    def n_values(self) -> np.ndarray:
        """Plane-wave indices -nmax..+nmax."""
        return np.arange(-self.basis_cutoff_nmax, self.basis_cutoff_nmax + 1)

    def to_json(self) -> str:
        return json.dumps(
            {
                "depth_V0": self.depth_V0,
                "basis_cutoff_nmax": self.basis_cutoff_nmax,
                "recoil_frequency_hz": self.recoil_frequency_hz,
                "lattice_wavelength_m": self.lattice_wavelength_m,
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "LatticeConfig":
        data = json.loads(text)
        return cls(
            depth_V0=float(data["depth_V0"]),
            basis_cutoff_nmax=int(data["basis_cutoff_nmax"]),
            recoil_frequency_hz=float(data["recoil_frequency_hz"]),
            lattice_wavelength_m=float(data["lattice_wavelength_m"]),
        )


@dataclass(frozen=True)
class MomentumState:
    """Complex amplitudes on the 2n*hbar*k_L ladder at fixed quasimomentum."""

    amplitudes: np.ndarray
    quasimomentum_q: float = 0.0

    def __post_init__(self) -> None:
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.ndim != 1 or amps.size % 2 == 0:
            raise ValueError("amplitudes must be a 1-D vector of odd length")
        norm = float(np.sum(np.abs(amps) ** 2))
        if abs(norm - 1.0) > 1e-10:
            raise ValueError(f"state must be normalized; got |psi|^2 = {norm!r}")
        object.__setattr__(self, "amplitudes", _frozen(amps, complex))

    @property
    def n_max(self) -> int:
        return (self.amplitudes.size - 1) // 2

    def amplitude(self, n: int) -> complex:
        """Amplitude of the plane wave with momentum (2n + q) hbar k_L."""
        if abs(n) > self.n_max:
            raise IndexError(f"|n| = {abs(n)} exceeds basis cutoff {self.n_max}")
        return complex(self.amplitudes[n + self.n_max])

    def inner(self, other: "MomentumState") -> complex:
        """<self|other>, aligning the two ladders on n and padding with zeros."""
        m = min(self.n_max, other.n_max)
        a = self.amplitudes[self.n_max - m : self.n_max + m + 1]
        b = other.amplitudes[other.n_max - m : other.n_max + m + 1]
        return complex(np.vdot(a, b))


@dataclass(frozen=True)
class BlochSolution:
    """Eigenpairs of the lattice Hamiltonian at one quasimomentum."""

    band_energies: np.ndarray
    band_states: tuple[MomentumState, ...]
    quasimomentum_q: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "band_energies", _frozen(self.band_energies, float))
        object.__setattr__(self, "band_states", tuple(self.band_states))

    @property
    def n_bands(self) -> int:
        return len(self.band_states)

    def _check_band(self, r: int) -> None:
        if not 0 <= r < self.n_bands:
            raise IndexError(f"band index {r} outside solved range 0..{self.n_bands - 1}")

    def energy(self, r: int) -> float:
        self._check_band(r)
        return float(self.band_energies[r])

    def state(self, r: int) -> MomentumState:
        self._check_band(r)
        return self.band_states[r]


@dataclass(frozen=True)
class PopulationVector:
    """Probabilities P_n of the 2n*hbar*k_L momentum states, n = -5..+5."""

    probabilities: np.ndarray

    def __post_init__(self) -> None:
        probs = np.asarray(self.probabilities, dtype=float)
        if probs.shape != (2 * POPULATION_CUTOFF + 1,):
            raise ValueError(
                f"expected {2 * POPULATION_CUTOFF + 1} entries (n = -5..5), got shape {probs.shape}"
            )
        if np.any(probs < -1e-12) or np.any(probs > 1.0 + 1e-12):
            raise ValueError("probabilities must lie in [0, 1]")
        if probs.sum() > 1.0 + 1e-9:
            raise ValueError(f"probabilities sum to {probs.sum()!r} > 1")
        object.__setattr__(self, "probabilities", _frozen(probs, float))

    @property
    def as_array(self) -> np.ndarray:
        return self.probabilities

    def p(self, n: int) -> float:
        if abs(n) > POPULATION_CUTOFF:
            raise IndexError(f"|n| = {abs(n)} exceeds population cutoff {POPULATION_CUTOFF}")
        return float(self.probabilities[n + POPULATION_CUTOFF])


@dataclass(frozen=True)
class SplitTarget:
    """Equal-weight superposition of the +/-2n*hbar*k_L states, phase theta."""

    order_n: int
    relative_phase_theta: float = 0.0

    def __post_init__(self) -> None:
        if self.order_n not in (1, 2, 3, 4):
            raise ValueError(f"order_n must be in 1..4, got {self.order_n}")
        object.__setattr__(
            self, "relative_phase_theta", wrap_phase(float(self.relative_phase_theta))
        )


class TransitionFrequency(NamedTuple):
    omega_wr: float
    frequency_hz: float


def build_hamiltonian(config: LatticeConfig, q: float = 0.0) -> np.ndarray:
    """Lattice Hamiltonian in the plane-wave basis, in units of E_R.

    Diagonal entries are the kinetic energies (2n + q)^2; the potential
    (V0/2) cos(2 x) couples n <-> n+/-1 with matrix element V0/4.
    """
    n = config.n_values
    h = np.diag(((2.0 * n + q) ** 2).astype(float))
    off = np.full(config.dim - 1, config.depth_V0 / 4.0)
    h[np.arange(config.dim - 1), np.arange(1, config.dim)] = off
    h[np.arange(1, config.dim), np.arange(config.dim - 1)] = off
    return h


def _parity_purify(energies: np.ndarray, vectors: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Give every eigenvector definite parity under n -> -n (valid at q = 0).

    Exactly degenerate groups (within ``tol``) are resolved into parity
    eigenvectors with even states first; all other vectors, whose parity is
    only polluted by round-off (worst for nearly degenerate high bands), are
    projected onto their dominant parity component and renormalized.
    """
    out = vectors.copy()
    i = 0
    while i < energies.size:
        j = i + 1
        while j < energies.size and energies[j] - energies[j - 1] <= tol:
            j += 1
        if j - i > 1:
            block = out[:, i:j]
            flipped = block[::-1, :]
            cols = []
            for part in (block + flipped, block - flipped):  # even first
                u, s, _ = np.linalg.svd(part, full_matrices=False)
                cols.extend(u[:, k] for k in range(s.size) if s[k] > 1e-8)
            if len(cols) != j - i:
                raise EigensolverError(
                    f"parity resolution of a degenerate group failed ({len(cols)} != {j - i})"
                )
            out[:, i:j] = np.column_stack(cols)
        i = j
    even = 0.5 * (out + out[::-1, :])
    odd = 0.5 * (out - out[::-1, :])
    pick_even = np.linalg.norm(even, axis=0) >= np.linalg.norm(odd, axis=0)
    out = np.where(pick_even[None, :], even, odd)
    return out / np.linalg.norm(out, axis=0, keepdims=True)


def _fix_phases(vectors: np.ndarray) -> np.ndarray:
    """Make each column's largest-magnitude component real positive."""
    out = vectors.astype(complex)
    for k in range(out.shape[1]):
        idx = int(np.argmax(np.abs(out[:, k])))
        pivot = out[idx, k]
        out[:, k] *= pivot.conjugate() / abs(pivot)
    # Drop the negligible imaginary parts left by the rotation.
    if np.abs(out.imag).max() < 1e-14:
        return out.real
    return out


def solve_bloch(config: LatticeConfig, q: float = 0.0) -> BlochSolution:
    """Diagonalize the lattice Hamiltonian at quasimomentum q.

    Bands come out sorted by energy; within exactly degenerate groups at
    q = 0, even-parity states precede odd ones.  Eigenvector phases are
    fixed so that the largest-magnitude component is real positive.
    """
    h = build_hamiltonian(config, q)
    try:
        energies, vectors = np.linalg.eigh(h)
    except np.linalg.LinAlgError as exc:
        scale = float(np.abs(h).max())
        raise EigensolverError(
            f"diagonalization failed at q={q}, dim={h.shape[0]}, max|H|={scale}: {exc}"
        ) from exc
    if q == 0.0:
        vectors = _parity_purify(energies, vectors)
    vectors = _fix_phases(vectors)
    states = tuple(
        MomentumState(vectors[:, r], quasimomentum_q=q) for r in range(energies.size)
    )
    return BlochSolution(band_energies=energies, band_states=states, quasimomentum_q=q)


def ground_state(config: LatticeConfig) -> MomentumState:
    """Ground Bloch state at q = 0."""
    return solve_bloch(config).state(0)


def transition_frequency(
    config: LatticeConfig,
    r: int,
    r_prime: int,
    solution: BlochSolution | None = None,
) -> TransitionFrequency:
    """|E_r' - E_r| / hbar, in recoil frequencies and in Hz."""
    if r == r_prime:
        raise ValueError("transition frequency requires two distinct bands")
    sol = solution if solution is not None else solve_bloch(config)
    gap = abs(sol.energy(r_prime) - sol.energy(r))
    return TransitionFrequency(omega_wr=gap, frequency_hz=gap * config.recoil_frequency_hz)


def make_split_state(target: SplitTarget, config: LatticeConfig) -> MomentumState:
    """Split state: 1/sqrt(2) at -n, e^{i theta}/sqrt(2) at +n, zero elsewhere."""
    n = target.order_n
    if n > config.basis_cutoff_nmax:
        raise ValueError(
            f"split order {n} exceeds basis cutoff {config.basis_cutoff_nmax}"
        )
    amps = np.zeros(config.dim, dtype=complex)
    center = config.basis_cutoff_nmax
    amps[center - n] = _SQRT_HALF
    amps[center + n] = cmath.exp(1j * target.relative_phase_theta) * _SQRT_HALF
    return MomentumState(amps)


def population_vector(state: MomentumState) -> PopulationVector:
    """P_n = |amplitude_n|^2 for |n| <= 5; mass outside the cutoff is dropped."""
    probs = np.zeros(2 * POPULATION_CUTOFF + 1)
    m = min(POPULATION_CUTOFF, state.n_max)
    window = state.amplitudes[state.n_max - m : state.n_max + m + 1]
    probs[POPULATION_CUTOFF - m : POPULATION_CUTOFF + m + 1] = np.abs(window) ** 2
    return PopulationVector(probs)


def split_population(target: SplitTarget) -> PopulationVector:
    """Population vector of a split state: P_{+/-n} = 1/2."""
    probs = np.zeros(2 * POPULATION_CUTOFF + 1)
    probs[POPULATION_CUTOFF - target.order_n] = 0.5
    probs[POPULATION_CUTOFF + target.order_n] = 0.5
    return PopulationVector(probs)


def error_metric(a: PopulationVector, b: PopulationVector) -> float:
    """Percent error between two population vectors.

    E = (1 - a.b / (|a||b|)) * 100; zero iff the vectors are parallel,
    100 when they are orthogonal.  Insensitive to any relative phase
    between arms because only populations enter.
    """
    va, vb = a.as_array, b.as_array
    na = float(np.linalg.norm(va))
    nb = float(np.linalg.norm(vb))
    if na == 0.0 or nb == 0.0:
        raise ValueError("error metric is undefined for a zero-magnitude population vector")
    cos = float(np.dot(va, vb)) / (na * nb)
    return (1.0 - min(cos, 1.0)) * 100.0


def split_overlap(state: MomentumState, target: SplitTarget) -> float:
    """|<split(n, theta)|state>|^2."""
    n = target.order_n
    if n > state.n_max:
        return 0.0
    a_minus = state.amplitude(-n)
    a_plus = state.amplitude(+n)
    amp = (a_minus + cmath.exp(-1j * target.relative_phase_theta) * a_plus) * _SQRT_HALF
    return abs(amp) ** 2


def extract_relative_phase(state: MomentumState, order_n: int) -> float:
    """arg(amplitude_{+n}) - arg(amplitude_{-n}), wrapped to (-pi, pi]."""
    a_plus = state.amplitude(order_n)
    a_minus = state.amplitude(-order_n)
    if abs(a_plus) <= 1e-6 or abs(a_minus) <= 1e-6:
        raise PhaseUndefinedError(
            f"relative phase undefined: |a(+{order_n})| = {abs(a_plus):.2e}, "
            f"|a(-{order_n})| = {abs(a_minus):.2e}"
        )
    return wrap_phase(cmath.phase(a_plus) - cmath.phase(a_minus))
