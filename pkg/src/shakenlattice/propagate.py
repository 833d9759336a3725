"""Time evolution under the shaken-lattice Hamiltonian.

The propagator is a symmetric (Strang) split-step spectral method on one
lattice period with periodic boundary conditions: half a kinetic step
applied in momentum space, a full potential step applied on the position
grid, half a kinetic step again.  The shaking phase is piecewise constant
per step, sampled at the step midpoint, which keeps the scheme second
order for the time-dependent Hamiltonian.  Everything is dimensionless
(energies E_R, times 1/w_R, quasimomentum hbar*k_L).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .lattice import (
    LatticeConfig,
    MomentumState,
    PopulationVector,
    SplitTarget,
    POPULATION_CUTOFF,
    population_vector,
    solve_bloch,
    split_population,
    make_split_state,
)

DEFAULT_DT = 1e-3
MIN_STEPS_PER_PERIOD = 50
DEFAULT_GRID_POINTS = 64

# 1 ms and 0.5 ms at the default recoil frequency, in 1/w_R.
SINGLE_TONE_DURATION = 19.87
OPTIMIZATION_DURATION = 9.93

ENVELOPE_NONE = "none"
ENVELOPE_SMOOTH = "smooth_window"
ENVELOPES = (ENVELOPE_NONE, ENVELOPE_SMOOTH)

NORM_ABORT_TOLERANCE = 1e-6

_TWO_PI = 2.0 * math.pi


class PropagationError(RuntimeError):
    """Evolution became unreliable (norm drift or basis overflow)."""


@dataclass(frozen=True)
class WaveformComponent:
    """One tone of the shaking function: alpha * sin(omega t + phase)."""

    omega: float
    alpha: float
    phase: float = 0.0

    def __post_init__(self) -> None:
        if self.omega <= 0:
            raise ValueError(f"component frequency must be > 0, got {self.omega}")
        if self.alpha < 0:
            raise ValueError(f"component amplitude must be >= 0, got {self.alpha}")


@dataclass(frozen=True)
class ShakingWaveform:
    """Multi-tone shaking phase phi(t) with an optional smooth window."""

    components: tuple[WaveformComponent, ...]
    duration_T: float
    envelope: str = ENVELOPE_SMOOTH

    def __post_init__(self) -> None:
        object.__setattr__(self, "components", tuple(self.components))
        if self.duration_T <= 0:
            raise ValueError(f"duration_T must be > 0, got {self.duration_T}")
        if self.envelope not in ENVELOPES:
            raise ValueError(f"unknown envelope {self.envelope!r}; expected one of {ENVELOPES}")

    @property
    def max_omega(self) -> float:
        return max((c.omega for c in self.components), default=0.0)

    @property
    def amplitude_sum(self) -> float:
        return sum(c.alpha for c in self.components)


def single_tone(
    omega: float,
    alpha: float,
    duration_T: float = SINGLE_TONE_DURATION,
    envelope: str = ENVELOPE_NONE,
    phase: float = 0.0,
) -> ShakingWaveform:
    """Convenience constructor for phi(t) = alpha * sin(omega t + phase)."""
    return ShakingWaveform(
        components=(WaveformComponent(omega=omega, alpha=alpha, phase=phase),),
        duration_T=duration_T,
        envelope=envelope,
    )


def _envelope_values(waveform: ShakingWaveform, times: np.ndarray) -> np.ndarray:
    if waveform.envelope == ENVELOPE_NONE:
        return np.ones_like(times)
    return np.sin(math.pi * times / waveform.duration_T) ** 2


def _phase_values(waveform: ShakingWaveform, times: np.ndarray) -> np.ndarray:
    """phi at the given times (no bounds checking)."""
    total = np.zeros_like(times)
    for c in waveform.components:
        if c.alpha != 0.0:
            total += c.alpha * np.sin(c.omega * times + c.phase)
    return _envelope_values(waveform, times) * total


def evaluate_phase(waveform: ShakingWaveform, t: float) -> float:
    """Shaking phase phi(t) = envelope(t) * sum_j alpha_j sin(w_j t + p_j)."""
    if not 0.0 <= t <= waveform.duration_T:
        raise ValueError(f"t = {t} outside the shaking window [0, {waveform.duration_T}]")
    return float(_phase_values(waveform, np.array([t]))[0])


def waveform_to_json(waveform: ShakingWaveform) -> str:
    return json.dumps(
        {
            "duration_T": waveform.duration_T,
            "envelope": waveform.envelope,
            "components": [
                {"omega_wr": c.omega, "alpha_rad": c.alpha, "phase_rad": c.phase}
                for c in waveform.components
            ],
        },
        indent=2,
    )


def waveform_from_json(text: str) -> ShakingWaveform:
    data = json.loads(text)
    return ShakingWaveform(
        components=tuple(
            WaveformComponent(
                omega=float(c["omega_wr"]),
                alpha=float(c["alpha_rad"]),
                phase=float(c.get("phase_rad", 0.0)),
            )
            for c in data["components"]
        ),
        duration_T=float(data["duration_T"]),
        envelope=str(data["envelope"]),
    )


# ---------------------------------------------------------------------------
# Spectral grid machinery.  Momentum amplitudes are stored FFT-ordered over a
# single lattice period, so plane wave n sits at FFT slot n mod M.

def _grid_points(n_max: int) -> int:
    m = DEFAULT_GRID_POINTS
    while m // 2 - 1 < n_max:
        m *= 2
    return m


def _fft_n(m: int) -> np.ndarray:
    return np.fft.fftfreq(m, d=1.0 / m).astype(int)


def _embed(amplitudes: np.ndarray, n_max: int, m: int) -> np.ndarray:
    grid = np.zeros(m, dtype=complex)
    for offset, n in enumerate(range(-n_max, n_max + 1)):
        grid[n % m] = amplitudes[offset]
    return grid


def _extract(grid_amps: np.ndarray, n_max: int) -> np.ndarray:
    m = grid_amps.shape[-1]
    ns = np.arange(-n_max, n_max + 1)
    return grid_amps[..., ns % m]


def _evolve_grid(
    amps: np.ndarray,
    q: np.ndarray,
    phases: np.ndarray,
    dt: float,
    depth_V0: float,
    sample_steps: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray | None]:
    """Run len(phases) Strang steps on FFT-ordered amplitudes.

    amps: (B, M) complex, q: (B,), phases: (K,) shared or (B, K) per member.
    If ``sample_steps`` is given (ascending step counts, 0 = initial state),
    snapshots after those step counts are returned as (S, B, M).
    """
    batch, m = amps.shape
    n = _fft_n(m)
    kin_half = np.exp(-0.5j * dt * (2.0 * n[None, :] + q[:, None]) ** 2)
    x2 = _TWO_PI * np.arange(m) / m  # 2 * (pi j / M)
    shared_phase = phases.ndim == 1
    n_steps = phases.shape[-1]

    recorded = None
    rec_idx = 0
    if sample_steps is not None:
        recorded = np.empty((len(sample_steps), batch, m), dtype=complex)
        while rec_idx < len(sample_steps) and sample_steps[rec_idx] == 0:
            recorded[rec_idx] = amps
            rec_idx += 1

    c = amps.copy()
    pot_scale = -0.5j * depth_V0 * dt
    for k in range(n_steps):
        c *= kin_half
        psi = np.fft.ifft(c, axis=-1, norm="ortho")
        if shared_phase:
            psi *= np.exp(pot_scale * np.cos(x2 + phases[k]))[None, :]
        else:
            psi *= np.exp(pot_scale * np.cos(x2[None, :] + phases[:, k, None]))
        c = np.fft.fft(psi, axis=-1, norm="ortho")
        c *= kin_half
        if recorded is not None:
            while rec_idx < len(sample_steps) and sample_steps[rec_idx] == k + 1:
                recorded[rec_idx] = c
                rec_idx += 1
    return c, recorded


def _populations(grid_amps: np.ndarray) -> np.ndarray:
    """P_n for n = -5..5 from FFT-ordered amplitudes (last axis)."""
    return np.abs(_extract(grid_amps, POPULATION_CUTOFF)) ** 2


def _resolve_steps(waveform: ShakingWaveform, dt: float | None) -> tuple[int, float]:
    target = DEFAULT_DT if dt is None else dt
    if target <= 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    omega_max = waveform.max_omega
    if omega_max > 0:
        target = min(target, _TWO_PI / (MIN_STEPS_PER_PERIOD * omega_max))
    n_steps = max(1, math.ceil(waveform.duration_T / target))
    return n_steps, waveform.duration_T / n_steps


def step(
    state: MomentumState, phi_now: float, dt: float, config: LatticeConfig
) -> MomentumState:
    """One Strang step at fixed shaking phase; unitary up to round-off."""
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    m = _grid_points(state.n_max)
    grid = _embed(state.amplitudes, state.n_max, m)[None, :]
    out, _ = _evolve_grid(
        grid,
        np.array([state.quasimomentum_q]),
        np.array([phi_now]),
        dt,
        config.depth_V0,
    )
    return MomentumState(_extract(out[0], state.n_max), state.quasimomentum_q)


@dataclass(frozen=True)
class Trajectory:
    """Sampled diagnostics of one propagation."""

    times: np.ndarray
    norms: np.ndarray
    errors_pct: np.ndarray
    overlap_theta0: np.ndarray
    overlap_thetapi: np.ndarray
    populations: np.ndarray
    final_state: MomentumState
    states: tuple[MomentumState, ...] | None = None

    def __post_init__(self) -> None:
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("sample times must be strictly increasing")

    @property
    def min_error_pct(self) -> float:
        return float(np.min(self.errors_pct))

    @property
    def argmin_error(self) -> int:
        return int(np.argmin(self.errors_pct))

    @property
    def max_error_pct(self) -> float:
        return float(np.max(self.errors_pct))


def _target_population(target: SplitTarget | PopulationVector) -> PopulationVector:
    if isinstance(target, SplitTarget):
        return split_population(target)
    return target


def _sample_indices(n_steps: int, stride: int) -> np.ndarray:
    samples = list(range(0, n_steps + 1, max(1, stride)))
    if samples[-1] != n_steps:
        samples.append(n_steps)
    return np.array(samples)


def propagate(
    initial: MomentumState,
    waveform: ShakingWaveform,
    config: LatticeConfig,
    target: SplitTarget | PopulationVector,
    dt: float | None = None,
    sample_stride: int = 50,
    record_states: bool = False,
) -> Trajectory:
    """Evolve ``initial`` through the full shaking window, recording diagnostics.

    The timestep is tightened automatically so the fastest tone is resolved
    by at least MIN_STEPS_PER_PERIOD steps per period.  Diagnostics (norm,
    populations, the population error against ``target``, and the overlaps
    with the theta = 0 and theta = pi split states) are recorded every
    ``sample_stride`` steps.  Aborts if the norm drifts by more than
    NORM_ABORT_TOLERANCE.
    """
    n_steps, dt_eff = _resolve_steps(waveform, dt)
    m = _grid_points(initial.n_max)
    grid = _embed(initial.amplitudes, initial.n_max, m)[None, :]
    midpoints = (np.arange(n_steps) + 0.5) * dt_eff
    phases = _phase_values(waveform, midpoints)
    samples = _sample_indices(n_steps, sample_stride)
    final, recorded = _evolve_grid(
        grid,
        np.array([initial.quasimomentum_q]),
        phases,
        dt_eff,
        config.depth_V0,
        sample_steps=samples,
    )
    snaps = recorded[:, 0, :]
    times = samples * dt_eff
    norms = np.sum(np.abs(snaps) ** 2, axis=1)
    drift = np.abs(1.0 - norms).max()
    if drift > NORM_ABORT_TOLERANCE:
        raise PropagationError(
            f"norm drifted by {drift:.3e} (tolerance {NORM_ABORT_TOLERANCE:.0e}); "
            f"dt={dt_eff:.3e}, steps={n_steps}, max|phi|<={waveform.amplitude_sum:.3f}"
        )
    pops = _populations(snaps)
    target_pop = _target_population(target).as_array
    dots = pops @ target_pop
    scale = np.linalg.norm(pops, axis=1) * np.linalg.norm(target_pop)
    errors = (1.0 - np.minimum(dots / scale, 1.0)) * 100.0
    if isinstance(target, SplitTarget):
        n = target.order_n
        a_minus = _extract(snaps, n)[:, 0]
        a_plus = _extract(snaps, n)[:, -1]
        d0 = np.abs((a_minus + a_plus) / math.sqrt(2.0)) ** 2
        dpi = np.abs((a_minus - a_plus) / math.sqrt(2.0)) ** 2
    else:
        d0 = np.full(len(times), np.nan)
        dpi = np.full(len(times), np.nan)
    n_keep = m // 2 - 1
    states = None
    if record_states:
        states = tuple(
            MomentumState(_extract(s, n_keep), initial.quasimomentum_q) for s in snaps
        )
    return Trajectory(
        times=times,
        norms=norms,
        errors_pct=errors,
        overlap_theta0=d0,
        overlap_thetapi=dpi,
        populations=pops,
        final_state=MomentumState(_extract(final[0], n_keep), initial.quasimomentum_q),
        states=states,
    )


def acceleration_hold(
    config: LatticeConfig,
    order_n: int,
    alpha: float = 1.0,
    duration: float = SINGLE_TONE_DURATION,
    theta: float = 0.0,
    dt: float | None = None,
    sample_stride: int = 50,
) -> Trajectory:
    """Hold a split state in the counterpropagating-lattice drive.

    Drives at omega = 4 * order_n recoil frequencies with no envelope,
    starting from split(order_n, theta), and records the error against the
    same split order throughout.
    """
    if order_n not in (3, 4):
        raise ValueError(f"acceleration hold supports order_n in (3, 4), got {order_n}")
    target = SplitTarget(order_n=order_n, relative_phase_theta=theta)
    initial = make_split_state(target, config)
    waveform = single_tone(
        omega=4.0 * order_n, alpha=alpha, duration_T=duration, envelope=ENVELOPE_NONE
    )
    return propagate(initial, waveform, config, target, dt=dt, sample_stride=sample_stride)


@dataclass(frozen=True)
class EnsembleResult:
    """Quasimomentum-averaged populations and the resulting error floor."""

    times: np.ndarray
    errors_pct: np.ndarray
    mean_populations: np.ndarray
    member_populations: np.ndarray
    member_quasimomenta: np.ndarray

    @property
    def min_error_pct(self) -> float:
        return float(np.min(self.errors_pct))


def quasimomentum_ensemble(
    waveform: ShakingWaveform,
    sigma_q: float,
    n_samples: int,
    target: SplitTarget | PopulationVector,
    config: LatticeConfig,
    seed: int = 0,
    width_convention: str = "std",
    sampling: str = "random",
    dt: float | None = None,
    sample_stride: int = 50,
) -> EnsembleResult:
    """Average the shaking dynamics over a Gaussian quasimomentum spread.

    ``sigma_q`` is the full momentum width in hbar*k_L; members represent
    a centered Gaussian whose standard deviation is sigma_q/2
    (``width_convention="std"``) or sigma_q interpreted as a FWHM
    (``width_convention="fwhm"``).  Members are either drawn with the
    seeded generator (``sampling="random"``) or placed deterministically
    at the Gaussian quantile midpoints (``sampling="stratified"``, lower
    variance for the same member count).  Each member starts in the ground
    Bloch state at its own quasimomentum; the error is computed on the
    averaged population vector.
    """
    if sigma_q < 0:
        raise ValueError(f"sigma_q must be >= 0, got {sigma_q}")
    if n_samples < 1:
        raise ValueError(f"n_samples must be >= 1, got {n_samples}")
    if width_convention == "std":
        std = sigma_q / 2.0
    elif width_convention == "fwhm":
        std = sigma_q / (2.0 * math.sqrt(2.0 * math.log(2.0)))
    else:
        raise ValueError(f"unknown width convention {width_convention!r}")
    if std == 0.0:
        qs = np.zeros(n_samples)
    elif sampling == "random":
        qs = np.random.default_rng(seed).normal(0.0, std, n_samples)
    elif sampling == "stratified":
        qs = std * ndtri((np.arange(n_samples) + 0.5) / n_samples)
    else:
        raise ValueError(f"unknown sampling mode {sampling!r}")

    n_steps, dt_eff = _resolve_steps(waveform, dt)
    n_max = config.basis_cutoff_nmax
    m = _grid_points(n_max)
    grid = np.empty((n_samples, m), dtype=complex)
    for i, q in enumerate(qs):
        ground = solve_bloch(config, q=float(q)).state(0)
        grid[i] = _embed(ground.amplitudes, n_max, m)
    midpoints = (np.arange(n_steps) + 0.5) * dt_eff
    phases = _phase_values(waveform, midpoints)
    samples = _sample_indices(n_steps, sample_stride)
    _, recorded = _evolve_grid(
        grid, qs.astype(float), phases, dt_eff, config.depth_V0, sample_steps=samples
    )
    norms = np.sum(np.abs(recorded) ** 2, axis=2)
    drift = np.abs(1.0 - norms).max()
    if drift > NORM_ABORT_TOLERANCE:
        raise PropagationError(f"ensemble norm drifted by {drift:.3e}")
    member_pops = _populations(recorded)  # (S, B, 11)
    mean_pops = member_pops.mean(axis=1)
    target_pop = _target_population(target).as_array
    dots = mean_pops @ target_pop
    scale = np.linalg.norm(mean_pops, axis=1) * np.linalg.norm(target_pop)
    errors = (1.0 - np.minimum(dots / scale, 1.0)) * 100.0
    return EnsembleResult(
        times=samples * dt_eff,
        errors_pct=errors,
        mean_populations=mean_pops,
        member_populations=np.swapaxes(member_pops, 0, 1),
        member_quasimomenta=qs,
    )


def oracle_propagate(
    initial: MomentumState,
    waveform: ShakingWaveform,
    config: LatticeConfig,
    dt_dense: float,
) -> MomentumState:
    """Reference integrator: exact exponentials of the instantaneous H.

    Builds the full (2 n_max + 1)-dimensional Hamiltonian at each step
    midpoint and applies its eigendecomposition exponential.  Expensive;
    guarded to n_max <= 8 and meant for validation only.
    """
    if initial.n_max > 8:
        raise ValueError(f"oracle integrator is limited to n_max <= 8, got {initial.n_max}")
    if dt_dense <= 0:
        raise ValueError(f"dt_dense must be > 0, got {dt_dense}")
    n_steps = max(1, math.ceil(waveform.duration_T / dt_dense))
    dt = waveform.duration_T / n_steps
    ns = np.arange(-initial.n_max, initial.n_max + 1)
    kinetic = np.diag(((2.0 * ns + initial.quasimomentum_q) ** 2).astype(complex))
    dim = ns.size
    coupling = config.depth_V0 / 4.0
    c = initial.amplitudes.astype(complex)
    midpoints = (np.arange(n_steps) + 0.5) * dt
    phases = _phase_values(waveform, midpoints)
    rows = np.arange(1, dim)
    cols = np.arange(dim - 1)
    for phi in phases:
        h = kinetic.copy()
        h[rows, cols] = coupling * np.exp(1j * phi)   # raising: n -> n+1
        h[cols, rows] = coupling * np.exp(-1j * phi)
        energies, vectors = np.linalg.eigh(h)
        c = vectors @ (np.exp(-1j * energies * dt) * (vectors.conj().T @ c))
    return MomentumState(c, initial.quasimomentum_q)


def trajectory_header() -> list[str]:
    return (
        ["t_wr", "norm", "err_pct", "D_theta0", "D_thetapi"]
        + [f"P_{n}" for n in range(-POPULATION_CUTOFF, POPULATION_CUTOFF + 1)]
    )


def trajectory_rows(trajectory: Trajectory) -> list[list[float]]:
    rows = []
    for i in range(len(trajectory.times)):
        rows.append(
            [
                float(trajectory.times[i]),
                float(trajectory.norms[i]),
                float(trajectory.errors_pct[i]),
                float(trajectory.overlap_theta0[i]),
                float(trajectory.overlap_thetapi[i]),
            ]
            + [float(p) for p in trajectory.populations[i]]
        )
    return rows
