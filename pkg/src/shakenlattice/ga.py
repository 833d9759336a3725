"""Genetic optimization of shaking waveforms over restricted frequency sets.

A genome holds one amplitude and one phase offset per subspace frequency.
Fitness is the population error of the final state after shaking the
ground Bloch state through the decoded waveform.  Evolution is elitist
tournament selection with uniform crossover and per-gene Gaussian
mutation; every random draw comes from a stream keyed on
(seed, generation, member index), so results do not depend on evaluation
order and are bit-reproducible.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .analytics import FrequencySubspace, build_subspace
from .lattice import (
    LatticeConfig,
    MomentumState,
    PopulationVector,
    PhaseUndefinedError,
    SplitTarget,
    ground_state,
    make_split_state,
)
from .propagate import (
    ENVELOPE_SMOOTH,
    MIN_STEPS_PER_PERIOD,
    OPTIMIZATION_DURATION,
    PropagationError,
    ShakingWaveform,
    Trajectory,
    WaveformComponent,
    propagate,
    _embed,
    _envelope_values,
    _evolve_grid,
    _grid_points,
    _populations,
    _target_population,
)
from .lattice import extract_relative_phase

_TWO_PI = 2.0 * math.pi

WORST_FITNESS = 100.0


@dataclass(frozen=True)
class Genome:
    """Per-frequency amplitudes (rad) and phase offsets (rad)."""

    amplitudes: np.ndarray
    phases: np.ndarray

    def __post_init__(self) -> None:
        amps = np.array(self.amplitudes, dtype=float)
        phases = np.array(self.phases, dtype=float)
        if amps.shape != phases.shape or amps.ndim != 1:
            raise ValueError("amplitudes and phases must be 1-D arrays of equal length")
        amps.setflags(write=False)
        phases.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "phases", phases)

    @property
    def n_frequencies(self) -> int:
        return self.amplitudes.size


@dataclass(frozen=True)
class GaParams:
    population_size: int = 40
    generations: int = 1000
    elite_count: int = 2
    tournament_size: int = 3
    mutation_rate: float = 0.15
    mutation_sigma: float = 0.1
    phase_mutation_sigma: float = 0.3
    crossover_rate: float = 0.8
    alpha_max: float = 3.0
    rng_seed: int = 0
    target_error: float | None = None
    duration_T: float = OPTIMIZATION_DURATION
    dt: float | None = None

    def __post_init__(self) -> None:
        if self.population_size < 4:
            raise ValueError(f"population_size must be >= 4, got {self.population_size}")
        if not 0 <= self.elite_count < self.population_size:
            raise ValueError("elite_count must be in [0, population_size)")
        if self.tournament_size < 1:
            raise ValueError("tournament_size must be >= 1")
        for name in ("mutation_rate", "crossover_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        if self.alpha_max <= 0:
            raise ValueError("alpha_max must be > 0")
        if self.generations < 1:
            raise ValueError("generations must be >= 1")
        if self.duration_T <= 0:
            raise ValueError("duration_T must be > 0")


@dataclass(frozen=True)
class OptimizationRun:
    """History and artifacts of one GA run."""

    subspace_kind: str
    seed: int
    best_errors: np.ndarray
    mean_errors: np.ndarray
    best_genome: Genome
    best_trajectory: Trajectory
    final_theta: float
    wall_clock_s: float

    @property
    def final_error(self) -> float:
        return float(self.best_errors[-1])

    @property
    def generations_run(self) -> int:
        return len(self.best_errors)

    def iterations_to(self, threshold_pct: float) -> int | None:
        """First generation whose best error is below the threshold."""
        hits = np.nonzero(self.best_errors < threshold_pct)[0]
        return int(hits[0]) if hits.size else None


def _member_rng(seed: int, generation: int, member: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=(seed, generation, member)))


def random_genome(subspace: FrequencySubspace, params: GaParams, rng: np.random.Generator) -> Genome:
    m = len(subspace)
    return Genome(
        amplitudes=rng.uniform(0.0, params.alpha_max, m),
        phases=rng.uniform(0.0, _TWO_PI, m),
    )


def initial_population(subspace: FrequencySubspace, params: GaParams) -> list[Genome]:
    return [
        random_genome(subspace, params, _member_rng(params.rng_seed, 0, i))
        for i in range(params.population_size)
    ]


def decode(genome: Genome, subspace: FrequencySubspace, duration_T: float) -> ShakingWaveform:
    """Genome -> smooth-windowed multi-tone waveform on the subspace."""
    if genome.n_frequencies != len(subspace):
        raise ValueError(
            f"genome length {genome.n_frequencies} != subspace size {len(subspace)}"
        )
    components = tuple(
        WaveformComponent(omega=omega, alpha=float(a), phase=float(p))
        for (_, omega), a, p in zip(subspace.frequencies, genome.amplitudes, genome.phases)
    )
    return ShakingWaveform(
        components=components, duration_T=duration_T, envelope=ENVELOPE_SMOOTH
    )


def _fitness_steps(subspace: FrequencySubspace, params: GaParams) -> tuple[int, float]:
    target = params.dt
    if target is None:
        omega_max = float(subspace.omegas.max())
        target = _TWO_PI / (MIN_STEPS_PER_PERIOD * omega_max)
    n_steps = max(1, math.ceil(params.duration_T / target))
    return n_steps, params.duration_T / n_steps


def _population_errors(
    genomes: Sequence[Genome],
    subspace: FrequencySubspace,
    target: SplitTarget | PopulationVector,
    config: LatticeConfig,
    params: GaParams,
    initial: MomentumState,
) -> np.ndarray:
    """Fitness of every genome, evaluated in one batched propagation."""
    n_steps, dt = _fitness_steps(subspace, params)
    times = (np.arange(n_steps) + 0.5) * dt
    omegas = subspace.omegas  # (J,)
    sin_t = np.sin(omegas[:, None] * times[None, :])  # (J, K)
    cos_t = np.cos(omegas[:, None] * times[None, :])
    amp = np.stack([g.amplitudes for g in genomes])  # (B, J)
    pha = np.stack([g.phases for g in genomes])
    envelope = np.sin(math.pi * times / params.duration_T) ** 2
    phases = ((amp * np.cos(pha)) @ sin_t + (amp * np.sin(pha)) @ cos_t) * envelope[None, :]
    m = _grid_points(initial.n_max)
    grid = np.broadcast_to(
        _embed(initial.amplitudes, initial.n_max, m), (len(genomes), m)
    ).copy()
    q = np.full(len(genomes), initial.quasimomentum_q)
    try:
        final, _ = _evolve_grid(grid, q, phases, dt, config.depth_V0)
    except FloatingPointError as exc:  # pragma: no cover - defensive
        raise PropagationError(str(exc)) from exc
    norms = np.sum(np.abs(final) ** 2, axis=1)
    pops = _populations(final)
    target_pop = _target_population(target).as_array
    scale = np.linalg.norm(pops, axis=1) * np.linalg.norm(target_pop)
    errors = (1.0 - np.minimum(pops @ target_pop / scale, 1.0)) * 100.0
    # A member whose norm drifted is reported at the worst fitness.
    errors[np.abs(1.0 - norms) > 1e-6] = WORST_FITNESS
    return errors


def fitness(
    genome: Genome,
    subspace: FrequencySubspace,
    target: SplitTarget | PopulationVector,
    config: LatticeConfig,
    params: GaParams | None = None,
    initial: MomentumState | None = None,
) -> float:
    """Percent population error of the final shaken state against the target."""
    params = params if params is not None else GaParams()
    initial = initial if initial is not None else ground_state(config)
    try:
        return float(
            _population_errors([genome], subspace, target, config, params, initial)[0]
        )
    except PropagationError:
        return WORST_FITNESS


def _clip_amplitudes(values: np.ndarray, alpha_max: float) -> np.ndarray:
    return np.clip(values, 0.0, alpha_max)


def evolve(
    genomes: Sequence[Genome],
    fitnesses: np.ndarray,
    params: GaParams,
    generation: int,
) -> list[Genome]:
    """Produce the next generation (elitism + tournaments + crossover + mutation).

    ``generation`` numbers the generation being created; every stochastic
    choice for child i is drawn from the stream (rng_seed, generation, i).
    """
    if len(genomes) != params.population_size or len(fitnesses) != len(genomes):
        raise ValueError("population/fitness size mismatch")
    order = np.argsort(fitnesses, kind="stable")
    nxt: list[Genome] = [genomes[int(order[k])] for k in range(params.elite_count)]
    n_genes = genomes[0].n_frequencies
    for i in range(params.elite_count, params.population_size):
        rng = _member_rng(params.rng_seed, generation, i)
        parents = []
        for _ in range(2):
            contenders = rng.integers(0, params.population_size, params.tournament_size)
            parents.append(genomes[int(contenders[np.argmin(fitnesses[contenders])])])
        p1, p2 = parents
        if rng.uniform() < params.crossover_rate:
            mask = rng.uniform(size=n_genes) < 0.5
            amp = np.where(mask, p1.amplitudes, p2.amplitudes)
            pha = np.where(mask, p1.phases, p2.phases)
        else:
            amp = p1.amplitudes.copy()
            pha = p1.phases.copy()
        mutate = rng.uniform(size=n_genes) < params.mutation_rate
        amp = np.where(
            mutate, amp + rng.normal(0.0, params.mutation_sigma, n_genes), amp
        )
        pha = np.where(
            mutate, pha + rng.normal(0.0, params.phase_mutation_sigma, n_genes), pha
        )
        nxt.append(
            Genome(
                amplitudes=_clip_amplitudes(amp, params.alpha_max),
                phases=np.mod(pha, _TWO_PI),
            )
        )
    return nxt


def optimize(
    subspace_kind: str,
    target: SplitTarget | PopulationVector,
    params: GaParams,
    config: LatticeConfig,
    initial_state: MomentumState | None = None,
) -> OptimizationRun:
    """Full GA loop; stops early once ``params.target_error`` is beaten.

    Returns per-generation best/mean errors, the best genome, its full
    diagnostic trajectory, and the relative phase of its final state
    (NaN when an arm amplitude vanishes or the target is not a split state).
    """
    started = time.perf_counter()
    subspace = build_subspace(config, subspace_kind, duration_T=params.duration_T)
    initial = initial_state if initial_state is not None else ground_state(config)
    genomes = initial_population(subspace, params)
    best_errors: list[float] = []
    mean_errors: list[float] = []
    best_genome: Genome | None = None
    best_error = math.inf
    for generation in range(params.generations):
        errors = _population_errors(genomes, subspace, target, config, params, initial)
        gen_best = int(np.argmin(errors))
        if errors[gen_best] < best_error:
            best_error = float(errors[gen_best])
            best_genome = genomes[gen_best]
        best_errors.append(best_error)
        mean_errors.append(float(errors.mean()))
        if params.target_error is not None and best_error < params.target_error:
            break
        if generation + 1 < params.generations:
            genomes = evolve(genomes, errors, params, generation + 1)
    assert best_genome is not None
    waveform = decode(best_genome, subspace, params.duration_T)
    trajectory = propagate(initial, waveform, config, target)
    theta = math.nan
    if isinstance(target, SplitTarget):
        try:
            theta = extract_relative_phase(trajectory.final_state, target.order_n)
        except PhaseUndefinedError:
            theta = math.nan
    return OptimizationRun(
        subspace_kind=subspace_kind,
        seed=params.rng_seed,
        best_errors=np.array(best_errors),
        mean_errors=np.array(mean_errors),
        best_genome=best_genome,
        best_trajectory=trajectory,
        final_theta=theta,
        wall_clock_s=time.perf_counter() - started,
    )


@dataclass(frozen=True)
class MultiRestartResult:
    best: OptimizationRun
    runs: tuple[OptimizationRun, ...]

    @property
    def final_errors(self) -> np.ndarray:
        return np.array([run.final_error for run in self.runs])


def multi_restart(
    k: int,
    subspace_kind: str,
    target: SplitTarget | PopulationVector,
    params: GaParams,
    config: LatticeConfig,
    initial_state: MomentumState | None = None,
) -> MultiRestartResult:
    """Run k independently seeded optimizations and keep the best final error.

    Run i uses rng_seed + i, so restarts are distinct but reproducible.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    runs = tuple(
        optimize(
            subspace_kind,
            target,
            replace(params, rng_seed=params.rng_seed + i),
            config,
            initial_state=initial_state,
        )
        for i in range(k)
    )
    best = min(runs, key=lambda run: run.final_error)
    return MultiRestartResult(best=best, runs=runs)


def staged_split(
    params: GaParams,
    config: LatticeConfig,
    theta: float = 0.0,
    from_order: int = 2,
    to_order: int = 3,
    subspace_kind: str = "select",
) -> OptimizationRun:
    """Optimize transfer from one split order into the next.

    Starts from split(from_order, theta) instead of the ground state; the
    full preparation pipeline therefore doubles the total shaking time.
    """
    initial = make_split_state(SplitTarget(from_order, theta), config)
    return optimize(
        subspace_kind,
        SplitTarget(to_order),
        params,
        config,
        initial_state=initial,
    )
