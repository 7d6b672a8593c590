"""Replicated experiment runs producing tabular excess-risk records.

Five experiment ids are supported:

* ``precond``     -- fixed mini-batch SGD on a width-1 gaussian-bump
  target, swept over effective kernel widths; full risk trajectories.
* ``critbatch``   -- three aggressive steps on a matern target, swept
  over batch sizes; final risk per batch size.
* ``step-smooth`` -- one-pass SGD on a matern target, swept over kernel
  orders and step-sizes; final risk per (order, gamma).
* ``step-batch``  -- one-pass SGD (T = ceil(n/b)) on a gaussian-bump
  target fitted with a matern kernel, swept over (gamma, batch) pairs.
* ``rate``        -- early-stopping schedule at benchmark smoothness
  across sample sizes, for empirical rate fitting.

Every run is a pure function of (config, master seed): replicate data,
sampling and test-point streams are derived from (master seed, role,
replicate, grid index), so results do not depend on scheduling or the
worker count.  Rows aggregate across replicates into median rows tagged
seed = -1.

CSV schema (UTF-8, header row):
``experiment,seed,n,b,gamma,T,scale_param,iteration,excess_risk,status``
with status one of ``ok``, ``diverged``, ``pre-tail``.
"""

from __future__ import annotations

import csv
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import DivergenceError
from .kernels import KernelSpec, gaussian, gram, gram_cross, matern
from .linalg import estimate_nu
from .schedule import choose_params
from .solver import SgdConfig, sgd_fit
from .synth import TargetFunction, eval_target, sample_dataset

EXPERIMENTS = ("precond", "critbatch", "step-smooth", "step-batch", "rate")

CSV_HEADER = (
    "experiment,seed,n,b,gamma,T,scale_param,iteration,excess_risk,status"
)

BUMP_CENTERS = (-0.5, 0.0, 0.5)
BUMP_WEIGHTS = (1.0, -1.0, 1.0)

# seed-derivation roles
_ROLE_DATA = 0
_ROLE_SGD = 1
_ROLE_RISK = 2
_ROLE_SPECTRUM = 3


@dataclass(frozen=True)
class ExperimentConfig:
    """Declarative description of one experiment sweep."""

    experiment: str
    n: int = 3000
    b: int = 300
    gamma: float = 1e-3
    iterations: int = 4096
    widths: tuple[float, ...] = (0.5, 1.0, 2.0)
    orders: tuple[float, ...] = (0.5, 1.5, 2.5, 3.5)
    gammas: tuple[float, ...] = ()
    batches: tuple[int, ...] = ()
    ns: tuple[int, ...] = (256, 512, 1024, 2048, 4096)
    seeds: tuple[int, ...] = tuple(range(10))
    noise_var: float = 0.01
    m_test: int = 2000

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(
                f"experiment must be one of {EXPERIMENTS}, got {self.experiment!r}"
            )
        if not self.seeds:
            raise ValueError("seeds must be nonempty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("seeds must be distinct")
        for name in ("widths", "orders", "gammas", "batches", "ns"):
            if tuple(getattr(self, name)) == () and name in _REQUIRED_GRIDS.get(
                self.experiment, ()
            ):
                raise ValueError(f"{name} must be nonempty for {self.experiment}")
        if self.n < 1 or self.m_test < 1 or self.iterations < 1:
            raise ValueError("n, m_test and T must be positive")
        if self.noise_var < 0:
            raise ValueError("noise_var must be nonnegative")


_REQUIRED_GRIDS = {
    "precond": ("widths",),
    "critbatch": ("batches",),
    "step-smooth": ("orders", "gammas"),
    "step-batch": ("batches", "gammas"),
    "rate": ("ns",),
}

_DEFAULTS = {
    "precond": dict(n=3000, b=300, gamma=1e-3, iterations=4096),
    "critbatch": dict(
        n=3000,
        gamma=10.0,
        iterations=3,
        batches=(1, 2, 4, 8, 16, 32, 64, 128, 256, 512, 1024, 2048, 3000),
    ),
    "step-smooth": dict(
        n=1000,
        b=1,
        gammas=(2.0**-8, 2.0**-6, 2.0**-4, 2.0**-2, 1.0, 4.0),
    ),
    "step-batch": dict(
        n=3000,
        batches=(1, 4, 16, 64, 256, 1024),
        gammas=(0.0025, 0.01, 0.04, 0.16, 0.64, 2.56),
    ),
    "rate": dict(seeds=tuple(range(20))),
}


def default_config(experiment: str) -> ExperimentConfig:
    """Config preloaded with the experiment's reference settings."""
    if experiment not in EXPERIMENTS:
        raise ValueError(f"experiment must be one of {EXPERIMENTS}, got {experiment!r}")
    return ExperimentConfig(experiment=experiment, **_DEFAULTS.get(experiment, {}))


@dataclass(frozen=True)
class ResultRow:
    experiment: str
    seed: int
    n: int
    b: int
    gamma: float
    iterations: int
    scale_param: float
    iteration: int
    excess_risk: float
    status: str


@dataclass(frozen=True)
class ExperimentResult:
    rows: tuple[ResultRow, ...]

    def to_csv(self, target) -> None:
        """Write rows as CSV to a path or an open text file."""
        if hasattr(target, "write"):
            self._write(target)
        else:
            with Path(target).open("w", newline="") as handle:
                self._write(handle)

    def _write(self, handle) -> None:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(CSV_HEADER.split(","))
        for row in self.rows:
            writer.writerow(
                [
                    row.experiment,
                    row.seed,
                    row.n,
                    row.b,
                    repr(row.gamma),
                    row.iterations,
                    repr(row.scale_param),
                    row.iteration,
                    repr(row.excess_risk),
                    row.status,
                ]
            )


def derive_seed(*parts: int) -> int:
    """Fold (master seed, role, indices...) into one 64-bit stream seed."""
    seq = np.random.SeedSequence([int(p) & 0xFFFFFFFF for p in parts])
    return int(seq.generate_state(1, np.uint64)[0])


def gaussian_bump_target(width: float = 1.0) -> TargetFunction:
    """Three gaussian bumps at -0.5, 0, 0.5 with weights 1, -1, 1."""
    return TargetFunction(
        spec=gaussian(width),
        centers=np.asarray(BUMP_CENTERS).reshape(-1, 1),
        weights=np.asarray(BUMP_WEIGHTS),
    )


def matern_bump_target(order: float = 3.5, lengthscale: float = 1.0) -> TargetFunction:
    """Three matern bumps at -0.5, 0, 0.5 with weights 1, -1, 1."""
    return TargetFunction(
        spec=matern(order, lengthscale),
        centers=np.asarray(BUMP_CENTERS).reshape(-1, 1),
        weights=np.asarray(BUMP_WEIGHTS),
    )


def geometric_checkpoints(iterations: int) -> tuple[int, ...]:
    """{0, 1, 2, 4, 8, ...} up to and including the final iteration."""
    marks = {0, iterations}
    power = 1
    while power < iterations:
        marks.add(power)
        power *= 2
    return tuple(sorted(marks))


@dataclass(frozen=True)
class _Task:
    experiment: str
    seed: int
    n: int
    b: int
    gamma: float
    iterations: int
    scale_param: float
    target: TargetFunction
    spec_base: KernelSpec
    shift: float
    checkpoints: tuple[int, ...]
    data_seed: int
    sgd_seed: int
    risk_seed: int
    noise_var: float
    m_test: int


def _run_task(task: _Task) -> list[ResultRow]:
    data = sample_dataset(task.target, task.n, task.noise_var, task.data_seed)
    config = SgdConfig(
        gamma=task.gamma,
        batch=task.b,
        iterations=task.iterations,
        sampling="iid-uniform",
        seed=task.sgd_seed,
    )

    def _row(iteration, risk, status):
        return ResultRow(
            experiment=task.experiment,
            seed=task.seed,
            n=task.n,
            b=task.b,
            gamma=task.gamma,
            iterations=task.iterations,
            scale_param=task.scale_param,
            iteration=iteration,
            excess_risk=risk,
            status=status,
        )

    try:
        with warnings.catch_warnings():
            # aggressive step-sizes are part of some sweeps; divergence is
            # detected and recorded instead of warned about
            warnings.simplefilter("ignore")
            model = sgd_fit(
                data.xs,
                data.ys,
                task.spec_base,
                task.shift,
                config,
                checkpoints=task.checkpoints,
            )
    except DivergenceError as exc:
        return [_row(exc.iteration, float("nan"), "diverged")]

    rng = np.random.default_rng(task.risk_seed)
    test_xs = rng.uniform(-1.0, 1.0, size=(task.m_test, task.target.spec.dim))
    truth = eval_target(task.target, test_xs)
    kx = gram_cross(model.spec, test_xs, data.xs)

    rows = []
    for cp in model.checkpoints:
        if cp.iteration == task.iterations:
            continue  # the final row reports the tail-averaged estimator
        risk = float(np.mean(np.square(kx @ cp.alpha - truth)))
        status = "pre-tail" if cp.pre_tail else "ok"
        if not math.isfinite(risk):
            risk, status = float("nan"), "diverged"
        rows.append(_row(cp.iteration, risk, status))
    final_risk = float(np.mean(np.square(kx @ model.alpha - truth)))
    if math.isfinite(final_risk):
        rows.append(_row(task.iterations, final_risk, "ok"))
    else:
        rows.append(_row(task.iterations, float("nan"), "diverged"))
    return rows


def _execute(tasks: list[_Task], jobs: int) -> list[ResultRow]:
    if jobs <= 1:
        row_lists = [_run_task(task) for task in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            row_lists = list(pool.map(_run_task, tasks, chunksize=1))
    return [row for rows in row_lists for row in rows]


def _require(cfg: ExperimentConfig, experiment: str) -> None:
    if cfg.experiment != experiment:
        raise ValueError(
            f"config is for experiment {cfg.experiment!r}, expected {experiment!r}"
        )


def exp_preconditioning(
    cfg: ExperimentConfig, master_seed: int = 0, jobs: int = 1
) -> ExperimentResult:
    """Risk trajectories for each effective gaussian width and replicate."""
    _require(cfg, "precond")
    target = gaussian_bump_target(1.0)
    base = gaussian(1.0)
    marks = geometric_checkpoints(cfg.iterations)
    tasks = []
    for seed in cfg.seeds:
        data_seed = derive_seed(master_seed, _ROLE_DATA, seed)
        risk_seed = derive_seed(master_seed, _ROLE_RISK, seed)
        for j, width in enumerate(cfg.widths):
            tasks.append(
                _Task(
                    experiment=cfg.experiment,
                    seed=seed,
                    n=cfg.n,
                    b=cfg.b,
                    gamma=cfg.gamma,
                    iterations=cfg.iterations,
                    scale_param=float(width),
                    target=target,
                    spec_base=base,
                    shift=float(width) - 1.0,
                    checkpoints=marks,
                    data_seed=data_seed,
                    sgd_seed=derive_seed(master_seed, _ROLE_SGD, seed, j),
                    risk_seed=risk_seed,
                    noise_var=cfg.noise_var,
                    m_test=cfg.m_test,
                )
            )
    return ExperimentResult(tuple(_execute(tasks, jobs)))


def exp_critical_batchsize(
    cfg: ExperimentConfig, master_seed: int = 0, jobs: int = 1
) -> ExperimentResult:
    """Final risk per mini-batch size under an aggressive fixed budget."""
    _require(cfg, "critbatch")
    target = matern_bump_target(3.5)
    base = matern(3.5)
    tasks = []
    for seed in cfg.seeds:
        data_seed = derive_seed(master_seed, _ROLE_DATA, seed)
        risk_seed = derive_seed(master_seed, _ROLE_RISK, seed)
        for j, b in enumerate(cfg.batches):
            tasks.append(
                _Task(
                    experiment=cfg.experiment,
                    seed=seed,
                    n=cfg.n,
                    b=int(b),
                    gamma=cfg.gamma,
                    iterations=cfg.iterations,
                    scale_param=3.5,
                    target=target,
                    spec_base=base,
                    shift=0.0,
                    checkpoints=(cfg.iterations,),
                    data_seed=data_seed,
                    sgd_seed=derive_seed(master_seed, _ROLE_SGD, seed, j),
                    risk_seed=risk_seed,
                    noise_var=cfg.noise_var,
                    m_test=cfg.m_test,
                )
            )
    return ExperimentResult(tuple(_execute(tasks, jobs)))


def exp_stepsize_smoothness(
    cfg: ExperimentConfig, master_seed: int = 0, jobs: int = 1
) -> ExperimentResult:
    """One-pass final risk per (kernel order, step-size) pair."""
    _require(cfg, "step-smooth")
    target = matern_bump_target(3.5)
    tasks = []
    for seed in cfg.seeds:
        data_seed = derive_seed(master_seed, _ROLE_DATA, seed)
        risk_seed = derive_seed(master_seed, _ROLE_RISK, seed)
        for jo, order in enumerate(cfg.orders):
            for jg, gamma in enumerate(cfg.gammas):
                tasks.append(
                    _Task(
                        experiment=cfg.experiment,
                        seed=seed,
                        n=cfg.n,
                        b=1,
                        gamma=float(gamma),
                        iterations=cfg.n,
                        scale_param=float(order),
                        target=target,
                        spec_base=matern(float(order)),
                        shift=0.0,
                        checkpoints=(cfg.n,),
                        data_seed=data_seed,
                        sgd_seed=derive_seed(master_seed, _ROLE_SGD, seed, jo, jg),
                        risk_seed=risk_seed,
                        noise_var=cfg.noise_var,
                        m_test=cfg.m_test,
                    )
                )
    return ExperimentResult(tuple(_execute(tasks, jobs)))


def exp_stepsize_batchsize(
    cfg: ExperimentConfig, master_seed: int = 0, jobs: int = 1
) -> ExperimentResult:
    """One-pass (T = ceil(n/b)) final risk over a (gamma, batch) grid."""
    _require(cfg, "step-batch")
    target = gaussian_bump_target(1.0)
    base = matern(3.5)
    tasks = []
    for seed in cfg.seeds:
        data_seed = derive_seed(master_seed, _ROLE_DATA, seed)
        risk_seed = derive_seed(master_seed, _ROLE_RISK, seed)
        for jb, b in enumerate(cfg.batches):
            horizon = max(1, math.ceil(cfg.n / int(b)))
            for jg, gamma in enumerate(cfg.gammas):
                tasks.append(
                    _Task(
                        experiment=cfg.experiment,
                        seed=seed,
                        n=cfg.n,
                        b=int(b),
                        gamma=float(gamma),
                        iterations=horizon,
                        scale_param=3.5,
                        target=target,
                        spec_base=base,
                        shift=0.0,
                        checkpoints=(horizon,),
                        data_seed=data_seed,
                        sgd_seed=derive_seed(master_seed, _ROLE_SGD, seed, jb, jg),
                        risk_seed=risk_seed,
                        noise_var=cfg.noise_var,
                        m_test=cfg.m_test,
                    )
                )
    return ExperimentResult(tuple(_execute(tasks, jobs)))


def empirical_capacity(
    spec: KernelSpec,
    target: TargetFunction,
    n: int,
    noise_var: float,
    seed: int,
    grid: Iterable[float] | None = None,
) -> float:
    """Capacity exponent of the empirical normalized kernel spectrum."""
    data = sample_dataset(target, n, noise_var, seed)
    eigs = np.linalg.eigvalsh(gram(spec, data.xs) / n)
    lam_max = float(eigs.max())
    if grid is None:
        grid = np.geomspace(2e-4 * lam_max, 2e-1 * lam_max, 12)
    return estimate_nu(eigs, grid)


def exp_rate(
    cfg: ExperimentConfig, master_seed: int = 0, jobs: int = 1
) -> ExperimentResult:
    """Early-stopping schedule at benchmark smoothness across sample sizes."""
    _require(cfg, "rate")
    target = matern_bump_target(3.5)
    base = matern(3.5)
    nu_hat = rate_reference_nu(cfg, master_seed)
    tasks = []
    for seed in cfg.seeds:
        risk_seed = derive_seed(master_seed, _ROLE_RISK, seed)
        for j, n in enumerate(cfg.ns):
            b, gamma, horizon = choose_params(
                int(n), 0.0, nu_hat, 1.0, 1.0, "early-stop", kappa_sq_value=1.0
            )
            tasks.append(
                _Task(
                    experiment=cfg.experiment,
                    seed=seed,
                    n=int(n),
                    b=b,
                    gamma=gamma,
                    iterations=horizon,
                    scale_param=3.5,
                    target=target,
                    spec_base=base,
                    shift=0.0,
                    checkpoints=(horizon,),
                    data_seed=derive_seed(master_seed, _ROLE_DATA, seed, j),
                    sgd_seed=derive_seed(master_seed, _ROLE_SGD, seed, j),
                    risk_seed=risk_seed,
                    noise_var=cfg.noise_var,
                    m_test=cfg.m_test,
                )
            )
    return ExperimentResult(tuple(_execute(tasks, jobs)))


def rate_reference_nu(cfg: ExperimentConfig, master_seed: int = 0) -> float:
    """Capacity exponent used by the rate experiment's schedule."""
    _require(cfg, "rate")
    probe_n = min(1024, max(cfg.ns))
    return empirical_capacity(
        matern(3.5),
        matern_bump_target(3.5),
        probe_n,
        cfg.noise_var,
        derive_seed(master_seed, _ROLE_SPECTRUM, cfg.seeds[0]),
    )


def fit_rate(ns, risks) -> float:
    """Empirical decay exponent: minus the slope of log risk vs log n."""
    n_arr = np.asarray(ns, dtype=float)
    r_arr = np.asarray(risks, dtype=float)
    if n_arr.shape != r_arr.shape or n_arr.size < 4:
        raise ValueError("fit_rate needs at least 4 matching (n, risk) points")
    if np.any(r_arr <= 0) or not np.all(np.isfinite(r_arr)):
        raise ValueError("fit_rate requires positive finite risks")
    slope = np.polyfit(np.log(n_arr), np.log(r_arr), 1)[0]
    return float(-slope)


_DISPATCH = {
    "precond": exp_preconditioning,
    "critbatch": exp_critical_batchsize,
    "step-smooth": exp_stepsize_smoothness,
    "step-batch": exp_stepsize_batchsize,
    "rate": exp_rate,
}


def run_replicated(
    cfg: ExperimentConfig, master_seed: int = 0, jobs: int = 1
) -> ExperimentResult:
    """Run the configured experiment and append median rows (seed = -1)."""
    result = _DISPATCH[cfg.experiment](cfg, master_seed, jobs)
    return ExperimentResult(result.rows + _aggregate(result.rows))


def _aggregate(rows: tuple[ResultRow, ...]) -> tuple[ResultRow, ...]:
    groups: dict[tuple, list[ResultRow]] = {}
    order: list[tuple] = []
    for row in rows:
        key = (
            row.experiment,
            row.n,
            row.b,
            row.gamma,
            row.iterations,
            row.scale_param,
            row.iteration,
        )
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(row)
    aggregated = []
    for key in order:
        members = groups[key]
        finite = [r.excess_risk for r in members if math.isfinite(r.excess_risk)]
        statuses = {r.status for r in members}
        if len(statuses) == 1:
            status = statuses.pop()
        else:
            status = "ok" if finite else "diverged"
        risk = float(np.median(finite)) if finite else float("nan")
        experiment, n, b, gamma, iterations, scale_param, iteration = key
        aggregated.append(
            ResultRow(
                experiment=experiment,
                seed=-1,
                n=n,
                b=b,
                gamma=gamma,
                iterations=iterations,
                scale_param=scale_param,
                iteration=iteration,
                excess_risk=risk,
                status=status,
            )
        )
    return tuple(aggregated)


def first_iterations_within(
    result: ExperimentResult, factor: float = 1.5
) -> dict[tuple[float, int], int]:
    """Per (scale_param, seed): first iteration with risk <= factor * best.

    Only rows with finite risk participate; the best risk is taken over
    each trajectory's own rows.
    """
    if factor < 1.0:
        raise ValueError(f"factor must be at least 1, got {factor}")
    trajectories: dict[tuple[float, int], list[ResultRow]] = {}
    for row in result.rows:
        if row.seed < 0 or not math.isfinite(row.excess_risk):
            continue
        trajectories.setdefault((row.scale_param, row.seed), []).append(row)
    reached = {}
    for key, rows in trajectories.items():
        rows = sorted(rows, key=lambda r: r.iteration)
        best = min(r.excess_risk for r in rows)
        for row in rows:
            if row.excess_risk <= factor * best:
                reached[key] = row.iteration
                break
    return reached
