"""
Monte-Carlo harness for the MAUD estimator.

A study draws ``replicates`` independent datasets from a scenario, fits each
one and aggregates bias, Monte-Carlo SD, average standard error, coverage,
covariance losses against the diagonal baseline, and FDR-controlled
rejection rates. Replicate k always uses the random stream
SeedSequence(seed, spawn_key=(0, k)), so results do not depend on how many
workers run the study.
"""
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import stats

from . import conf
from .algebra import ub_apply, ub_inverse
from .blocks import PartitionVector, UniformBlockMatrix, as_partition, expand_dense
from .covariance import KroneckerCovariance
from .estimator import Dataset, FitOptions, fit
from .exceptions import DimensionMismatch, InadmissibleGamma, InvalidScenario, MaudError, PerturbationNotPD
from .inference import bh_adjust, relative_loss
from .params import GammaVector, RhoVector, gamma_to_sigma, i_minus_upsilon, is_admissible, rho_to_gamma

logger = logging.getLogger(__name__)

MODELS = ('maud', 'diagonal', 'true')
PERTURBATION_TRIES = 5


def random_stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    """One simulation design: partition, truth, sample size and replication."""

    name: str
    part: PartitionVector
    gamma: GammaVector
    n: int
    p: int = 2
    replicates: int = field(default_factory=lambda: conf.get('UBMAUD_DEFAULT_REPLICATES'))
    seed: int = 0
    noise_level: float = 0.0
    beta: Optional[np.ndarray] = None
    beta_mode: str = 'sparse'
    nonzero_fraction: float = 0.3
    beta_range: Tuple[float, float] = (0.5, 1.5)
    alpha: float = 0.05
    compare_starts: Optional[bool] = None

    def __post_init__(self):
        part = as_partition(self.part)
        object.__setattr__(self, 'part', part)
        if self.gamma.part != part:
            raise InvalidScenario(f"gamma partition ({self.gamma.part}) differs from scenario partition ({part})")
        if self.noise_level < 0:
            raise InvalidScenario(f"noise_level must be >= 0, got {self.noise_level}")
        if self.replicates < 1:
            raise InvalidScenario(f"replicates must be >= 1, got {self.replicates}")
        if self.p < 1:
            raise InvalidScenario(f"p must be >= 1, got {self.p}")
        if self.n <= max(self.p, part.n_params):
            raise InvalidScenario(f"n={self.n} must exceed max(p, G(G+1)/2) = {max(self.p, part.n_params)}")
        if self.beta_mode not in ('sparse', 'zero', 'given'):
            raise InvalidScenario(f"Unknown beta mode {self.beta_mode!r}")
        if self.beta_mode == 'given':
            beta = np.asarray(self.beta, dtype=float)
            if beta.shape != (part.R, self.p):
                raise InvalidScenario(f"beta must be {part.R}x{self.p}, got {beta.shape}")
            object.__setattr__(self, 'beta', beta)
        if not is_admissible(self.gamma):
            raise InadmissibleGamma(f"True gamma {self.gamma.values.tolist()} makes I - Upsilon singular")

    @cached_property
    def true_beta(self) -> np.ndarray:
        """R x p coefficient matrix; sparse designs are drawn from stream (1,)."""
        R, p = self.part.R, self.p
        if self.beta_mode == 'given':
            return self.beta
        if self.beta_mode == 'zero':
            return np.zeros((R, p))
        rng = random_stream(self.seed, 1)
        low, high = self.beta_range
        beta = np.zeros((R, p))
        for sl, size in zip(self.part.slices(), self.part.sizes):
            k = max(1, int(round(self.nonzero_fraction * size)))
            chosen = sl.start + rng.choice(size, size=k, replace=False)
            for r in chosen:
                values = rng.uniform(low, high, size=p) * rng.choice((-1.0, 1.0), size=p)
                while p > 1 and np.unique(values).size < p:
                    values = rng.uniform(low, high, size=p) * rng.choice((-1.0, 1.0), size=p)
                beta[r] = values
        return beta

    @cached_property
    def sigma(self) -> UniformBlockMatrix:
        return gamma_to_sigma(self.gamma)

    @property
    def tested_covariate(self) -> int:
        return self.p - 1

    def to_dict(self) -> Dict:
        return {
            'name': self.name,
            'sizes': list(self.part.sizes),
            'gamma': self.gamma.values.tolist(),
            'n': self.n,
            'p': self.p,
            'replicates': self.replicates,
            'seed': self.seed,
            'noise_level': self.noise_level,
            'beta_mode': self.beta_mode,
            'nonzero_fraction': self.nonzero_fraction,
            'beta_range': list(self.beta_range),
            'alpha': self.alpha,
        }


def _gamma_from_spec(spec: Dict, part: PartitionVector) -> GammaVector:
    if 'gamma' in spec and 'rho' in spec:
        raise InvalidScenario("Give either 'gamma' or 'rho', not both")
    try:
        if 'gamma' in spec:
            return GammaVector(spec['gamma'], part)
        if 'rho' in spec:
            return rho_to_gamma(RhoVector(spec['rho'], part))
    except DimensionMismatch as exc:
        raise InvalidScenario(str(exc))
    return GammaVector.zeros(part)


def configs_from_dict(spec: Dict) -> List[ScenarioConfig]:
    """
    Expand a declarative scenario into one config per variant.

    Keys: name, sizes, gamma | rho, n, p, replicates, seed, noise_level,
    beta ('sparse', 'zero' or an R x p list), nonzero_fraction, beta_range,
    alpha, and variants: a list of overrides, each with an optional label.
    """
    if 'sizes' not in spec or 'n' not in spec:
        raise InvalidScenario("Scenario needs at least 'sizes' and 'n'")
    variants = spec.get('variants') or [{}]
    configs = []
    for variant in variants:
        merged = {**spec, **variant}
        part = as_partition(merged['sizes'])
        beta = merged.get('beta', 'sparse')
        beta_mode, beta_value = (beta, None) if isinstance(beta, str) else ('given', beta)
        label = variant.get('label')
        name = merged.get('name', 'scenario')
        kwargs = dict(
            name=f"{name}-{label}" if label else name,
            part=part,
            gamma=_gamma_from_spec(merged, part),
            n=int(merged['n']),
            p=int(merged.get('p', 2)),
            seed=int(merged.get('seed', 0)),
            noise_level=float(merged.get('noise_level', 0.0)),
            beta=beta_value,
            beta_mode=beta_mode,
            nonzero_fraction=float(merged.get('nonzero_fraction', 0.3)),
            beta_range=tuple(merged.get('beta_range', (0.5, 1.5))),
            alpha=float(merged.get('alpha', 0.05)),
            compare_starts=merged.get('compare_starts'),
        )
        if 'replicates' in merged:
            kwargs['replicates'] = int(merged['replicates'])
        configs.append(ScenarioConfig(**kwargs))
    return configs


def perturb_covariance(
    sigma: UniformBlockMatrix,
    noise_level: float,
    rng: np.random.Generator,
    max_tries: int = PERTURBATION_TRIES,
) -> np.ndarray:
    """
    Dense sigma + E with E = noise_level * M^T M, M having iid N(0, 1) entries.

    Raises:
        PerturbationNotPD: If no draw in ``max_tries`` is positive definite
    """
    if noise_level <= 0:
        raise InvalidScenario(f"noise_level must be positive, got {noise_level}")
    base = expand_dense(sigma)
    R = sigma.R
    for attempt in range(1, max_tries + 1):
        M = rng.standard_normal((R, R))
        E = noise_level * (M.T @ M)
        candidate = base + (E + E.T) / 2.0
        try:
            np.linalg.cholesky(candidate)
        except np.linalg.LinAlgError:
            logger.warning("perturb_covariance: draw %d not positive definite, retrying", attempt)
            continue
        return candidate
    raise PerturbationNotPD(f"No positive definite perturbation in {max_tries} draws")


def draw_replicate(cfg: ScenarioConfig, index: int) -> Tuple[Dataset, object]:
    """
    Simulated dataset for replicate ``index`` and the true outcome covariance.

    The truth is the UB Sigma without perturbation and a dense matrix with it.
    """
    rng = random_stream(cfg.seed, 0, index)
    n, R = cfg.n, cfg.part.R
    X = np.column_stack([np.ones(n), rng.standard_normal((n, cfg.p - 1))])
    if cfg.noise_level > 0:
        truth = perturb_covariance(cfg.sigma, cfg.noise_level, rng)
        errors = rng.standard_normal((n, R)) @ np.linalg.cholesky(truth).T
    else:
        truth = cfg.sigma
        root = ub_inverse(i_minus_upsilon(cfg.gamma))
        errors = ub_apply(root, rng.standard_normal((n, R)).T).T
    Y = X @ cfg.true_beta.T + errors
    return Dataset(X, Y, cfg.part), truth


def sample_dataset(cfg: ScenarioConfig, index: int) -> Dataset:
    return draw_replicate(cfg, index)[0]


@dataclass
class ReplicateRecord:
    index: int
    ok: bool
    message: str = ''
    gamma_hat: Optional[List[float]] = None
    gamma_se: Optional[List[float]] = None
    covered: Optional[List[bool]] = None
    iterations: int = 0
    losses: Dict[str, Dict[str, float]] = field(default_factory=dict)
    rejection: Dict[str, Dict[str, float]] = field(default_factory=dict)


def _rejection_stats(estimates, ses, df, alpha, nonzero) -> Dict[str, float]:
    statistic = estimates / ses
    p_values = 2.0 * stats.t.sf(np.abs(statistic), df)
    _, rejected = bh_adjust(p_values, alpha)
    nulls = ~nonzero
    false = int(np.sum(rejected & nulls))
    return {
        'type1': float(false / nulls.sum()) if nulls.any() else float('nan'),
        'power': float(np.sum(rejected & nonzero) / nonzero.sum()) if nonzero.any() else float('nan'),
        'fdp': float(false / max(int(rejected.sum()), 1)),
        'rejections': int(rejected.sum()),
    }


def run_replicate(cfg: ScenarioConfig, index: int) -> ReplicateRecord:
    """Fit one replicate; numerical failures are recorded, not raised."""
    try:
        data, truth_left = draw_replicate(cfg, index)
        options = FitOptions().with_overrides(compare_starts=cfg.compare_starts)
        result = fit(data, options)
    except (MaudError, np.linalg.LinAlgError) as exc:
        logger.warning("replicate %d failed: %s", index, exc)
        return ReplicateRecord(index=index, ok=False, message=str(exc))

    z = stats.norm.ppf(0.975)
    truth = cfg.gamma.values
    se = result.gamma_se
    covered = np.abs(result.gamma.values - truth) <= z * se

    residuals = data.Y - data.X @ result.beta.T
    diagonal_left = np.diag(np.einsum('ij,ij->j', residuals, residuals) / (data.n - data.p))
    right = result.beta_cov.right
    covariances = {
        'maud': result.beta_cov,
        'diagonal': KroneckerCovariance(diagonal_left, right),
        'true': KroneckerCovariance(truth_left, right),
    }
    losses = {
        model: {norm: relative_loss(covariances[model], covariances['true'], norm) for norm in ('frobenius', 'spectral')}
        for model in ('maud', 'diagonal')
    }

    q = cfg.tested_covariate
    estimates = result.beta[:, q]
    nonzero = cfg.true_beta[:, q] != 0.0
    rejection = {
        model: _rejection_stats(estimates, cov.standard_errors()[:, q], data.n - 1, cfg.alpha, nonzero)
        for model, cov in covariances.items()
    }
    return ReplicateRecord(
        index=index,
        ok=True,
        gamma_hat=result.gamma.values.tolist(),
        gamma_se=se.tolist(),
        covered=covered.tolist(),
        iterations=result.diagnostics.iterations,
        losses=losses,
        rejection=rejection,
    )


def _replicate_task(args) -> ReplicateRecord:
    cfg, index = args
    return run_replicate(cfg, index)


@dataclass
class ParameterSummary:
    label: str
    truth: float
    mean: float
    bias: float
    relative_bias: float
    mcsd: float
    ase: float
    coverage: float
    bias_mcse: float
    coverage_mcse: float


@dataclass
class McReport:
    """Aggregated Monte-Carlo results; ``runtime`` is the only run-dependent part."""

    config: ScenarioConfig
    records: List[ReplicateRecord]
    parameters: List[ParameterSummary]
    losses: Dict[str, Dict[str, float]]
    rejection: Dict[str, Dict[str, float]]
    failures: int
    runtime: Dict[str, float] = field(default_factory=dict)

    @property
    def successes(self) -> int:
        return len(self.records) - self.failures

    def parameter_frame(self) -> pd.DataFrame:
        return pd.DataFrame([asdict(s) for s in self.parameters])

    def replicate_frame(self) -> pd.DataFrame:
        rows = []
        for rec in self.records:
            row = {'replicate': rec.index, 'ok': rec.ok, 'message': rec.message, 'iterations': rec.iterations}
            for model, norms in rec.losses.items():
                for norm, value in norms.items():
                    row[f"loss_{model}_{norm}"] = value
            for model, values in rec.rejection.items():
                for key, value in values.items():
                    row[f"{model}_{key}"] = value
            if rec.gamma_hat is not None:
                for label, value in zip(self.config.gamma.labels(), rec.gamma_hat):
                    row[label] = value
            rows.append(row)
        return pd.DataFrame(rows)

    def loss_samples(self, model: str, norm: str) -> np.ndarray:
        return np.array([rec.losses[model][norm] for rec in self.records if rec.ok])

    def to_dict(self) -> Dict:
        return {
            'scenario': self.config.to_dict(),
            'true_beta': self.config.true_beta.tolist(),
            'parameters': [asdict(s) for s in self.parameters],
            'losses': self.losses,
            'rejection': self.rejection,
            'failures': self.failures,
            'failure_messages': [rec.message for rec in self.records if not rec.ok],
            'runtime': self.runtime,
        }


def summarize(cfg: ScenarioConfig, records: Sequence[ReplicateRecord]) -> Tuple[List[ParameterSummary], Dict, Dict]:
    good = [rec for rec in records if rec.ok]
    parameters = []
    if good:
        estimates = np.array([rec.gamma_hat for rec in good])
        ses = np.array([rec.gamma_se for rec in good])
        covered = np.array([rec.covered for rec in good], dtype=float)
        k = len(good)
        for j, label in enumerate(cfg.gamma.labels()):
            truth = float(cfg.gamma.values[j])
            mean = float(estimates[:, j].mean())
            mcsd = float(estimates[:, j].std(ddof=1)) if k > 1 else float('nan')
            cp = float(covered[:, j].mean())
            parameters.append(ParameterSummary(
                label=label,
                truth=truth,
                mean=mean,
                bias=mean - truth,
                relative_bias=(mean - truth) / abs(truth) if truth != 0 else float('nan'),
                mcsd=mcsd,
                ase=float(ses[:, j].mean()),
                coverage=cp,
                bias_mcse=mcsd / np.sqrt(k),
                coverage_mcse=float(np.sqrt(cp * (1.0 - cp) / k)),
            ))
    losses = {
        model: {
            norm: float(np.median([rec.losses[model][norm] for rec in good])) if good else float('nan')
            for norm in ('frobenius', 'spectral')
        }
        for model in ('maud', 'diagonal')
    }
    rejection = {
        model: {
            key: float(np.nanmean([rec.rejection[model][key] for rec in good])) if good else float('nan')
            for key in ('type1', 'power', 'fdp')
        }
        for model in MODELS
    }
    return parameters, losses, rejection


def run_study(cfg: ScenarioConfig, workers: Optional[int] = None) -> McReport:
    """
    Run every replicate of a scenario and aggregate the results.

    Args:
        cfg: Scenario configuration
        workers: Process count (None: one per CPU, capped by UBMAUD_THREADS)
    """
    workers = min(conf.resolve_workers(workers), cfg.replicates)
    tasks = [(cfg, index) for index in range(cfg.replicates)]
    started = time.perf_counter()
    logger.info("run_study: scenario=%s replicates=%d workers=%d", cfg.name, cfg.replicates, workers)
    if workers == 1:
        records = [_replicate_task(task) for task in tasks]
    else:
        chunksize = max(1, len(tasks) // (4 * workers))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_replicate_task, tasks, chunksize=chunksize))
    parameters, losses, rejection = summarize(cfg, records)
    failures = sum(1 for rec in records if not rec.ok)
    elapsed = time.perf_counter() - started
    if failures:
        logger.warning("run_study: %d of %d replicates failed", failures, cfg.replicates)
    logger.info("run_study: scenario=%s done in %.2fs", cfg.name, elapsed)
    return McReport(
        config=cfg,
        records=records,
        parameters=parameters,
        losses=losses,
        rejection=rejection,
        failures=failures,
        runtime={'seconds': elapsed, 'workers': workers},
    )
