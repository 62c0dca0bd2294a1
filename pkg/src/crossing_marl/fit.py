"""Population-spec fitting by Gaussian-process Bayesian optimisation.

The objective rolls trained policies out from recorded segment starts with
agent parameters drawn from a candidate population spec and scores the
pooled behaviour metrics against KDEs of the real data. A Matern-5/2 GP
surrogate with per-dimension length-scales models the objective over the
unit-normalised box; proposals maximise expected improvement.
"""

from __future__ import annotations

import json
import logging
import math
import time
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

import numpy as np
from scipy import linalg
from scipy.stats import norm
from sklearn.exceptions import ConvergenceWarning
from sklearn.gaussian_process import GaussianProcessRegressor
from sklearn.gaussian_process.kernels import ConstantKernel, Matern, WhiteKernel

from .evaluation import composite_nll
from .params import PHI_BOUNDS, PHI_NAMES, PopulationSpec, clamp_phi
from .pipeline import rollout_segments, segment_metric_samples

log = logging.getLogger(__name__)

JITTER_LADDER = (1e-10, 1e-9, 1e-8, 1e-7, 1e-6)


@dataclass
class FitConfig:
    iterations: int = 500
    initial_random: int = 100
    reps: int = 5
    horizon: float = 2.0
    seed: int = 0
    refit_every: int = 20
    n_candidates: int = 1024
    n_local: int = 3
    gp_restarts: int = 2

    def __post_init__(self) -> None:
        if self.iterations < 1 or self.initial_random < 1:
            raise ValueError("iterations and initial_random must be positive")
        if self.initial_random > self.iterations:
            raise ValueError("initial_random cannot exceed iterations")
        if self.reps < 1:
            raise ValueError("reps must be at least 1")
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")


# -- GP surrogate ------------------------------------------------------------


def _kernel(dim: int):
    return (
        ConstantKernel(1.0, (1e-3, 1e3))
        * Matern(length_scale=np.full(dim, 0.5), length_scale_bounds=(1e-2, 1e2), nu=2.5)
        + WhiteKernel(1e-4, (1e-8, 1e-1))
    )


@dataclass
class GPSurrogate:
    """Zero-mean GP on standardised targets over unit-box inputs."""

    X: np.ndarray
    y: np.ndarray
    bounds: np.ndarray
    kernel: Any  # fitted sklearn kernel; k1 is the latent part, k2 the white noise
    y_mean: float
    y_std: float
    chol: np.ndarray
    alpha: np.ndarray
    jitter: float

    @property
    def noise_var(self) -> float:
        """Observation-noise variance in objective units."""
        return float(self.kernel.k2.noise_level) * self.y_std**2

    @property
    def signal_std(self) -> float:
        return math.sqrt(float(self.kernel.k1.k1.constant_value)) * self.y_std

    def to_unit(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        lo, hi = self.bounds[:, 0], self.bounds[:, 1]
        return (x - lo) / (hi - lo)

    def predict_unit(self, u) -> tuple[np.ndarray, np.ndarray]:
        u = np.atleast_2d(u)
        k_star = self.kernel.k1(u, self.X)
        mean = k_star @ self.alpha
        v = linalg.solve_triangular(self.chol, k_star.T, lower=True, check_finite=False)
        var = self.kernel.k1.diag(u) - np.sum(v * v, axis=0)
        std = np.sqrt(np.maximum(var, 0.0))
        return self.y_mean + self.y_std * mean, self.y_std * std


def _condition(X: np.ndarray, y_n: np.ndarray, kernel) -> tuple[np.ndarray, np.ndarray, float]:
    K = kernel.k1(X) + float(kernel.k2.noise_level) * np.eye(len(X))
    for jitter in JITTER_LADDER:
        try:
            L = linalg.cholesky(K + jitter * np.eye(len(X)), lower=True, check_finite=False)
        except linalg.LinAlgError:
            continue
        alpha = linalg.cho_solve((L, True), y_n, check_finite=False)
        return L, alpha, jitter
    raise linalg.LinAlgError("GP covariance stayed singular after the largest jitter")


def gp_fit(
    X,
    y,
    bounds: np.ndarray | None = None,
    kernel=None,
    optimise: bool = True,
    restarts: int = 2,
    rng: np.random.Generator | None = None,
) -> GPSurrogate:
    """Maximum-likelihood GP over inputs scaled to the unit box by ``bounds``.

    With ``optimise=False`` the supplied fitted ``kernel`` is reused and only
    the posterior is recomputed.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).reshape(-1)
    if len(X) < 2 or len(X) != len(y):
        raise ValueError("gp_fit needs at least two (x, y) pairs of matching length")
    if bounds is None:
        bounds = PHI_BOUNDS if X.shape[1] == len(PHI_BOUNDS) else np.tile([0.0, 1.0], (X.shape[1], 1))
    bounds = np.asarray(bounds, dtype=float)
    U = (X - bounds[:, 0]) / (bounds[:, 1] - bounds[:, 0])
    y_mean = float(y.mean())
    y_std = float(y.std()) or 1.0
    y_n = (y - y_mean) / y_std
    if optimise or kernel is None:
        seed = None if rng is None else int(rng.integers(2**31 - 1))
        gpr = GaussianProcessRegressor(
            kernel if kernel is not None else _kernel(X.shape[1]),
            alpha=JITTER_LADDER[0],
            normalize_y=False,
            n_restarts_optimizer=restarts,
            random_state=seed,
        )
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConvergenceWarning)
            gpr.fit(U, y_n)
        kernel = gpr.kernel_
    L, alpha, jitter = _condition(U, y_n, kernel)
    return GPSurrogate(U, y, bounds, kernel, y_mean, y_std, L, alpha, jitter)


def gp_predict(gp: GPSurrogate, x) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and std of the latent objective at raw-space points."""
    return gp.predict_unit(gp.to_unit(x))


def expected_improvement(mean, std, best: float):
    """EI for minimisation; reduces to max(best - mean, 0) where std is 0."""
    mean = np.asarray(mean, dtype=float)
    std = np.asarray(std, dtype=float)
    if np.any(std < 0):
        raise ValueError("std must be non-negative")
    improve = best - mean
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(std > 0, improve / np.where(std > 0, std, 1.0), 0.0)
        ei = np.where(std > 0, improve * norm.cdf(z) + std * norm.pdf(z), np.maximum(improve, 0.0))
    ei = np.maximum(ei, 0.0)
    return float(ei) if ei.ndim == 0 else ei


def propose_ei(
    gp: GPSurrogate,
    best: float,
    rng: np.random.Generator,
    n_candidates: int = 1024,
    n_local: int = 3,
    radii: Sequence[float] = (0.1, 0.04, 0.015, 0.005),
    n_perturb: int = 128,
) -> np.ndarray:
    """Unit-box point maximising EI.

    Scores random candidates (plus a cloud around the incumbent), then
    refines the ``n_local`` best by batched perturbation search with
    shrinking radius.
    """
    d = gp.X.shape[1]
    incumbent = gp.X[int(np.argmin(gp.y))]
    cand = np.vstack([
        rng.uniform(size=(n_candidates, d)),
        np.clip(incumbent + 0.05 * rng.standard_normal((n_candidates // 4, d)), 0.0, 1.0),
    ])
    mean, std = gp.predict_unit(cand)
    ei = expected_improvement(mean, std, best)
    order = np.argsort(-ei)[:n_local]
    points, scores = cand[order], ei[order]
    for radius in radii:
        trial = np.clip(np.repeat(points, n_perturb, axis=0) + radius * rng.standard_normal((len(points) * n_perturb, d)), 0.0, 1.0)
        m, s = gp.predict_unit(trial)
        t_ei = expected_improvement(m, s, best).reshape(len(points), n_perturb)
        k = np.argmax(t_ei, axis=1)
        better = t_ei[np.arange(len(points)), k] > scores
        trial = trial.reshape(len(points), n_perturb, d)
        points[better] = trial[better, k[better]]
        scores[better] = t_ei[better, k[better]]
    return points[int(np.argmax(scores))]


# -- optimisation loop -------------------------------------------------------


@dataclass
class FitResult:
    phi_best: np.ndarray
    best_value: float
    history: list[dict[str, Any]]
    config: FitConfig
    seconds: float = 0.0
    extra: dict[str, Any] = field(default_factory=dict)

    @property
    def values(self) -> np.ndarray:
        return np.array([h["objective"] for h in self.history])

    @property
    def incumbent_curve(self) -> np.ndarray:
        return np.minimum.accumulate(self.values)

    def to_dict(self) -> dict[str, Any]:
        return {
            "phi_best": self.phi_best.tolist(),
            "phi_names": list(PHI_NAMES) if len(self.phi_best) == len(PHI_NAMES) else None,
            "best_value": self.best_value,
            "history": self.history,
            "config": asdict(self.config),
            "seconds": self.seconds,
            **self.extra,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "FitResult":
        known = {"phi_best", "phi_names", "best_value", "history", "config", "seconds"}
        return cls(
            np.asarray(d["phi_best"], dtype=float),
            float(d["best_value"]),
            list(d["history"]),
            FitConfig(**d["config"]),
            float(d.get("seconds", 0.0)),
            {k: v for k, v in d.items() if k not in known},
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))

    @classmethod
    def load(cls, path: str | Path) -> "FitResult":
        return cls.from_dict(json.loads(Path(path).read_text()))


def fit_phi(
    objective: Callable[[np.ndarray], float],
    config: FitConfig | None = None,
    rng: np.random.Generator | None = None,
    bounds: np.ndarray = PHI_BOUNDS,
) -> FitResult:
    """Minimise ``objective`` over the box: random warm-up, then EI proposals.

    Every evaluated point is clamped to the box. GP hyperparameters are
    re-optimised every ``refit_every`` proposals and reused in between.
    """
    cfg = config or FitConfig()
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    bounds = np.asarray(bounds, dtype=float)
    lo, hi = bounds[:, 0], bounds[:, 1]
    start = time.perf_counter()
    X: list[np.ndarray] = []
    y: list[float] = []
    history: list[dict[str, Any]] = []

    def evaluate(x: np.ndarray, how: str) -> None:
        x = np.clip(x, lo, hi)
        value = float(objective(x))
        if not math.isfinite(value):
            raise ValueError(f"objective returned a non-finite value at {x.tolist()}")
        X.append(x)
        y.append(value)
        history.append({"iteration": len(history), "phi": x.tolist(), "objective": value, "source": how})

    for _ in range(cfg.initial_random):
        evaluate(rng.uniform(lo, hi), "random")

    gp = None
    for i in range(cfg.iterations - cfg.initial_random):
        refit = gp is None or i % cfg.refit_every == 0
        gp = gp_fit(
            np.array(X), np.array(y), bounds,
            kernel=None if gp is None else gp.kernel,
            optimise=refit, restarts=cfg.gp_restarts if gp is None else 0, rng=rng,
        )
        u = propose_ei(gp, min(y), rng, cfg.n_candidates, cfg.n_local)
        evaluate(lo + u * (hi - lo), "ei")

    k = int(np.argmin(y))
    return FitResult(X[k], y[k], history, cfg, time.perf_counter() - start)


# -- rollout objective -------------------------------------------------------


class RolloutObjective:
    """Composite NLL of policy rollouts from recorded segment starts.

    Agent parameters are drawn once per (pair, rep) and shared by that
    pair's segments. A fixed evaluation seed gives common random numbers
    across candidate specs; results are cached by (phi, seed).
    """

    def __init__(
        self,
        env_factory: Callable[[np.random.Generator], Any],
        ped_policy,
        veh_policy,
        segments: Sequence[Any],
        real_kdes: Mapping[str, Any],
        reps: int = 5,
        horizon: float = 2.0,
        seed: int = 0,
    ):
        if not segments:
            raise ValueError("objective needs at least one segment")
        self.env_factory = env_factory
        self.ped_policy = ped_policy
        self.veh_policy = veh_policy
        self.segments = list(segments)
        self.real_kdes = dict(real_kdes)
        self.reps = reps
        self.horizon = horizon
        self.seed = seed
        self._cache: dict[tuple, float] = {}
        self.n_evaluations = 0

    def __call__(self, phi, seed: int | None = None) -> float:
        seed = self.seed if seed is None else seed
        phi = clamp_phi(phi)
        key = (tuple(np.round(phi, 12)), seed)
        if key not in self._cache:
            self._cache[key] = self.evaluate(phi, seed).value
        return self._cache[key]

    def evaluate(self, phi, seed: int):
        self.n_evaluations += 1
        spec = PopulationSpec.from_phi(clamp_phi(phi))
        trajs = rollout_segments(
            self.env_factory, self.ped_policy, self.veh_policy, self.segments, spec,
            self.reps, self.horizon, np.random.default_rng(seed),
        )
        return composite_nll(segment_metric_samples(trajs), self.real_kdes)


def quadratic_stub(minimiser, bounds: np.ndarray = PHI_BOUNDS) -> Callable[[np.ndarray], float]:
    """Bowl with its minimum at ``minimiser``, measured in unit-box coordinates."""
    bounds = np.asarray(bounds, dtype=float)
    span = bounds[:, 1] - bounds[:, 0]
    u_star = (np.asarray(minimiser, dtype=float) - bounds[:, 0]) / span

    def f(x) -> float:
        u = (np.asarray(x, dtype=float) - bounds[:, 0]) / span
        return float(np.sum((u - u_star) ** 2))

    return f
