"""Acquisition rules over a finite candidate set.

UCB selection, expected improvement, and the two posterior-sample rules
(max of a sampled path, and probability of improvement against the max of
a sampled path) backed by random Fourier features. Ties always break
toward the lowest candidate index so selections are reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import ndtr

from . import gp
from .errors import ConfigurationError, NumericalError
from .rng import as_generator

FIXED_GRID = "fixed_grid"
PER_ITERATION_RANDOM = "per_iteration_random"


@dataclass(frozen=True)
class CandidateSet:
    """Finite set of selectable points.

    ``provenance`` records whether the set is a fixed grid or gets redrawn
    uniformly each iteration (continuous domains); ``resample_count`` is the
    per-iteration draw size in the latter case.
    """

    points: np.ndarray
    provenance: str = FIXED_GRID
    resample_count: int | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise ConfigurationError("candidate set must be a non-empty (n, d) array")
        pts = pts.copy()
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if self.provenance not in (FIXED_GRID, PER_ITERATION_RANDOM):
            raise ConfigurationError(f"unknown candidate provenance {self.provenance!r}")
        if self.provenance == PER_ITERATION_RANDOM:
            count = self.resample_count or pts.shape[0]
            if count < 1:
                raise ConfigurationError("resample_count must be >= 1")
            object.__setattr__(self, "resample_count", int(count))

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


def _points_of(candidates) -> np.ndarray:
    return candidates.points if isinstance(candidates, CandidateSet) else np.asarray(candidates, dtype=float)


def ucb_select(state: gp.GpState, candidates, confidence: float) -> tuple[int, float]:
    """Index and score of argmax mu(x) + sqrt(confidence) * sd(x)."""
    if confidence < 0:
        raise ConfigurationError("confidence must be non-negative")
    mean, var = gp.posterior_batch(state, _points_of(candidates))
    scores = mean + math.sqrt(confidence) * np.sqrt(var)
    idx = int(np.argmax(scores))
    return idx, float(scores[idx])


def ucb_scores(mean: np.ndarray, var: np.ndarray, confidence: float) -> np.ndarray:
    """Scores for precomputed posterior moments (engine fast path)."""
    if confidence < 0:
        raise ConfigurationError("confidence must be non-negative")
    return mean + math.sqrt(confidence) * np.sqrt(np.maximum(var, 0.0))


def expected_improvement(mean: np.ndarray, var: np.ndarray,
                         incumbent: float) -> np.ndarray:
    """Closed-form EI against ``incumbent``; zero-variance points score max(mu - inc, 0)."""
    sd = np.sqrt(np.maximum(var, 0.0))
    gain = mean - incumbent
    out = np.maximum(gain, 0.0)
    pos = sd > 0.0
    if np.any(pos):
        z = gain[pos] / sd[pos]
        pdf = np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
        out[pos] = gain[pos] * ndtr(z) + sd[pos] * pdf
    return out


def ei_select(state: gp.GpState, candidates, incumbent: float) -> tuple[int, float]:
    """Index and score of argmax expected improvement over ``incumbent``."""
    mean, var = gp.posterior_batch(state, _points_of(candidates))
    scores = expected_improvement(mean, var, float(incumbent))
    idx = int(np.argmax(scores))
    return idx, float(scores[idx])


@dataclass(frozen=True)
class RffModel:
    """Random cosine feature map approximating a stationary kernel.

    The implied kernel is phi(x) . phi(x') with
    phi(x) = scale * cos(frequencies @ x + phases),
    scale = sqrt(2 * signal_variance / num_features).
    """

    num_features: int
    frequencies: np.ndarray  # (M, d)
    phases: np.ndarray       # (M,)
    scale: float


def build_rff(kernel: gp.KernelSpec, num_features: int, seed) -> RffModel:
    """Draw feature frequencies from the kernel's spectral density.

    Squared-exponential kernels use Gaussian frequencies with per-axis
    standard deviation 1/lengthscale; Matern-nu kernels use multivariate
    Student-t frequencies with 2 nu degrees of freedom. Deterministic given
    the seed.
    """
    if not isinstance(kernel, gp.KernelSpec):
        raise ConfigurationError("random Fourier features need a stationary kernel family")
    if num_features < 1:
        raise ConfigurationError("num_features must be >= 1")
    rng = as_generator(seed)
    base = rng.standard_normal((num_features, kernel.dim)) / kernel.lengthscales
    if kernel.family == gp.SQUARED_EXPONENTIAL:
        freqs = base
    else:
        df = 5.0 if kernel.family == gp.MATERN52 else 3.0
        u = rng.chisquare(df, size=num_features) / df
        freqs = base / np.sqrt(u)[:, None]
    phases = rng.uniform(0.0, 2.0 * math.pi, size=num_features)
    scale = math.sqrt(2.0 * kernel.signal_variance / num_features)
    return RffModel(num_features, freqs, phases, scale)


def rff_features(rff: RffModel, X) -> np.ndarray:
    """Feature matrix phi(X), shape (n, M)."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    return rff.scale * np.cos(X @ rff.frequencies.T + rff.phases)


def sample_posterior_path(state: gp.GpState, rff: RffModel, seed) -> np.ndarray:
    """Draw feature weights from the Bayesian linear-model posterior.

    Prior N(0, I) over weights, Gaussian noise with the state's variance.
    Sampled by pathwise conditioning: a prior weight draw corrected through
    an n x n solve against the observed features, which is exact and avoids
    factorizing the M x M posterior covariance. With no observations the
    draw is the N(0, I) prior.
    """
    rng = as_generator(seed)
    w0 = rng.standard_normal(rff.num_features)
    n = state.n_obs
    if n == 0:
        return w0
    phi = rff_features(rff, state.inputs)  # (n, M)
    eps = rng.standard_normal(n) * math.sqrt(state.noise_variance)
    gram = phi @ phi.T + state.noise_variance * np.eye(n)
    try:
        factor = cho_factor(gram, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"feature Gram factorization failed: {exc}") from exc
    resid = state.outputs - phi @ w0 - eps
    return w0 + phi.T @ cho_solve(factor, resid, check_finite=False)


def ts_select(state: gp.GpState, rff: RffModel, candidates, seed) -> int:
    """Argmax of one posterior sample path over the candidates."""
    pts = _points_of(candidates)
    weights = sample_posterior_path(state, rff, seed)
    return int(np.argmax(rff_features(rff, pts) @ weights))


def pims_select(state: gp.GpState, rff: RffModel, candidates, seed) -> int:
    """Probability-of-improvement selection thresholded at a sampled path's max.

    Draws one path, takes its candidate-set maximum as the improvement
    threshold, then maximizes Phi((mu - threshold)/sd). Zero-variance points
    score 1 when mu clears the threshold and 0 otherwise.
    """
    pts = _points_of(candidates)
    weights = sample_posterior_path(state, rff, seed)
    f_star = float(np.max(rff_features(rff, pts) @ weights))
    mean, var = gp.posterior_batch(state, pts)
    return int(np.argmax(pims_scores(mean, var, f_star)))


def pims_scores(mean: np.ndarray, var: np.ndarray, f_star: float) -> np.ndarray:
    sd = np.sqrt(np.maximum(var, 0.0))
    out = (mean >= f_star).astype(float)
    pos = sd > 0.0
    out[pos] = ndtr((mean[pos] - f_star) / sd[pos])
    return out
