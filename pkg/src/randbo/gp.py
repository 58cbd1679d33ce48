"""Exact Gaussian-process regression on finite point sets.

Covariance kernels (squared exponential and Matern with ARD lengthscales,
plus an explicit-matrix kernel for instances whose prior covariance is
given directly), incremental posterior updates through rank-one Cholesky
extension, joint prior sampling on a grid, and the log marginal likelihood
used for grid-search hyperparameter selection.

States are value-semantic: ``incremental_update`` returns a new state and
never mutates the old one. Successive states along one history share a
growable backing buffer, so a T-step run costs O(T^3) total instead of
O(T^4); forking a state (updating a non-tip state twice) silently copies.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular
from scipy.spatial.distance import cdist

from .errors import ConfigurationError, NumericalError, ObservationError
from .rng import as_generator

SQUARED_EXPONENTIAL = "squared_exponential"
MATERN52 = "matern52"
MATERN32 = "matern32"
KERNEL_FAMILIES = (SQUARED_EXPONENTIAL, MATERN52, MATERN32)

# Diagonal jitter for prior-sample Gram factorizations, relative to the
# signal variance: start at 1e-10, escalate x10 up to 1e-4, then give up.
# Dense grids with short lengthscales produce near-singular Gram matrices.
JITTER_START = 1e-10
JITTER_MAX = 1e-4


@dataclass(frozen=True)
class KernelSpec:
    """Stationary prior covariance: family, ARD lengthscales, amplitude.

    ``k(x, x) = signal_variance`` for every x. The normalized setting uses
    ``signal_variance = 1`` so that k is bounded by 1.
    """

    family: str
    lengthscales: np.ndarray
    signal_variance: float = 1.0

    def __post_init__(self):
        if self.family not in KERNEL_FAMILIES:
            raise ConfigurationError(
                f"unknown kernel family {self.family!r}; expected one of {KERNEL_FAMILIES}"
            )
        ls = np.atleast_1d(np.asarray(self.lengthscales, dtype=float)).copy()
        ls.setflags(write=False)
        object.__setattr__(self, "lengthscales", ls)
        object.__setattr__(self, "signal_variance", float(self.signal_variance))
        if ls.ndim != 1 or not np.all(np.isfinite(ls)) or not np.all(ls > 0):
            raise ConfigurationError("lengthscales must be a vector of positive reals")
        if not (math.isfinite(self.signal_variance) and self.signal_variance > 0):
            raise ConfigurationError("signal_variance must be a positive real")

    @property
    def dim(self) -> int:
        return self.lengthscales.shape[0]

    @classmethod
    def isotropic(cls, family: str, lengthscale: float, dim: int,
                  signal_variance: float = 1.0) -> "KernelSpec":
        return cls(family, np.full(dim, float(lengthscale)), signal_variance)


@dataclass(frozen=True)
class ExplicitKernel:
    """Covariance given by a fixed PSD matrix over integer-indexed points.

    Points are 1-d vectors holding an index into ``cov``. Lets problem
    instances specify an arbitrary prior covariance (possibly with unequal
    diagonal) while reusing the same posterior machinery as the stationary
    families.
    """

    cov: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.cov, dtype=float).copy()
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ConfigurationError("explicit covariance must be a square matrix")
        if not np.allclose(c, c.T, atol=1e-12):
            raise ConfigurationError("explicit covariance must be symmetric")
        try:
            np.linalg.cholesky(c)
        except np.linalg.LinAlgError:
            raise ConfigurationError("explicit covariance must be positive definite")
        c.setflags(write=False)
        object.__setattr__(self, "cov", c)

    @property
    def dim(self) -> int:
        return 1

    @property
    def n_points(self) -> int:
        return self.cov.shape[0]


Kernel = KernelSpec | ExplicitKernel


def _as_points(X, dim: int) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != dim:
        raise ConfigurationError(
            f"points have dimension {X.shape[-1] if X.ndim else 0}, kernel expects {dim}"
        )
    return X


def _explicit_indices(kernel: ExplicitKernel, X) -> np.ndarray:
    X = _as_points(X, 1)
    idx = np.rint(X[:, 0]).astype(int)
    if np.any(idx < 0) or np.any(idx >= kernel.n_points):
        raise ConfigurationError("explicit-kernel point index out of range")
    return idx


def kernel_matrix(kernel: Kernel, X, X2=None) -> np.ndarray:
    """Cross-covariance matrix k(X, X2); X2 defaults to X.

    Parameters
    ----------
    kernel : KernelSpec or ExplicitKernel
    X, X2 : array_like, shape (n, d) or (d,)

    Returns
    -------
    ndarray, shape (n, m)
    """
    if isinstance(kernel, ExplicitKernel):
        i = _explicit_indices(kernel, X)
        j = i if X2 is None else _explicit_indices(kernel, X2)
        return kernel.cov[np.ix_(i, j)]

    X = _as_points(X, kernel.dim)
    Xs = X / kernel.lengthscales
    X2s = Xs if X2 is None else _as_points(X2, kernel.dim) / kernel.lengthscales
    sv = kernel.signal_variance
    if kernel.family == SQUARED_EXPONENTIAL:
        return sv * np.exp(-0.5 * cdist(Xs, X2s, "sqeuclidean"))
    r = cdist(Xs, X2s)
    if kernel.family == MATERN52:
        c = math.sqrt(5.0) * r
        return sv * (1.0 + c + c * c / 3.0) * np.exp(-c)
    c = math.sqrt(3.0) * r
    return sv * (1.0 + c) * np.exp(-c)


def kernel_diag(kernel: Kernel, X) -> np.ndarray:
    """Vector of prior variances k(x, x) for each row of X."""
    if isinstance(kernel, ExplicitKernel):
        return np.diag(kernel.cov)[_explicit_indices(kernel, X)]
    X = _as_points(X, kernel.dim)
    return np.full(X.shape[0], kernel.signal_variance)


def kernel_eval(kernel: Kernel, x, x2) -> float:
    """Scalar kernel value k(x, x2). Symmetric; equals the signal variance at x = x2."""
    return float(kernel_matrix(kernel, np.atleast_1d(x)[None, :],
                               np.atleast_1d(x2)[None, :])[0, 0])


@dataclass(frozen=True)
class PosteriorStats:
    mean: float
    variance: float


class _Buffer:
    """Append-only backing store shared by successive states of one history.

    Rows below ``size`` are immutable once written, so older states reading
    their prefix views are never affected by later appends. The lock only
    guards the append slot check, keeping concurrent updates from two
    threads on the same tip state value-safe.
    """

    __slots__ = ("x", "y", "chol", "wy", "size", "lock")

    def __init__(self, dim: int, capacity: int):
        capacity = max(capacity, 8)
        self.x = np.empty((capacity, dim))
        self.y = np.empty(capacity)
        self.chol = np.zeros((capacity, capacity))
        self.wy = np.empty(capacity)
        self.size = 0
        self.lock = threading.Lock()

    @property
    def capacity(self) -> int:
        return self.y.shape[0]

    def copy_prefix(self, n: int, extra: int) -> "_Buffer":
        out = _Buffer(self.x.shape[1], max(2 * n, n + extra, 8))
        out.x[:n] = self.x[:n]
        out.y[:n] = self.y[:n]
        out.chol[:n, :n] = self.chol[:n, :n]
        out.wy[:n] = self.wy[:n]
        out.size = n
        return out


@dataclass(frozen=True)
class GpState:
    """Posterior state after conditioning on ``n_obs`` noisy observations.

    Wraps the lower Cholesky factor of (K + sigma^2 I) over the observed
    inputs together with the half-solved targets L^-1 y, which is all the
    posterior equations need.
    """

    kernel: Kernel
    noise_variance: float
    _buf: _Buffer = field(repr=False)
    n_obs: int

    @property
    def inputs(self) -> np.ndarray:
        return self._buf.x[: self.n_obs]

    @property
    def outputs(self) -> np.ndarray:
        return self._buf.y[: self.n_obs]

    @property
    def chol(self) -> np.ndarray:
        return self._buf.chol[: self.n_obs, : self.n_obs]

    @property
    def half_targets(self) -> np.ndarray:
        """L^-1 y for the current observation set."""
        return self._buf.wy[: self.n_obs]

    @property
    def dim(self) -> int:
        return self._buf.x.shape[1]


def empty_state(kernel: Kernel, noise_variance: float, capacity: int = 64) -> GpState:
    """Fresh state with no observations; posterior equals the prior."""
    if not noise_variance > 0:
        raise ConfigurationError("noise_variance must be positive")
    dim = 1 if isinstance(kernel, ExplicitKernel) else kernel.dim
    return GpState(kernel, float(noise_variance), _Buffer(dim, capacity), 0)


def batch_state(kernel: Kernel, X, y, noise_variance: float) -> GpState:
    """Build a state from a whole dataset with one dense Cholesky."""
    if not noise_variance > 0:
        raise ConfigurationError("noise_variance must be positive")
    dim = 1 if isinstance(kernel, ExplicitKernel) else kernel.dim
    X = _as_points(X, dim)
    y = np.asarray(y, dtype=float).ravel()
    n = X.shape[0]
    if y.shape[0] != n:
        raise ConfigurationError("inputs and outputs must have equal length")
    if n and not np.all(np.isfinite(y)):
        raise ObservationError("non-finite observation value")
    buf = _Buffer(dim, max(n, 8))
    if n:
        K = kernel_matrix(kernel, X) + noise_variance * np.eye(n)
        try:
            L = np.linalg.cholesky(K)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"Cholesky failed on {n} observations: {exc}") from exc
        buf.x[:n] = X
        buf.y[:n] = y
        buf.chol[:n, :n] = L
        buf.wy[:n] = solve_triangular(L, y, lower=True, check_finite=False)
        buf.size = n
    return GpState(kernel, float(noise_variance), buf, n)


def incremental_update(state: GpState, x, y: float, l_row=None) -> GpState:
    """Return the state extended by one observation (x, y).

    Equivalent to a from-scratch rebuild on the extended dataset; the new
    Cholesky row comes from one triangular solve against the existing
    factor. The caller's state is untouched.

    ``l_row`` optionally supplies the precomputed solve L^-1 k(inputs, x)
    (callers that batch-solve candidate columns already hold it); it must
    match that definition exactly, which the posterior replay tests pin.
    """
    y = float(y)
    if not math.isfinite(y):
        raise ObservationError(f"non-finite observation value {y!r}")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (state.dim,):
        raise ConfigurationError(f"input has shape {x.shape}, expected ({state.dim},)")

    n = state.n_obs
    kxx = float(kernel_diag(state.kernel, x[None, :])[0])
    if n:
        if l_row is None:
            k_vec = kernel_matrix(state.kernel, state.inputs, x[None, :])[:, 0]
            l_row = solve_triangular(state.chol, k_vec, lower=True, check_finite=False)
        elif l_row.shape != (n,):
            raise ConfigurationError("l_row must have one entry per observation")
        wy_dot = float(l_row @ state.half_targets)
        ll = float(l_row @ l_row)
    else:
        l_row = np.empty(0)
        wy_dot = 0.0
        ll = 0.0

    pivot_sq = kxx + state.noise_variance - ll
    if pivot_sq <= 0.0:
        # One shot of diagonal jitter before declaring breakdown; with a
        # positive noise variance this is nearly unreachable.
        sv = kxx if kxx > 0 else 1.0
        jitter = JITTER_START * sv
        while pivot_sq + jitter <= 0.0 and jitter <= JITTER_MAX * sv:
            jitter *= 10.0
        pivot_sq += jitter
        if pivot_sq <= 0.0:
            raise NumericalError(
                f"non-positive Cholesky pivot ({pivot_sq:.3e}) after jitter at n={n + 1}"
            )
    pivot = math.sqrt(pivot_sq)

    buf = state._buf
    with buf.lock:
        if buf.size != n or n >= buf.capacity:
            buf = buf.copy_prefix(n, extra=1)
        row = buf.size
        buf.x[row] = x
        buf.y[row] = y
        if n:
            buf.chol[row, :n] = l_row
        buf.chol[row, row] = pivot
        buf.wy[row] = (y - wy_dot) / pivot
        buf.size = row + 1
    return GpState(state.kernel, state.noise_variance, buf, n + 1)


def posterior_batch(state: GpState, X) -> tuple[np.ndarray, np.ndarray]:
    """Posterior means and variances at each row of X.

    With no observations this is the prior: zero mean, k(x, x) variance.
    Variances are clipped at zero to absorb roundoff.
    """
    X = _as_points(X, state.dim)
    prior = kernel_diag(state.kernel, X)
    if state.n_obs == 0:
        return np.zeros(X.shape[0]), prior
    Kxo = kernel_matrix(state.kernel, state.inputs, X)
    V = solve_triangular(state.chol, Kxo, lower=True, check_finite=False)
    mean = V.T @ state.half_targets
    var = prior - np.einsum("ij,ij->j", V, V)
    return mean, np.maximum(var, 0.0)


def posterior(state: GpState, x) -> PosteriorStats:
    """Posterior mean and variance of f at a single point."""
    mean, var = posterior_batch(state, np.atleast_1d(x)[None, :])
    return PosteriorStats(float(mean[0]), float(var[0]))


def sample_prior(kernel: Kernel, candidates, seed) -> np.ndarray:
    """One joint draw of f over the candidate set from the zero-mean prior.

    Parameters
    ----------
    kernel : KernelSpec or ExplicitKernel
    candidates : array_like, shape (n, d)
    seed : int or numpy Generator

    Returns
    -------
    ndarray, shape (n,)

    Deterministic given the seed. The Gram matrix gets escalating diagonal
    jitter before factorization; exhausting the escalation raises
    NumericalError.
    """
    dim = 1 if isinstance(kernel, ExplicitKernel) else kernel.dim
    X = _as_points(candidates, dim)
    if X.shape[0] == 0:
        raise ConfigurationError("candidate set must be non-empty")
    rng = as_generator(seed)
    K = kernel_matrix(kernel, X)
    sv = float(np.max(kernel_diag(kernel, X)))
    jitter = JITTER_START * sv
    eye = np.eye(X.shape[0])
    while True:
        try:
            L = np.linalg.cholesky(K + jitter * eye)
            break
        except np.linalg.LinAlgError:
            jitter *= 10.0
            if jitter > JITTER_MAX * sv:
                raise NumericalError(
                    f"prior Gram not factorizable within jitter cap {JITTER_MAX * sv:.1e}"
                )
    return L @ rng.standard_normal(X.shape[0])


def log_marginal_likelihood(state: GpState) -> float:
    """Log evidence of the observed data under the state's kernel and noise."""
    n = state.n_obs
    if n == 0:
        raise ConfigurationError("log marginal likelihood needs at least one observation")
    wy = state.half_targets
    return float(
        -0.5 * (wy @ wy)
        - np.sum(np.log(np.diag(state.chol)))
        - 0.5 * n * math.log(2.0 * math.pi)
    )


def fit_hyperparameters(inputs, outputs, grid: list[KernelSpec],
                        noise_variance: float) -> KernelSpec:
    """Pick the grid element maximizing the log marginal likelihood.

    Ties break toward the lowest grid index. An empty dataset falls back to
    the first grid element.
    """
    if not grid:
        raise ConfigurationError("hyperparameter grid must be non-empty")
    y = np.asarray(outputs, dtype=float).ravel()
    if y.shape[0] == 0:
        return grid[0]
    scores = np.array([
        log_marginal_likelihood(batch_state(spec, inputs, y, noise_variance))
        for spec in grid
    ])
    return grid[int(np.argmax(scores))]
