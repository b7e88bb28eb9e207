"""Block-correlated Gaussian designs and sparse truths for simulation studies."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from genen.linalg import eigen_sym, mat_power_half


class CovarianceError(ValueError):
    def __init__(self, message: str, smallest_eigenvalue: float):
        super().__init__(message)
        self.smallest_eigenvalue = float(smallest_eigenvalue)


@dataclass(frozen=True)
class CovarianceSpec:
    """Equicorrelated blocks: active/active ``alpha1``, active/inactive
    ``alpha2``, inactive/inactive ``alpha3``; the first ``q`` of ``p``
    predictors are active."""

    p: int
    q: int
    alpha1: float = 0.3
    alpha2: float = 0.5
    alpha3: float = 0.7

    def __post_init__(self):
        if self.p < 1:
            raise ValueError("p must be positive")
        if not 0 <= self.q <= self.p:
            raise ValueError(f"q={self.q} must lie in [0, p={self.p}]")
        for name in ("alpha1", "alpha2", "alpha3"):
            a = getattr(self, name)
            if not -1.0 <= a <= 1.0:
                raise ValueError(f"{name}={a} outside [-1, 1]")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class TruthSpec:
    q: int
    b: float
    signs: Optional[tuple] = None

    def __post_init__(self):
        if self.signs is not None:
            signs = tuple(int(s) for s in self.signs)
            if len(signs) != self.q or any(s not in (-1, 1) for s in signs):
                raise ValueError("signs must be a length-q vector of +1/-1")
            object.__setattr__(self, "signs", signs)

    def beta_star(self, p: int) -> np.ndarray:
        if self.q > p:
            raise ValueError(f"q={self.q} exceeds p={p}")
        beta = np.zeros(p)
        signs = np.ones(self.q) if self.signs is None else np.asarray(self.signs, float)
        beta[: self.q] = self.b * signs
        return beta

    def to_dict(self) -> dict:
        return {"q": self.q, "b": self.b, "signs": None if self.signs is None else list(self.signs)}


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    beta_star: np.ndarray
    epsilon: np.ndarray
    sigma: float
    seed: int
    stream: tuple = field(default_factory=tuple)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]


def build_covariance(spec: CovarianceSpec) -> np.ndarray:
    p, q = spec.p, spec.q
    sigma = np.full((p, p), spec.alpha2)
    sigma[:q, :q] = spec.alpha1
    sigma[q:, q:] = spec.alpha3
    np.fill_diagonal(sigma, 1.0)
    smallest = eigen_sym(sigma).eigenvalues[-1]
    if smallest <= 0:
        raise CovarianceError(
            f"covariance is not positive definite: smallest eigenvalue {smallest:.6g}",
            smallest,
        )
    return sigma


def make_rng(seed: int, stream: Sequence[int] = ()) -> np.random.Generator:
    """Counter-based generator for the sub-stream ``stream`` of ``seed``.

    Distinct streams are statistically independent and do not depend on the
    order in which they are requested, so replications can run in any order.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in stream))
    return np.random.Generator(np.random.Philox(ss))


def sample_dataset(
    spec: CovarianceSpec,
    truth: TruthSpec,
    n: int,
    sigma: float = 1.0,
    seed: int = 0,
    stream: Sequence[int] = (),
    sigma_half: Optional[np.ndarray] = None,
) -> Dataset:
    """Draw ``n`` rows of ``N(0, Sigma)`` and a response ``y = X beta* + eps``.

    Rows are built as ``z Sigma^{1/2}`` with the symmetric square root. Pass a
    precomputed ``sigma_half`` to skip the factorization when sampling many
    replications of the same covariance.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    if truth.q != spec.q:
        raise ValueError(f"truth has q={truth.q} but covariance spec has q={spec.q}")
    if sigma_half is None:
        sigma_half = mat_power_half(build_covariance(spec), 0.5)
    rng = make_rng(seed, stream)
    z = rng.standard_normal((n, spec.p))
    noise = rng.standard_normal(n)
    X = z @ sigma_half
    beta = truth.beta_star(spec.p)
    eps = sigma * noise
    y = X @ beta + eps
    return Dataset(X=X, y=y, beta_star=beta, epsilon=eps, sigma=float(sigma),
                   seed=int(seed), stream=tuple(int(k) for k in stream))


def whiten_design(X: np.ndarray, sigma_inv_half: np.ndarray) -> np.ndarray:
    """Return ``X Sigma^{-1/2}``; rows of the result have identity covariance."""
    X = np.asarray(X, dtype=np.float64)
    S = np.asarray(sigma_inv_half, dtype=np.float64)
    if X.ndim != 2 or S.shape != (X.shape[1], X.shape[1]):
        raise ValueError(
            f"dimension mismatch: design has {X.shape[-1]} columns, "
            f"whitening matrix has shape {S.shape}"
        )
    return X @ S
