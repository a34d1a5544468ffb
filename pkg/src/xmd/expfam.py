"""Deformed exponential families of the form
``p(y) = (1 + lam*<theta, y>)_+^(1/lam) * exp(-phi(theta))`` and the online
natural-gradient estimator

    eta <- eta + delta * (1 + lam*<theta, eta>) / (1 + lam*<theta, y>) * (y - eta).

The dual variable eta is the escort expectation of the statistics, so online
estimation is a stochastic flow toward the escort mean. Two concrete models
are registered: the location-scale heavy-tail (Student-t) family and the
simplex perturbation model driven by Dirichlet noise.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np
from scipy.integrate import quad
from scipy.special import gammaln

from .core import (DomainError, Generator, GeometryError, _vec, inverse_mirror,
                   lambda_mirror, metric)
from .generators import dirichlet_generator, student_t_generator, student_t_lambda

MAX_HALVINGS = 20
DUAL_FLOOR = 1e-12


@dataclass(frozen=True)
class LambdaExpFamily:
    """A model family: its potential generator, statistics map, and sampler."""

    gen: Generator
    statistics: Callable[[np.ndarray], np.ndarray]
    sampler: Callable[[np.ndarray, np.random.Generator, int], np.ndarray]
    reflect_dual: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = ""

    @property
    def lam(self) -> float:
        return self.gen.lam

    @property
    def dim(self) -> int:
        return self.gen.dim


@dataclass(frozen=True)
class OnlineState:
    eta: np.ndarray
    theta: np.ndarray
    k: int = 0
    skipped: int = 0


def start_state(model: LambdaExpFamily, eta0) -> OnlineState:
    eta0 = _vec(eta0)
    return OnlineState(eta=eta0, theta=inverse_mirror(model.gen, eta0), k=0)


def log_loss(model: LambdaExpFamily, theta, y) -> tuple[float, np.ndarray]:
    """Negative log density and its gradient in the natural parameter."""
    theta = _vec(theta)
    y = _vec(y)
    lam = model.lam
    pair = lambda_mirror(model.gen, theta)
    if model.gen.is_bregman:
        value = float(model.gen.value(theta)) - float(theta @ y)
        return value, pair.eta - y
    pi_y = 1.0 + lam * float(theta @ y)
    if pi_y <= 0.0:
        raise DomainError("observation outside the support of the current parameter")
    value = float(model.gen.value(theta)) - np.log(pi_y) / lam
    grad = pair.eta / pair.pi - y / pi_y
    return value, grad


def natural_gradient_update(model: LambdaExpFamily, state: OnlineState, y,
                            delta: float) -> np.ndarray:
    """Unsimplified natural-gradient step in the dual variable (no projection):
    eta - delta * pi * (I + lam eta theta^T) grad_loss. Mostly a cross-check
    for the simplified online update."""
    _, df = log_loss(model, state.theta, y)
    lam = model.lam
    if model.gen.is_bregman:
        return state.eta - delta * df
    pi = 1.0 + lam * float(state.theta @ state.eta)
    corr = df + lam * state.eta * float(state.theta @ df)
    return state.eta - delta * pi * corr


def online_update(model: LambdaExpFamily, state: OnlineState, y,
                  delta: float) -> OnlineState:
    """One estimator step. Infeasible dual points are reflected into the dual
    domain; failing that the step is halved, and after MAX_HALVINGS the
    observation is skipped (counted in ``skipped``)."""
    y = _vec(y)
    lam = model.lam
    if model.gen.is_bregman:
        factor = 1.0
    else:
        pi = 1.0 + lam * float(state.theta @ state.eta)
        pi_y = 1.0 + lam * float(state.theta @ y)
        if pi_y <= 0.0:
            raise DomainError("observation outside the support of the current parameter")
        factor = pi / pi_y

    d = delta
    for _ in range(MAX_HALVINGS + 1):
        eta_next = state.eta + d * factor * (y - state.eta)
        for cand in _dual_candidates(model, eta_next):
            try:
                theta_next = inverse_mirror(model.gen, cand, theta0=state.theta)
            except GeometryError:
                continue
            return OnlineState(eta=cand, theta=theta_next, k=state.k + 1,
                               skipped=state.skipped)
        d *= 0.5
    return replace(state, k=state.k + 1, skipped=state.skipped + 1)


def _dual_candidates(model: LambdaExpFamily, eta):
    gen = model.gen
    if gen.dual_domain is None or gen.dual_domain.contains(eta):
        yield eta
    if model.reflect_dual is not None:
        refl = model.reflect_dual(eta)
        if not np.array_equal(refl, eta):
            yield refl
    elif gen.dual_domain is not None:
        refl = gen.dual_domain.reflect(eta, floor=DUAL_FLOOR)
        if not np.array_equal(refl, eta):
            yield refl


def log_distance(eta, eta_p) -> float:
    """Metric on a positive dual domain: Euclidean norm of the coordinatewise
    log difference."""
    return float(np.linalg.norm(np.log(_vec(eta)) - np.log(_vec(eta_p))))


def family_density(model: LambdaExpFamily, theta, x) -> np.ndarray:
    """Density through the deformed-exponential form (vectorized over x)."""
    theta = _vec(theta)
    y = model.statistics(np.asarray(x, dtype=float))
    base = 1.0 + model.lam * np.asarray(y) @ theta
    base = np.maximum(base, 0.0)
    return base ** (1.0 / model.lam) * np.exp(-float(model.gen.value(theta)))


# ---------------------------------------------------------------------------
# Student-t location-scale family


@dataclass(frozen=True)
class StudentTParams:
    mu: float
    sigma: float
    nu: float

    @property
    def lam(self) -> float:
        return student_t_lambda(self.nu)


def student_t_coords(params: StudentTParams) -> np.ndarray:
    """(mu, sigma) -> natural coordinates."""
    if params.sigma <= 0.0:
        raise DomainError("scale must be positive")
    lam = params.lam
    k = -lam * params.mu ** 2 + params.sigma ** 2 * (lam + 2.0)
    return np.array([2.0 * params.mu / k, -1.0 / k])


def student_t_params(theta, nu: float) -> StudentTParams:
    """Natural coordinates -> (mu, sigma); requires theta in the parameter set."""
    theta = _vec(theta)
    lam = student_t_lambda(nu)
    if not (theta[1] < 0.0 and lam * theta[0] ** 2 - 4.0 * theta[1] > 0.0):
        raise DomainError(f"theta={theta} outside the natural parameter set")
    mu = -theta[0] / (2.0 * theta[1])
    sigma_sq = (-1.0 / theta[1] + lam * mu ** 2) / (lam + 2.0)
    return StudentTParams(mu=float(mu), sigma=float(np.sqrt(sigma_sq)), nu=nu)


def student_t_mirror(theta, lam: float) -> np.ndarray:
    theta = _vec(theta)
    return np.array([
        -theta[0] / (2.0 * theta[1]),
        ((lam + 1.0) * theta[0] ** 2 - 2.0 * theta[1])
        / (2.0 * (lam + 2.0) * theta[1] ** 2),
    ])


def student_t_inverse_mirror(eta, lam: float) -> np.ndarray:
    eta = _vec(eta)
    den = 2.0 * (lam + 1.0) * eta[0] ** 2 - (lam + 2.0) * eta[1]
    if den >= 0.0:
        raise DomainError(f"eta={eta} outside the dual domain (denominator {den:.3e})")
    return np.array([-2.0 * eta[0] / den, 1.0 / den])


def student_t_sample(params: StudentTParams, rng: np.random.Generator,
                     size: Optional[int] = None) -> np.ndarray:
    """mu + sigma * Z / sqrt(V/nu) with Z standard normal, V chi-square(nu)."""
    z = rng.standard_normal(size)
    v = rng.chisquare(params.nu, size)
    return params.mu + params.sigma * z / np.sqrt(v / params.nu)


def student_t_density(x, params: StudentTParams) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    nu, mu, sigma = params.nu, params.mu, params.sigma
    logc = gammaln((nu + 1.0) / 2.0) - gammaln(nu / 2.0) - 0.5 * np.log(nu * np.pi)
    return np.exp(logc) / sigma * (1.0 + (x - mu) ** 2 / (nu * sigma ** 2)) ** (-(nu + 1.0) / 2.0)


def _student_t_reflect(eta: np.ndarray) -> np.ndarray:
    # reflect the violated scalar constraint value eta2 - eta1^2 > 0
    slack = eta[1] - eta[0] ** 2
    if slack > 0.0:
        return eta
    return np.array([eta[0], eta[0] ** 2 - slack])


def student_t_family(nu: float) -> LambdaExpFamily:
    gen = student_t_generator(nu)

    def statistics(x):
        x = np.asarray(x, dtype=float)
        return np.stack([x, x ** 2], axis=-1)

    def sampler(theta, rng, size=None):
        return student_t_sample(student_t_params(theta, nu), rng, size)

    return LambdaExpFamily(gen=gen, statistics=statistics, sampler=sampler,
                           reflect_dual=_student_t_reflect, name=f"student_t(nu={nu})")


# ---------------------------------------------------------------------------
# Dirichlet perturbation model on the simplex


@dataclass(frozen=True)
class DirichletPerturbModel:
    """Truth p on the open simplex and multiplicative Dirichlet noise of
    level sigma; the induced family has lam = -sigma."""

    p: np.ndarray
    sigma: float

    @property
    def lam(self) -> float:
        return -self.sigma

    @property
    def d(self) -> int:
        return self.p.size - 1


def simplex_to_eta(p) -> np.ndarray:
    p = _vec(p)
    return p[1:] / p[0]


def eta_to_simplex(eta) -> np.ndarray:
    eta = _vec(eta)
    p = np.concatenate([[1.0], eta])
    return p / p.sum()


def dirichlet_perturb_sample(model: DirichletPerturbModel, rng: np.random.Generator,
                             size: Optional[int] = None) -> np.ndarray:
    """Draw Q = p (+) D with D Dirichlet(sigma^{-1}/(1+d), ..., repeated),
    via normalized Gamma variates."""
    n = model.p.size
    shape = (1.0 / model.sigma) / n
    g = rng.gamma(shape, size=(n,) if size is None else (size, n))
    d = g / g.sum(axis=-1, keepdims=True)
    q = model.p * d
    return q / q.sum(axis=-1, keepdims=True)


def dirichlet_family(lam: float, d: int) -> LambdaExpFamily:
    gen = dirichlet_generator(lam, d)

    def statistics(q):
        q = np.asarray(q, dtype=float)
        return q[..., 1:] / q[..., :1]

    def sampler(theta, rng, size=None):
        eta = 1.0 / (lam * _vec(theta))
        model = DirichletPerturbModel(p=eta_to_simplex(eta), sigma=-lam)
        return dirichlet_perturb_sample(model, rng, size)

    return LambdaExpFamily(gen=gen, statistics=statistics, sampler=sampler,
                           name=f"dirichlet_perturb(lam={lam}, d={d})")


# ---------------------------------------------------------------------------
# statistical diagnostics


@dataclass(frozen=True)
class FisherReport:
    metric_matrix: np.ndarray
    fisher_mc: np.ndarray
    rel_error: float
    factor: float

    def passed(self, tol: float = 0.05) -> bool:
        return self.rel_error < tol


def fisher_metric_check(model: LambdaExpFamily, theta, n_samples: int,
                        rng: np.random.Generator) -> FisherReport:
    """Monte Carlo estimate of the score outer product, compared against the
    conformal metric through G = (1 - lam) * Fisher."""
    theta = _vec(theta)
    lam = model.lam
    pair = lambda_mirror(model.gen, theta)
    x = model.sampler(theta, rng, n_samples)
    y = np.atleast_2d(model.statistics(x))
    pi_y = 1.0 + lam * y @ theta
    scores = y / pi_y[:, None] - (pair.eta / pair.pi)[None, :]
    fisher = scores.T @ scores / n_samples
    g = metric(model.gen, theta).g
    rel = float(np.linalg.norm(g - (1.0 - lam) * fisher) / np.linalg.norm(g))
    diag_ratio = float(np.mean(np.diag(g) / np.diag(fisher)))
    return FisherReport(metric_matrix=g, fisher_mc=fisher, rel_error=rel,
                        factor=diag_ratio)


def escort_expectation_numeric(model: LambdaExpFamily, theta) -> np.ndarray:
    """Quadrature escort moments for scalar-observation models:
    integral of F(x) p^q over integral of p^q, with q = 1 - lam."""
    theta = _vec(theta)
    q = 1.0 - model.lam

    def weight(x):
        return float(family_density(model, theta, x)) ** q

    norm, _ = quad(weight, -np.inf, np.inf, limit=200)
    out = np.empty(model.dim)
    for i in range(model.dim):
        def integrand(x, i=i):
            return float(np.atleast_1d(model.statistics(x))[i]) * weight(x)
        val, _ = quad(integrand, -np.inf, np.inf, limit=200)
        out[i] = val / norm
    return out
