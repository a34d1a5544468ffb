"""Lambda-duality primitives: logarithmic cost, mirror maps, divergences, metric.

A generator ``phi`` on an open convex domain is *regular* for a deformation
parameter ``lam != 0`` when ``Phi(theta) = (exp(lam*phi) - 1)/lam`` has a
positive-definite Hessian and ``1 - lam*<grad phi, theta> > 0`` everywhere.
Such a generator induces

* the logarithmic cost   ``c(x, y) = -(1/lam) * log(1 + lam*<x, y>)``,
* the mirror map         ``eta = grad phi / (1 - lam*<grad phi, theta>)``,
* the log divergence     ``L[t:t'] = phi(t) - phi(t') - (1/lam)*log(1 + lam*<grad phi(t'), t - t'>)``,
* the conformal metric   ``G = hess phi + lam * grad phi grad phi^T = exp(-lam*phi) * hess Phi``.

All operations fall back to the classical convex-duality limit (Bregman
divergence, plain gradient map, Hessian metric) on an exact branch when
``|lam| < BREGMAN_LIMIT``, instead of evaluating numerically-cancelling
small-``lam`` formulas.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

# |lam| below this uses the exact Bregman/convex-duality branch.
BREGMAN_LIMIT = 1e-12
# log arguments must exceed this; below it we raise rather than return -inf.
LOG_GUARD = 1e-14


class GeometryError(Exception):
    """Base class for lambda-duality errors."""


class DomainError(GeometryError):
    """A point lies outside a required open domain or a log argument is nonpositive."""


class RegularityError(GeometryError):
    """A regularity condition of the generator fails at the evaluated point."""


class SolverError(GeometryError):
    """An iterative inversion failed to converge."""


def _vec(x) -> np.ndarray:
    return np.atleast_1d(np.asarray(x, dtype=float))


# ---------------------------------------------------------------------------
# domains


@dataclass(frozen=True)
class Domain:
    """Open domain: an axis-aligned box intersected with scalar constraints g(x) > 0.

    ``anchor`` must be an interior point; it seeds Newton inversions.
    """

    lower: np.ndarray
    upper: np.ndarray
    anchor: np.ndarray
    constraints: tuple[Callable[[np.ndarray], float], ...] = ()

    @staticmethod
    def box(lower, upper, anchor=None) -> "Domain":
        lower = _vec(lower)
        upper = _vec(upper)
        if anchor is None:
            lo = np.where(np.isfinite(lower), lower, np.minimum(upper - 1.0, 0.0))
            hi = np.where(np.isfinite(upper), upper, np.maximum(lower + 1.0, 0.0))
            anchor = 0.5 * (lo + hi)
        return Domain(lower, upper, _vec(anchor))

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    def contains(self, x) -> bool:
        x = _vec(x)
        if not np.all(np.isfinite(x)):
            return False
        if np.any(x <= self.lower) or np.any(x >= self.upper):
            return False
        return all(g(x) > 0.0 for g in self.constraints)

    def boundary_gap(self, x) -> float:
        """Smallest slack over all faces and constraints; negative outside."""
        x = _vec(x)
        gaps = [np.min(x - self.lower), np.min(self.upper - x)]
        gaps += [g(x) for g in self.constraints]
        return float(min(g for g in gaps if np.isfinite(g)))

    def reflect(self, x, floor: float = 1e-12) -> np.ndarray:
        """Reflect box violations back across the violated face.

        Constraint violations are not repaired here; callers fall back to
        step halving when a reflected point is still infeasible.
        """
        x = _vec(x).copy()
        lo_bad = x <= self.lower
        x[lo_bad] = self.lower[lo_bad] + np.maximum(self.lower[lo_bad] - x[lo_bad], floor)
        hi_bad = x >= self.upper
        x[hi_bad] = self.upper[hi_bad] - np.maximum(x[hi_bad] - self.upper[hi_bad], floor)
        return x


# ---------------------------------------------------------------------------
# generators and derived pairs


@dataclass(frozen=True)
class Generator:
    """A smooth generator phi with value/gradient oracles on an open domain.

    ``hess`` is optional; when absent, finite differences are available for
    verification only (flows never require it). Closed-form mirror maps and
    their inverses can be registered to bypass the generic formulas.
    """

    lam: float
    domain: Domain
    value: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    hess: Optional[Callable[[np.ndarray], np.ndarray]] = None
    mirror_closed: Optional[Callable[[np.ndarray], np.ndarray]] = None
    inverse_mirror_closed: Optional[Callable[[np.ndarray], np.ndarray]] = None
    dual_domain: Optional[Domain] = None
    name: str = ""
    grid: tuple = field(default_factory=tuple)

    @property
    def dim(self) -> int:
        return self.domain.dim

    @property
    def is_bregman(self) -> bool:
        return abs(self.lam) < BREGMAN_LIMIT


@dataclass(frozen=True)
class DualPair:
    """A primal point, its mirror image, and the pairing value 1 + lam*<theta, eta>."""

    theta: np.ndarray
    eta: np.ndarray
    pi: float


@dataclass(frozen=True)
class MetricAtPoint:
    g: np.ndarray
    g_inv: np.ndarray
    conformal_factor: float


# ---------------------------------------------------------------------------
# costs and divergences


def log_cost(x, y, lam: float) -> float:
    """Logarithmic pairing cost; reduces to -<x, y> in the lam -> 0 limit."""
    x = _vec(x)
    y = _vec(y)
    ip = float(x @ y)
    if abs(lam) < BREGMAN_LIMIT:
        return -ip
    arg = lam * ip
    if 1.0 + arg <= LOG_GUARD:
        raise DomainError(f"log argument 1 + lam*<x,y> = {1.0 + arg:.3e} <= 0")
    return -np.log1p(arg) / lam


def lambda_mirror(gen: Generator, theta) -> DualPair:
    """Map a primal point to its dual coordinate eta = grad phi / (1 - lam*<grad phi, theta>)."""
    theta = _vec(theta)
    if gen.mirror_closed is not None:
        eta = _vec(gen.mirror_closed(theta))
        pi = 1.0 + gen.lam * float(theta @ eta)
        if pi <= 0.0:
            raise RegularityError(f"pairing 1 + lam*<theta,eta> = {pi:.3e} <= 0")
        return DualPair(theta, eta, pi)
    u = _vec(gen.grad(theta))
    if gen.is_bregman:
        return DualPair(theta, u, 1.0)
    s = 1.0 - gen.lam * float(u @ theta)
    if s <= 0.0:
        raise RegularityError(f"regularity 1 - lam*<grad,theta> = {s:.3e} <= 0 at theta={theta}")
    eta = u / s
    return DualPair(theta, eta, 1.0 + gen.lam * float(theta @ eta))


def mirror_jacobian(gen: Generator, theta) -> np.ndarray:
    """d eta / d theta, assembled from the metric as pi * (I + lam eta theta^T) G."""
    theta = _vec(theta)
    pair = lambda_mirror(gen, theta)
    g = metric(gen, theta).g
    if gen.is_bregman:
        return g
    corr = np.eye(gen.dim) + gen.lam * np.outer(pair.eta, theta)
    return pair.pi * corr @ g


def inverse_mirror(gen: Generator, eta, theta0=None, tol: float = 1e-12,
                   max_iter: int = 100) -> np.ndarray:
    """Invert the mirror map: find theta with lambda_mirror(gen, theta).eta == eta.

    Uses a registered closed form when available, otherwise damped Newton
    with Armijo backtracking on the residual norm, seeded at the domain anchor.
    """
    eta = _vec(eta)
    if gen.dual_domain is not None and not gen.dual_domain.contains(eta):
        raise DomainError(f"eta={eta} outside the dual domain")
    if gen.inverse_mirror_closed is not None:
        theta = _vec(gen.inverse_mirror_closed(eta))
        if not gen.domain.contains(theta):
            raise DomainError(f"closed-form inverse left the domain at eta={eta}")
        return theta

    theta = _vec(theta0) if theta0 is not None else gen.domain.anchor.copy()
    res = lambda_mirror(gen, theta).eta - eta
    rnorm = np.linalg.norm(res)
    for _ in range(max_iter):
        if rnorm <= tol:
            return theta
        jac = mirror_jacobian(gen, theta)
        try:
            step = np.linalg.solve(jac, -res)
        except np.linalg.LinAlgError as exc:
            raise SolverError(f"singular mirror Jacobian at theta={theta}") from exc
        t = 1.0
        for _ in range(60):
            cand = theta + t * step
            if gen.domain.contains(cand):
                try:
                    cres = lambda_mirror(gen, cand).eta - eta
                except GeometryError:
                    cres = None
                if cres is not None and np.linalg.norm(cres) <= (1.0 - 1e-4 * t) * rnorm:
                    theta, res, rnorm = cand, cres, np.linalg.norm(cres)
                    break
            t *= 0.5
        else:
            raise SolverError(f"inverse mirror line search stalled at eta={eta}")
    if rnorm <= tol * max(1.0, np.linalg.norm(eta)):
        return theta
    raise SolverError(f"inverse mirror did not converge for eta={eta} (residual {rnorm:.3e})")


def conjugate_value(gen: Generator, pair: DualPair) -> float:
    """Value of the conjugate at the mirror image: psi(eta) = -phi(theta) - c(theta, eta)."""
    return -float(gen.value(pair.theta)) - log_cost(pair.theta, pair.eta, gen.lam)


def bregman_div(gen: Generator, theta, theta_p) -> float:
    """Bregman divergence of the generator's value, treating it as convex."""
    theta = _vec(theta)
    theta_p = _vec(theta_p)
    gp = _vec(gen.grad(theta_p))
    return float(gen.value(theta)) - float(gen.value(theta_p)) - float(gp @ (theta - theta_p))


def log_div(gen: Generator, theta, theta_p) -> float:
    """Logarithmic divergence L[theta : theta_p]; Bregman divergence when lam ~ 0."""
    if gen.is_bregman:
        return bregman_div(gen, theta, theta_p)
    theta = _vec(theta)
    theta_p = _vec(theta_p)
    gp = _vec(gen.grad(theta_p))
    arg = gen.lam * float(gp @ (theta - theta_p))
    if 1.0 + arg <= LOG_GUARD:
        raise DomainError(f"log argument {1.0 + arg:.3e} <= 0 in log_div")
    return (float(gen.value(theta)) - float(gen.value(theta_p))
            - np.log1p(arg) / gen.lam)


def log_div_self_dual(gen: Generator, theta, eta_p) -> float:
    """Self-dual form: phi(theta) + psi(eta') - (1/lam) log(1 + lam*<theta, eta'>)."""
    theta = _vec(theta)
    eta_p = _vec(eta_p)
    theta_p = inverse_mirror(gen, eta_p)
    psi = conjugate_value(gen, DualPair(theta_p, eta_p, 1.0 + gen.lam * float(theta_p @ eta_p)))
    if gen.is_bregman:
        return float(gen.value(theta)) + psi - float(theta @ eta_p)
    return float(gen.value(theta)) + psi + log_cost(theta, eta_p, gen.lam)


def metric(gen: Generator, theta) -> MetricAtPoint:
    """Conformal Hessian metric G = hess phi + lam * (grad phi)(grad phi)^T."""
    theta = _vec(theta)
    if gen.hess is None:
        raise RegularityError(f"generator {gen.name!r} has no Hessian oracle; "
                              "register one or use fd_hess for verification")
    h = np.atleast_2d(np.asarray(gen.hess(theta), dtype=float))
    if gen.is_bregman:
        g = h
    else:
        u = _vec(gen.grad(theta))
        g = h + gen.lam * np.outer(u, u)
    g = 0.5 * (g + g.T)
    try:
        np.linalg.cholesky(g)
    except np.linalg.LinAlgError as exc:
        raise RegularityError(f"metric not positive definite at theta={theta}") from exc
    g_inv = np.linalg.solve(g, np.eye(g.shape[0]))
    factor = 1.0 if gen.is_bregman else float(np.exp(-gen.lam * float(gen.value(theta))))
    return MetricAtPoint(g, g_inv, factor)


def metric_inverse_sm(gen: Generator, pair: DualPair, jac_theta_eta: np.ndarray) -> np.ndarray:
    """Inverse metric from the mirror Jacobian: pi * (d theta/d eta) * (I + lam eta theta^T)."""
    jac = np.atleast_2d(np.asarray(jac_theta_eta, dtype=float))
    if gen.is_bregman:
        return jac
    corr = np.eye(gen.dim) + gen.lam * np.outer(pair.eta, pair.theta)
    return pair.pi * jac @ corr


# ---------------------------------------------------------------------------
# the convex generator Phi = (exp(lam*phi) - 1)/lam and its Bregman geometry


def big_phi_value(gen: Generator, theta) -> float:
    if gen.is_bregman:
        return float(gen.value(_vec(theta)))
    return float(np.expm1(gen.lam * float(gen.value(_vec(theta)))) / gen.lam)


def big_phi_grad(gen: Generator, theta):
    theta = np.asarray(theta)
    u = np.atleast_1d(np.asarray(gen.grad(theta)))
    if gen.is_bregman:
        return u
    return np.exp(gen.lam * gen.value(theta)) * u


def big_phi_hess(gen: Generator, theta) -> np.ndarray:
    theta = _vec(theta)
    g = metric(gen, theta).g
    if gen.is_bregman:
        return g
    return float(np.exp(gen.lam * float(gen.value(theta)))) * g


def big_phi_bregman(gen: Generator, theta, theta_p) -> float:
    """Bregman divergence of Phi; the potential behind all convergence bounds."""
    theta = _vec(theta)
    theta_p = _vec(theta_p)
    gp = _vec(big_phi_grad(gen, theta_p))
    return (big_phi_value(gen, theta) - big_phi_value(gen, theta_p)
            - float(gp @ (theta - theta_p)))


def zeta_of(gen: Generator, theta) -> np.ndarray:
    """Bregman-dual coordinate zeta = grad Phi(theta)."""
    return _vec(big_phi_grad(gen, theta))


def theta_of_zeta(gen: Generator, zeta, theta0=None, tol: float = 1e-12,
                  max_iter: int = 100) -> np.ndarray:
    """Invert grad Phi by damped Newton (Jacobian is hess Phi, available in closed form)."""
    zeta = _vec(zeta)
    theta = _vec(theta0) if theta0 is not None else gen.domain.anchor.copy()
    res = zeta_of(gen, theta) - zeta
    rnorm = np.linalg.norm(res)
    for _ in range(max_iter):
        if rnorm <= tol:
            return theta
        jac = big_phi_hess(gen, theta)
        step = np.linalg.solve(jac, -res)
        t = 1.0
        for _ in range(60):
            cand = theta + t * step
            if gen.domain.contains(cand):
                try:
                    cres = zeta_of(gen, cand) - zeta
                except GeometryError:
                    cres = None
                if cres is not None and np.linalg.norm(cres) <= (1.0 - 1e-4 * t) * rnorm:
                    theta, res, rnorm = cand, cres, np.linalg.norm(cres)
                    break
            t *= 0.5
        else:
            raise SolverError("dual-potential inversion line search stalled")
    if rnorm <= tol * max(1.0, np.linalg.norm(zeta)):
        return theta
    raise SolverError(f"dual-potential inversion did not converge (residual {rnorm:.3e})")


def conjugate_generator(gen: Generator) -> Generator:
    """The conjugate as a generator on the dual domain (verification helper).

    Its ordinary gradient is theta / (1 + lam*<theta, eta>), which makes the
    roles of the two coordinate systems symmetric.
    """
    if gen.dual_domain is None:
        raise DomainError("conjugate_generator requires a registered dual domain")

    def value(eta):
        theta = inverse_mirror(gen, eta)
        pi = 1.0 + gen.lam * float(theta @ _vec(eta))
        return conjugate_value(gen, DualPair(theta, _vec(eta), pi))

    def grad(eta):
        theta = inverse_mirror(gen, eta)
        pi = 1.0 + gen.lam * float(theta @ _vec(eta))
        return theta / pi

    return Generator(lam=gen.lam, domain=gen.dual_domain, value=value, grad=grad,
                     name=f"conjugate({gen.name})")


# ---------------------------------------------------------------------------
# verification-only numerical differentiation


def fd_grad(f: Callable[[np.ndarray], float], x, rel_step: Optional[float] = None) -> np.ndarray:
    """Central-difference gradient with step h_i = eps^(1/3) * (1 + |x_i|)."""
    x = _vec(x)
    h0 = rel_step if rel_step is not None else np.finfo(float).eps ** (1.0 / 3.0)
    out = np.empty_like(x)
    for i in range(x.size):
        h = h0 * (1.0 + abs(x[i]))
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        out[i] = (float(f(xp)) - float(f(xm))) / (2.0 * h)
    return out


def fd_hess(f: Callable[[np.ndarray], float], x) -> np.ndarray:
    """Central-difference Hessian of a scalar function (verification only)."""
    x = _vec(x)
    h0 = np.finfo(float).eps ** (1.0 / 3.0)
    n = x.size
    out = np.empty((n, n))
    for j in range(n):
        h = h0 * (1.0 + abs(x[j]))
        xp, xm = x.copy(), x.copy()
        xp[j] += h
        xm[j] -= h
        out[:, j] = (fd_grad(f, xp) - fd_grad(f, xm)) / (2.0 * h)
    return 0.5 * (out + out.T)


def fd_jacobian(f: Callable[[np.ndarray], np.ndarray], x) -> np.ndarray:
    """Central-difference Jacobian of a vector map (verification only)."""
    x = _vec(x)
    h0 = np.finfo(float).eps ** (1.0 / 3.0)
    cols = []
    for i in range(x.size):
        h = h0 * (1.0 + abs(x[i]))
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        cols.append((_vec(f(xp)) - _vec(f(xm))) / (2.0 * h))
    return np.stack(cols, axis=1)


def cs_jacobian(f: Callable[[np.ndarray], np.ndarray], x, h: float = 1e-20) -> np.ndarray:
    """Complex-step Jacobian; exact to roundoff for analytic maps (verification only)."""
    x = np.asarray(x, dtype=complex)
    cols = []
    for i in range(x.size):
        xp = x.copy()
        xp[i] += 1j * h
        cols.append(np.imag(np.atleast_1d(f(xp))) / h)
    return np.stack(cols, axis=1)


def check_regularity(gen: Generator, points: Sequence) -> list[str]:
    """Evaluate both regularity conditions on a set of points; return violations."""
    bad = []
    for theta in points:
        theta = _vec(theta)
        try:
            if gen.hess is not None:
                np.linalg.cholesky(big_phi_hess(gen, theta))
            u = _vec(gen.grad(theta))
            if not gen.is_bregman:
                s = 1.0 - gen.lam * float(u @ theta)
                if s <= 0.0:
                    bad.append(f"1 - lam*<grad,theta> = {s:.3e} at theta={theta}")
        except (np.linalg.LinAlgError, GeometryError) as exc:
            bad.append(f"{exc} at theta={theta}")
    return bad
