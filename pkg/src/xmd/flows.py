"""Gradient flows for the conformal Hessian metric, their Euler discretizations,
and convergence diagnostics.

The continuous flow is d theta/dt = -G^{-1}(theta) grad f(theta). Under the
mirror map it reads d eta/dt = -pi * (I + lam eta theta^T) grad f(theta), and
in the Bregman-dual coordinate zeta = grad Phi(theta) it collapses to
d zeta/dt = -exp(lam*phi(theta)) grad f(theta), exposing the flow as a time
change (with clock tau_t = integral of exp(lam*phi)) of the Hessian flow of
Phi. Three forward-Euler schemes discretize the same flow in the three
coordinate systems.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .core import (DomainError, DualPair, Generator, GeometryError,
                   RegularityError, SolverError, _vec, big_phi_bregman,
                   big_phi_hess, inverse_mirror, lambda_mirror, log_div,
                   metric, theta_of_zeta, zeta_of)

MAX_HALVINGS = 20
MONOTONE_TOL = 1e-9


@dataclass(frozen=True)
class Objective:
    """A differentiable target with optional known minimizer."""

    value: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    theta_star: Optional[np.ndarray] = None


@dataclass(frozen=True)
class FlowState:
    """One trajectory sample: primal/dual/Bregman-dual coordinates, the clock
    tau, and the tau-weighted running average of the path."""

    theta: np.ndarray
    eta: np.ndarray
    zeta: np.ndarray
    t: float
    tau: float
    theta_hat: np.ndarray


@dataclass
class ConvergenceReport:
    lyapunov_series: list = field(default_factory=list)   # (t or k, E)
    bound_series: list = field(default_factory=list)      # (t or k, bound)
    gap_series: list = field(default_factory=list)        # (t or k, f(avg) - f*)
    violations: list = field(default_factory=list)        # (t or k, increase)
    smoothness_L: Optional[float] = None

    @property
    def monotone(self) -> bool:
        return not self.violations

    @property
    def bound_dominates(self) -> bool:
        return all(g <= b + 1e-12 for (_, g), (_, b) in zip(self.gap_series, self.bound_series))


def quadratic_objective(center, weight: float = 1.0) -> Objective:
    center = _vec(center)
    return Objective(
        value=lambda t: 0.5 * weight * float((_vec(t) - center) @ (_vec(t) - center)),
        grad=lambda t: weight * (_vec(t) - center),
        theta_star=center,
    )


def primal_logdiv_objective(gen: Generator, theta_star) -> Objective:
    """f(theta) = L[theta_star : theta]; its flow follows a primal geodesic."""
    theta_star = _vec(theta_star)

    def grad(theta):
        theta = _vec(theta)
        u = _vec(gen.grad(theta))
        h = np.atleast_2d(gen.hess(theta))
        if gen.is_bregman:
            return -np.asarray(h) @ (theta_star - theta)
        w = 1.0 + gen.lam * float(u @ (theta_star - theta))
        if w <= 0.0:
            raise DomainError(f"log argument {w:.3e} <= 0 in the primal objective")
        return -u - (h @ (theta_star - theta) - u) / w

    return Objective(value=lambda t: log_div(gen, theta_star, t), grad=grad,
                     theta_star=theta_star)


def dual_logdiv_objective(gen: Generator, theta_star) -> Objective:
    """f(theta) = L[theta : theta_star]; its flow follows a dual geodesic."""
    theta_star = _vec(theta_star)
    eta_star = lambda_mirror(gen, theta_star).eta

    def grad(theta):
        pair = lambda_mirror(gen, theta)
        if gen.is_bregman:
            return pair.eta - eta_star
        pi_star = 1.0 + gen.lam * float(pair.theta @ eta_star)
        if pi_star <= 0.0:
            raise DomainError(f"pairing {pi_star:.3e} <= 0 in the dual objective")
        return pair.eta / pair.pi - eta_star / pi_star

    return Objective(value=lambda t: log_div(gen, t, theta_star), grad=grad,
                     theta_star=theta_star)


# ---------------------------------------------------------------------------
# right-hand sides


def rhs_primal(gen: Generator, obj: Objective, theta) -> np.ndarray:
    """-G^{-1}(theta) grad f(theta)."""
    theta = _vec(theta)
    g = metric(gen, theta).g
    return -np.linalg.solve(g, _vec(obj.grad(theta)))


def rhs_dual(gen: Generator, obj: Objective, pair: DualPair) -> np.ndarray:
    """-pi * (I + lam eta theta^T) grad f(theta), the flow of the dual variable."""
    df = _vec(obj.grad(pair.theta))
    if gen.is_bregman:
        return -df
    corr = df + gen.lam * pair.eta * float(pair.theta @ df)
    return -pair.pi * corr


# ---------------------------------------------------------------------------
# integration


def _integrate_path(rhs: Callable[[np.ndarray], np.ndarray], feasible,
                    theta0, t_end: float, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Classic fixed-step 4th-order integration with step halving (up to
    MAX_HALVINGS) whenever a stage or the accepted point leaves the domain."""
    theta0 = _vec(theta0)
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    n_steps = int(round(t_end / dt))
    times = np.linspace(0.0, n_steps * dt, n_steps + 1)
    path = np.empty((n_steps + 1, theta0.size))
    path[0] = theta0

    def rk4(theta, h):
        k1 = rhs(theta)
        k2 = rhs(theta + 0.5 * h * k1)
        k3 = rhs(theta + 0.5 * h * k2)
        k4 = rhs(theta + h * k3)
        out = theta + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not feasible(out):
            raise DomainError("step left the domain")
        return out

    def advance(theta, h, depth):
        try:
            return rk4(theta, h)
        except GeometryError:
            if depth >= MAX_HALVINGS:
                raise SolverError(f"step size halved {MAX_HALVINGS} times without staying feasible")
            half = advance(theta, 0.5 * h, depth + 1)
            return advance(half, 0.5 * h, depth + 1)

    theta = theta0
    for i in range(n_steps):
        theta = advance(theta, dt, 0)
        path[i + 1] = theta
    return times, path


def integrate(gen: Generator, obj: Objective, theta0, t_end: float,
              dt: float = 1e-3) -> list[FlowState]:
    """Integrate the conformal flow; tau and the weighted average accumulate by
    the trapezoid rule on the weights exp(lam*phi(theta_t))."""
    times, path = _integrate_path(lambda th: rhs_primal(gen, obj, th),
                                  gen.domain.contains, theta0, t_end, dt)
    states = []
    tau = 0.0
    avg_acc = np.zeros(path.shape[1])
    w_prev = None
    for i, (t, theta) in enumerate(zip(times, path)):
        w = 1.0 if gen.is_bregman else float(np.exp(gen.lam * float(gen.value(theta))))
        if i > 0:
            h = times[i] - times[i - 1]
            tau += 0.5 * h * (w_prev + w)
            avg_acc = avg_acc + 0.5 * h * (w_prev * path[i - 1] + w * theta)
        theta_hat = theta.copy() if tau == 0.0 else avg_acc / tau
        pair = lambda_mirror(gen, theta)
        states.append(FlowState(theta=theta, eta=pair.eta, zeta=zeta_of(gen, theta),
                                t=float(t), tau=tau, theta_hat=theta_hat))
        w_prev = w
    return states


def integrate_hessian_flow(gen: Generator, obj: Objective, theta0, s_end: float,
                           ds: float = 1e-3) -> tuple[np.ndarray, np.ndarray]:
    """The Hessian gradient flow of Phi: d theta/ds = -(hess Phi)^{-1} grad f."""
    def rhs(theta):
        return -np.linalg.solve(big_phi_hess(gen, theta), _vec(obj.grad(theta)))

    return _integrate_path(rhs, gen.domain.contains, theta0, s_end, ds)


# ---------------------------------------------------------------------------
# forward-Euler steps in the three coordinate systems


def _feasible_or_fallback(gen: Generator, theta_k, propose, delta: float):
    """Try a step of size delta; reflect box violations, then halve."""
    d = delta
    for _ in range(MAX_HALVINGS + 1):
        try:
            cand = propose(d)
        except GeometryError:
            cand = None
        if cand is not None:
            if gen.domain.contains(cand):
                return cand
            refl = gen.domain.reflect(cand)
            if gen.domain.contains(refl):
                return refl
        d *= 0.5
    raise SolverError(f"step from {theta_k} infeasible after {MAX_HALVINGS} halvings")


def step_primal_euler(gen: Generator, obj: Objective, theta_k, delta: float) -> np.ndarray:
    theta_k = _vec(theta_k)
    if delta == 0.0:
        return theta_k.copy()
    direction = rhs_primal(gen, obj, theta_k)
    return _feasible_or_fallback(gen, theta_k, lambda d: theta_k + d * direction, delta)


def step_dual_euler(gen: Generator, obj: Objective, pair: DualPair, delta: float) -> DualPair:
    """eta step followed by mirror inversion; infeasible eta is reflected into
    the dual domain (when one is registered) and the step halved otherwise."""
    if delta == 0.0:
        return pair
    direction = rhs_dual(gen, obj, pair)
    d = delta
    for _ in range(MAX_HALVINGS + 1):
        eta_next = pair.eta + d * direction
        for candidate in _dual_candidates(gen, eta_next):
            try:
                theta_next = pair.theta if np.array_equal(candidate, pair.eta) \
                    else _invert(gen, candidate, pair.theta)
            except GeometryError:
                continue
            pi = 1.0 + gen.lam * float(theta_next @ candidate)
            return DualPair(theta_next, candidate, pi)
        d *= 0.5
    raise SolverError("dual step infeasible after halving")


def _dual_candidates(gen: Generator, eta):
    yield eta
    if gen.dual_domain is not None:
        refl = gen.dual_domain.reflect(eta)
        if not np.array_equal(refl, eta):
            yield refl


def _invert(gen: Generator, eta, theta0):
    if gen.dual_domain is not None and not gen.dual_domain.contains(eta):
        raise DomainError("eta outside dual domain")
    return inverse_mirror(gen, eta, theta0=theta0)


def step_adaptive_mirror(gen: Generator, obj: Objective, theta_k, delta: float) -> np.ndarray:
    """Mirror step on Phi with the conformal factor as a state-dependent
    learning rate: zeta <- zeta - delta * exp(lam*phi) * grad f."""
    theta_k = _vec(theta_k)
    if delta == 0.0:
        return theta_k.copy()
    zeta_k = zeta_of(gen, theta_k)
    w = 1.0 if gen.is_bregman else float(np.exp(gen.lam * float(gen.value(theta_k))))
    df = _vec(obj.grad(theta_k))
    return _feasible_or_fallback(
        gen, theta_k,
        lambda d: theta_of_zeta(gen, zeta_k - d * w * df, theta0=theta_k),
        delta)


# ---------------------------------------------------------------------------
# diagnostics


@dataclass
class GeodesicReport:
    dual_collinearity: float
    dual_coefficient_error: float
    primal_collinearity: float
    tol: float

    @property
    def passed(self) -> bool:
        return max(self.dual_collinearity, self.dual_coefficient_error,
                   self.primal_collinearity) < self.tol


def _segment_deviation(x, a, b) -> float:
    seg = b - a
    denom = float(seg @ seg)
    if denom == 0.0:
        return float(np.linalg.norm(x - a))
    s = np.clip(float((x - a) @ seg) / denom, 0.0, 1.0)
    return float(np.linalg.norm(x - (a + s * seg)))


def geodesic_flow_check(gen: Generator, theta_star, theta0, t_end: float = 1.0,
                        dt: float = 1e-3, tol: float = 1e-6) -> GeodesicReport:
    """Verify that log-divergence flows run along straight lines: the dual flow
    in eta with velocity -(pi/pi_star)(eta - eta_star), the primal flow in theta."""
    theta_star = _vec(theta_star)
    theta0 = _vec(theta0)
    eta_star = lambda_mirror(gen, theta_star).eta
    eta0 = lambda_mirror(gen, theta0).eta

    dual_obj = dual_logdiv_objective(gen, theta_star)
    dual_states = integrate(gen, dual_obj, theta0, t_end, dt)
    collin = 0.0
    coeff = 0.0
    for st in dual_states:
        collin = max(collin, _segment_deviation(st.eta, eta0, eta_star))
        pair = DualPair(st.theta, st.eta, 1.0 + gen.lam * float(st.theta @ st.eta))
        measured = rhs_dual(gen, dual_obj, pair)
        pi_star = 1.0 + gen.lam * float(st.theta @ eta_star)
        expected = -(pair.pi / pi_star) * (st.eta - eta_star)
        coeff = max(coeff, float(np.max(np.abs(measured - expected))))

    primal_obj = primal_logdiv_objective(gen, theta_star)
    primal_states = integrate(gen, primal_obj, theta0, t_end, dt)
    pcollin = max(_segment_deviation(st.theta, theta0, theta_star) for st in primal_states)

    return GeodesicReport(dual_collinearity=collin, dual_coefficient_error=coeff,
                          primal_collinearity=pcollin, tol=tol)


def lyapunov_continuous(gen: Generator, obj: Objective,
                        states: Sequence[FlowState]) -> ConvergenceReport:
    """Log divergence to the minimizer as a Lyapunov function, plus the
    averaged-iterate bound B_Phi[theta_star : theta_0] / tau_t."""
    if obj.theta_star is None:
        raise ValueError("lyapunov_continuous requires an objective with a known minimizer")
    star = _vec(obj.theta_star)
    f_star = float(obj.value(star))
    numer = big_phi_bregman(gen, star, states[0].theta)

    report = ConvergenceReport()
    prev = None
    for st in states:
        e = log_div(gen, star, st.theta)
        report.lyapunov_series.append((st.t, e))
        if prev is not None and e - prev > MONOTONE_TOL:
            report.violations.append((st.t, e - prev))
        prev = e
        if st.tau > 0.0:
            report.bound_series.append((st.t, numer / st.tau))
            report.gap_series.append((st.t, float(obj.value(st.theta_hat)) - f_star))
    return report


def conformal_smoothness_estimate(gen: Generator, obj: Objective,
                                  grid_pairs: Sequence, guard: float = 1e-18) -> float:
    """Smallest L with B_f[x:y] <= L * exp(-lam*phi(y)) * B_Phi[x:y] over the grid.

    Also cross-checks the two equivalent forms of the right-hand side against
    each other to 1e-10 relative.
    """
    worst = 0.0
    for x, y in grid_pairs:
        x = _vec(x)
        y = _vec(y)
        bf = (float(obj.value(x)) - float(obj.value(y))
              - float(_vec(obj.grad(y)) @ (x - y)))
        bphi = big_phi_bregman(gen, x, y)
        if gen.is_bregman:
            denom = bphi
        else:
            fy = float(gen.value(y))
            denom = float(np.exp(-gen.lam * fy)) * bphi
            alt = (np.exp(gen.lam * (float(gen.value(x)) - fy))
                   * (-np.expm1(-gen.lam * log_div(gen, x, y))) / gen.lam)
            if abs(denom - alt) > 1e-10 * max(1.0, abs(denom)):
                raise RegularityError(
                    f"smoothness denominators disagree at ({x}, {y}): {denom} vs {alt}")
        if denom < guard:
            raise DomainError(f"unbounded smoothness ratio at pair ({x}, {y})")
        worst = max(worst, bf / denom)
    return worst


def discrete_lyapunov_run(gen: Generator, obj: Objective, theta0, delta: float,
                          k_max: int) -> ConvergenceReport:
    """Run the adaptive-mirror scheme and audit the discrete potential
    E_k = B_Phi[star : theta_k] + delta * sum_s w_s (f(theta_s) - f*), with
    weights w_s = exp(lam*phi(theta_{s-1})), and its averaged-iterate bound."""
    if obj.theta_star is None:
        raise ValueError("discrete_lyapunov_run requires an objective with a known minimizer")
    star = _vec(obj.theta_star)
    f_star = float(obj.value(star))

    thetas = [_vec(theta0)]
    for _ in range(k_max):
        thetas.append(step_adaptive_mirror(gen, obj, thetas[-1], delta))

    def weight(theta):
        return 1.0 if gen.is_bregman else float(np.exp(gen.lam * float(gen.value(theta))))

    report = ConvergenceReport()
    running = 0.0
    wsum = 0.0
    avg_acc = np.zeros_like(thetas[0])
    prev_e = None
    e1 = None
    for k in range(1, k_max + 1):
        w = weight(thetas[k - 1])
        running += w * (float(obj.value(thetas[k])) - f_star)
        wsum += w
        avg_acc = avg_acc + w * thetas[k]
        e_k = big_phi_bregman(gen, star, thetas[k]) + delta * running
        if e1 is None:
            e1 = e_k
        report.lyapunov_series.append((k, e_k))
        if prev_e is not None and e_k - prev_e > MONOTONE_TOL:
            report.violations.append((k, e_k - prev_e))
        prev_e = e_k
        theta_hat = avg_acc / wsum
        report.gap_series.append((k, float(obj.value(theta_hat)) - f_star))
        report.bound_series.append((k, e1 / (delta * wsum)))
    return report


def time_change_compare(gen: Generator, obj: Objective, theta0, t_end: float,
                        dt: float) -> float:
    """Sup distance between the conformal flow and the Hessian flow of Phi
    reparameterized through ds/dt = exp(lam*phi(theta_tilde(s)))."""
    conformal = integrate(gen, obj, theta0, t_end, dt)

    s_end = conformal[-1].tau * 1.05 + 10.0 * dt
    s_grid, hess_path = integrate_hessian_flow(gen, obj, theta0, s_end, dt)
    spline = CubicSpline(s_grid, hess_path, axis=0)

    def clock_rate(s):
        s = float(np.clip(s, s_grid[0], s_grid[-1]))
        theta = np.atleast_1d(spline(s))
        return float(np.exp(gen.lam * float(gen.value(theta))))

    # scalar 4th-order integration of ds/dt = exp(lam*phi(theta_tilde(s)))
    s = 0.0
    sup = float(np.linalg.norm(conformal[0].theta - hess_path[0]))
    for i in range(1, len(conformal)):
        h = conformal[i].t - conformal[i - 1].t
        k1 = clock_rate(s)
        k2 = clock_rate(s + 0.5 * h * k1)
        k3 = clock_rate(s + 0.5 * h * k2)
        k4 = clock_rate(s + h * k3)
        s += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        dev = float(np.linalg.norm(conformal[i].theta - np.atleast_1d(spline(s))))
        sup = max(sup, dev)
    return sup


# ---------------------------------------------------------------------------
# trajectory dump


def write_trajectory_csv(path, gen: Generator, obj: Objective,
                         states: Sequence[FlowState]) -> None:
    """One row per sample: t, tau, theta components, eta components, f, E."""
    dim = states[0].theta.size
    header = (["t", "tau"] + [f"theta_{i}" for i in range(dim)]
              + [f"eta_{i}" for i in range(dim)] + ["f", "E"])
    star = None if obj.theta_star is None else _vec(obj.theta_star)

    def fmt(x):
        return repr(float(x))

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for st in states:
            e = float("nan") if star is None else log_div(gen, star, st.theta)
            row = ([fmt(st.t), fmt(st.tau)] + [fmt(v) for v in st.theta]
                   + [fmt(v) for v in st.eta] + [fmt(obj.value(st.theta)), fmt(e)])
            writer.writerow(row)
