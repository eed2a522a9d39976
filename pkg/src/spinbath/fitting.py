"""Nonlinear least-squares engine and the toolkit's model-specific fitters.

The core is a damped Gauss-Newton iteration (Levenberg-style schedule:
damping x10 on a rejected step, /3 on an accepted one) with a central
finite-difference Jacobian and box bounds enforced by projection.  All
models here are smooth, so this converges quickly; stochastic models are
fitted against frozen random seeds so the objective is deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .curves import CurveSeries


@dataclass
class FitResult:
    params: np.ndarray
    sigma: np.ndarray
    residual_norm: float
    converged: bool
    iterations: int
    condition: float
    message: str = ""
    names: tuple = ()
    extras: dict = field(default_factory=dict)

    def as_dict(self):
        out = {}
        names = self.names or tuple(f"p{i}" for i in range(len(self.params)))
        for n, v, s in zip(names, self.params, self.sigma):
            out[n] = {"value": float(v), "sigma": float(s)}
        out["residual_norm"] = float(self.residual_norm)
        out["converged"] = bool(self.converged)
        out["iterations"] = int(self.iterations)
        out["condition"] = float(self.condition)
        if self.message:
            out["message"] = self.message
        out.update(self.extras)
        return out


def _jacobian(residual_fn, theta, r0, bounds):
    """Central finite differences; falls back to one-sided at active bounds."""
    n = len(theta)
    jac = np.empty((len(r0), n))
    for k in range(n):
        h = 1e-6 * max(abs(theta[k]), 1.0)
        lo, hi = bounds[0][k], bounds[1][k]
        tp = theta.copy()
        tm = theta.copy()
        tp[k] = min(theta[k] + h, hi)
        tm[k] = max(theta[k] - h, lo)
        span = tp[k] - tm[k]
        if span == 0.0:
            jac[:, k] = 0.0
            continue
        jac[:, k] = (residual_fn(tp) - residual_fn(tm)) / span
    return jac


def fit_curve(
    model,
    data: CurveSeries,
    theta0,
    bounds=None,
    max_iter=500,
    step_tol=1e-8,
    residual_tol=1e-10,
    names=(),
) -> FitResult:
    """Weighted least squares of ``model(x, theta)`` against ``data``.

    ``bounds`` is an optional ``(lower, upper)`` pair of arrays; steps are
    projected back into the box.  Convergence is declared when the relative
    step or the relative residual change drops below its tolerance; hitting
    ``max_iter`` or a rejected-step deadlock flags non-convergence.
    """
    theta = np.asarray(theta0, dtype=float).copy()
    n_par = len(theta)
    if len(data) < n_par + 1:
        raise ValueError(f"need at least {n_par + 1} points to fit {n_par} parameters")
    weights = 1.0 / data.sigma if data.sigma is not None else np.ones_like(data.y)

    if bounds is None:
        lo = np.full(n_par, -np.inf)
        hi = np.full(n_par, np.inf)
    else:
        lo = np.asarray(bounds[0], dtype=float)
        hi = np.asarray(bounds[1], dtype=float)
    theta = np.clip(theta, lo, hi)

    def residual(th):
        return (np.asarray(model(data.x, th), dtype=float) - data.y) * weights

    r = residual(theta)
    cost = float(r @ r)
    lam = 1e-3
    converged = False
    message = ""
    condition = np.inf
    iteration = 0

    for iteration in range(1, max_iter + 1):
        jac = _jacobian(residual, theta, r, (lo, hi))
        jtj = jac.T @ jac
        jtr = jac.T @ r
        diag = np.diag(jtj).copy()
        scale = np.where(diag > 0, diag, 1.0)
        condition = float(np.linalg.cond(jtj)) if np.all(np.isfinite(jtj)) else np.inf

        accepted = False
        for _ in range(30):
            try:
                step = np.linalg.solve(jtj + lam * np.diag(scale), -jtr)
            except np.linalg.LinAlgError:
                step = -np.linalg.pinv(jtj + lam * np.diag(scale)) @ jtr
            trial = np.clip(theta + step, lo, hi)
            r_trial = residual(trial)
            cost_trial = float(r_trial @ r_trial)
            if np.isfinite(cost_trial) and cost_trial <= cost:
                accepted = True
                break
            lam *= 10.0
            if lam > 1e14:
                break
        if not accepted:
            message = "damping exhausted without an acceptable step"
            break
        lam = max(lam / 3.0, 1e-14)

        step_size = np.linalg.norm(trial - theta) / max(np.linalg.norm(theta), 1.0)
        rel_drop = (cost - cost_trial) / max(cost, 1e-300)
        theta, r, cost = trial, r_trial, cost_trial
        if step_size < step_tol or rel_drop < residual_tol:
            converged = True
            break
    else:
        message = f"no convergence in {max_iter} iterations"

    jac = _jacobian(residual, theta, r, (lo, hi))
    jtj = jac.T @ jac
    condition = float(np.linalg.cond(jtj)) if np.all(np.isfinite(jtj)) else np.inf
    dof = max(len(data) - n_par, 1)
    scale2 = cost / dof if data.sigma is None else 1.0
    try:
        cov = np.linalg.inv(jtj) * scale2
        sigma = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    except np.linalg.LinAlgError:
        cov = np.linalg.pinv(jtj) * scale2
        sigma = np.sqrt(np.clip(np.diag(cov), 0.0, None))
        message = message or "singular Jacobian, covariance from pseudo-inverse"
    # Unconstrained directions: report unbounded uncertainty rather than 0.
    dead = np.diag(jtj) <= 1e-14 * max(np.max(np.diag(jtj)), 1e-300)
    sigma[dead] = np.inf
    if condition > 1e13 and not message:
        message = f"ill-conditioned Jacobian (cond ~ {condition:.2g})"

    return FitResult(
        params=theta,
        sigma=sigma,
        residual_norm=float(np.sqrt(cost)),
        converged=converged,
        iterations=iteration,
        condition=condition,
        message=message,
        names=tuple(names),
    )


def stretched_model(t, theta):
    """A * exp(-sqrt(t / T1)); theta = (A, T1)."""
    a, t1 = theta
    return a * np.exp(-np.sqrt(np.clip(np.asarray(t, dtype=float), 0.0, None) / t1))


def fit_stretched(data: CurveSeries, fix_amplitude=False) -> FitResult:
    """Fit a square-root stretched exponential; returns (A, T1) or (T1,)."""
    y0 = float(np.max(data.y))
    if y0 <= 0:
        raise ValueError("stretched fit needs data decaying from a positive value")
    # Initial T1 from the e^-1 crossing of y/A: sqrt(t/T1) = 1 there.
    frac = data.y / y0
    below = np.nonzero(frac < np.exp(-1.0))[0]
    t1_guess = float(data.x[below[0]]) if len(below) else float(data.x[-1])
    t1_guess = max(t1_guess, 1e-12)

    if fix_amplitude:
        res = fit_curve(
            lambda t, th: stretched_model(t, (1.0, th[0])),
            data,
            np.array([t1_guess]),
            bounds=(np.array([1e-12]), np.array([np.inf])),
            names=("T1",),
        )
        return res
    return fit_curve(
        stretched_model,
        data,
        np.array([y0, t1_guess]),
        bounds=(np.array([0.0, 1e-12]), np.array([np.inf, np.inf])),
        names=("amplitude", "T1"),
    )


def simple_exponential_model(t, theta):
    """A * exp(-t / tau); theta = (A, tau)."""
    a, tau = theta
    return a * np.exp(-np.asarray(t, dtype=float) / tau)


def fit_simple_exponential(data: CurveSeries) -> FitResult:
    y0 = float(np.max(data.y))
    frac = data.y / max(y0, 1e-300)
    below = np.nonzero(frac < np.exp(-1.0))[0]
    tau = float(data.x[below[0]]) if len(below) else float(data.x[-1])
    return fit_curve(
        simple_exponential_model,
        data,
        np.array([y0, max(tau, 1e-12)]),
        bounds=(np.array([0.0, 1e-12]), np.array([np.inf, np.inf])),
        names=("amplitude", "tau"),
    )


def lorentzian_model(x, theta):
    """offset + A / (1 + (2 (x - x0) / fwhm)^2); theta = (A, x0, fwhm, offset)."""
    a, x0, fwhm, offset = theta
    u = 2.0 * (np.asarray(x, dtype=float) - x0) / fwhm
    return offset + a / (1.0 + u * u)


def fit_lorentzian(data: CurveSeries) -> FitResult:
    """Fit a Lorentzian peak (either sign) plus constant offset."""
    if len(data) < 5:
        raise ValueError("lorentzian fit needs at least 5 points")
    y = data.y
    offset = float(np.median(y))
    hi, lo = float(np.max(y)), float(np.min(y))
    if hi - offset >= offset - lo:
        amp = hi - offset
        x0 = float(data.x[np.argmax(y)])
    else:
        amp = lo - offset
        x0 = float(data.x[np.argmin(y)])
    span = float(data.x[-1] - data.x[0])
    theta0 = np.array([amp, x0, span / 4.0, offset])
    return fit_curve(
        lorentzian_model,
        data,
        theta0,
        bounds=(
            np.array([-np.inf, -np.inf, 1e-12 * max(span, 1.0), -np.inf]),
            np.array([np.inf, np.inf, np.inf, np.inf]),
        ),
        names=("amplitude", "center", "fwhm", "offset"),
    )


def stretched_population_diffs(t, gamma1, gamma2):
    """Stretched population differences after preparation in the lowest level.

    d1 = (e^-sqrt((g1+2 g2) t) + e^-sqrt(3 g1 t)) / 2,
    d2 = (e^-sqrt((g1+2 g2) t) - e^-sqrt(3 g1 t)) / 2.
    """
    t = np.clip(np.asarray(t, dtype=float), 0.0, None)
    slow = np.exp(-np.sqrt((gamma1 + 2.0 * gamma2) * t))
    fast = np.exp(-np.sqrt(3.0 * gamma1 * t))
    return 0.5 * (slow + fast), 0.5 * (slow - fast)


def fit_rate_pair(d1_data: CurveSeries, d2_data: CurveSeries, theta0=None) -> FitResult:
    """Joint fit of both stretched population differences; returns (gamma1, gamma2).

    Rates are in reciprocal units of the shared time axis.
    """
    if len(d1_data) != len(d2_data) or np.any(d1_data.x != d2_data.x):
        raise ValueError("both series must share one time grid")
    t = d1_data.x
    y = np.concatenate([d1_data.y, d2_data.y])
    if d1_data.sigma is not None and d2_data.sigma is not None:
        sigma = np.concatenate([d1_data.sigma, d2_data.sigma])
    else:
        sigma = None
    # Fake abscissa only orders the stacked residuals; the model ignores it.
    stacked = CurveSeries(x=np.arange(2 * len(t), dtype=float), y=y, sigma=sigma)

    def model(_, theta):
        d1, d2 = stretched_population_diffs(t, theta[0], theta[1])
        return np.concatenate([d1, d2])

    if theta0 is None:
        usable = (d1_data.y < np.exp(-1.0)) & (t > 0)
        t_cross = float(t[usable][0]) if usable.any() else float(t[t > 0][-1])
        g1 = 1.0 / t_cross
        theta0 = np.array([max(g1, 1e-9), max(0.1 * g1, 1e-9)])
    return fit_curve(
        model,
        stacked,
        np.asarray(theta0, dtype=float),
        bounds=(np.array([0.0, 0.0]), np.array([np.inf, np.inf])),
        names=("gamma1", "gamma2"),
    )


def fit_resonance(data: CurveSeries, model_fn, density0, gamma_f0, prescan=2.5, prescan_points=5) -> FitResult:
    """Two-parameter fit of a depolarization-rate resonance curve.

    ``model_fn(deltas, density, gamma_f)`` must evaluate the rate model
    with frozen random numbers so the objective is deterministic.  A
    coarse multiplicative grid around ``(density0, gamma_f0)`` seeds the
    Gauss-Newton refinement.
    """
    if len(data) == 0:
        raise ValueError("resonance fit needs data")

    weights = 1.0 / data.sigma if data.sigma is not None else np.ones_like(data.y)

    def cost_at(density, gamma_f):
        r = (model_fn(data.x, density, gamma_f) - data.y) * weights
        return float(r @ r)

    factors = np.geomspace(1.0 / prescan, prescan, prescan_points)
    best = (np.inf, density0, gamma_f0)
    for fd in factors:
        for fg in factors:
            c = cost_at(density0 * fd, gamma_f0 * fg)
            if c < best[0]:
                best = (c, density0 * fd, gamma_f0 * fg)
    theta0 = np.array([best[1], best[2]])

    return fit_curve(
        lambda deltas, th: model_fn(deltas, th[0], th[1]),
        data,
        theta0,
        bounds=(np.array([1e-12, 1e-12]), np.array([np.inf, np.inf])),
        names=("density", "gamma_f"),
    )
