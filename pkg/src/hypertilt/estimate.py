"""Synthetic experiments: count generation, maximum-likelihood tilt estimation,
Cramer-Rao saturation and the fringe fit recovering (V, sigma_(N)^2, d).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .fisher import FisherReport, UnboundedVariance, cfi_analytic, cfi_closed_form, crb_variance, qfi, shot_noise_baseline
from .model import CountModel, FringeCurve, _rates, probability_derivative, projection_probability
from .probe import ProbeConfig, ProbeError, make_probe

log = logging.getLogger(__name__)


def child_generators(seed: int, n: int) -> list[np.random.Generator]:
    """Independent PCG64 streams derived from (seed, index)."""
    return [np.random.Generator(np.random.PCG64(s)) for s in np.random.SeedSequence(seed).spawn(n)]


def synthesize_counts(probe: ProbeConfig, theta_grid, trials_per_point: int, seed: int,
                      count_model: str | CountModel = CountModel.BINOMIAL) -> FringeCurve:
    """Draw success counts for each theta.

    ``binomial``: successes ~ Binomial(trials, p).  ``poisson_pair``: the
    number of recorded coincidences is Poisson(trials) and each is a success
    with probability p.  ``exact`` returns noise-free probabilities.
    """
    count_model = CountModel(count_model)
    if trials_per_point < 1:
        raise ValueError("trials_per_point must be >= 1")
    theta = np.asarray(theta_grid, dtype=float).reshape(-1)
    p = projection_probability(probe, theta)
    meta = {"seed": seed, "count_model": count_model.value}
    if count_model is CountModel.EXACT:
        return FringeCurve(theta=theta, probability=p, count_model=count_model, meta=meta)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    if count_model is CountModel.BINOMIAL:
        trials = np.full(theta.shape, trials_per_point, dtype=np.int64)
    else:
        trials = rng.poisson(trials_per_point, size=theta.shape).astype(np.int64)
    successes = rng.binomial(trials, p)
    return FringeCurve(theta=theta, successes=successes, trials=trials, count_model=count_model, meta=meta)


# ---------------------------------------------------------------- MLE of theta


def quarter_fringe_theta(probe: ProbeConfig) -> float:
    """Smallest theta > 0 with cos(4 N k d theta) = 0."""
    omega, _ = _rates(probe)
    if omega == 0:
        raise ValueError("no fringe for d = 0")
    return math.pi / (2.0 * abs(omega))


def _slope_zero_fn(probe):
    omega, beta = _rates(probe)
    # dp/dtheta = -1/2 V env * g(theta); g shares the zeros
    return lambda t: omega * np.sin(omega * t) + 2.0 * beta * t * np.cos(omega * t)


def monotonic_branch(probe: ProbeConfig, theta: float, span: float | None = None) -> tuple[float, float]:
    """The interval between consecutive extrema of p that contains ``theta``.

    Extrema are searched on [-span, span] (default: 20 fringe periods or
    6 / (k sigma_(N)), whichever is larger); missing extrema end at the span.
    """
    omega, beta = _rates(probe)
    if span is None:
        span = max(20 * 2 * math.pi / abs(omega) if omega else 0.0, 6.0 / math.sqrt(beta / 8.0))
        span = max(span, 2 * abs(theta))
    g = _slope_zero_fn(probe)
    grid = np.linspace(-span, span, 64 * 41 + 1)
    vals = g(grid)
    roots = []
    for i in np.flatnonzero(vals == 0):
        roots.append(grid[i])
    for i in np.flatnonzero(vals[:-1] * vals[1:] < 0):
        roots.append(brentq(g, grid[i], grid[i + 1], xtol=1e-15 * span))
    roots = np.unique(np.array(roots + [-span, span]))
    hi_idx = np.searchsorted(roots, theta, side="right")
    lo, hi = roots[max(hi_idx - 1, 0)], roots[min(hi_idx, roots.size - 1)]
    if lo == theta and hi_idx - 1 > 0:
        lo, hi = roots[hi_idx - 1], roots[hi_idx]
    return float(lo), float(hi)


@dataclass(frozen=True)
class MLEResult:
    theta_hat: float
    clipped: bool


class BranchError(ValueError):
    """The requested branch is not strictly monotonic."""


def check_branch(probe: ProbeConfig, branch: tuple[float, float], samples: int = 257) -> int:
    """Return +1/-1 for increasing/decreasing p on ``branch``; raise if not monotonic."""
    lo, hi = branch
    if not hi > lo:
        raise BranchError(f"empty branch {branch}")
    t = np.linspace(lo, hi, samples)[1:-1]
    dp = probability_derivative(probe, t)
    if np.all(dp == 0):
        raise BranchError("dp/dtheta vanishes throughout the branch")
    if np.all(dp >= 0):
        return 1
    if np.all(dp <= 0):
        return -1
    raise BranchError(f"p is not monotonic on {branch}")


def mle_theta(successes: int, trials: int, probe: ProbeConfig, branch: tuple[float, float],
              direction: int | None = None) -> MLEResult:
    """Binomial MLE of theta restricted to a monotonic branch.

    The MLE of p is successes / trials; it is inverted through p(theta) with
    Brent's method.  Frequencies outside p(branch) clip to the nearest end.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    lo, hi = branch
    if direction is None:
        direction = check_branch(probe, branch)
    p_hat = successes / trials
    p_lo, p_hi = projection_probability(probe, lo), projection_probability(probe, hi)
    p_min, p_max = min(p_lo, p_hi), max(p_lo, p_hi)
    if p_hat <= p_min:
        return MLEResult(lo if p_lo == p_min else hi, clipped=p_hat < p_min)
    if p_hat >= p_max:
        return MLEResult(lo if p_lo == p_max else hi, clipped=p_hat > p_max)
    f = lambda t: projection_probability(probe, t) - p_hat  # noqa: E731
    return MLEResult(brentq(f, lo, hi, xtol=1e-12 * (hi - lo), rtol=4 * np.finfo(float).eps), clipped=False)


@dataclass(frozen=True)
class CRBExperiment:
    theta_true: float
    theta_hat_mean: float
    empirical_mse: float
    empirical_variance: float
    crb: float
    fisher: float
    trials: int
    replications: int
    seed: int
    clipped: int
    estimates: np.ndarray = field(repr=False, compare=False)

    @property
    def ratio(self) -> float:
        return self.empirical_mse / self.crb

    @property
    def bias(self) -> float:
        return self.theta_hat_mean - self.theta_true

    def as_dict(self) -> dict:
        return {
            "theta_true": self.theta_true,
            "theta_hat_mean": self.theta_hat_mean,
            "empirical_mse": self.empirical_mse,
            "crb": self.crb,
            "ratio": self.ratio,
            "seed": self.seed,
            "fisher": self.fisher,
            "trials": self.trials,
            "replications": self.replications,
            "clipped": self.clipped,
        }


def crb_experiment(probe: ProbeConfig, theta: float, trials: int, replications: int, seed: int,
                   count_model: str | CountModel = CountModel.BINOMIAL,
                   branch: tuple[float, float] | None = None) -> CRBExperiment:
    """Repeat (draw counts at theta, estimate theta) and compare the MSE with 1/(nu F).

    Replication i uses stream i of SeedSequence(seed), so the result does not
    depend on evaluation order.  With ``poisson_pair`` the Cramer-Rao floor
    uses the mean number of trials.
    """
    count_model = CountModel(count_model)
    fisher = float(cfi_analytic(probe, theta))
    if not fisher > 0:
        raise UnboundedVariance(f"Fisher information vanishes at theta = {theta}; choose another operating point")
    crb = crb_variance(fisher, trials)
    if branch is None:
        branch = monotonic_branch(probe, theta)
    direction = check_branch(probe, branch)
    p = projection_probability(probe, theta)
    estimates = np.empty(replications)
    clipped = 0
    for i, rng in enumerate(child_generators(seed, replications)):
        n = rng.poisson(trials) if count_model is CountModel.POISSON_PAIR else trials
        if count_model is CountModel.EXACT:
            s = p * n
        else:
            s = rng.binomial(n, p)
        res = mle_theta(s, max(n, 1), probe, branch, direction)
        estimates[i] = res.theta_hat
        clipped += res.clipped
    err = estimates - theta
    return CRBExperiment(
        theta_true=float(theta),
        theta_hat_mean=float(estimates.mean()),
        empirical_mse=float(np.mean(err * err)),
        empirical_variance=float(estimates.var(ddof=1)) if replications > 1 else 0.0,
        crb=crb,
        fisher=fisher,
        trials=trials,
        replications=replications,
        seed=seed,
        clipped=clipped,
        estimates=estimates,
    )


# ---------------------------------------------------------------- fringe fit

FIT_MAX_ITER = 500
FIT_GTOL = 1e-10


class FitError(RuntimeError):
    pass


@dataclass(frozen=True)
class FitResult:
    """Fringe-fit estimates in SI units (d in m, sigma2_ell in m^2)."""

    visibility_hat: float
    sigma2_ell_hat: float
    d_hat: float
    residual_sum_squares: float
    parameter_errors: dict
    covariance: np.ndarray  # over (V, sigma2_ell, d)
    n_photons: int
    wavenumber_k: float
    converged: bool
    iterations: int
    d_fixed: bool = False
    message: str = ""
    cost_history: tuple = field(default=(), repr=False, compare=False)

    def as_dict(self, seed: int | None = None) -> dict:
        err = self.parameter_errors
        out = {
            "v": self.visibility_hat,
            "sigma2_ell_mm2": self.sigma2_ell_hat * 1e6,
            "d_mm": self.d_hat * 1e3,
            "errors": {
                "v": err["visibility"],
                "sigma2_ell_mm2": err["sigma2_ell"] * 1e6,
                "d_mm": err["d"] * 1e3,
            },
            "rss": self.residual_sum_squares,
            "converged": self.converged,
            "iterations": self.iterations,
            "n": self.n_photons,
            "d_fixed": self.d_fixed,
        }
        if seed is not None:
            out["seed"] = seed
        return out


def _fringe_model(q, t):
    """p(t) and its Jacobian in scaled parameters q = (V, w, b)."""
    v, w, b = q
    env = np.exp(-b * t * t)
    c, s = np.cos(w * t), np.sin(w * t)
    p = 0.5 * (1.0 + v * c * env)
    jac = np.empty((t.size, 3))
    jac[:, 0] = 0.5 * c * env
    jac[:, 1] = -0.5 * v * t * s * env
    jac[:, 2] = -0.5 * v * t * t * c * env
    return p, jac


def _point_sigma(curve: FringeCurve) -> np.ndarray | None:
    if not curve.has_counts:
        return None
    n = np.maximum(curve.trials, 1).astype(float)
    f = curve.frequencies()
    var = np.maximum(f * (1.0 - f) / n, 1.0 / (4.0 * n * n))
    return np.sqrt(var)


def _dominant_frequency(t: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Largest non-DC peak of |DFT(y - mean)| on a 4x zero-padded grid.

    Returns (angular frequency, resolution) in units of 1/t.
    """
    span = t[-1] - t[0]
    if span <= 0:
        return 0.0, np.inf
    dt = np.median(np.diff(t))
    df = 1.0 / (4.0 * span)
    f = np.arange(0.0, 0.5 / dt + df, df)
    y0 = y - y.mean()
    power = np.abs(np.exp(-2j * np.pi * np.outer(f, t)) @ y0) ** 2
    inner = power[1:-1]
    peaks = np.flatnonzero((inner > power[:-2]) & (inner >= power[2:])) + 1
    if peaks.size == 0:
        return 0.0, 2 * np.pi / span
    best = peaks[np.argmax(power[peaks])]  # argmax picks the lowest index on ties
    return 2.0 * np.pi * f[best], 2.0 * np.pi / span


def _envelope_rate(t, y, v0, use_all: bool) -> float:
    """Log-envelope regression log|2y - 1| = log V - b t^2 on fringe extrema."""
    a = np.abs(2.0 * y - 1.0)
    if use_all:
        idx = np.arange(t.size)
    else:
        inner = np.flatnonzero(((y[1:-1] >= y[:-2]) & (y[1:-1] >= y[2:])) | ((y[1:-1] <= y[:-2]) & (y[1:-1] <= y[2:]))) + 1
        idx = inner
    idx = idx[a[idx] > 0.02 * max(v0, 1e-3)]
    if idx.size >= 2 and np.ptp(t[idx] ** 2) > 0:
        slope, _ = np.polyfit(t[idx] ** 2, np.log(a[idx]), 1)
        if slope < 0:
            return float(-slope)
    return 1.0


def _lm(t, y, sigma, q0, free, max_iter=FIT_MAX_ITER, gtol=FIT_GTOL):
    """Projected Levenberg-Marquardt on chi^2 = sum ((y - p)/sigma)^2.

    Only steps that lower chi^2 are accepted, so the cost history is
    non-increasing.  Converged when the cosine between the residual vector
    and the model tangent space drops below ``gtol`` (or residuals vanish).
    """
    q = np.array(q0, dtype=float)
    w = 1.0 / sigma

    def project(x):
        x = x.copy()
        x[0] = min(max(x[0], 0.0), 1.0)
        x[1] = abs(x[1])
        x[2] = max(x[2], 1e-12)
        return x

    def evaluate(x):
        p, jac = _fringe_model(x, t)
        r = (y - p) * w
        return r, jac[:, free] * w[:, None], float(r @ r)

    q = project(q)
    r, jac, cost = evaluate(q)
    history = [cost]
    lam = 1e-3
    converged = False
    message = "max iterations reached"
    it = 0
    for it in range(1, max_iter + 1):
        grad = jac.T @ r
        jnorm = np.linalg.norm(jac)
        rnorm = math.sqrt(cost)
        if cost <= 1e-28 * y.size or np.linalg.norm(grad) <= gtol * jnorm * rnorm:
            converged = True
            message = "gradient tolerance met"
            it -= 1
            break
        jtj = jac.T @ jac
        diag = np.diag(jtj).copy()
        diag[diag == 0] = 1.0
        improved = False
        while lam < 1e20:
            try:
                step = np.linalg.solve(jtj + lam * np.diag(diag), grad)
            except np.linalg.LinAlgError:
                lam *= 10
                continue
            trial = q.copy()
            trial[free] += step
            trial = project(trial)
            r_new, jac_new, cost_new = evaluate(trial)
            if cost_new < cost:
                q, r, jac, cost = trial, r_new, jac_new, cost_new
                lam = max(lam / 10, 1e-12)
                improved = True
                break
            lam *= 10
        history.append(cost)
        if not improved:
            converged = np.linalg.norm(grad) <= 1e-7 * jnorm * rnorm
            message = "no further decrease possible" + ("" if converged else " (gradient tolerance not met)")
            break
    return q, r, jac, cost, converged, it, history, message


def _fit_once(t, y, sigma, q0, fix_d: bool):
    free = np.array([0, 2]) if fix_d else np.array([0, 1, 2])
    if fix_d:
        q0 = np.array([q0[0], 0.0, q0[2]])
    return _lm(t, y, sigma, q0, free) + (free,)


def fit_fringe(curve: FringeCurve, n_photons: int, k: float) -> FitResult:
    """Weighted nonlinear least-squares fit of the damped fringe to ``curve``.

    Weights are binomial variances when counts are present, uniform
    otherwise (errors then scale with the residual variance).  Initial values:
    V from the data range, the fringe frequency from a zero-padded DFT scan,
    the damping rate from a log-envelope regression.  When the frequency is
    not resolved from zero, a fit with d = 0 competes with the free fit.
    """
    if len(curve) < 8:
        raise FitError("need at least 8 points to fit a fringe")
    theta = curve.theta
    y = curve.frequencies().astype(float)
    sigma = _point_sigma(curve)
    weighted = sigma is not None
    if sigma is None:
        sigma = np.ones_like(y)
    scale = float(np.max(np.abs(theta)))
    if scale == 0:
        raise FitError("theta grid must not be all zero")
    t = theta / scale

    v0 = float(np.clip(np.ptp(y), 0.01, 1.0))
    w0, resolution = _dominant_frequency(t, y)
    # fewer than two fringes across the window: d cannot be told apart from 0
    unresolved = w0 <= 2.0 * resolution
    b0 = _envelope_rate(t, y, v0, use_all=unresolved)
    free_fits = [_fit_once(t, y, sigma, np.array([v0, w0, b0]), fix_d=False)]
    fixed_fit = None
    if unresolved:
        fixed_fit = _fit_once(t, y, sigma, np.array([v0, 0.0, b0]), fix_d=True)
        q_fixed = fixed_fit[0]
        free_fits.append(_fit_once(t, y, sigma, np.array([q_fixed[0], 0.25 * resolution, q_fixed[2]]), fix_d=False))
    free_fit = min(free_fits, key=lambda out: out[3])
    # lower residual wins; a tie goes to the model with d fixed at 0
    fix_d = fixed_fit is not None and not free_fit[3] < fixed_fit[3] * (1 - 1e-9)
    chosen = fixed_fit if fix_d else free_fit
    q, r, jac, cost, converged, iterations, history, message, free = chosen
    if not converged:
        log.warning("fringe fit did not converge: %s", message)

    n_free = free.size
    rss = float(np.sum((y - _fringe_model(q, t)[0]) ** 2))
    try:
        cov_free = np.linalg.inv(jac.T @ jac)
    except np.linalg.LinAlgError:
        cov_free = np.full((n_free, n_free), np.nan)
    if not weighted:
        dof = max(y.size - n_free, 1)
        cov_free = cov_free * (cost / dof)
    cov_q = np.zeros((3, 3))
    cov_q[np.ix_(free, free)] = cov_free

    # scaled -> physical: d = w / (4 N k scale), sigma2 = b / (8 N k^2 scale^2)
    to_phys = np.diag([1.0, 1.0 / (8.0 * n_photons * k * k * scale * scale), 1.0 / (4.0 * n_photons * k * scale)])
    v_hat, w_hat, b_hat = q
    phys = to_phys @ np.array([v_hat, b_hat, w_hat])
    # reorder covariance from (V, w, b) to (V, b, w)
    perm = np.array([0, 2, 1])
    cov = to_phys @ cov_q[np.ix_(perm, perm)] @ to_phys.T
    errors = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    return FitResult(
        visibility_hat=float(phys[0]),
        sigma2_ell_hat=float(phys[1]),
        d_hat=float(phys[2]),
        residual_sum_squares=rss,
        parameter_errors={"visibility": float(errors[0]), "sigma2_ell": float(errors[1]), "d": float(errors[2])},
        covariance=cov,
        n_photons=int(n_photons),
        wavenumber_k=float(k),
        converged=bool(converged),
        iterations=int(iterations),
        d_fixed=bool(fix_d),
        message=message,
        cost_history=tuple(history),
    )


def probe_from_fit(fit: FitResult, sigma2_single: float | None = None) -> ProbeConfig:
    """Probe implied by a fit.

    The fit only sees sigma_(N)^2; the per-photon variance defaults to it
    (zero pairwise covariance), which overstates the shot-noise baseline
    whenever the true covariance is positive.
    """
    n = fit.n_photons
    s2 = fit.sigma2_ell_hat if sigma2_single is None else sigma2_single
    cov = 0.0 if n == 1 else (fit.sigma2_ell_hat - s2) / (n - 1)
    try:
        return make_probe(n, fit.wavenumber_k, fit.d_hat, s2, cov, fit.visibility_hat)
    except ProbeError as exc:
        raise ProbeError(f"fitted sigma2_ell incompatible with sigma2_single={sigma2_single}: {exc}") from exc


def fisher_report_from_fit(fit: FitResult, theta_grid, sigma2_single: float | None = None,
                           band_sigmas: float = 2.0) -> FisherReport:
    """Fisher curve at the fitted parameters with a first-order error band.

    The band is F +- band_sigmas * sqrt(g^T C g), with g the gradient of F in
    (V, sigma2_ell, d) by central differences and C the fit covariance; the
    lower edge is clamped at 0.
    """
    theta = np.atleast_1d(np.asarray(theta_grid, dtype=float))
    probe = probe_from_fit(fit, sigma2_single)
    params = np.array([fit.visibility_hat, fit.sigma2_ell_hat, fit.d_hat])
    n, k = fit.n_photons, fit.wavenumber_k

    def f(x):
        return np.atleast_1d(cfi_closed_form(n, k, x[2], x[1], x[0], theta))

    center = f(params)
    grad = np.zeros((theta.size, 3))
    for i in range(3):
        h = 1e-6 * max(abs(params[i]), 1e-12)
        up, dn = params.copy(), params.copy()
        up[i] += h
        dn[i] -= h
        grad[:, i] = (f(up) - f(dn)) / (2 * h)
    cov = np.nan_to_num(fit.covariance)
    spread = np.sqrt(np.clip(np.einsum("ij,jk,ik->i", grad, cov, grad), 0.0, None))
    return FisherReport(
        theta=theta,
        cfi=center,
        qfi=qfi(probe),
        shot_noise_baseline=shot_noise_baseline(probe),
        cfi_lower=np.maximum(center - band_sigmas * spread, 0.0),
        cfi_upper=center + band_sigmas * spread,
    )
