"""Detection-threshold optimisation.

Two phases: locate the largest threshold ``eps_c`` that keeps the collision
probability at its target (secant iteration on the constraint function, with
a scanned bisection fallback), then climb the objective inside ``(0, eps_c]``
with finite-difference gradient ascent started at ``eps_c``.

Thresholds in :class:`OptimizerConfig` are in units of the noise variance.
The generic routines (:func:`secant_root`, :func:`gradient_ascent`,
:func:`grid_search_oracle`) work in whatever units their callables use.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import bisect

from . import dutycycle
from .core import NumericalError, SystemParams
from .dutycycle import EPS_INF, ChannelPair
from .mdp import objective_mdp, quantize
from .sensing import SensingModel


class NoRootError(NumericalError):
    """The constraint function has no sign change on the search interval."""


class ConvergenceError(NumericalError):
    def __init__(self, message: str, last: float, gradient: float):
        super().__init__(f"{message} (last iterate {last:.6g}, gradient {gradient:.3g})")
        self.last = last
        self.gradient = gradient


@dataclass(frozen=True)
class OptimizerConfig:
    eps0: float = 0.01
    eps1: float = 0.02
    secant_tol: float = 1e-10
    step_beta: float = 0.05
    grad_tol: float = 1e-7
    max_iter: int = 10_000
    fd_h: float = 1e-4
    scan_points: int = 10_000

    def __post_init__(self):
        for name in ("eps0", "eps1", "secant_tol", "step_beta", "grad_tol", "fd_h"):
            if not getattr(self, name) > 0:
                raise ValueError(f"OptimizerConfig.{name} must be > 0")
        if self.eps0 == self.eps1:
            raise ValueError("OptimizerConfig: eps0 and eps1 must differ")
        if self.max_iter < 1 or self.scan_points < 2:
            raise ValueError("OptimizerConfig: max_iter >= 1 and scan_points >= 2 required")


def _evaluate(fn: Callable, xs: np.ndarray) -> np.ndarray:
    try:
        out = np.asarray(fn(xs), dtype=float)
        if out.shape == xs.shape:
            return out
    except (TypeError, ValueError):
        pass
    return np.array([float(fn(x)) for x in xs])


def scan_roots(phi: Callable, lo: float, hi: float, n: int) -> list[tuple[float, float]]:
    """Brackets ``(a, b)`` on a uniform grid over ``(lo, hi]`` where ``phi`` changes sign."""
    xs = np.linspace(lo, hi, n + 1)[1:]
    vals = _evaluate(phi, xs)
    pos = vals > 0
    idx = np.flatnonzero(pos[1:] != pos[:-1])
    return [(float(xs[i]), float(xs[i + 1])) for i in idx]


def secant_root(phi: Callable[[float], float], cfg: OptimizerConfig = OptimizerConfig(),
                bounds: tuple[float, float] = (0.0, EPS_INF),
                diagnostics: dict | None = None) -> float:
    """Root of ``phi`` by the secant recurrence started from ``cfg.eps0, cfg.eps1``.

    A flat secant, a non-finite or out-of-bounds iterate, or running out of
    iterations switches to bisection on the first sign change found by a grid
    scan of ``bounds``. Raises :class:`NoRootError` if the scan finds none.
    """
    info = diagnostics if diagnostics is not None else {}
    lo, hi = bounds
    e0, e1 = cfg.eps0, cfg.eps1
    f0, f1 = phi(e0), phi(e1)
    info.update(secant_iterations=0, fallback="none")
    for k in range(1, cfg.max_iter + 1):
        info["secant_iterations"] = k
        if f1 == f0 or not (math.isfinite(f0) and math.isfinite(f1)):
            break
        e2 = (e0 * f1 - e1 * f0) / (f1 - f0)
        if not math.isfinite(e2) or not lo < e2 <= hi:
            break
        f2 = phi(e2)
        if abs(e2 - e1) < cfg.secant_tol:
            slope = abs((f1 - f0) / (e1 - e0))
            if abs(f2) <= 10 * cfg.secant_tol * max(1.0, slope):
                return e2
            break
        e0, f0, e1, f1 = e1, f1, e2, f2

    info["fallback"] = "bisection"
    brackets = scan_roots(phi, lo, hi, cfg.scan_points)
    if not brackets:
        raise NoRootError(f"constraint function has no sign change on ({lo:g}, {hi:g}]")
    a, b = brackets[0]
    return bisect(phi, a, b, xtol=cfg.secant_tol, rtol=4 * np.finfo(float).eps, maxiter=500)


def gradient_ascent(obj: Callable[[float], float], eps_start: float, upper: float,
                    cfg: OptimizerConfig = OptimizerConfig(), lower: float = 0.0,
                    eps_scale: float = 1.0, diagnostics: dict | None = None) -> float:
    """Maximise ``obj`` on ``(lower, upper]`` by projected gradient ascent.

    The step is taken in normalised coordinates: the threshold is measured in
    units of ``eps_scale`` and the objective relative to its starting value,
    so ``cfg.step_beta`` does not depend on physical units. Iterates are
    projected back into the interval. ``cfg.step_beta`` sets the initial gain;
    the gain doubles after a step that improves the objective outright and is
    halved while a step would lower it. Stops when the move, the objective
    gain or the normalised gradient becomes negligible. If the gradient at
    ``upper`` is non-negative the boundary is returned directly.
    """
    info = diagnostics if diagnostics is not None else {}
    h = cfg.fd_h * eps_scale

    def grad(e):
        return (obj(e + h) - obj(e - h)) / (2 * h)

    ref = abs(obj(eps_start))
    ref = ref if ref > 0 else 1.0
    gain = cfg.step_beta * eps_scale**2 / ref
    floor = lower + 1e-12 * max(eps_scale, abs(upper))

    e = min(max(eps_start, floor), upper)
    g = grad(e)
    info.update(ascent_iterations=0, halvings=0)
    if e >= upper and (g > 0 or abs(gain * g) < cfg.grad_tol):
        info["branch"] = "boundary"
        return e
    info["branch"] = "interior"
    f = obj(e)
    base_gain = gain
    for k in range(1, cfg.max_iter + 1):
        info["ascent_iterations"] = k
        step = gain * g
        e_new = min(max(e + step, floor), upper)
        f_new = obj(e_new)
        halvings = 0
        while f_new < f and halvings < 60:
            step *= 0.5
            halvings += 1
            e_new = min(max(e + step, floor), upper)
            f_new = obj(e_new)
        info["halvings"] += halvings
        if f_new < f:
            return e
        # flat stretches make the fixed step crawl: grow it after a clean step
        gain = gain * 2.0 if halvings == 0 else max(base_gain, gain * 0.5**halvings)
        moved = abs(e_new - e)
        gained = f_new - f
        e, f = e_new, f_new
        if moved < cfg.grad_tol or gained <= 1e-15 * ref:
            return e
        g = grad(e)
        if abs(g) * eps_scale / ref < cfg.grad_tol:
            return e
    raise ConvergenceError("gradient ascent did not converge", e, g)


def grid_search_oracle(obj: Callable, constraint: Callable | None, range_: tuple[float, float],
                       n_points: int) -> float:
    """Exhaustive search: feasible grid point with the largest objective.

    ``constraint(eps) <= 0`` marks feasibility (``None`` means unconstrained).
    Ties go to the smallest threshold.
    """
    if n_points < 2:
        raise ValueError("n_points must be >= 2")
    xs = np.linspace(range_[0], range_[1], n_points)
    vals = _evaluate(obj, xs)
    if constraint is not None:
        feasible = _evaluate(constraint, xs) <= 0
        if not feasible.any():
            raise ValueError("no feasible grid point")
        vals = np.where(feasible, vals, -np.inf)
    return float(xs[int(np.argmax(vals))])


# ---------------------------------------------------------------------------
# full threshold optimisation

@dataclass
class Diagnostics:
    model: str
    branch: str = ""
    gamma: float = float("nan")
    eps_c: float | None = None
    eps_star: float = float("nan")
    objective: float = float("nan")
    collision: float = float("nan")
    secant_iterations: int = 0
    fallback: str = "none"
    ascent_iterations: int = 0
    halvings: int = 0
    notes: list[str] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def model_functions(model: str, params: SystemParams, pair: ChannelPair, sensing: SensingModel,
                    n_tau: int = 64):
    """Objective and collision probability as functions of eps / sigma_w2."""
    s = params.sigma_w2
    if model in ("duty-cycle", "dutycycle", "dc"):
        def obj(x):
            return dutycycle.objective(params, pair, sensing, np.asarray(x) * s)
    elif model == "mdp":
        q = quantize(params, n_tau)

        def obj(x):
            return objective_mdp(q, pair, sensing, np.asarray(x) * s)
    else:
        raise ValueError(f"unknown model {model!r} (expected 'duty-cycle' or 'mdp')")

    def collision(x):
        return dutycycle.collision_prob(params, pair, sensing, np.asarray(x) * s)

    return obj, collision


def optimize_threshold(model: str, params: SystemParams, pair: ChannelPair,
                       sensing: SensingModel, cfg: OptimizerConfig = OptimizerConfig(),
                       n_tau: int = 64):
    """Maximise the chosen model's objective under the collision target.

    Returns ``(eps_star, eps_c, diagnostics)`` with thresholds in absolute
    units; ``eps_c`` is ``None`` when the constraint never binds.
    """
    s = params.sigma_w2
    obj, collision = model_functions(model, params, pair, sensing, n_tau)
    target = params.P_bar_c

    def phi(x):
        return collision(x) - target

    diag = Diagnostics(model="mdp" if model == "mdp" else "duty-cycle")
    g1 = dutycycle.gamma1(params, pair)
    diag.gamma = g1
    info: dict = {}
    hi = EPS_INF

    if g1 > target:
        x_c = secant_root(phi, cfg, (0.0, hi), info)
        x_c = _backoff(phi, x_c, cfg.secant_tol)
        x_star = gradient_ascent(obj, x_c, x_c, cfg, eps_scale=1.0, diagnostics=info)
        diag.eps_c = x_c * s
    else:
        diag.notes.append("gamma1 <= P_bar_c: harvesting-starved regime")
        brackets = scan_roots(phi, 0.0, hi, cfg.scan_points)
        if not brackets:
            xs = np.linspace(0.0, hi, cfg.scan_points + 1)[1:]
            start = float(xs[int(np.argmax(_evaluate(obj, xs)))])
            x_star = gradient_ascent(obj, start, hi, cfg, eps_scale=1.0, diagnostics=info)
            info["branch"] = "unconstrained"
        else:
            # feasible set is (0, r1] plus [r2, inf)
            r1 = _backoff(phi, bisect(phi, *brackets[0], xtol=cfg.secant_tol), cfg.secant_tol)
            candidates = [gradient_ascent(obj, r1, r1, cfg, eps_scale=1.0, diagnostics=info)]
            if len(brackets) > 1:
                a, b = brackets[-1]
                r2 = bisect(phi, a, b, xtol=cfg.secant_tol)
                while phi(r2) > 0:
                    r2 += cfg.secant_tol
                candidates.append(gradient_ascent(obj, r2, hi, cfg, lower=r2, eps_scale=1.0))
            x_star = max(candidates, key=obj)
            diag.eps_c = r1 * s
            info["branch"] = "two-root"
        info.setdefault("fallback", "scan")

    for key in ("secant_iterations", "fallback", "ascent_iterations", "halvings", "branch"):
        if key in info:
            setattr(diag, key, info[key])
    diag.eps_star = x_star * s
    diag.objective = float(obj(x_star))
    diag.collision = float(collision(x_star))
    if diag.collision > target + 1e-9:
        raise NumericalError(
            f"optimiser returned an infeasible threshold (P_c = {diag.collision:.6g})"
        )
    return diag.eps_star, diag.eps_c, diag


def _backoff(phi, x: float, tol: float) -> float:
    # pull a root estimate back onto the feasible side of the constraint
    step = tol
    while phi(x) > 0:
        x -= step
        step *= 2
    return x

