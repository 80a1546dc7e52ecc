"""Bi-level threshold optimization for prune-mask selection.

The outer problem picks the prune threshold tau in [0, tau_max] minimizing
f(tau) = -(test accuracy of a QNN freshly trained on tau-pruned data).  The
inner training seed is fixed, so f varies only through the mask.  Gradients
are finite differences on a memoized objective: accuracy is piecewise
constant in tau, so plateaus are normal, and a zero gradient at the start
or a stalled line search switches to an 11-point grid followed by one local
refinement.  The result is the best tau over every objective evaluation
made along the way, never just the final iterate.

The scalar L-BFGS-B machinery (two-loop recursion over curvature pairs,
Armijo backtracking, box projection) is written out here rather than
delegated, because its exact behavior is part of this module's contract.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from .encoders import EncoderPipeline, build_mask, class_average
from .errors import ConfigError, QPruneError
from .qnn import TrainConfig, fit_eval

ARMIJO_C = 1e-4
MAX_BACKTRACKS = 20
CURVATURE_MIN = 1e-12
GRID_POINTS = 11
TAU_KEY_DECIMALS = 12


class LineSearchStall(QPruneError):
    """Backtracking exhausted without an acceptable step."""


@dataclass(frozen=True)
class ThresholdProblem:
    """Everything the outer optimization needs.

    Either supply train/test splits plus a TrainConfig for the real
    bi-level objective, or inject `objective_fn(tau) -> f` directly (used
    by the analytic optimizer tests).  `validation_set`, when given, is
    scored by the objective instead of the test split.
    """

    train_set: object = None
    test_set: object = None
    train_config: TrainConfig | None = None
    tau_max: float = 1.0
    grad_step: float = 0.02
    grad_tol: float = 1e-3
    max_iters: int = 25
    history_size: int = 5
    compact: bool = False
    objective_fn: object = None
    validation_set: object = None
    trace_path: str | None = None

    def __post_init__(self):
        if self.tau_max <= 0:
            raise ConfigError(f"tau_max must be > 0, got {self.tau_max}")
        if not 0 < self.grad_step < self.tau_max:
            raise ConfigError(
                f"grad_step must lie in (0, tau_max), got {self.grad_step}"
            )
        if self.grad_tol <= 0:
            raise ConfigError(f"grad_tol must be > 0, got {self.grad_tol}")
        if self.history_size < 1:
            raise ConfigError(
                f"history_size must be >= 1, got {self.history_size}"
            )
        if self.max_iters < 0:
            raise ConfigError(f"max_iters must be >= 0, got {self.max_iters}")
        if self.objective_fn is None:
            if (
                self.train_set is None
                or self.test_set is None
                or self.train_config is None
            ):
                raise ConfigError(
                    "need train_set, test_set, and train_config "
                    "(or an injected objective_fn)"
                )


@dataclass
class LbfgsState:
    """Scalar L-BFGS history plus the previous point for lazy pair pushes."""

    tau: float
    m: int
    history: list = field(default_factory=list)  # (s, y) pairs, newest last
    iteration: int = 0
    prev_tau: float | None = None
    prev_grad: float | None = None


@dataclass(frozen=True)
class ThresholdResult:
    tau_star: float
    best_accuracy: float
    evaluations: tuple  # (tau, f) in evaluation order
    converged: bool
    entropy_at_star: float | None
    used_fallback: bool = False
    mask_at_star: object = None
    params_at_star: object = None


class _Objective:
    """Memoized f(tau) with per-evaluation bookkeeping and trace output.

    Two cache layers: exact repeats (tau rounded to 1e-12) return the
    recorded value with no new work or row, and distinct taus that build
    the same prune mask reuse the finished training while still recording
    their own evaluation row.  Single-threaded use; callers must not share
    one instance across workers without external locking.
    """

    def __init__(self, problem: ThresholdProblem):
        self.problem = problem
        self.rows = []  # dicts: tau, f, accuracy, entropy, mask, params
        self._by_tau = {}
        self._by_mask = {}
        self.trainings = 0
        if problem.objective_fn is None:
            train = problem.train_set
            self._avg0 = class_average(train.images, train.labels, -1)
            self._avg1 = class_average(train.images, train.labels, 1)
            self._score_set = (
                problem.validation_set
                if problem.validation_set is not None
                else problem.test_set
            )

    def row_for(self, tau: float) -> dict:
        """Evaluation row for an already-visited threshold."""
        return self.rows[self._by_tau[round(float(tau), TAU_KEY_DECIMALS)]]

    def __call__(self, tau: float) -> float:
        key = round(float(tau), TAU_KEY_DECIMALS)
        if key in self._by_tau:
            return self.rows[self._by_tau[key]]["f"]
        start = time.perf_counter()
        if self.problem.objective_fn is not None:
            f = float(self.problem.objective_fn(tau))
            row = {
                "tau": float(tau),
                "f": f,
                "accuracy": -f,
                "entropy": None,
                "mask": None,
                "params": None,
            }
        else:
            row = self._evaluate_real(float(tau))
        row["wall_time"] = time.perf_counter() - start
        self._by_tau[key] = len(self.rows)
        self.rows.append(row)
        self._trace(row)
        return row["f"]

    def _evaluate_real(self, tau: float) -> dict:
        mask = build_mask(self._avg0, self._avg1, tau)
        mask_key = mask.keep.tobytes()
        if mask_key in self._by_mask:
            cached = self._by_mask[mask_key]
            return {"tau": tau, **cached}
        # compact re-indexing cannot represent zero data qubits; the
        # all-pruned model is input-free either way, so route it through
        # the plain layout where every rotation is RX(0)
        compact = self.problem.compact and mask.kept_count() > 0
        pipeline = EncoderPipeline("atp", mask=mask, compact=compact)
        report = fit_eval(
            self.problem.train_set,
            self._score_set,
            self.problem.train_config,
            pipeline=pipeline,
        )
        self.trainings += 1
        cached = {
            "f": -report.test_accuracy,
            "accuracy": report.test_accuracy,
            "entropy": report.mean_entropy,
            "mask": mask,
            "params": report.final_params,
        }
        self._by_mask[mask_key] = cached
        return {"tau": tau, **cached}

    def _trace(self, row: dict):
        if self.problem.trace_path is None:
            return
        line = {
            "tau": row["tau"],
            "accuracy": row["accuracy"],
            "entropy": row["entropy"],
            "wall_time": row["wall_time"],
        }
        with open(self.problem.trace_path, "a", encoding="ascii") as fh:
            fh.write(json.dumps(line, allow_nan=False) + "\n")


def objective(problem: ThresholdProblem, tau: float) -> float:
    """One-shot f(tau); see _Objective for the memoized form."""
    if not 0.0 <= tau <= problem.tau_max:
        raise ConfigError(
            f"tau {tau} outside [0, {problem.tau_max}]"
        )
    return _Objective(problem)(tau)


def _grad(fn, tau: float, h: float, tau_max: float) -> float:
    """Central difference, one-sided where tau +- h would leave the box.

    Probe points are clipped to [0, tau_max], so the estimate stays
    central in the interior and shortens on whichever side hits a bound.
    """
    hi = min(tau + h, tau_max)
    lo = max(tau - h, 0.0)
    return (fn(hi) - fn(lo)) / (hi - lo)


def numeric_grad(problem: ThresholdProblem, tau: float, h: float | None = None):
    """Finite-difference slope of the (memoized) objective at tau."""
    if h is None:
        h = problem.grad_step
    if not 0.0 <= tau <= problem.tau_max:
        raise ConfigError(f"tau {tau} outside [0, {problem.tau_max}]")
    return _grad(_Objective(problem), tau, h, problem.tau_max)


def _two_loop_direction(history, grad: float) -> float:
    """d = -H*grad via the standard two-loop recursion (scalar case)."""
    q = grad
    alphas = []
    for s, y in reversed(history):
        rho = 1.0 / (y * s)
        a = rho * s * q
        q -= a * y
        alphas.append(a)
    if history:
        s_last, y_last = history[-1]
        gamma = (s_last * y_last) / (y_last * y_last)
    else:
        gamma = 1.0
    r = gamma * q
    for (s, y), a in zip(history, reversed(alphas)):
        rho = 1.0 / (y * s)
        b = rho * y * r
        r += s * (a - b)
    return -r


def lbfgsb_step(state: LbfgsState, grad: float, bounds, objective_fn) -> float:
    """One projected quasi-Newton step with Armijo backtracking.

    Completes the pending (s, y) history pair now that the gradient at the
    current point is known, takes the two-loop direction, halves the step
    until the Armijo test passes on the projected candidate, and moves the
    state.  Raises LineSearchStall when backtracking runs out.
    """
    lo, hi = bounds
    if state.prev_grad is not None:
        s = state.tau - state.prev_tau
        y = grad - state.prev_grad
        if y * s > CURVATURE_MIN:
            state.history.append((s, y))
            if len(state.history) > state.m:
                state.history.pop(0)
    direction = _two_loop_direction(state.history, grad)
    f0 = objective_fn(state.tau)
    alpha = 1.0
    for _ in range(MAX_BACKTRACKS + 1):
        cand = min(hi, max(lo, state.tau + alpha * direction))
        if cand != state.tau:
            fc = objective_fn(cand)
            if fc <= f0 + ARMIJO_C * grad * (cand - state.tau):
                state.prev_tau = state.tau
                state.prev_grad = grad
                state.tau = cand
                state.iteration += 1
                return cand
        alpha *= 0.5
    raise LineSearchStall(
        f"no acceptable step from tau={state.tau} (grad {grad})"
    )


def _projected_gradient(tau: float, grad: float, tau_max: float) -> float:
    """Gradient component that still points inside the box."""
    return tau - min(tau_max, max(0.0, tau - grad))


def _descend(obj, problem, tau: float, grad: float):
    """L-BFGS-B loop from (tau, grad).  Returns (converged, stalled)."""
    state = LbfgsState(tau=tau, m=problem.history_size)
    bounds = (0.0, problem.tau_max)
    for _ in range(problem.max_iters):
        pg = _projected_gradient(state.tau, grad, problem.tau_max)
        if abs(pg) < problem.grad_tol:
            return True, False
        try:
            new_tau = lbfgsb_step(state, grad, bounds, obj)
        except LineSearchStall:
            return False, True
        grad = _grad(obj, new_tau, problem.grad_step, problem.tau_max)
    pg = _projected_gradient(state.tau, grad, problem.tau_max)
    return abs(pg) < problem.grad_tol, False


def optimize_threshold(problem: ThresholdProblem) -> ThresholdResult:
    """Full outer optimization; see the module docstring for the policy."""
    obj = _Objective(problem)
    tau0 = problem.tau_max / 2.0
    obj(tau0)
    converged = False
    used_fallback = False
    if problem.max_iters > 0:
        grad0 = _grad(obj, tau0, problem.grad_step, problem.tau_max)
        if grad0 == 0.0:
            used_fallback = True
        else:
            converged, stalled = _descend(obj, problem, tau0, grad0)
            used_fallback = stalled
        if used_fallback:
            for tau in np.linspace(0.0, problem.tau_max, GRID_POINTS):
                obj(float(tau))
            best = min(obj.rows, key=lambda r: r["f"])
            grad_b = _grad(
                obj, best["tau"], problem.grad_step, problem.tau_max
            )
            if grad_b != 0.0:
                refined, _ = _descend(obj, problem, best["tau"], grad_b)
                converged = converged or refined
            else:
                # flat to finite differences at the grid best: settled
                converged = True

    best_idx = 0
    for i, row in enumerate(obj.rows):
        if row["f"] < obj.rows[best_idx]["f"]:
            best_idx = i
    best = obj.rows[best_idx]
    return ThresholdResult(
        tau_star=best["tau"],
        best_accuracy=-best["f"],
        evaluations=tuple((r["tau"], r["f"]) for r in obj.rows),
        converged=converged,
        entropy_at_star=best["entropy"],
        used_fallback=used_fallback,
        mask_at_star=best["mask"],
        params_at_star=best["params"],
    )
