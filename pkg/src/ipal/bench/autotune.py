"""Closed-loop weight tuning for a receding-horizon tracking controller.

A double-integrator plant starts offset from a reference trajectory. At each
simulation step the controller solves a short-horizon tracking problem whose
weights are the tunable parameters; the applied control is the first one.
The closed-loop tracking cost is differentiated through the controller by
chaining the per-step control sensitivities with the plant dynamics, and the
weights are improved by backtracking gradient descent.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import List, Optional, Tuple

import numpy as np

from ..linsolve import NumericalFailure
from ..sensitivity import differentiate
from ..solver import SolverOptions, solve
from ..trajopt import Stage, TrajectoryProblem, index_map, transcribe

PLANT_A = np.array([[1.0, 0.1], [0.0, 1.0]])
PLANT_B = np.array([0.005, 0.1])
T_SIM = 20
HORIZON = 5
W_TRACK = np.diag([1.0, 0.1])
SIM_START = np.array([0.5, 0.0])
INITIAL_WEIGHTS = np.array([1.0, 0.1, 1.0])  # (w_p, w_v, w_u)
WEIGHT_FLOOR = 1e-3

# the controller subproblems are equality-only; a stiff initial penalty keeps
# the relaxation tiny so the control sensitivities are accurate
POLICY_OPTS = SolverOptions(tol=1e-10, rho_init=1e6, max_outer=40)


def reference_controls(count: int = T_SIM + HORIZON) -> np.ndarray:
    k = np.arange(count)
    return 0.3 * np.sin(2.0 * np.pi * k / T_SIM)


def reference_states() -> np.ndarray:
    """Knot states of the reference rollout from the origin, long enough to
    cover the final controller horizon."""
    u = reference_controls()
    out = np.zeros((u.size + 1, 2))
    for k in range(u.size):
        out[k + 1] = PLANT_A @ out[k] + PLANT_B * u[k]
    return out


def policy_problem(refs: np.ndarray) -> TrajectoryProblem:
    """Tracking problem over the given horizon references (one row per knot
    after the pinned initial state). theta = (w_p, w_v, w_u, x0, x1); the
    initial state is read from theta so the controller differentiates with
    respect to both its weights and its measured state."""
    refs = np.asarray(refs, dtype=float)
    if refs.shape != (HORIZON, 2):
        raise ValueError(f"expected {(HORIZON, 2)} references, got {refs.shape}")

    def running(ref, with_tracking):
        def cost(z, th):
            out = th[2] * z[2] ** 2
            if with_tracking:
                e = z[:2] - ref
                out += th[0] * e[0] ** 2 + th[1] * e[1] ** 2
            return out

        def cost_gradient(z, th):
            out = np.array([0.0, 0.0, 2.0 * th[2] * z[2]])
            if with_tracking:
                out[0] = 2.0 * th[0] * (z[0] - ref[0])
                out[1] = 2.0 * th[1] * (z[1] - ref[1])
            return out

        def cost_hessian(z, th):
            if with_tracking:
                return np.diag([2.0 * th[0], 2.0 * th[1], 2.0 * th[2]])
            return np.diag([0.0, 0.0, 2.0 * th[2]])

        def cost_param_jacobian(z, th):
            out = np.zeros((3, 5))
            out[2, 2] = 2.0 * z[2]
            if with_tracking:
                out[0, 0] = 2.0 * (z[0] - ref[0])
                out[1, 1] = 2.0 * (z[1] - ref[1])
            return out

        return Stage(
            state_dim=2,
            control_dim=1,
            cost=cost,
            cost_gradient=cost_gradient,
            cost_hessian=cost_hessian,
            cost_param_jacobian=cost_param_jacobian,
            dynamics=lambda z, th: PLANT_A @ z[:2] + PLANT_B * z[2],
            dynamics_jacobian=lambda z, th: np.column_stack([PLANT_A, PLANT_B]),
        )

    def terminal(ref):
        return Stage(
            state_dim=2,
            cost=lambda z, th: th[0] * (z[0] - ref[0]) ** 2 + th[1] * (z[1] - ref[1]) ** 2,
            cost_gradient=lambda z, th: np.array(
                [2.0 * th[0] * (z[0] - ref[0]), 2.0 * th[1] * (z[1] - ref[1])]
            ),
            cost_hessian=lambda z, th: np.diag([2.0 * th[0], 2.0 * th[1]]),
            cost_param_jacobian=lambda z, th: np.array(
                [[2.0 * (z[0] - ref[0]), 0.0, 0.0, 0.0, 0.0],
                 [0.0, 2.0 * (z[1] - ref[1]), 0.0, 0.0, 0.0]]
            ),
        )

    stages = [running(refs[0], with_tracking=False)]
    stages += [running(refs[t], with_tracking=True) for t in range(HORIZON - 1)]
    stages += [terminal(refs[HORIZON - 1])]
    # stage 0 tracks nothing: its state is pinned to the measurement; the
    # knot-t stage (t >= 1) tracks refs[t - 1]
    return TrajectoryProblem(
        stages=stages,
        initial_state=np.zeros(2),
        num_parameters=5,
        initial_state_param=slice(3, 5),
    )


@lru_cache(maxsize=None)
def _policy_model(step: int):
    refs = reference_states()
    problem = policy_problem(refs[step + 1 : step + 1 + HORIZON])
    model = transcribe(problem)
    imap = index_map(problem)
    return model, imap.control[0]


def open_loop_cost() -> float:
    """Tracking cost when the reference controls are replayed blindly from
    the offset start."""
    refs = reference_states()
    u = reference_controls()
    x = SIM_START.copy()
    cost = 0.0
    for k in range(T_SIM):
        x = PLANT_A @ x + PLANT_B * u[k]
        e = x - refs[k + 1]
        cost += e @ W_TRACK @ e
    return cost


def closed_loop_cost(
    weights: np.ndarray, want_gradient: bool = False
) -> Tuple[float, Optional[np.ndarray]]:
    """Simulate the controller in the loop; optionally return dJ/dweights.

    The gradient chains the controller sensitivities: with S_k = dx_k/dw,
    du_k/dw = P_w + P_x S_k and S_{k+1} = A S_k + B du_k/dw, where (P_w, P_x)
    are the first-control sensitivities to the weight and measured-state
    parts of theta.
    """
    refs = reference_states()
    x = SIM_START.copy()
    S = np.zeros((2, 3))
    cost = 0.0
    grad = np.zeros(3) if want_gradient else None
    for k in range(T_SIM):
        model, uslice = _policy_model(k)
        theta = np.concatenate([weights, x])
        sol = solve(model, np.zeros(model.n), theta, POLICY_OPTS)
        if not sol.solved:
            raise NumericalFailure(f"controller subproblem failed at step {k}: {sol.status}")
        u = sol.point.x[uslice][0]
        if want_gradient:
            du = differentiate(model, sol, theta).dx[uslice][0]
            du_dw = du[:3] + du[3:] @ S
            S = PLANT_A @ S + np.outer(PLANT_B, du_dw)
        x = PLANT_A @ x + PLANT_B * u
        e = x - refs[k + 1]
        cost += e @ W_TRACK @ e
        if want_gradient:
            grad += 2.0 * (W_TRACK @ e) @ S
    return cost, grad


@dataclass
class AutotuneStep:
    iteration: int
    weights: np.ndarray
    cost: float
    gradient_norm: float
    step_size: float


@dataclass
class AutotuneReport:
    open_loop_cost: float
    untuned_cost: float
    tuned_cost: float
    initial_weights: np.ndarray
    tuned_weights: np.ndarray
    steps: List[AutotuneStep]

    @property
    def improved(self) -> bool:
        return self.tuned_cost < self.untuned_cost < self.open_loop_cost


def autotune(steps: int = 10) -> AutotuneReport:
    """Backtracking gradient descent on the closed-loop cost; weights are
    floored to keep the controller subproblems well posed."""
    w = INITIAL_WEIGHTS.copy()
    baseline, _ = closed_loop_cost(w)
    history: List[AutotuneStep] = []
    cost = baseline
    for it in range(steps):
        cost, grad = closed_loop_cost(w, want_gradient=True)
        alpha = 1.0 / max(1.0, float(np.linalg.norm(grad)))
        taken = 0.0
        for _ in range(20):
            trial = np.maximum(WEIGHT_FLOOR, w - alpha * grad)
            trial_cost, _ = closed_loop_cost(trial)
            if trial_cost < cost:
                w, cost, taken = trial, trial_cost, alpha
                break
            alpha *= 0.5
        history.append(
            AutotuneStep(
                iteration=it,
                weights=w.copy(),
                cost=cost,
                gradient_norm=float(np.linalg.norm(grad)),
                step_size=taken,
            )
        )
    return AutotuneReport(
        open_loop_cost=open_loop_cost(),
        untuned_cost=baseline,
        tuned_cost=cost,
        initial_weights=INITIAL_WEIGHTS.copy(),
        tuned_weights=w,
        steps=history,
    )
