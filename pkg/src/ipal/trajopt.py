"""Direct transcription of trajectory problems into the solver's model form.

The decision vector interleaves knot states and controls, x = (X1, U1, X2,
U2, ..., XT), and the equality block stacks the initial-state pin, the
dynamics defects F_t(X_t, U_t, theta) - X_{t+1}, and any per-stage equality
constraints. Per-stage cone constraints are concatenated in stage order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from .cone import ConeSpec, concatenate
from .model import InvalidDimension, ProblemModel


def _shaped(value, shape, what):
    out = np.asarray(value, dtype=float)
    if out.shape != shape:
        raise InvalidDimension(f"{what}: expected shape {shape}, got {out.shape}")
    return out


@dataclass
class Stage:
    """One knot point: its variables, cost, outgoing dynamics, and constraints.

    All callbacks take (z, theta) with z the stage vector (state and control
    concatenated). Derivative hooks for constraint curvature take
    (z, theta, w) and return the Hessian (or theta cross derivative) of w'fn;
    they default to zero, which is exact for constraints linear in z (or
    theta). ``cost_hessian`` also defaults to zero, so stages with nonlinear
    cost should supply it.
    """

    state_dim: int
    control_dim: int = 0
    cost: Optional[Callable] = None
    cost_gradient: Optional[Callable] = None
    cost_hessian: Optional[Callable] = None
    cost_param_jacobian: Optional[Callable] = None
    dynamics: Optional[Callable] = None
    dynamics_jacobian: Optional[Callable] = None
    dynamics_param_jacobian: Optional[Callable] = None
    dynamics_hessian_vp: Optional[Callable] = None
    dynamics_cross_param_vp: Optional[Callable] = None
    equality: Optional[Callable] = None
    equality_jacobian: Optional[Callable] = None
    equality_param_jacobian: Optional[Callable] = None
    equality_hessian_vp: Optional[Callable] = None
    equality_cross_param_vp: Optional[Callable] = None
    equality_dim: int = 0
    cone_constraint: Optional[Callable] = None
    cone_jacobian: Optional[Callable] = None
    cone_param_jacobian: Optional[Callable] = None
    cone_hessian_vp: Optional[Callable] = None
    cone_cross_param_vp: Optional[Callable] = None
    cone: ConeSpec = field(default_factory=lambda: ConeSpec(()))

    @property
    def width(self) -> int:
        return self.state_dim + self.control_dim

    def __post_init__(self):
        if self.state_dim < 1 or self.control_dim < 0 or self.equality_dim < 0:
            raise InvalidDimension(
                f"bad stage dims state={self.state_dim} control={self.control_dim}"
            )
        if self.cost is not None and self.cost_gradient is None:
            raise InvalidDimension("stage cost requires cost_gradient")
        if self.dynamics is not None and self.dynamics_jacobian is None:
            raise InvalidDimension("stage dynamics requires dynamics_jacobian")
        if self.equality_dim > 0 and (self.equality is None or self.equality_jacobian is None):
            raise InvalidDimension("equality_dim > 0 requires equality callbacks")
        if self.cone.dim > 0 and (self.cone_constraint is None or self.cone_jacobian is None):
            raise InvalidDimension("nonempty cone requires cone callbacks")


@dataclass
class TrajectoryProblem:
    """Stage sequence plus the initial state and parameter bookkeeping.

    Every stage except the last needs dynamics (it owns the defect to the
    next knot); the last stage must not define dynamics. When
    ``initial_state_param`` is set, the initial state is read from that slice
    of theta instead of ``initial_state`` and the pin row picks up a -I
    parameter Jacobian block.
    """

    stages: Sequence[Stage]
    initial_state: np.ndarray
    num_parameters: int = 0
    initial_state_param: Optional[slice] = None

    def __post_init__(self):
        self.stages = tuple(self.stages)
        if not self.stages:
            raise InvalidDimension("need at least one stage")
        for t, st in enumerate(self.stages[:-1]):
            if st.dynamics is None:
                raise InvalidDimension(f"stage {t}: non-terminal stage needs dynamics")
        if self.stages[-1].dynamics is not None:
            raise InvalidDimension(f"stage {len(self.stages) - 1}: terminal stage has dynamics")
        self.initial_state = _shaped(
            self.initial_state, (self.stages[0].state_dim,), "initial_state"
        )
        if self.num_parameters < 0:
            raise InvalidDimension("num_parameters must be nonnegative")
        if self.initial_state_param is not None:
            idx = range(*self.initial_state_param.indices(self.num_parameters))
            if len(idx) != self.stages[0].state_dim:
                raise InvalidDimension(
                    f"initial_state_param selects {len(idx)} parameters, "
                    f"need {self.stages[0].state_dim}"
                )

    @property
    def horizon(self) -> int:
        return len(self.stages)


@dataclass(frozen=True)
class IndexMap:
    """Slices locating each stage in the decision vector and constraint
    stacks: ``state``/``control``/``stage`` index into x, ``init``/
    ``defect``/``equality`` into g, ``cone`` into h."""

    n: int
    m: int
    p: int
    state: Tuple[slice, ...]
    control: Tuple[slice, ...]
    stage: Tuple[slice, ...]
    init: slice
    defect: Tuple[slice, ...]
    equality: Tuple[slice, ...]
    cone: Tuple[slice, ...]


def index_map(problem: TrajectoryProblem) -> IndexMap:
    state, control, stage = [], [], []
    off = 0
    for st in problem.stages:
        state.append(slice(off, off + st.state_dim))
        control.append(slice(off + st.state_dim, off + st.width))
        stage.append(slice(off, off + st.width))
        off += st.width
    n = off

    d0 = problem.stages[0].state_dim
    init = slice(0, d0)
    off = d0
    defect = []
    for t in range(len(problem.stages) - 1):
        nxt = problem.stages[t + 1].state_dim
        defect.append(slice(off, off + nxt))
        off += nxt
    equality = []
    for st in problem.stages:
        equality.append(slice(off, off + st.equality_dim))
        off += st.equality_dim
    m = off

    cone, off = [], 0
    for st in problem.stages:
        cone.append(slice(off, off + st.cone.dim))
        off += st.cone.dim
    p = off
    return IndexMap(
        n=n,
        m=m,
        p=p,
        state=tuple(state),
        control=tuple(control),
        stage=tuple(stage),
        init=init,
        defect=tuple(defect),
        equality=tuple(equality),
        cone=tuple(cone),
    )


def extract_trajectory(problem, x):
    """Split a decision vector into (states, controls) lists."""
    imap = index_map(problem)
    x = np.asarray(x, dtype=float)
    states = [x[sl].copy() for sl in imap.state]
    controls = [x[sl].copy() for sl in imap.control[:-1]]
    return states, controls


def stack_trajectory(problem, states, controls):
    """Inverse of extract_trajectory; pads a missing terminal control."""
    T = problem.horizon
    if len(states) != T:
        raise InvalidDimension(f"expected {T} states, got {len(states)}")
    if len(controls) not in (T - 1, T):
        raise InvalidDimension(f"expected {T - 1} controls, got {len(controls)}")
    parts = []
    for t, st in enumerate(problem.stages):
        parts.append(_shaped(states[t], (st.state_dim,), f"stage {t} state"))
        if st.control_dim:
            parts.append(_shaped(controls[t], (st.control_dim,), f"stage {t} control"))
    return np.concatenate(parts) if parts else np.zeros(0)


def _initial_state(problem, theta):
    if problem.initial_state_param is not None:
        return np.asarray(theta, dtype=float)[problem.initial_state_param]
    return problem.initial_state


def dynamics_rollout(problem, controls, theta=None, initial_state=None):
    """Integrate the stage dynamics forward; returns the list of knot states."""
    T = problem.horizon
    if theta is None:
        theta = np.zeros(problem.num_parameters)
    if initial_state is None:
        initial_state = _initial_state(problem, theta)
    states = [np.asarray(initial_state, dtype=float).copy()]
    for t in range(T - 1):
        st = problem.stages[t]
        u = _shaped(controls[t], (st.control_dim,), f"stage {t} control")
        z = np.concatenate([states[-1], u])
        nxt = problem.stages[t + 1].state_dim
        states.append(_shaped(st.dynamics(z, theta), (nxt,), f"stage {t} dynamics"))
    return states


def transcribe(problem: TrajectoryProblem) -> ProblemModel:
    """Build the stacked nonlinear model for the solver.

    The Lagrangian Hessian and parameter cross terms are assembled from the
    per-stage hooks; defect coupling rows (-I on the next state) are linear
    and contribute nothing to either.
    """
    imap = index_map(problem)
    stages = problem.stages
    T = problem.horizon
    d = problem.num_parameters

    def stage_vars(x):
        return [x[imap.stage[t]] for t in range(T)]

    def objective(x, th):
        total = 0.0
        for t, st in enumerate(stages):
            if st.cost is not None:
                total += float(st.cost(x[imap.stage[t]], th))
        return total

    def objective_gradient(x, th):
        out = np.zeros(imap.n)
        for t, st in enumerate(stages):
            if st.cost is not None:
                out[imap.stage[t]] += _shaped(
                    st.cost_gradient(x[imap.stage[t]], th), (st.width,), f"stage {t} cost_gradient"
                )
        return out

    def equality(x, th):
        g = np.zeros(imap.m)
        zs = stage_vars(x)
        g[imap.init] = zs[0][: stages[0].state_dim] - _initial_state(problem, th)
        for t in range(T - 1):
            nxt = stages[t + 1].state_dim
            f = _shaped(stages[t].dynamics(zs[t], th), (nxt,), f"stage {t} dynamics")
            g[imap.defect[t]] = f - zs[t + 1][:nxt]
        for t, st in enumerate(stages):
            if st.equality_dim:
                g[imap.equality[t]] = _shaped(
                    st.equality(zs[t], th), (st.equality_dim,), f"stage {t} equality"
                )
        return g

    def equality_jacobian(x, th):
        G = np.zeros((imap.m, imap.n))
        zs = stage_vars(x)
        d0 = stages[0].state_dim
        G[imap.init, imap.state[0]] = np.eye(d0)
        for t in range(T - 1):
            nxt = stages[t + 1].state_dim
            G[imap.defect[t], imap.stage[t]] = _shaped(
                stages[t].dynamics_jacobian(zs[t], th),
                (nxt, stages[t].width),
                f"stage {t} dynamics_jacobian",
            )
            G[imap.defect[t], imap.state[t + 1]] = -np.eye(nxt)
        for t, st in enumerate(stages):
            if st.equality_dim:
                G[imap.equality[t], imap.stage[t]] = _shaped(
                    st.equality_jacobian(zs[t], th),
                    (st.equality_dim, st.width),
                    f"stage {t} equality_jacobian",
                )
        return G

    def cone_constraint(x, th):
        h = np.zeros(imap.p)
        for t, st in enumerate(stages):
            if st.cone.dim:
                h[imap.cone[t]] = _shaped(
                    st.cone_constraint(x[imap.stage[t]], th),
                    (st.cone.dim,),
                    f"stage {t} cone_constraint",
                )
        return h

    def cone_jacobian(x, th):
        H = np.zeros((imap.p, imap.n))
        for t, st in enumerate(stages):
            if st.cone.dim:
                H[imap.cone[t], imap.stage[t]] = _shaped(
                    st.cone_jacobian(x[imap.stage[t]], th),
                    (st.cone.dim, st.width),
                    f"stage {t} cone_jacobian",
                )
        return H

    def lagrangian_hessian(x, th, y, z):
        L = np.zeros((imap.n, imap.n))
        zs = stage_vars(x)
        for t, st in enumerate(stages):
            block = np.zeros((st.width, st.width))
            if st.cost_hessian is not None:
                block += _shaped(
                    st.cost_hessian(zs[t], th), (st.width, st.width), f"stage {t} cost_hessian"
                )
            if t < T - 1 and st.dynamics_hessian_vp is not None:
                block += _shaped(
                    st.dynamics_hessian_vp(zs[t], th, y[imap.defect[t]]),
                    (st.width, st.width),
                    f"stage {t} dynamics_hessian_vp",
                )
            if st.equality_dim and st.equality_hessian_vp is not None:
                block += _shaped(
                    st.equality_hessian_vp(zs[t], th, y[imap.equality[t]]),
                    (st.width, st.width),
                    f"stage {t} equality_hessian_vp",
                )
            if st.cone.dim and st.cone_hessian_vp is not None:
                block += _shaped(
                    st.cone_hessian_vp(zs[t], th, z[imap.cone[t]]),
                    (st.width, st.width),
                    f"stage {t} cone_hessian_vp",
                )
            L[imap.stage[t], imap.stage[t]] = block
        return L

    def parameter_jacobians(x, th, y, z):
        L_xt = np.zeros((imap.n, d))
        g_t = np.zeros((imap.m, d))
        h_t = np.zeros((imap.p, d))
        zs = stage_vars(x)
        if problem.initial_state_param is not None:
            cols = range(*problem.initial_state_param.indices(d))
            for i, j in enumerate(cols):
                g_t[imap.init.start + i, j] = -1.0
        for t, st in enumerate(stages):
            row = np.zeros((st.width, d))
            if st.cost_param_jacobian is not None:
                row += _shaped(
                    st.cost_param_jacobian(zs[t], th),
                    (st.width, d),
                    f"stage {t} cost_param_jacobian",
                )
            if t < T - 1:
                if st.dynamics_param_jacobian is not None:
                    g_t[imap.defect[t]] = _shaped(
                        st.dynamics_param_jacobian(zs[t], th),
                        (stages[t + 1].state_dim, d),
                        f"stage {t} dynamics_param_jacobian",
                    )
                if st.dynamics_cross_param_vp is not None:
                    row += _shaped(
                        st.dynamics_cross_param_vp(zs[t], th, y[imap.defect[t]]),
                        (st.width, d),
                        f"stage {t} dynamics_cross_param_vp",
                    )
            if st.equality_dim:
                if st.equality_param_jacobian is not None:
                    g_t[imap.equality[t]] = _shaped(
                        st.equality_param_jacobian(zs[t], th),
                        (st.equality_dim, d),
                        f"stage {t} equality_param_jacobian",
                    )
                if st.equality_cross_param_vp is not None:
                    row += _shaped(
                        st.equality_cross_param_vp(zs[t], th, y[imap.equality[t]]),
                        (st.width, d),
                        f"stage {t} equality_cross_param_vp",
                    )
            if st.cone.dim:
                if st.cone_param_jacobian is not None:
                    h_t[imap.cone[t]] = _shaped(
                        st.cone_param_jacobian(zs[t], th),
                        (st.cone.dim, d),
                        f"stage {t} cone_param_jacobian",
                    )
                if st.cone_cross_param_vp is not None:
                    row += _shaped(
                        st.cone_cross_param_vp(zs[t], th, z[imap.cone[t]]),
                        (st.width, d),
                        f"stage {t} cone_cross_param_vp",
                    )
            L_xt[imap.stage[t]] = row
        return L_xt, g_t, h_t

    return ProblemModel(
        n=imap.n,
        m=imap.m,
        p=imap.p,
        cone=concatenate([st.cone for st in stages]),
        objective=objective,
        objective_gradient=objective_gradient,
        equality=equality,
        equality_jacobian=equality_jacobian,
        cone_constraint=cone_constraint if imap.p else None,
        cone_jacobian=cone_jacobian if imap.p else None,
        lagrangian_hessian=lagrangian_hessian,
        parameter_jacobians=parameter_jacobians,
        d=d,
    )
