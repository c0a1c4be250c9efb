"""Hamiltonian structure of the optimal control problem.

Everything is computed in left-trivialized coordinates (x, y; mu, xi):
group element, body velocity and two algebra covectors.  The Hamiltonian

    H = <mu, y> + <xi, embed(u) + bias(y)> - L(x, y, u)

is maximized over u on the regular set where the control Hessian of L
is invertible; ``eliminate_control`` solves the stationarity condition
(components 1..m of xi equal dL/du) in closed form for quadratic costs
and by damped Newton otherwise.  ``extremal_rhs`` evaluates the critical
flow

    xdot   = x hat(y)
    ydot   = embed(u) + bias(y)
    mudot  = (dL/dx trivialized) + ad_star(y, mu)
    xidot  = -mu + dL/dy - flat([y, sharp(xi)]) + ad_star(sharp(xi), flat(y))

and ``hamiltonian_field_check`` verifies numerically that this flow is
the Hamiltonian field of H for the trivialized symplectic form

    Omega((z,w,vmu,vxi), (z',w',vmu',vxi'))
        = vmu'(z) + vxi'(w) - vmu(z') - vxi(w') + <mu, [z, z']>.

Only normal extremals are treated; irregular points raise
SingularRegularity instead of entering a constraint algorithm.

Note on orientation: with the five-term linear Poisson bracket
implemented here ({xi_i, y_j} = delta_ij), observables evolve along the
flow as df/dt = {H, f}.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from . import groups
from .algebra import (ad_star, bias, bracket, embed_control, flat,
                      restrict_covector, sharp)
from .dynamics import State, Trajectory
from .errors import DimensionMismatch, NonFinite, SingularRegularity, NoConvergence

FD_STEP_CHECK = 1e-5   # verification finite differences
FD_STEP_COST = 1e-6    # cost derivative helper


@dataclass(frozen=True)
class Costate:
    """Pair of algebra covectors (mu, xi)."""

    mu: np.ndarray
    xi: np.ndarray


@dataclass(frozen=True)
class ExtremalPoint:
    state: State
    costate: Costate
    u: np.ndarray


@dataclass(frozen=True, eq=False)
class CostModel:
    """Running cost with its left-trivialized partial derivatives.

    ``dL_dx_triv`` returns the covector pairing with body directions of
    x variations (x varied along x exp(eps E_i)); it must be identically
    zero when ``x_independent`` is set.  ``quad_weight`` marks purely
    quadratic control costs L = u^T R u / 2 for which control
    elimination has the closed form u = R^{-1} xi restricted.
    """

    eval: Callable
    dL_dx_triv: Callable
    dL_dy: Callable
    dL_du: Callable
    d2L_du2: Callable
    x_independent: bool
    quad_weight: np.ndarray | None = None


def _zero_cov(n):
    z = np.zeros(n)
    return lambda s, u: z


def min_acc_cost(model) -> CostModel:
    """Minimum covariant acceleration cost: the inertia quadratic form of u."""
    R = model.inertia[: model.m, : model.m].copy()
    return quadratic_cost(model, R)


def quadratic_cost(model, R) -> CostModel:
    """L = u^T R u / 2 with a symmetric positive definite weight."""
    R = np.asarray(R, dtype=float)
    m = model.m
    if R.shape != (m, m):
        raise DimensionMismatch(f"quadratic weight must be {m}x{m}, got {R.shape}")
    if np.abs(R - R.T).max() > 1e-12:
        raise ValueError("quadratic weight must be symmetric")
    return CostModel(
        eval=lambda s, u: 0.5 * float(np.dot(u, R @ u)),
        dL_dx_triv=_zero_cov(model.n),
        dL_dy=_zero_cov(model.n),
        dL_du=lambda s, u: R @ u,
        d2L_du2=lambda s, u: R,
        x_independent=True,
        quad_weight=R,
    )


def fd_dL_dx_triv(gm, cost_eval, s, u, step=None):
    """Left-trivialized x-derivative of a cost by central differences.

    Varies x along x exp(t E_i) with step 1e-6 (1 + ||x||).
    """
    n = gm.algebra.n
    h = step if step is not None else FD_STEP_COST * (1.0 + float(np.linalg.norm(s.x)))
    out = np.empty(n)
    eye = np.eye(n)
    for i in range(n):
        xp = groups.compose(s.x, groups.exp_map(gm, eye[i], h))
        xm = groups.compose(s.x, groups.exp_map(gm, eye[i], -h))
        out[i] = (cost_eval(State(xp, s.y), u) - cost_eval(State(xm, s.y), u)) / (2.0 * h)
    return out


def hamiltonian(model, cost, a) -> float:
    """<mu, y> + <xi, embed(u) + bias(y)> - L(x, y, u)."""
    y = np.asarray(a.state.y, dtype=float)
    u = np.asarray(a.u, dtype=float)
    acc = embed_control(model, u) + bias(model, y)
    return float(np.dot(a.costate.mu, y) + np.dot(a.costate.xi, acc)
                 - cost.eval(a.state, u))


def eliminate_control(model, cost, s, xi, tol=1e-12, max_iter=50) -> np.ndarray:
    """Solve the stationarity condition dL/du = restricted xi for u.

    Closed form for quadratic costs, damped Newton otherwise (start at
    u = 0, retry from the restricted xi components on failure).  Raises
    SingularRegularity when the control Hessian is numerically singular
    and NoConvergence when Newton stalls.
    """
    xi = np.asarray(xi, dtype=float)
    target = xi[..., : model.m]
    if cost.quad_weight is not None:
        R = cost.quad_weight
        if abs(np.linalg.det(R)) < 1e-10:
            raise SingularRegularity("quadratic weight is singular")
        return np.linalg.solve(R, target[..., None])[..., 0] if target.ndim > 1 \
            else np.linalg.solve(R, target)

    def newton(u0):
        u = u0.copy()
        for _ in range(max_iter):
            g = np.asarray(cost.dL_du(s, u), dtype=float) - target
            if np.abs(g).max() < tol:
                return u
            Hm = np.asarray(cost.d2L_du2(s, u), dtype=float)
            if abs(np.linalg.det(Hm)) < 1e-10:
                raise SingularRegularity("control Hessian singular during elimination")
            du = np.linalg.solve(Hm, -g)
            step = 1.0
            base = float(np.dot(g, g))
            for _ in range(30):
                g_try = np.asarray(cost.dL_du(s, u + step * du), dtype=float) - target
                if float(np.dot(g_try, g_try)) < base:
                    break
                step *= 0.5
            else:
                return None
            u = u + step * du
        g = np.asarray(cost.dL_du(s, u), dtype=float) - target
        return u if np.abs(g).max() < tol else None

    u = newton(np.zeros(model.m))
    if u is None:
        u = newton(target.copy())
    if u is None:
        raise NoConvergence("control elimination Newton failed to converge")
    return u


class ExtremalRHS(NamedTuple):
    ydot: np.ndarray
    mudot: np.ndarray
    xidot: np.ndarray
    xdot_body: np.ndarray


def _costate_rates(model, y, mu, xi):
    """The bracket terms shared by every extremal: (mudot drift, xidot)."""
    sx = sharp(model, xi)
    mudot = ad_star(model, y, mu)
    xidot = -mu - flat(model, bracket(model, y, sx)) + ad_star(model, sx, flat(model, y))
    return mudot, xidot


def extremal_rhs(model, gm, cost, a) -> ExtremalRHS:
    """Critical-flow right-hand sides at a stationarity point."""
    y = np.asarray(a.state.y, dtype=float)
    mu = np.asarray(a.costate.mu, dtype=float)
    xi = np.asarray(a.costate.xi, dtype=float)
    u = np.asarray(a.u, dtype=float)
    ydot = embed_control(model, u) + bias(model, y)
    mudot, xidot = _costate_rates(model, y, mu, xi)
    if not cost.x_independent:
        mudot = mudot + np.asarray(cost.dL_dx_triv(a.state, u), dtype=float)
    dLdy = np.asarray(cost.dL_dy(a.state, u), dtype=float)
    if dLdy.any():
        xidot = xidot + dLdy
    return ExtremalRHS(ydot=ydot, mudot=mudot, xidot=xidot, xdot_body=y)


def min_acc_rhs(model, gm, a) -> ExtremalRHS:
    """Minimum-acceleration specialization with the control inlined:
    ydot = sharp(restricted xi) + bias(y)."""
    y = np.asarray(a.state.y, dtype=float)
    mu = np.asarray(a.costate.mu, dtype=float)
    xi = np.asarray(a.costate.xi, dtype=float)
    ydot = sharp(model, restrict_covector(model, xi)) + bias(model, y)
    mudot, xidot = _costate_rates(model, y, mu, xi)
    return ExtremalRHS(ydot=ydot, mudot=mudot, xidot=xidot, xdot_body=y)


# -- extremal flow --------------------------------------------------------------

def _quad_solver(cost):
    factor = cho_factor(cost.quad_weight)

    def solve(target):
        flat_t = np.atleast_2d(target)
        out = cho_solve(factor, flat_t.T).T
        return out.reshape(target.shape)

    return solve


def _flow_rhs_quad(model, solve_R):
    """Batched extremal RHS for x-independent quadratic costs."""
    n, m = model.n, model.m

    def rhs(t, x, v):
        y, mu, xi = v[..., :n], v[..., n:2 * n], v[..., 2 * n:]
        u = solve_R(xi[..., :m])
        ydot = embed_control(model, u) + bias(model, y)
        mudot, xidot = _costate_rates(model, y, mu, xi)
        return y, np.concatenate([ydot, mudot, xidot], axis=-1)

    return rhs


def _flow_rhs_general(model, gm, cost):
    def rhs(t, x, v):
        n = model.n
        y, mu, xi = v[:n], v[n:2 * n], v[2 * n:]
        s = State(x, y)
        u = eliminate_control(model, cost, s, xi)
        a = ExtremalPoint(s, Costate(mu, xi), u)
        r = extremal_rhs(model, gm, cost, a)
        return y, np.concatenate([r.ydot, r.mudot, r.xidot])

    return rhs


def flow_extremal(model, gm, cost, a0, T, steps) -> Trajectory:
    """Integrate the critical flow, recording controls and H on the grid."""
    if T <= 0:
        raise ValueError("T must be positive")
    steps = int(steps)
    h = T / steps
    n = model.n
    fast = cost.quad_weight is not None and cost.x_independent
    if fast:
        rhs = _flow_rhs_quad(model, _quad_solver(cost))
    else:
        rhs = _flow_rhs_general(model, gm, cost)

    times = np.linspace(0.0, T, steps + 1)
    xs = np.empty((steps + 1, gm.rep_dim, gm.rep_dim))
    ys = np.empty((steps + 1, n))
    mus = np.empty((steps + 1, n))
    xis = np.empty((steps + 1, n))
    us = np.empty((steps + 1, model.m))
    hams = np.empty(steps + 1)

    x = np.asarray(a0.state.x, dtype=float)
    v = np.concatenate([np.asarray(a0.state.y, dtype=float),
                        np.asarray(a0.costate.mu, dtype=float),
                        np.asarray(a0.costate.xi, dtype=float)])

    def record(k, x, v):
        y, mu, xi = v[:n], v[n:2 * n], v[2 * n:]
        s = State(x, y)
        u = eliminate_control(model, cost, s, xi)
        xs[k], ys[k], mus[k], xis[k], us[k] = x, y, mu, xi, u
        hams[k] = hamiltonian(model, cost, ExtremalPoint(s, Costate(mu, xi), u))

    record(0, x, v)
    needs_x = not cost.x_independent
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(steps):
            x, v = groups.rkmk_coupled_step(gm, x, v, times[k], h, rhs, needs_x=needs_x)
            if not (np.isfinite(v).all() and np.isfinite(x).all()):
                raise NonFinite(k + 1)
            record(k + 1, x, v)
    return Trajectory(times=times, xs=xs, ys=ys, us=us, mus=mus, xis=xis, hams=hams)


def propagate_endpoints(model, gm, cost, x0, y0, mu0, xi0, T, steps):
    """Terminal (x, y) of the extremal flow; mu0/xi0 may carry a batch dim.

    Shares the stepper and right-hand sides with flow_extremal, so a
    batch of flows is bitwise the run of each element alone.  Used by
    the shooting solver to evaluate Jacobian columns concurrently.
    """
    mu0 = np.asarray(mu0, dtype=float)
    xi0 = np.asarray(xi0, dtype=float)
    n = model.n
    h = T / int(steps)
    fast = cost.quad_weight is not None and cost.x_independent
    if not fast and mu0.ndim > 1:
        raise DimensionMismatch("batched propagation requires a quadratic x-independent cost")
    rhs = _flow_rhs_quad(model, _quad_solver(cost)) if fast else _flow_rhs_general(model, gm, cost)

    y0b = np.broadcast_to(np.asarray(y0, dtype=float), mu0.shape).copy()
    v = np.concatenate([y0b, mu0, xi0], axis=-1)
    x = np.asarray(x0, dtype=float)
    t = 0.0
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(int(steps)):
            x, v = groups.rkmk_coupled_step(gm, x, v, t, h, rhs, needs_x=not cost.x_independent)
            if not (np.isfinite(v).all() and np.isfinite(np.asarray(x)).all()):
                raise NonFinite(k + 1)
            t += h
    return x, v[..., :n]


def running_cost(cost, traj) -> float:
    """Composite Simpson quadrature of the running cost along a trajectory."""
    K = len(traj) - 1
    vals = np.array([cost.eval(traj.state(k), traj.us[k]) for k in range(K + 1)])
    h = float(traj.times[1] - traj.times[0])
    if K % 2 == 0:
        w = np.ones(K + 1)
        w[1:-1:2] = 4.0
        w[2:-1:2] = 2.0
        return float(h / 3.0 * np.dot(w, vals))
    # odd interval count: Simpson up to K-1, trapezoid on the last cell
    w = np.ones(K)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return float(h / 3.0 * np.dot(w, vals[:-1]) + 0.5 * h * (vals[-2] + vals[-1]))


# -- symplectic and Poisson verification ----------------------------------------

class TangentTuple(NamedTuple):
    """Left-trivialized tangent direction (z, w, v_mu, v_xi)."""

    z: np.ndarray
    w: np.ndarray
    v_mu: np.ndarray
    v_xi: np.ndarray


def symplectic_form(model, p, A, B) -> float:
    """Trivialized symplectic pairing of two tangent tuples at p = (state, costate)."""
    _, costate = p
    mu = np.asarray(costate.mu, dtype=float)
    return float(
        np.dot(B.v_mu, A.z) + np.dot(B.v_xi, A.w)
        - np.dot(A.v_mu, B.z) - np.dot(A.v_xi, B.w)
        + np.dot(mu, bracket(model, A.z, B.z))
    )


def _shift_point(model, gm, s, costate, V, eps):
    x = groups.compose(s.x, groups.exp_map(gm, V.z, eps))
    return State(x, s.y + eps * V.w), Costate(costate.mu + eps * V.v_mu,
                                              costate.xi + eps * V.v_xi)


def hamiltonian_field_check(model, gm, cost, a, n_directions=10,
                            fd_step=FD_STEP_CHECK, seed=0) -> float:
    """Max mismatch of Omega(X_H, V) against the directional derivative of H.

    X_H is the extremal field at ``a`` (control re-eliminated), dH is a
    central finite difference with the control re-eliminated at each
    shifted point.  Small residuals certify that the flow solves the
    symplectic equation.
    """
    u = eliminate_control(model, cost, a.state, a.costate.xi)
    a = ExtremalPoint(a.state, a.costate, u)
    r = extremal_rhs(model, gm, cost, a)
    X = TangentTuple(z=r.xdot_body, w=r.ydot, v_mu=r.mudot, v_xi=r.xidot)

    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(int(n_directions)):
        parts = rng.standard_normal(4 * model.n)
        parts /= np.linalg.norm(parts)
        V = TangentTuple(*np.split(parts, 4))
        lhs = symplectic_form(model, (a.state, a.costate), X, V)
        sp, cp = _shift_point(model, gm, a.state, a.costate, V, fd_step)
        sm, cm = _shift_point(model, gm, a.state, a.costate, V, -fd_step)
        hp = hamiltonian(model, cost, ExtremalPoint(sp, cp, eliminate_control(model, cost, sp, cp.xi)))
        hm = hamiltonian(model, cost, ExtremalPoint(sm, cm, eliminate_control(model, cost, sm, cm.xi)))
        worst = max(worst, abs(lhs - (hp - hm) / (2.0 * fd_step)))
    return worst


# -- observables and the linear Poisson bracket ---------------------------------

@dataclass(frozen=True)
class Observable:
    """Scalar function of (state, costate) with its functional derivatives.

    ``derivatives(state, costate)`` returns the tuple
    (d/dx trivialized, d/dy, d/dmu, d/dxi) where the first two are
    covectors and the last two are vectors.
    """

    value: Callable
    derivatives: Callable


def coordinate_observable(model, slot, index) -> Observable:
    """The coordinate function y_i, mu_i or xi_i with exact derivatives."""
    if slot not in ("y", "mu", "xi"):
        raise ValueError(f"slot must be y, mu or xi, got {slot!r}")
    n = model.n
    e = np.zeros(n)
    e[index] = 1.0
    zero = np.zeros(n)

    def value(s, c):
        src = {"y": s.y, "mu": c.mu, "xi": c.xi}[slot]
        return float(src[index])

    def derivatives(s, c):
        return (zero, e if slot == "y" else zero,
                e if slot == "mu" else zero, e if slot == "xi" else zero)

    return Observable(value=value, derivatives=derivatives)


def fd_observable(model, gm, value_fn, step=FD_STEP_CHECK) -> Observable:
    """Wrap a scalar function with central-difference functional derivatives."""
    n = model.n
    eye = np.eye(n)

    def derivatives(s, c):
        dx = np.empty(n)
        dy = np.empty(n)
        dmu = np.empty(n)
        dxi = np.empty(n)
        for i in range(n):
            xp = groups.compose(s.x, groups.exp_map(gm, eye[i], step))
            xm = groups.compose(s.x, groups.exp_map(gm, eye[i], -step))
            dx[i] = (value_fn(State(xp, s.y), c) - value_fn(State(xm, s.y), c)) / (2 * step)
            dy[i] = (value_fn(State(s.x, s.y + step * eye[i]), c)
                     - value_fn(State(s.x, s.y - step * eye[i]), c)) / (2 * step)
            dmu[i] = (value_fn(s, Costate(c.mu + step * eye[i], c.xi))
                      - value_fn(s, Costate(c.mu - step * eye[i], c.xi))) / (2 * step)
            dxi[i] = (value_fn(s, Costate(c.mu, c.xi + step * eye[i]))
                      - value_fn(s, Costate(c.mu, c.xi - step * eye[i]))) / (2 * step)
        return dx, dy, dmu, dxi

    return Observable(value=value_fn, derivatives=derivatives)


def hamiltonian_observable(model, gm, cost) -> Observable:
    """The reduced Hamiltonian as an observable with analytic derivatives.

    The functional derivatives are read off the extremal field:
    dH/dmu = y, dH/dxi = ydot, dH/dy = -xidot and the trivialized
    dH/dx = ad_star(y, mu) - mudot.
    """

    def value(s, c):
        u = eliminate_control(model, cost, s, c.xi)
        return hamiltonian(model, cost, ExtremalPoint(s, c, u))

    def derivatives(s, c):
        u = eliminate_control(model, cost, s, c.xi)
        r = extremal_rhs(model, gm, cost, ExtremalPoint(s, c, u))
        dx = ad_star(model, s.y, c.mu) - r.mudot
        return dx, -r.xidot, s.y.copy(), r.ydot

    return Observable(value=value, derivatives=derivatives)


def poisson_bracket(model, f, g, p) -> float:
    """Linear Poisson bracket of two observables at p = (state, costate).

    Five-term formula: <g_x, f_mu> - <f_x, g_mu> + <g_y, f_xi>
    - <f_y, g_xi> + <mu, [f_mu, g_mu]>.  With this orientation
    {xi_i, y_j} = delta_ij and d/dt f = {H, f} along the extremal flow.
    """
    s, c = p
    fx, fy, fmu, fxi = f.derivatives(s, c)
    gx, gy, gmu, gxi = g.derivatives(s, c)
    return float(
        np.dot(gx, fmu) - np.dot(fx, gmu)
        + np.dot(gy, fxi) - np.dot(fy, gxi)
        + np.dot(c.mu, bracket(model, fmu, gmu))
    )


def spatial_momentum(gm, x, mu) -> np.ndarray:
    """Coadjoint-transported costate <mu, Ad_{x^{-1}} .> in coordinates.

    Constant along extremal flows of configuration-independent costs.
    """
    return groups.adjoint_matrix(gm, groups.inverse(gm, x)).T @ np.asarray(mu, dtype=float)
