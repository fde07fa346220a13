"""Dynamics on a bundle chart: equations of motion, integration, currents.

The state is a base point q, base velocity qdot, and fiber vector v.  A
Lagrangian is a scalar map of the packed vector (q, qdot, v); all partial
derivatives are taken with the dual-number machinery, so a plain Python
body is enough.

Conventions (fixed across the package):

    horizontal_i = dL/dq_i - mu.(Gamma_i v) - d/dt(dL/dqd_i)
                   + mu_a omega^a_{ij} qd_j
    vertical_a   = c^g_{ba} v_b mu_g - (Dmu/dt)_a
    (Dmu/dt)_a   = d/dt(mu_a) - mu_b Gamma^b_{ia} qd_i

with mu = dL/dv.  These are the stationarity conditions of the action under
variations whose fiber part is the covariant expression
Dw/dt + [v, w] + omega(dq, qd), rewritten in chart coordinates.
"""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

from . import _dual
from .errors import ChartExit, DimensionMismatch, SingularHessian
from .lpbundle import LPBundleChart
from .smoothmap import SmoothMap, eval_map, jacobian

HESSIAN_COND_LIMIT = 1e12


@dataclass(frozen=True)
class LPLagrangian:
    """A Lagrangian over a bundle chart.

    ``L`` maps the packed vector (q, qdot, v) of length 2n + m to a scalar.
    """

    bundle: LPBundleChart
    L: SmoothMap
    name: str = ""

    def __post_init__(self):
        n, m = self.bundle.n, self.bundle.m
        if self.L.in_dim != 2 * n + m or self.L.out_dim != 1:
            raise DimensionMismatch(
                f"Lagrangian must map R^{2 * n + m} to a scalar, got "
                f"R^{self.L.in_dim} -> R^{self.L.out_dim}"
            )

    @property
    def n(self):
        return self.bundle.n

    @property
    def m(self):
        return self.bundle.m

    @staticmethod
    def from_callable(bundle, f, name=""):
        """Wrap a plain function f(q, qdot, v) -> scalar."""
        n, m = bundle.n, bundle.m

        def body(x):
            return f(x[:n], x[n : 2 * n], x[2 * n :])

        return LPLagrangian(bundle, SmoothMap(2 * n + m, 1, body, name=name), name)

    def value(self, q, qdot, v):
        parts = [np.asarray(q), np.asarray(qdot), np.asarray(v)]
        if any(p.dtype == object for p in parts):
            x = np.concatenate([p.astype(object) for p in parts])
        else:
            x = np.concatenate([p.astype(float) for p in parts])
        return eval_map(self.L, x).reshape(-1)[0]


@dataclass(frozen=True)
class LPState:
    q: np.ndarray
    qdot: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        for name in ("q", "qdot", "v"):
            object.__setattr__(
                self, name, np.array(getattr(self, name), dtype=float).reshape(-1)
            )
        if self.q.shape != self.qdot.shape:
            raise DimensionMismatch("q and qdot must have the same length")


@dataclass(frozen=True)
class LPState2:
    q: np.ndarray
    qdot: np.ndarray
    v: np.ndarray
    qddot: np.ndarray
    vdot: np.ndarray

    def __post_init__(self):
        for name in ("q", "qdot", "v", "qddot", "vdot"):
            object.__setattr__(
                self, name, np.array(getattr(self, name), dtype=float).reshape(-1)
            )
        if not (self.q.shape == self.qdot.shape == self.qddot.shape):
            raise DimensionMismatch("base slots must share one length")
        if self.v.shape != self.vdot.shape:
            raise DimensionMismatch("fiber slots must share one length")

    @property
    def state(self):
        return LPState(self.q, self.qdot, self.v)


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: tuple
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "states", tuple(self.states))
        if len(t) != len(self.states) or len(t) < 2:
            raise ValueError("need matching times/states with at least two samples")
        if np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing")

    def __len__(self):
        return len(self.states)

    def q_array(self):
        return np.array([s.q for s in self.states])

    def qdot_array(self):
        return np.array([s.qdot for s in self.states])

    def v_array(self):
        return np.array([s.v for s in self.states])


def _pack(s: LPState):
    return np.concatenate([s.q, s.qdot, s.v])


def _scalar_body(sys: LPLagrangian):
    L = sys.L

    def f(x):
        y = eval_map(L, x)
        return y.reshape(-1)[0]

    return f


def _grad_hess(sys: LPLagrangian, s: LPState):
    return _dual.grad_hess(_scalar_body(sys), _pack(s))


def _structure_at(sys: LPLagrangian, q):
    b = sys.bundle
    G = np.asarray(eval_map(b.Gamma, q), dtype=float)
    C = np.asarray(eval_map(b.c, q), dtype=float)
    Om = np.asarray(eval_map(b.omega, q), dtype=float)
    return G, C, Om


def lp_operator(sys: LPLagrangian, s2: LPState2):
    """Equation-of-motion residual at full second-order data.

    Returns (base covector of length n, fiber covector of length m); both
    vanish exactly on solutions.
    """
    n, m = sys.n, sys.m
    s = s2.state
    _, grad, H = _grad_hess(sys, s)
    sq, sqd, sv = slice(0, n), slice(n, 2 * n), slice(2 * n, 2 * n + m)
    G, C, Om = _structure_at(sys, s.q)
    mu = grad[sv]

    xdot = np.concatenate([s2.qdot, s2.qddot, s2.vdot])
    dt_p = H[sqd] @ xdot
    dt_mu = H[sv] @ xdot

    hor = (
        grad[sq]
        - np.einsum("a,iab,b->i", mu, G, s.v)
        - dt_p
        + np.einsum("a,aij,j->i", mu, Om, s.qdot)
    )
    cov_dt_mu = dt_mu - np.einsum("b,iba,i->a", mu, G, s.qdot)
    ver = np.einsum("gba,b,g->a", C, s.v, mu) - cov_dt_mu
    return hor, ver


def accelerations(sys: LPLagrangian, s: LPState):
    """The unique (qddot, vdot) zeroing the equation residual at s.

    Solves one linear system in the (qdot, v) block Hessian of L; raises
    SingularHessian when that block is ill conditioned (threshold 1e12).
    """
    n, m = sys.n, sys.m
    _, grad, H = _grad_hess(sys, s)
    sq, sqd, sv = slice(0, n), slice(n, 2 * n), slice(2 * n, 2 * n + m)
    G, C, Om = _structure_at(sys, s.q)
    mu = grad[sv]

    M = H[n:, n:]
    if M.size:
        cond = np.linalg.cond(M)
        if cond > HESSIAN_COND_LIMIT:
            raise SingularHessian(
                f"velocity-block Hessian condition {cond:.3e} exceeds "
                f"{HESSIAN_COND_LIMIT:.0e}"
            )
    rhs_q = (
        grad[sq]
        - H[sqd, sq] @ s.qdot
        - np.einsum("a,iab,b->i", mu, G, s.v)
        + np.einsum("a,aij,j->i", mu, Om, s.qdot)
    )
    rhs_v = (
        np.einsum("gba,b,g->a", C, s.v, mu)
        + np.einsum("b,iba,i->a", mu, G, s.qdot)
        - H[sv, sq] @ s.qdot
    )
    z = np.linalg.solve(M, np.concatenate([rhs_q, rhs_v])) if M.size else np.zeros(0)
    return z[:n], z[n:]


def energy(sys: LPLagrangian, s: LPState):
    """E = <dL/dqdot, qdot> + <dL/dv, v> - L."""
    n = sys.n
    x = _pack(s)
    grad = _dual.gradient(_scalar_body(sys), x)
    grad = np.asarray(grad, dtype=float)
    val = float(eval_map(sys.L, x).reshape(-1)[0])
    return float(grad[n : 2 * n] @ s.qdot + grad[2 * n :] @ s.v - val)


def integrate_lp(sys: LPLagrangian, s0: LPState, t0, t1, h, method="rk4"):
    """Fixed-step integration of (q, qdot, v); wraps periodic coordinates.

    Raises ChartExit if a non-periodic coordinate leaves the chart and
    propagates SingularHessian from the acceleration solve.
    """
    if method not in ("rk4", "euler"):
        raise ValueError(f"unknown method {method!r}")
    if h <= 0:
        raise ValueError("step size must be positive")
    span = float(t1) - float(t0)
    steps = int(round(span / h))
    if steps < 1 or abs(steps * h - span) > 1e-9 * max(1.0, abs(span)):
        raise ValueError("time span must be a whole number of steps")

    n, m = sys.n, sys.m
    dom = sys.bundle.base

    def ydot(y):
        st = LPState(y[:n], y[n : 2 * n], y[2 * n :])
        qdd, vd = accelerations(sys, st)
        return np.concatenate([st.qdot, qdd, vd])

    q0 = dom.wrap(np.asarray(s0.q, dtype=float))
    dom.require_inside(q0, t=float(t0))
    y = np.concatenate([q0, s0.qdot, s0.v])
    times = float(t0) + h * np.arange(steps + 1)
    states = [LPState(y[:n], y[n : 2 * n], y[2 * n :])]

    for k in range(steps):
        if method == "rk4":
            k1 = ydot(y)
            k2 = ydot(y + 0.5 * h * k1)
            k3 = ydot(y + 0.5 * h * k2)
            k4 = ydot(y + h * k3)
            y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        else:
            y = y + h * ydot(y)
        y[:n] = dom.wrap(y[:n])
        dom.require_inside(y[:n], t=float(times[k + 1]))
        states.append(LPState(y[:n], y[n : 2 * n], y[2 * n :]))

    return Trajectory(
        times, states, {"integrator": method, "h": float(h), "seed": None}
    )


# ---------------------------------------------------------------------------
# symmetry machinery


def _check_algebra_constants(c):
    skew = np.max(np.abs(c + np.einsum("gab->gba", c))) if c.size else 0.0
    cyc = np.einsum("deg,eab->dabg", c, c)
    jac = cyc + np.einsum("dabg->dbga", cyc) + np.einsum("dabg->dgab", cyc)
    jmax = np.max(np.abs(jac)) if c.size else 0.0
    if skew > 1e-10 or jmax > 1e-10:
        raise ValueError("symmetry algebra constants must be skew and Jacobi")


@dataclass(frozen=True)
class GroupAction:
    """Infinitesimal symmetry data.

    ``genQ(eta, q)`` is the base generator (length n, dual-safe in q);
    ``genV(eta, q, v)`` is the fiber-linear generator part rho'(eta)v.
    ``algebra_c`` holds structure constants of the symmetry algebra in the
    usual c[g, a, b] layout (zeros for abelian symmetries).
    """

    dim_g: int
    genQ: callable
    genV: callable
    algebra_c: np.ndarray = None

    def __post_init__(self):
        if self.dim_g < 1:
            raise ValueError("need at least a one-parameter symmetry")
        c = self.algebra_c
        c = np.zeros((self.dim_g,) * 3) if c is None else np.asarray(c, dtype=float)
        if c.shape != (self.dim_g,) * 3:
            raise DimensionMismatch("algebra constants have the wrong shape")
        _check_algebra_constants(c)
        object.__setattr__(self, "algebra_c", c)


def noether_current(sys: LPLagrangian, act: GroupAction, s: LPState, eta):
    """J = <dL/dqdot, genQ(eta, q)>; linear in eta."""
    n = sys.n
    grad = np.asarray(_dual.gradient(_scalar_body(sys), _pack(s)), dtype=float)
    etaQ = np.asarray(act.genQ(np.asarray(eta, dtype=float), s.q), dtype=float)
    return float(grad[n : 2 * n] @ etaQ)


def _vertical_generator(sys, act, eta, q, v):
    """rho'(eta)v plus the connection part Gamma(genQ) v."""
    G = np.asarray(eval_map(sys.bundle.Gamma, q), dtype=float)
    etaQ = np.asarray(act.genQ(eta, q), dtype=float)
    gen = np.asarray(act.genV(eta, q, v), dtype=float)
    return gen + np.einsum("iab,i,b->a", G, etaQ, v), etaQ


def noether_drift_residual(sys: LPLagrangian, act: GroupAction, traj: Trajectory, eta):
    """Residual of the current-drift identity at interior grid points.

    residual = dJ/dt  +  <mu, omega(qdot, genQ) + rho'(eta)v + Gamma(genQ)v>

    dJ/dt uses the centered 5-point stencil, so the result has
    len(traj) - 4 entries.  Vanishes (to integrator accuracy) along
    solutions of an invariant Lagrangian.
    """
    N = len(traj)
    if N < 5:
        raise ValueError("trajectory too short for the 5-point stencil")
    t = traj.times
    hs = np.diff(t)
    h = hs[0]
    if np.max(np.abs(hs - h)) > 1e-9 * max(1.0, abs(h)):
        raise ValueError("drift residual needs a uniform time grid")

    eta = np.asarray(eta, dtype=float)
    J = np.array([noether_current(sys, act, s, eta) for s in traj.states])
    out = np.empty(N - 4)
    for i in range(2, N - 2):
        dJdt = (-J[i + 2] + 8 * J[i + 1] - 8 * J[i - 1] + J[i - 2]) / (12 * h)
        s = traj.states[i]
        grad = np.asarray(_dual.gradient(_scalar_body(sys), _pack(s)), dtype=float)
        mu = grad[2 * sys.n :]
        Om = np.asarray(eval_map(sys.bundle.omega, s.q), dtype=float)
        ver2, etaQ = _vertical_generator(sys, act, eta, s.q, s.v)
        om_term = np.einsum("aij,i,j->a", Om, s.qdot, etaQ)
        out[i - 2] = dJdt + float(mu @ (om_term + ver2))
    return out


def invariance_residual(sys: LPLagrangian, act: GroupAction, s: LPState, eta):
    """Derivative of L along the lifted symmetry generator; zero iff invariant.

    The generator moves q by genQ, qdot by the linearized flow of genQ, and
    the fiber coordinates by rho'(eta)v.  (In the covariant split the fiber
    motion reads rho'(eta)v + Gamma(genQ)v, but the horizontal transport
    contributes the compensating -Gamma(genQ)v, so chart coordinates see
    the plain rho' term; the drift identity holds exactly in this pairing.)
    """
    n = sys.n
    eta = np.asarray(eta, dtype=float)
    grad = np.asarray(_dual.gradient(_scalar_body(sys), _pack(s)), dtype=float)
    gen_map = SmoothMap(n, n, lambda qq: act.genQ(eta, qq), out_shape=(n,))
    JQ = np.asarray(jacobian(gen_map, s.q), dtype=float)
    etaQ = np.asarray(act.genQ(eta, s.q), dtype=float)
    genv = np.asarray(act.genV(eta, s.q, s.v), dtype=float)
    return float(
        grad[:n] @ etaQ + grad[n : 2 * n] @ (JQ @ s.qdot) + grad[2 * n :] @ genv
    )


# ---------------------------------------------------------------------------
# serialization


def write_trajectory_csv(path, traj: Trajectory):
    """Write `t,q1..qn,qd1..qdn,v1..vm` rows at full double precision.

    The write is atomic: a temp file in the target directory is renamed
    over the destination.  Output uses LF newlines regardless of platform.
    """
    s0 = traj.states[0]
    n, m = len(s0.q), len(s0.v)
    header = (
        ["t"]
        + [f"q{i + 1}" for i in range(n)]
        + [f"qd{i + 1}" for i in range(n)]
        + [f"v{a + 1}" for a in range(m)]
    )
    dirname = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=dirname, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(",".join(header) + "\n")
            for t, s in zip(traj.times, traj.states):
                row = np.concatenate([[t], s.q, s.qdot, s.v])
                fh.write(",".join(f"{x:.17g}" for x in row) + "\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
