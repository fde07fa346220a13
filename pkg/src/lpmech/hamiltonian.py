"""Dual-side mechanics: Poisson bracket, Hamiltonian flow, Legendre maps.

States live in dual coordinates (q, p, nu) with p the base covector and nu
the fiber covector.  The bracket uses a connection-corrected base
derivative; its conventions are pinned by the affine-function check against
the section bracket, not chosen freely.

Everything here is written with scalar loops rather than float-only einsum
because the bracket must stay differentiable: Jacobi-identity tests push
dual numbers through nested bracket evaluations.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _dual
from .errors import ChartExit, DimensionMismatch, NoConvergence, SingularHessian
from .lpbundle import LPBundleChart, Section, section_bracket
from .smoothmap import SmoothMap, eval_map
from .dynamics import HESSIAN_COND_LIMIT, LPLagrangian, LPState, _pack, _scalar_body

import os
import tempfile


@dataclass(frozen=True)
class HPState:
    q: np.ndarray
    p: np.ndarray
    nu: np.ndarray

    def __post_init__(self):
        for name in ("q", "p", "nu"):
            object.__setattr__(
                self, name, np.array(getattr(self, name), dtype=float).reshape(-1)
            )
        if self.q.shape != self.p.shape:
            raise DimensionMismatch("q and p must have the same length")


@dataclass(frozen=True)
class DualObservable:
    """A scalar function of (q, p, nu), packed as one vector of length 2n+m."""

    f: SmoothMap

    def __post_init__(self):
        if self.f.out_dim != 1:
            raise DimensionMismatch("observables are scalar valued")

    @staticmethod
    def from_callable(n, m, fn, name=""):
        def body(x):
            return fn(x[:n], x[n : 2 * n], x[2 * n :])

        return DualObservable(SmoothMap(2 * n + m, 1, body, name=name))


@dataclass(frozen=True)
class Hamiltonian:
    bundle: LPBundleChart
    H: SmoothMap
    name: str = ""

    def __post_init__(self):
        n, m = self.bundle.n, self.bundle.m
        if self.H.in_dim != 2 * n + m or self.H.out_dim != 1:
            raise DimensionMismatch(
                f"Hamiltonian must map R^{2 * n + m} to a scalar"
            )

    @staticmethod
    def from_callable(bundle, fn, name=""):
        n = bundle.n

        def body(x):
            return fn(x[:n], x[n : 2 * n], x[2 * n :])

        return Hamiltonian(
            bundle, SmoothMap(2 * n + bundle.m, 1, body, name=name), name
        )


def _obs_map(obj):
    if isinstance(obj, DualObservable):
        return obj.f
    if isinstance(obj, Hamiltonian):
        return obj.H
    if isinstance(obj, SmoothMap):
        return obj
    raise TypeError(f"not an observable: {obj!r}")


def _pack_hp(s: HPState):
    return np.concatenate([s.q, s.p, s.nu])


def _scalar_of(fm: SmoothMap):
    def f(x):
        return eval_map(fm, x).reshape(-1)[0]

    return f


def _grad(fm: SmoothMap, x):
    return _dual.gradient(_scalar_of(fm), x)


def _real_vec(x):
    return np.array([_dual.real_part(e) for e in np.asarray(x).reshape(-1)])


def _dot(a, b):
    out = 0.0
    for i in range(len(a)):
        out = out + a[i] * b[i]
    return out


def _check_obs_dims(b, *obs):
    d = 2 * b.n + b.m
    for fm in obs:
        if fm.in_dim != d:
            raise DimensionMismatch(
                f"observable takes R^{fm.in_dim}, chart needs R^{d}"
            )


def poisson_bracket(b: LPBundleChart, f, g, s) -> float:
    """{f, g} at the dual point s; antisymmetric, connection-corrected.

    Accepts HPState or a packed (q, p, nu) vector, which may carry duals;
    the result is then a dual, enabling nested brackets.
    """
    fm, gm = _obs_map(f), _obs_map(g)
    _check_obs_dims(b, fm, gm)
    n, m = b.n, b.m
    x = _pack_hp(s) if isinstance(s, HPState) else np.asarray(s).reshape(-1)
    q, nu = x[:n], x[2 * n :]
    b.base.require_inside(_real_vec(q))

    gf = _grad(fm, x)
    gg = _grad(gm, x)
    G = eval_map(b.Gamma, q)
    C = eval_map(b.c, q)
    Om = eval_map(b.omega, q)

    def cov_q(grad):
        out = []
        for i in range(n):
            val = grad[i]
            for bb in range(m):
                for a in range(m):
                    val = val + G[i, bb, a] * nu[bb] * grad[2 * n + a]
            out.append(val)
        return out

    fq, gq = cov_q(gf), cov_q(gg)
    fp, gp = gf[n : 2 * n], gg[n : 2 * n]
    fnu, gnu = gf[2 * n :], gg[2 * n :]

    # pair the skew-tensor contractions so {f, f} cancels term by term
    total = 0.0
    for i in range(n):
        total = total + (fq[i] * gp[i] - gq[i] * fp[i])
    for a in range(m):
        for i in range(n):
            for j in range(i + 1, n):
                total = total + nu[a] * Om[a, i, j] * (
                    fp[i] * gp[j] - fp[j] * gp[i]
                )
    for g_ in range(m):
        for a in range(m):
            for bb in range(a + 1, m):
                total = total + nu[g_] * C[g_, a, bb] * (
                    gnu[a] * fnu[bb] - gnu[bb] * fnu[a]
                )
    return total if isinstance(total, _dual.Dual) else float(total)


def _affine_observable(b, Z: Section):
    n, m = b.n, b.m

    def body(x):
        q = x[:n]
        Xq = eval_map(Z.X, q).reshape(-1)
        wq = eval_map(Z.w, q).reshape(-1)
        return _dot(x[n : 2 * n], Xq) + _dot(x[2 * n :], wq)

    return DualObservable(SmoothMap(2 * n + m, 1, body))


def affine_bracket_check(b: LPBundleChart, Z1: Section, Z2: Section, s: HPState):
    """|{P(Z1), P(Z2)} + P([Z1, Z2])| at s, with P(X+w) = <p, X> + <nu, w>.

    Zero for the implemented conventions; any sign flip in the bracket or
    the section bracket shows up here as an O(1) residual.
    """
    lhs = poisson_bracket(b, _affine_observable(b, Z1), _affine_observable(b, Z2), s)
    base, fiber = section_bracket(b, Z1, Z2, s.q)
    rhs = float(s.p @ np.asarray(base, dtype=float)) + float(
        s.nu @ np.asarray(fiber, dtype=float)
    )
    return abs(lhs + rhs)


def hamiltonian_vector_field(b: LPBundleChart, H, s):
    """(qdot, pdot, nudot) of the bracket flow of H at s.

    Satisfies df/dt = {f, H} for every observable f; that identity is the
    convention test.  Accepts packed dual input like poisson_bracket.
    """
    fm = _obs_map(H)
    _check_obs_dims(b, fm)
    n, m = b.n, b.m
    x = _pack_hp(s) if isinstance(s, HPState) else np.asarray(s).reshape(-1)
    q, nu = x[:n], x[2 * n :]
    b.base.require_inside(_real_vec(q))

    grad = _grad(fm, x)
    G = eval_map(b.Gamma, q)
    C = eval_map(b.c, q)
    Om = eval_map(b.omega, q)
    hq, hp, hnu = grad[:n], grad[n : 2 * n], grad[2 * n :]

    qdot = list(hp)
    pdot = []
    for i in range(n):
        val = -hq[i]
        for bb in range(m):
            for a in range(m):
                val = val - G[i, bb, a] * nu[bb] * hnu[a]
        for a in range(m):
            for j in range(n):
                val = val + nu[a] * Om[a, i, j] * qdot[j]
        pdot.append(val)
    nudot = []
    for a in range(m):
        val = 0.0
        for g_ in range(m):
            for bb in range(m):
                val = val + C[g_, bb, a] * hnu[bb] * nu[g_]
        for i in range(n):
            for bb in range(m):
                val = val + G[i, bb, a] * qdot[i] * nu[bb]
        nudot.append(val)

    if any(_dual.contains_dual(np.asarray(z, dtype=object)) for z in (qdot, pdot, nudot)):
        conv = lambda z: np.asarray(z, dtype=object)
    else:
        conv = lambda z: np.asarray(z, dtype=float)
    return conv(qdot), conv(pdot), conv(nudot)


@dataclass(frozen=True)
class HPTrajectory:
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

    def p_array(self):
        return np.array([s.p for s in self.states])

    def nu_array(self):
        return np.array([s.nu for s in self.states])


def integrate_hp(b: LPBundleChart, H, s0: HPState, t0, t1, h, method="rk4"):
    """Fixed-step integration of the dual-side equations on (q, p, nu)."""
    if method not in ("rk4", "euler"):
        raise ValueError(f"unknown method {method!r}")
    if h <= 0:
        raise ValueError("step size must be positive")
    span = float(t1) - float(t0)
    steps = int(round(span / h))
    if steps < 1 or abs(steps * h - span) > 1e-9 * max(1.0, abs(span)):
        raise ValueError("time span must be a whole number of steps")

    n, m = b.n, b.m

    def ydot(y):
        st = HPState(y[:n], y[n : 2 * n], y[2 * n :])
        qd, pd, nd = hamiltonian_vector_field(b, H, st)
        return np.concatenate(
            [np.asarray(qd, float), np.asarray(pd, float), np.asarray(nd, float)]
        )

    q0 = b.base.wrap(np.asarray(s0.q, dtype=float))
    b.base.require_inside(q0, t=float(t0))
    y = np.concatenate([q0, s0.p, s0.nu])
    times = float(t0) + h * np.arange(steps + 1)
    states = [HPState(y[:n], y[n : 2 * n], y[2 * n :])]

    for k in range(steps):
        if method == "rk4":
            k1 = ydot(y)
            k2 = ydot(y + 0.5 * h * k1)
            k3 = ydot(y + 0.5 * h * k2)
            k4 = ydot(y + h * k3)
            y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        else:
            y = y + h * ydot(y)
        y[:n] = b.base.wrap(y[:n])
        b.base.require_inside(y[:n], t=float(times[k + 1]))
        states.append(HPState(y[:n], y[n : 2 * n], y[2 * n :]))

    return HPTrajectory(
        times, states, {"integrator": method, "h": float(h), "seed": None}
    )


# ---------------------------------------------------------------------------
# Legendre correspondence


def legendre(sys: LPLagrangian, s: LPState) -> HPState:
    """Velocity state to dual state: p = dL/dqdot, nu = dL/dv."""
    n = sys.n
    grad = np.asarray(_dual.gradient(_scalar_body(sys), _pack(s)), dtype=float)
    return HPState(s.q, grad[n : 2 * n], grad[2 * n :])


def inverse_legendre(sys: LPLagrangian, hs: HPState, guess: LPState, tol=1e-12):
    """Newton-solve the velocity state mapping to hs under legendre.

    The iteration runs on (qdot, v) at fixed q = hs.q, using the AD Hessian
    of L as the Jacobian.  Raises NoConvergence after 50 steps and
    SingularHessian if the Jacobian degenerates along the way.
    """
    n, m = sys.n, sys.m
    target = np.concatenate([hs.p, hs.nu])
    y = np.concatenate([guess.qdot, guess.v])
    f = _scalar_body(sys)
    for _ in range(50):
        x = np.concatenate([hs.q, y])
        _, grad, H = _dual.grad_hess(f, x)
        resid = grad[n:] - target
        if np.linalg.norm(resid) <= tol:
            return LPState(hs.q, y[:n], y[n:])
        M = H[n:, n:]
        cond = np.linalg.cond(M) if M.size else 0.0
        if cond > HESSIAN_COND_LIMIT:
            raise SingularHessian(
                f"velocity-block Hessian condition {cond:.3e} exceeds "
                f"{HESSIAN_COND_LIMIT:.0e}"
            )
        y = y - np.linalg.solve(M, resid)
    raise NoConvergence("Newton iteration did not reach tolerance in 50 steps")


def hamiltonian_from_lagrangian(sys: LPLagrangian, hs: HPState, guess: LPState):
    """H(q, p, nu) = <p, qdot> + <nu, v> - L at the inverse-Legendre point."""
    s = inverse_legendre(sys, hs, guess)
    lval = float(eval_map(sys.L, _pack(s)).reshape(-1)[0])
    return float(hs.p @ s.qdot + hs.nu @ s.v - lval)


def write_hp_trajectory_csv(path, traj: HPTrajectory):
    """Write `t,q1..qn,p1..pn,nu1..num` rows at full double precision."""
    s0 = traj.states[0]
    n, m = len(s0.q), len(s0.nu)
    header = (
        ["t"]
        + [f"q{i + 1}" for i in range(n)]
        + [f"p{i + 1}" for i in range(n)]
        + [f"nu{a + 1}" for a in range(m)]
    )
    dirname = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=dirname, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(",".join(header) + "\n")
            for t, s in zip(traj.times, traj.states):
                row = np.concatenate([[t], s.q, s.p, s.nu])
                fh.write(",".join(f"{x:.17g}" for x in row) + "\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
