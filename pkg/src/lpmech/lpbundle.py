"""Coordinate charts for bundles TQ + V with a Lie-algebra fiber.

The bundle data over a chart are three coefficient maps:

    Gamma(q)[i, a, b]   coefficient of e_a in the covariant derivative of
                        e_b along the i-th coordinate direction,
    c(q)[g, a, b]       coefficient of e_g in the fiber bracket [e_a, e_b],
    omega(q)[a, i, j]   coefficient of e_a in the two-form on the pair of
                        coordinate directions (i, j).

Derived operators (covariant derivative, curvature, the covariant exterior
derivative of the two-form, the section bracket) and a sampled checker for
the closure conditions that make the section bracket a Lie bracket live here.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ChartExit
from .smoothmap import SmoothMap, eval_map, jacobian

DEFAULT_TOL = 1e-8


@dataclass(frozen=True)
class ChartDomain:
    """A box chart; periodic coordinates identify their interval endpoints."""

    n: int
    bounds: np.ndarray = None
    periodic: np.ndarray = None

    def __post_init__(self):
        b = self.bounds
        if b is None:
            b = np.tile([-1.0, 1.0], (self.n, 1))
        b = np.asarray(b, dtype=float).reshape(self.n, 2)
        p = self.periodic
        if p is None:
            p = np.zeros(self.n, dtype=bool)
        p = np.asarray(p, dtype=bool).reshape(self.n)
        if self.n and np.any(b[:, 1] <= b[:, 0]):
            raise ValueError("each coordinate needs a nonempty interval")
        if np.any(p & ~np.isfinite(b).all(axis=1)):
            raise ValueError("periodic coordinates need finite bounds")
        object.__setattr__(self, "bounds", b)
        object.__setattr__(self, "periodic", p)

    def wrap(self, q):
        """Send periodic coordinates back into their fundamental interval."""
        q = np.array(q, dtype=float)
        for i in range(self.n):
            if self.periodic[i]:
                lo, hi = self.bounds[i]
                q[i] = lo + np.mod(q[i] - lo, hi - lo)
        return q

    def contains(self, q, slack=1e-12):
        q = self.wrap(q)
        for i in range(self.n):
            if self.periodic[i]:
                continue
            lo, hi = self.bounds[i]
            if q[i] < lo - slack or q[i] > hi + slack:
                return False
        return True

    def require_inside(self, q, t=None):
        if not self.contains(q):
            raise ChartExit(f"state left the chart at q={q}", q=q, t=t)

    def sample(self, rng, margin=0.05):
        """Uniform interior point; non-periodic coordinates keep a margin."""
        q = np.empty(self.n)
        for i in range(self.n):
            lo, hi = self.bounds[i]
            if not self.periodic[i]:
                pad = margin * (hi - lo)
                lo, hi = lo + pad, hi - pad
            q[i] = rng.uniform(lo, hi)
        return q


def _zeros_map(in_dim, shape, name):
    size = int(np.prod(shape))
    template = np.zeros(shape)
    template.setflags(write=False)
    return SmoothMap(
        in_dim, size, lambda q, t=template: t, out_shape=tuple(shape), name=name
    )


@dataclass(frozen=True)
class LPBundleChart:
    """Bundle structure data over a chart.

    Any of the three coefficient maps may be passed as ``None`` (zero map) or
    as a constant ndarray of the right shape.
    """

    base: ChartDomain
    m: int
    Gamma: SmoothMap = None
    c: SmoothMap = None
    omega: SmoothMap = None

    def __post_init__(self):
        n, m = self.base.n, self.m
        for attr, shape in (
            ("Gamma", (n, m, m)),
            ("c", (m, m, m)),
            ("omega", (m, n, n)),
        ):
            val = getattr(self, attr)
            if val is None:
                val = _zeros_map(n, shape, attr)
            elif isinstance(val, np.ndarray):
                const = np.array(val, dtype=float).reshape(shape)
                const.setflags(write=False)
                val = SmoothMap(
                    n,
                    int(np.prod(shape)),
                    lambda q, t=const: t,
                    out_shape=shape,
                    name=attr,
                )
            elif val.out_shape != shape or val.in_dim != n:
                raise ValueError(
                    f"{attr} must map R^{n} to shape {shape}, got "
                    f"R^{val.in_dim} to {val.out_shape}"
                )
            object.__setattr__(self, attr, val)

    @property
    def n(self):
        return self.base.n


@dataclass(frozen=True)
class Section:
    """A section of the bundle: tangent part X and fiber part w."""

    X: SmoothMap
    w: SmoothMap

    @staticmethod
    def constant(bundle: LPBundleChart, X0, w0):
        n, m = bundle.n, bundle.m
        X0 = np.array(X0, dtype=float).reshape(n)
        w0 = np.array(w0, dtype=float).reshape(m)
        return Section(
            SmoothMap(n, n, lambda q, v=X0: v, out_shape=(n,), name="X"),
            SmoothMap(n, m, lambda q, v=w0: v, out_shape=(m,), name="w"),
        )


def _fiber_matrix_action(G_i, w):
    # G_i is an (m, m) object array; w may carry duals
    m = G_i.shape[0]
    return np.array([np.dot(G_i[a], w) for a in range(m)], dtype=object)


def covariant_derivative(b: LPBundleChart, X, w: Section, q):
    """(grad_X w)^a = X^i (d_i w^a + Gamma^a_{ib} w^b), evaluated at q.

    Dual-safe: both q and X may carry dual numbers.
    """
    X = np.asarray(X, dtype=object).reshape(b.n)
    q = np.asarray(q, dtype=object).reshape(b.n)
    Jw = jacobian(w.w, q)  # (m, n)
    G = np.asarray(eval_map(b.Gamma, q), dtype=object)
    wv = eval_map(w.w, q)
    out = np.array([np.dot(Jw[a], X) for a in range(b.m)], dtype=object)
    for i in range(b.n):
        out = out + X[i] * _fiber_matrix_action(G[i], wv)
    return out


def curvature(b: LPBundleChart, q):
    """Curvature tensor k[i, j, a, b] of the fiber connection, shape (n,n,m,m).

    k = dGamma skew part plus the commutator of the connection matrices;
    antisymmetric in (i, j).
    """
    n, m = b.n, b.m
    q = np.asarray(q, dtype=float)
    G = np.asarray(eval_map(b.Gamma, q), dtype=float)
    dG = np.asarray(jacobian(b.Gamma, q), dtype=float).reshape(n, m, m, n)
    # dG[j,a,b,i] = d_i Gamma[j,a,b]
    t1 = np.einsum("jabi->ijab", dG)
    t2 = np.einsum("iabj->ijab", dG)
    t3 = np.einsum("iae,jeb->ijab", G, G)
    t4 = np.einsum("jae,ieb->ijab", G, G)
    # grouped so the (i, j) antisymmetry is exact in floating point
    return (t1 - t2) + (t3 - t4)


def ext_cov_derivative_omega(b: LPBundleChart, q):
    """Covariant exterior derivative of the two-form, shape (m, n, n, n).

    T[a, i, j, k] is the cyclic sum over (i, j, k) of
    d_i omega[a, j, k] + Gamma[i, a, b] omega[b, j, k]; coordinate fields
    commute, so no bracket terms appear.
    """
    n, m = b.n, b.m
    q = np.asarray(q, dtype=float)
    G = np.asarray(eval_map(b.Gamma, q), dtype=float)
    Om = np.asarray(eval_map(b.omega, q), dtype=float)
    dOm = np.asarray(jacobian(b.omega, q), dtype=float).reshape(m, n, n, n)
    # dOm[a,j,k,i] = d_i omega[a,j,k]
    term = np.einsum("ajki->aijk", dOm) + np.einsum("iab,bjk->aijk", G, Om)
    return (
        term
        + np.einsum("ajki->aijk", term)
        + np.einsum("akij->aijk", term)
    )


def section_bracket(b: LPBundleChart, Z1: Section, Z2: Section, q):
    """Bracket of two sections at q: (tangent part, fiber part).

    Tangent part is the Jacobi-Lie bracket of the X fields; fiber part is
    grad_{X1} w2 - grad_{X2} w1 - omega(X1, X2) + [w1, w2].  Dual-safe.
    """
    n, m = b.n, b.m
    q = np.asarray(q, dtype=object).reshape(n)
    X1 = eval_map(Z1.X, q)
    X2 = eval_map(Z2.X, q)
    J1 = jacobian(Z1.X, q)
    J2 = jacobian(Z2.X, q)
    base = np.array(
        [np.dot(J2[i], X1) - np.dot(J1[i], X2) for i in range(n)], dtype=object
    )

    fiber = covariant_derivative(b, X1, Z2, q) - covariant_derivative(b, X2, Z1, q)
    # matrices go to object dtype: mixed float-matrix/dual-vector dot is unsafe
    Om = np.asarray(eval_map(b.omega, q), dtype=object)
    for a in range(m):
        fiber[a] = fiber[a] - np.dot(X1, np.dot(Om[a], X2))
    C = np.asarray(eval_map(b.c, q), dtype=object)
    w1 = eval_map(Z1.w, q)
    w2 = eval_map(Z2.w, q)
    for g in range(m):
        fiber[g] = fiber[g] + np.dot(w1, np.dot(C[g], w2))
    return base, fiber


def bracket_section(b: LPBundleChart, Z1: Section, Z2: Section) -> Section:
    """The bracket of two sections, packaged as a section (for nesting)."""

    def x_body(q):
        return section_bracket(b, Z1, Z2, q)[0]

    def w_body(q):
        return section_bracket(b, Z1, Z2, q)[1]

    n, m = b.n, b.m
    return Section(
        SmoothMap(n, n, x_body, out_shape=(n,)),
        SmoothMap(n, m, w_body, out_shape=(m,)),
    )


def jacobi_residual(b: LPBundleChart, Z1, Z2, Z3, q):
    """Norm of the cyclic sum of nested section brackets at q.

    The inner bracket of each cyclic term goes through one fused map, so
    a single jacobian sweep serves both its tangent and fiber parts; the
    outer bracket is then assembled term by term as in section_bracket.
    """
    n, m = b.n, b.m
    qf = np.asarray(q, dtype=float).reshape(n)
    G = np.asarray(eval_map(b.Gamma, qf), dtype=float)
    C = np.asarray(eval_map(b.c, qf), dtype=float)
    Om = np.asarray(eval_map(b.omega, qf), dtype=float)

    base_tot = np.zeros(n)
    fiber_tot = np.zeros(m)
    for A, B_, C_ in ((Z1, Z2, Z3), (Z2, Z3, Z1), (Z3, Z1, Z2)):

        def fused(qq, ZB=B_, ZC=C_):
            bb, ff = section_bracket(b, ZB, ZC, qq)
            out = np.empty(n + m, dtype=object)
            out[:n], out[n:] = bb, ff
            return out

        fm = SmoothMap(n, n + m, fused, out_shape=(n + m,))
        val = np.asarray(eval_map(fm, qf), dtype=float)
        Jin = np.asarray(jacobian(fm, qf), dtype=float)
        Xin, win = val[:n], val[n:]
        JinX, Jinw = Jin[:n], Jin[n:]

        XA = np.asarray(eval_map(A.X, qf), dtype=float)
        wA = np.asarray(eval_map(A.w, qf), dtype=float)
        JAX = np.asarray(jacobian(A.X, qf), dtype=float)
        JAw = np.asarray(jacobian(A.w, qf), dtype=float)

        base_tot += JinX @ XA - JAX @ Xin
        fiber_tot += Jinw @ XA + np.einsum("i,iab,b->a", XA, G, win)
        fiber_tot -= JAw @ Xin + np.einsum("i,iab,b->a", Xin, G, wA)
        fiber_tot -= np.einsum("aij,i,j->a", Om, XA, Xin)
        fiber_tot += np.einsum("gab,a,b->g", C, wA, win)
    return float(np.sqrt(np.sum(base_tot**2) + np.sum(fiber_tot**2)))


@dataclass
class ConditionResult:
    name: str
    max_residual: float
    worst_point: np.ndarray
    scale: float
    passed: bool


@dataclass
class AxiomReport:
    conditions: list
    tol: float
    n_samples: int
    seed: int

    @property
    def passed(self):
        return all(c.passed for c in self.conditions)

    def condition(self, name):
        for c in self.conditions:
            if c.name == name:
                return c
        raise KeyError(name)

    def as_text(self):
        lines = [
            f"closure check: {self.n_samples} samples, seed {self.seed}, tol {self.tol:g}",
            f"{'condition':<24}{'max residual':>14}{'scale':>12}  worst point",
        ]
        for c in self.conditions:
            pt = "[" + ", ".join(f"{v:.4g}" for v in np.atleast_1d(c.worst_point)) + "]"
            lines.append(
                f"{c.name:<24}{c.max_residual:>14.3e}{c.scale:>12.3e}  {pt}"
                + ("" if c.passed else "  FAIL")
            )
        lines.append("result: " + ("pass" if self.passed else "FAIL"))
        return "\n".join(lines)

    def as_dict(self):
        return {
            "tol": self.tol,
            "n_samples": self.n_samples,
            "seed": self.seed,
            "passed": bool(self.passed),
            "conditions": [
                {
                    "name": c.name,
                    "max_residual": float(c.max_residual),
                    "scale": float(c.scale),
                    "worst_point": [float(v) for v in np.atleast_1d(c.worst_point)],
                    "passed": bool(c.passed),
                }
                for c in self.conditions
            ],
        }

    def as_json(self):
        return json.dumps(self.as_dict(), indent=2, sort_keys=True)


def _max_abs(*tensors):
    vals = [np.max(np.abs(t)) if np.size(t) else 0.0 for t in tensors]
    return float(max(vals)) if vals else 0.0


def check_axioms(
    b: LPBundleChart, n_samples: int = 100, seed: int = 0, tol: float = DEFAULT_TOL
) -> AxiomReport:
    """Sampled check of the conditions making the section bracket a Lie bracket.

    Conditions reported:
        c_skew                  fiber bracket antisymmetry
        c_jacobi                fiberwise Jacobi identity
        omega_skew              two-form antisymmetry
        d_two_form_closed       covariant exterior derivative of omega vanishes
        e_bracket_parallel      covariant derivative is a bracket derivation
        f_curvature_coupling    connection curvature equals -c(omega, .)

    Residuals are compared against tol * (1 + scale) with scale the largest
    magnitude among the terms entering each identity.  Deterministic for a
    fixed seed.
    """
    if n_samples < 1:
        raise ValueError("need at least one sample point")
    rng = np.random.default_rng(seed)
    n, m = b.n, b.m
    tracker = {
        name: [0.0, np.zeros(n), 0.0]
        for name in (
            "c_skew",
            "c_jacobi",
            "omega_skew",
            "d_two_form_closed",
            "e_bracket_parallel",
            "f_curvature_coupling",
        )
    }

    def note(name, resid, scale, q):
        rec = tracker[name]
        rec[2] = max(rec[2], scale)
        if resid >= rec[0]:
            rec[0], rec[1] = resid, q.copy()

    for _ in range(n_samples):
        q = b.base.sample(rng)
        C = np.asarray(eval_map(b.c, q), dtype=float)
        G = np.asarray(eval_map(b.Gamma, q), dtype=float)
        Om = np.asarray(eval_map(b.omega, q), dtype=float)

        note("c_skew", _max_abs(C + np.einsum("gab->gba", C)), _max_abs(C), q)
        note("omega_skew", _max_abs(Om + np.einsum("aij->aji", Om)), _max_abs(Om), q)

        cyc = np.einsum("deg,eab->dabg", C, C)
        jac = (
            cyc
            + np.einsum("dabg->dbga", cyc)
            + np.einsum("dabg->dgab", cyc)
        )
        note("c_jacobi", _max_abs(jac), _max_abs(cyc), q)

        dT = ext_cov_derivative_omega(b, q)
        dOm = np.asarray(jacobian(b.omega, q), dtype=float).reshape(m, n, n, n)
        note(
            "d_two_form_closed",
            _max_abs(dT),
            _max_abs(dOm, np.einsum("iab,bjk->aijk", G, Om)),
            q,
        )

        dC = np.asarray(jacobian(b.c, q), dtype=float).reshape(m, m, m, n)
        # dC[g,a,b,i] = d_i c[g,a,b]
        tGc = np.einsum("ige,eab->giab", G, C)
        tcG1 = np.einsum("geb,iea->giab", C, G)
        tcG2 = np.einsum("gae,ieb->giab", C, G)
        eres = np.einsum("gabi->giab", dC) + tGc - tcG1 - tcG2
        note("e_bracket_parallel", _max_abs(eres), _max_abs(dC, tGc, tcG1, tcG2), q)

        k = curvature(b, q)
        rhs = -np.einsum("agb,gij->ijab", C, Om)
        note("f_curvature_coupling", _max_abs(k - rhs), _max_abs(k, rhs), q)

    conditions = [
        ConditionResult(
            name,
            rec[0],
            rec[1],
            rec[2],
            rec[0] <= tol * (1.0 + rec[2]),
        )
        for name, rec in tracker.items()
    ]
    return AxiomReport(conditions, tol, n_samples, seed)
