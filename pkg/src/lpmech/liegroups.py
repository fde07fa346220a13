"""Matrix Lie groups with a fixed algebra basis.

A group is described by its matrix size, a basis of the algebra as matrices,
exp/log maps, and structure constants in the layout c[g, a, b] = coefficient
of basis[g] in [basis[a], basis[b]].  The exponential maps accept dual-number
entries so group-valued expressions can be differentiated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _dual
from .errors import DimensionMismatch, NotSupported


def _obj_matmul(A, B):
    """Matrix product that stays safe when entries are dual numbers."""
    if A.dtype != object and B.dtype != object:
        return A @ B
    n, k = A.shape
    k2, p = B.shape
    out = np.empty((n, p), dtype=object)
    for i in range(n):
        for j in range(p):
            out[i, j] = sum(A[i, r] * B[r, j] for r in range(k))
    return out


@dataclass(frozen=True)
class MatrixLieGroup:
    """A matrix group with chosen algebra basis.

    ``exp_body``/``log_body`` work on coefficient vectors: exp takes algebra
    coefficients to a group matrix, log inverts it near the identity.
    """

    name: str
    mat_dim: int
    basis: np.ndarray  # (dim, mat_dim, mat_dim)
    exp_body: callable
    log_body: callable
    check_body: callable = None

    @property
    def dim(self):
        return self.basis.shape[0]

    def identity(self):
        return np.eye(self.mat_dim)

    def hat(self, xi):
        """Coefficients to algebra matrix: sum_a xi[a] basis[a]."""
        xi = np.asarray(xi)
        if xi.shape != (self.dim,):
            raise DimensionMismatch(
                f"{self.name}: expected {self.dim} coefficients, got {xi.shape}"
            )
        if xi.dtype == object:
            out = np.zeros((self.mat_dim, self.mat_dim), dtype=object)
            for a in range(self.dim):
                out = out + xi[a] * np.asarray(self.basis[a], dtype=object)
            return out
        return np.einsum("a,aij->ij", xi, self.basis)

    def unhat(self, M):
        """Algebra matrix back to coefficients (least squares in the basis).

        Dual-valued matrices keep their dual parts: the solve is linear, so
        it goes through a precomputed pseudo-inverse of the basis.
        """
        M = np.asarray(M)
        flat_basis = self.basis.reshape(self.dim, -1).T
        if M.dtype == object:
            P = np.linalg.pinv(flat_basis)  # (dim, mat_dim^2)
            flat = M.ravel()
            return np.array(
                [np.dot(P[a], flat) for a in range(self.dim)], dtype=object
            )
        coeff, *_ = np.linalg.lstsq(flat_basis, M.ravel(), rcond=None)
        return coeff

    def exp(self, xi):
        """Group element from algebra coefficients; dual entries pass through."""
        xi = np.asarray(xi)
        if xi.shape != (self.dim,):
            raise DimensionMismatch(
                f"{self.name}: expected {self.dim} coefficients, got {xi.shape}"
            )
        return self.exp_body(xi)

    def log(self, g):
        """Algebra coefficients of a group element near the identity."""
        return self.log_body(np.asarray(g, dtype=float))

    def is_element(self, g, tol=1e-8):
        g = np.asarray(g, dtype=float)
        if g.shape != (self.mat_dim, self.mat_dim):
            return False
        if self.check_body is None:
            return True
        return bool(self.check_body(g, tol))

    def inverse(self, g):
        g = np.asarray(g)
        if g.dtype == object:
            raise NotSupported("inverse of dual-valued group elements")
        return np.linalg.inv(g)


def structure_constants(group: MatrixLieGroup, tol=1e-10):
    """c[g, a, b] with [basis[a], basis[b]] = sum_g c[g,a,b] basis[g].

    Raises ValueError when a commutator leaves the basis span by more
    than ``tol``.
    """
    k = group.dim
    flat_basis = group.basis.reshape(k, -1).T  # (mat^2, k)
    c = np.zeros((k, k, k))
    for a in range(k):
        for b in range(k):
            comm = group.basis[a] @ group.basis[b] - group.basis[b] @ group.basis[a]
            coeff, res, *_ = np.linalg.lstsq(flat_basis, comm.ravel(), rcond=None)
            recon = flat_basis @ coeff
            if np.max(np.abs(recon - comm.ravel())) > tol:
                raise ValueError(
                    f"{group.name}: commutator of basis {a},{b} leaves the span"
                )
            c[:, a, b] = coeff
    return c


def ad(group: MatrixLieGroup, xi, eta):
    """Bracket of two algebra coefficient vectors."""
    M = group.hat(xi) @ group.hat(eta) - group.hat(eta) @ group.hat(xi)
    return group.unhat(M)


def Ad(group: MatrixLieGroup, g, xi):
    """Adjoint action of a group element on algebra coefficients."""
    g = np.asarray(g, dtype=float)
    return group.unhat(g @ group.hat(xi) @ np.linalg.inv(g))


def coad(c, xi, mu):
    """Dual pairing transpose of the bracket: out[d] = c[g, b, d] xi[b] mu[g].

    Satisfies <coad(xi, mu), eta> = <mu, [xi, eta]> for all eta.
    """
    return np.einsum("gbd,b,g->d", c, xi, mu)


# ---------------------------------------------------------------------------
# rotation group


def _so3_hat(v):
    dt = object if np.asarray(v).dtype == object else float
    out = np.zeros((3, 3), dtype=dt)
    out[0, 1], out[0, 2] = -v[2], v[1]
    out[1, 0], out[1, 2] = v[2], -v[0]
    out[2, 0], out[2, 1] = -v[1], v[0]
    return out


def _so3_exp(xi):
    th2 = xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]
    K = _so3_hat(xi)
    K2 = _obj_matmul(np.atleast_2d(K), np.atleast_2d(K))
    if _dual.real_part(th2) < 1e-8:
        # series in theta^2; keeps full accuracy (and dual parts) near zero
        A = 1.0 - th2 / 6.0 + th2 * th2 / 120.0
        B = 0.5 - th2 / 24.0 + th2 * th2 / 720.0
    else:
        th = _dual.sqrt(th2)
        A = _dual.sin(th) / th
        B = (1.0 - _dual.cos(th)) / th2
    eye = np.eye(3, dtype=object) if K.dtype == object else np.eye(3)
    return eye + A * K + B * K2


def _so3_log(R):
    tr = np.trace(R)
    cos_th = min(1.0, max(-1.0, (tr - 1.0) / 2.0))
    th = np.arccos(cos_th)
    w = 0.5 * np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    if th < 1e-8:
        return w  # sin(th)/th ~ 1 to full precision here
    if np.pi - th < 1e-6:
        # near the injectivity boundary R + I ~ 2 n n^T, so any column of
        # R + I with a large diagonal entry is parallel to the axis
        B = R + np.eye(3)
        j = int(np.argmax(np.diag(B)))
        axis = B[:, j]
        nrm = np.linalg.norm(axis)
        if nrm < 1e-12:
            raise ValueError("rotation by pi with ambiguous axis")
        axis = axis / nrm
        if np.dot(axis, w) < 0:
            axis = -axis
        return th * axis
    return th / np.sin(th) * w


def _so3_check(g, tol):
    return (
        np.max(np.abs(g.T @ g - np.eye(3))) <= tol
        and abs(np.linalg.det(g) - 1.0) <= tol
    )


def so3():
    basis = np.array([_so3_hat(e) for e in np.eye(3)])
    return MatrixLieGroup("so3", 3, basis, _so3_exp, _so3_log, _so3_check)


# ---------------------------------------------------------------------------
# Heisenberg family

# 4x4 upper unitriangular matrices carrying coordinates (x, y, z) in slots
# (0,1) = coupling*x, (1,2) = y, (0,2) = z (plus the exp correction), and a
# spare decoupled slot (0,3) = x that keeps the representation faithful when
# coupling = 0.  The only bracket is [e_x, e_y] = coupling * e_z, so the
# coupling knob interpolates between the Heisenberg group and plain R^3.


def heisenberg3(coupling=1.0):
    s = float(coupling)

    def E(i, j, v=1.0):
        M = np.zeros((4, 4))
        M[i, j] = v
        return M

    basis = np.array([E(0, 1, s) + E(0, 3), E(1, 2), E(0, 2)])

    def exp_body(xi):
        x, y, z = xi[0], xi[1], xi[2]
        dt = object if np.asarray(xi).dtype == object else float
        g = np.eye(4, dtype=dt)
        g[0, 1] = s * x
        g[1, 2] = y
        g[0, 2] = z + s * x * y / 2.0
        g[0, 3] = x
        return g

    def log_body(g):
        x = g[0, 3]
        y = g[1, 2]
        z = g[0, 2] - s * x * y / 2.0
        return np.array([x, y, z])

    def check_body(g, tol):
        recon = exp_body(log_body(g))
        return np.max(np.abs(g - recon)) <= tol

    return MatrixLieGroup(
        f"heisenberg3(c={s:g})", 4, basis, exp_body, log_body, check_body
    )


# ---------------------------------------------------------------------------
# translations


def abelian(k):
    """R^k as (k+1)x(k+1) upper unitriangular translation matrices."""
    basis = np.zeros((k, k + 1, k + 1))
    for a in range(k):
        basis[a, a, k] = 1.0

    def exp_body(xi):
        dt = object if np.asarray(xi).dtype == object else float
        g = np.eye(k + 1, dtype=dt)
        for a in range(k):
            g[a, k] = xi[a]
        return g

    def log_body(g):
        return np.array([g[a, k] for a in range(k)])

    def check_body(g, tol):
        expect = np.eye(k + 1)
        mask = np.ones((k + 1, k + 1), dtype=bool)
        mask[:k, k] = False
        return np.max(np.abs((g - expect)[mask])) <= tol

    return MatrixLieGroup(f"abelian({k})", k + 1, basis, exp_body, log_body, check_body)
