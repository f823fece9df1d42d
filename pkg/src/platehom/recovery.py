"""Recovery deformations for the bending limit and their scaled 3D energies.

Builds thin-plate deformations around a closed-form isometric immersion of
the unit square, augmented by a linearized displacement and oscillating
correctors locked to the material period eps = h^(2/3):

    u_h(x) = u + h x3 n + h (V + h x3 mu_V)
             - eps^2 n phi(x', x'/eps)
             + h eps^2 x3 R (grad_x phi + eps^{-1} grad_y phi, 0)
             + h eps R (zeta, 0)
             + h^2 R int_{-1/2}^{x3} gbar(x', t, x'/eps) dt

All gradients are evaluated in closed form term by term (finite differences
at the eps oscillation scale would swamp the h^2 energy).  The scaled energy
uses the frame-indifferent density W(x3, y, F) = Q(x3, y, (F^T F - I)/2),
which has an exact quadratic expansion at the identity by construction; its
non-degeneracy away from rotations holds only near SO(3), which is where the
recovery sequence lives at these h.

The period is snapped to eps = 1/k so the in-plane quadrature (composite
Gauss per eps cell) is commensurate with the oscillation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from ._kernels import green_strain_voigt, quadform_energy
from .material import MaterialField
from .spectral import int_frequencies

TWO_PI = 2.0 * np.pi


class QuadratureResolutionError(ValueError):
    """In-plane quadrature too coarse for the oscillation frequencies."""


# ---------------------------------------------------------------------------
# closed-form building blocks
# ---------------------------------------------------------------------------

class Isometry:
    """Closed-form isometric immersion of S = (0,1)^2 with frame data.

    kind 'flat' or 'cylinder'; for the cylinder of radius r the mid-surface
    is rolled in the x1 direction and the curvature tensor is diag(1/r, 0)
    under the normal convention n = d1 u x d2 u (verified by tests, not
    assumed).
    """

    def __init__(self, kind: str, radius: float | None = None):
        if kind not in ("flat", "cylinder"):
            raise ValueError(f"unknown isometry kind {kind!r}")
        if kind == "cylinder":
            if radius is None or radius <= 0:
                raise ValueError("cylinder needs a positive radius")
        self.kind = kind
        self.radius = float(radius) if kind == "cylinder" else None

    def u(self, xp):
        x1, x2 = xp[..., 0], xp[..., 1]
        out = np.zeros(xp.shape[:-1] + (3,))
        if self.kind == "flat":
            out[..., 0] = x1
            out[..., 1] = x2
        else:
            r = self.radius
            out[..., 0] = r * np.sin(x1 / r)
            out[..., 1] = x2
            out[..., 2] = r * np.cos(x1 / r)
        return out

    def du(self, xp):
        out = np.zeros(xp.shape[:-1] + (3, 2))
        if self.kind == "flat":
            out[..., 0, 0] = 1.0
            out[..., 1, 1] = 1.0
        else:
            r = self.radius
            s, c = np.sin(xp[..., 0] / r), np.cos(xp[..., 0] / r)
            out[..., 0, 0] = c
            out[..., 2, 0] = -s
            out[..., 1, 1] = 1.0
        return out

    def d2u(self, xp):
        out = np.zeros(xp.shape[:-1] + (3, 2, 2))
        if self.kind == "cylinder":
            r = self.radius
            s, c = np.sin(xp[..., 0] / r), np.cos(xp[..., 0] / r)
            out[..., 0, 0, 0] = -s / r
            out[..., 2, 0, 0] = -c / r
        return out

    def normal(self, xp):
        out = np.zeros(xp.shape[:-1] + (3,))
        if self.kind == "flat":
            out[..., 2] = 1.0
        else:
            r = self.radius
            out[..., 0] = np.sin(xp[..., 0] / r)
            out[..., 2] = np.cos(xp[..., 0] / r)
        return out

    def dnormal(self, xp):
        out = np.zeros(xp.shape[:-1] + (3, 2))
        if self.kind == "cylinder":
            r = self.radius
            out[..., 0, 0] = np.cos(xp[..., 0] / r) / r
            out[..., 2, 0] = -np.sin(xp[..., 0] / r) / r
        return out

    def curvature(self, xp):
        """Second fundamental form, entries -d_a d_b u . n."""
        out = np.zeros(xp.shape[:-1] + (2, 2))
        if self.kind == "cylinder":
            out[..., 0, 0] = 1.0 / self.radius
        return out

    def frame(self, xp):
        out = np.empty(xp.shape[:-1] + (3, 3))
        out[..., :, :2] = self.du(xp)
        out[..., :, 2] = self.normal(xp)
        return out

    def dframe(self, xp):
        out = np.empty(xp.shape[:-1] + (3, 3, 2))
        out[..., :, :2, :] = self.d2u(xp)
        out[..., :, 2, :] = self.dnormal(xp)
        return out

    def isometry_residual(self, xp):
        du = self.du(xp)
        gram = np.einsum("...ia,...ib->...ab", du, du)
        return float(np.abs(gram - np.eye(2)).max())


def build_isometry(kind: str, radius: float | None = None) -> Isometry:
    """Closed-form isometry; 'flat' or 'cylinder' (any radius > 0)."""
    return Isometry(kind, radius)


class TrigPoly:
    """Product-form trigonometric polynomial c * T1(w1 s1 + p1) * T2(w2 s2 + p2)
    summed over terms, with analytic derivatives up to second order.

    Used both for macroscopic factors on S (frequencies in multiples of pi)
    and for cell functions on the torus (multiples of 2 pi).
    """

    def __init__(self, terms, base=0.0):
        # terms: list of (c, w1, kind1, p1, w2, kind2, p2), kind in {"cos","sin"}
        self.terms = list(terms)
        self.base = float(base)

    @classmethod
    def constant(cls, value):
        return cls([], base=value)

    @staticmethod
    def _f(kind, arg, order):
        if kind == "cos":
            return (np.cos(arg), -np.sin(arg), -np.cos(arg))[order]
        return (np.sin(arg), np.cos(arg), -np.sin(arg))[order]

    def _accum(self, s1, s2, o1, o2):
        out = np.zeros(np.broadcast(s1, s2).shape)
        for (c, w1, k1, p1, w2, k2, p2) in self.terms:
            f1 = self._f(k1, w1 * s1 + p1, o1) * w1 ** o1
            f2 = self._f(k2, w2 * s2 + p2, o2) * w2 ** o2
            out += c * f1 * f2
        if o1 == 0 and o2 == 0:
            out += self.base
        return out

    def val(self, s):
        return self._accum(s[..., 0], s[..., 1], 0, 0)

    def grad(self, s):
        g = np.empty(s.shape)
        g[..., 0] = self._accum(s[..., 0], s[..., 1], 1, 0)
        g[..., 1] = self._accum(s[..., 0], s[..., 1], 0, 1)
        return g

    def hess(self, s):
        h = np.empty(s.shape[:-1] + (2, 2))
        h[..., 0, 0] = self._accum(s[..., 0], s[..., 1], 2, 0)
        h[..., 0, 1] = h[..., 1, 0] = self._accum(s[..., 0], s[..., 1], 1, 1)
        h[..., 1, 1] = self._accum(s[..., 0], s[..., 1], 0, 2)
        return h

    @property
    def max_frequency(self):
        """Largest oscillation count per unit length across terms."""
        if not self.terms:
            return 0.0
        return max(max(abs(w1), abs(w2)) for (_, w1, _, _, w2, _, _) in self.terms) / TWO_PI


def cell_harmonic(coef, k1, k2, kind1="sin", kind2="cos", phase1=0.0, phase2=0.0):
    """Mean-zero torus harmonic coef * T1(2 pi k1 y1 + p1) * T2(2 pi k2 y2 + p2)."""
    if (k1 == 0 and kind1 == "cos" and phase1 == 0.0
            and k2 == 0 and kind2 == "cos" and phase2 == 0.0):
        raise ValueError("constant cell term violates the zero-mean requirement")
    return TrigPoly([(coef, TWO_PI * k1, kind1, phase1, TWO_PI * k2, kind2, phase2)])


def macro_harmonic(coef, k1, k2, kind1="sin", kind2="sin"):
    """Smooth macroscopic factor coef * T1(pi k1 x1) * T2(pi k2 x2) on S."""
    return TrigPoly([(coef, np.pi * k1, kind1, 0.0, np.pi * k2, kind2, 0.0)])


class TwoScaleScalar:
    """Separable field  macro(x') * cell(x'/eps)  with analytic derivatives."""

    def __init__(self, macro: TrigPoly | None, cell: TrigPoly):
        self.macro = macro if macro is not None else TrigPoly.constant(1.0)
        self.cell = cell

    @property
    def max_cell_frequency(self):
        return self.cell.max_frequency


@dataclass
class ThicknessProfile:
    """Thickness factor p(x3) with the antiderivative from -1/2."""

    kind: str = "const"
    coef: float = 1.0

    def val(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "const":
            return self.coef * np.ones_like(t)
        if self.kind == "linear":
            return self.coef * t
        if self.kind == "cos":
            return self.coef * np.cos(TWO_PI * t)
        raise ValueError(f"unknown profile kind {self.kind!r}")

    def integral(self, t):
        """int_{-1/2}^{t} p."""
        t = np.asarray(t, dtype=float)
        if self.kind == "const":
            return self.coef * (t + 0.5)
        if self.kind == "linear":
            return self.coef * 0.5 * (t ** 2 - 0.25)
        if self.kind == "cos":
            return self.coef * np.sin(TWO_PI * t) / TWO_PI
        raise ValueError(f"unknown profile kind {self.kind!r}")

    @property
    def mean(self):
        return float(self.integral(0.5))


class VectorDisplacement:
    """Smooth displacement V : S -> R^3 with analytic first and second
    derivatives; components are trigonometric polynomials."""

    def __init__(self, components):
        if len(components) != 3:
            raise ValueError("need three components")
        self.components = [c if c is not None else TrigPoly.constant(0.0)
                           for c in components]

    @classmethod
    def zero(cls):
        return cls([None, None, None])

    def val(self, xp):
        return np.stack([c.val(xp) for c in self.components], axis=-1)

    def grad(self, xp):
        return np.stack([c.grad(xp) for c in self.components], axis=-2)

    def hess(self, xp):
        return np.stack([c.hess(xp) for c in self.components], axis=-3)


@dataclass
class RecoveryAnsatz:
    """Isometry, displacement and correctors defining the recovery family.

    zeta: two in-plane corrector components; phi: normal-direction corrector;
    gbar: three shear/thickness corrector components, each a separable
    two-scale field with a thickness profile.  The product of each gbar cell
    mean and profile mean must vanish (joint zero mean over thickness times
    cell).
    """

    iso: Isometry
    v: VectorDisplacement = dc_field(default_factory=VectorDisplacement.zero)
    zeta: tuple | None = None
    phi: TwoScaleScalar | None = None
    gbar: tuple | None = None  # three (TwoScaleScalar, ThicknessProfile) pairs

    def __post_init__(self):
        if self.gbar is not None:
            for scalar, profile in self.gbar:
                cell_mean = scalar.cell.base
                if abs(cell_mean * profile.mean) > 1e-13:
                    raise ValueError("gbar must have zero mean over thickness x cell")

    @property
    def max_cell_frequency(self):
        freqs = [0.0]
        if self.phi is not None:
            freqs.append(self.phi.max_cell_frequency)
        if self.zeta is not None:
            freqs.extend(z.max_cell_frequency for z in self.zeta)
        if self.gbar is not None:
            freqs.extend(s.max_cell_frequency for s, _ in self.gbar)
        return max(freqs)

    # -- derived macroscopic fields ----------------------------------------
    def mu_v(self, xp):
        """In-plane drift (I - n x n)(d1 V x d2 u + d1 u x d2 V)."""
        du = self.iso.du(xp)
        dv = self.v.grad(xp)
        n = self.iso.normal(xp)
        w = (np.cross(dv[..., 0], du[..., 1]) + np.cross(du[..., 0], dv[..., 1]))
        return w - n * np.einsum("...i,...i->...", n, w)[..., None]

    def dmu_v(self, xp):
        du = self.iso.du(xp)
        d2u = self.iso.d2u(xp)
        dv = self.v.grad(xp)
        d2v = self.v.hess(xp)
        n = self.iso.normal(xp)
        dn = self.iso.dnormal(xp)
        w = (np.cross(dv[..., 0], du[..., 1]) + np.cross(du[..., 0], dv[..., 1]))
        out = np.empty(xp.shape[:-1] + (3, 2))
        for b in range(2):
            dwb = (np.cross(d2v[..., :, 0, b], du[..., 1])
                   + np.cross(dv[..., 0], d2u[..., :, 1, b])
                   + np.cross(d2u[..., :, 0, b], dv[..., 1])
                   + np.cross(du[..., 0], d2v[..., :, 1, b]))
            n_dwb = np.einsum("...i,...i->...", n, dwb)
            dn_w = np.einsum("...i,...i->...", dn[..., b], w)
            out[..., b] = (dwb - n * n_dwb[..., None]
                           - dn[..., b] * np.einsum("...i,...i->...", n, w)[..., None]
                           - n * dn_w[..., None])
        return out

    def q_v(self, xp):
        """sym((grad u)^T grad V), the membrane strain of the displacement."""
        du = self.iso.du(xp)
        dv = self.v.grad(xp)
        m = np.einsum("...ia,...ib->...ab", du, dv)
        return 0.5 * (m + np.swapaxes(m, -1, -2))

    def coupling_residual(self, xp):
        """max |n . grad V + mu_v . grad u|; an identity of the construction."""
        dv = self.v.grad(xp)
        du = self.iso.du(xp)
        n = self.iso.normal(xp)
        mu = self.mu_v(xp)
        res = (np.einsum("...i,...ia->...a", n, dv)
               + np.einsum("...i,...ia->...a", mu, du))
        return float(np.abs(res).max())


# ---------------------------------------------------------------------------
# recovery sampler with exact scaled gradients
# ---------------------------------------------------------------------------

def snap_h(k: int) -> float:
    """Thickness for an integer period count: eps = 1/k, h = eps^(3/2)."""
    if k < 2:
        raise ValueError("need at least two material periods across S")
    return float(k) ** -1.5


class RecoverySampler:
    """Evaluates the recovery deformation and its exact scaled gradient."""

    def __init__(self, ansatz: RecoveryAnsatz, h: float):
        if not 0.0 < h < 1.0:
            raise ValueError("h must lie in (0, 1)")
        eps = h ** (2.0 / 3.0)
        k = 1.0 / eps
        if abs(k - round(k)) > 1e-8 * k:
            raise ValueError(
                f"eps = h^(2/3) = {eps!r} is not a reciprocal integer; "
                "choose h = k**-1.5 (snap_h)")
        self.ansatz = ansatz
        self.h = float(h)
        self.eps = float(eps)
        self.k = int(round(k))

    # All evaluations take in-plane points xp of shape (p, 2) and thickness
    # points x3 of shape (t,); results are thickness-major.

    def _macro_data(self, xp):
        a = self.ansatz
        iso = a.iso
        data = {
            "u": iso.u(xp), "du": iso.du(xp), "n": iso.normal(xp),
            "dn": iso.dnormal(xp), "r": iso.frame(xp), "dr": iso.dframe(xp),
            "v": a.v.val(xp), "dv": a.v.grad(xp),
            "mu": a.mu_v(xp), "dmu": a.dmu_v(xp),
        }
        return data

    def _phi_data(self, xp):
        phi = self.ansatz.phi
        if phi is None:
            return None
        y = xp / self.eps
        return {
            "m": phi.macro.val(xp), "m1": phi.macro.grad(xp),
            "m2": phi.macro.hess(xp),
            "c": phi.cell.val(y), "cy": phi.cell.grad(y),
            "cyy": phi.cell.hess(y),
        }

    def _zeta_data(self, xp):
        zeta = self.ansatz.zeta
        if zeta is None:
            return None
        y = xp / self.eps
        return [{"m": z.macro.val(xp), "m1": z.macro.grad(xp),
                 "c": z.cell.val(y), "cy": z.cell.grad(y)} for z in zeta]

    def _gbar_data(self, xp):
        gbar = self.ansatz.gbar
        if gbar is None:
            return None
        y = xp / self.eps
        return [{"m": s.macro.val(xp), "m1": s.macro.grad(xp),
                 "c": s.cell.val(y), "cy": s.cell.grad(y), "prof": prof}
                for s, prof in gbar]

    def deformation(self, xp, x3):
        """u_h at the tensor grid; shape (len(x3), len(xp), 3)."""
        h, eps = self.h, self.eps
        md = self._macro_data(xp)
        pd = self._phi_data(xp)
        zd = self._zeta_data(xp)
        gd = self._gbar_data(xp)
        x3 = np.asarray(x3, dtype=float)[:, None, None]

        out = (md["u"] + h * md["v"])[None] + h * x3 * (md["n"] + h * md["mu"])[None]
        if pd is not None:
            phi_val = pd["m"] * pd["c"]
            d_slow = pd["m1"] * pd["c"][..., None]
            d_fast = pd["m"][..., None] * pd["cy"] / eps
            p_vec = np.zeros(xp.shape[:-1] + (3,))
            p_vec[..., :2] = d_slow + d_fast
            out = out - (eps ** 2) * md["n"][None] * phi_val[None, :, None]
            out = out + h * eps ** 2 * x3 * np.einsum("...ij,...j->...i",
                                                      md["r"], p_vec)[None]
        if zd is not None:
            z_vec = np.zeros(xp.shape[:-1] + (3,))
            z_vec[..., 0] = zd[0]["m"] * zd[0]["c"]
            z_vec[..., 1] = zd[1]["m"] * zd[1]["c"]
            out = out + h * eps * np.einsum("...ij,...j->...i", md["r"], z_vec)[None]
        if gd is not None:
            for i, comp in enumerate(gd):
                anti = comp["prof"].integral(x3[..., 0])  # (t, 1)
                g_int = comp["m"] * comp["c"]
                vec = md["r"][..., i] * g_int[..., None]
                out = out + h ** 2 * anti[..., None] * vec[None]
        return out

    def grad(self, xp, x3):
        """Exact scaled gradient (grad', h^{-1} d3) u_h; shape (t, p, 3, 3)."""
        h, eps = self.h, self.eps
        md = self._macro_data(xp)
        pd = self._phi_data(xp)
        zd = self._zeta_data(xp)
        gd = self._gbar_data(xp)
        nt = len(np.atleast_1d(x3))
        npts = xp.shape[0]
        x3c = np.asarray(x3, dtype=float)[:, None]

        grad_cols = np.zeros((nt, npts, 3, 2))
        third = np.zeros((nt, npts, 3))

        # Kirchhoff-Love part plus displacement
        grad_cols += (md["du"] + h * md["dv"])[None]
        grad_cols += (h * x3c[..., None, None]
                      * (md["dn"] + h * md["dmu"])[None])
        third += (md["n"] + h * md["mu"])[None]

        if pd is not None:
            phi_val = pd["m"] * pd["c"]
            dphi = pd["m1"] * pd["c"][..., None] + pd["m"][..., None] * pd["cy"] / eps
            # P = (grad_x phi + eps^{-1} grad_y phi, 0) and its full x-derivative
            p_vec = np.zeros((npts, 3))
            p_slow = pd["m1"] * pd["c"][..., None]
            p_fast = pd["m"][..., None] * pd["cy"] / eps
            p_vec[:, :2] = p_slow + p_fast
            dp = np.zeros((npts, 3, 2))
            for b in range(2):
                for a_ in range(2):
                    dp[:, a_, b] = (
                        pd["m2"][:, a_, b] * pd["c"]
                        + pd["m1"][:, b] * pd["cy"][:, a_] / eps
                        + pd["m1"][:, a_] * pd["cy"][:, b] / eps
                        + pd["m"] * pd["cyy"][:, a_, b] / eps ** 2)
            # -eps^2 n phi term
            grad_cols += -(eps ** 2) * (
                md["dn"] * phi_val[:, None, None]
                + np.einsum("...i,...b->...ib", md["n"], dphi))[None]
            # h eps^2 x3 R P term
            rp_cols = (np.einsum("...ijb,...j->...ib", md["dr"], p_vec)
                       + np.einsum("...ij,...jb->...ib", md["r"], dp))
            grad_cols += h * eps ** 2 * x3c[..., None, None] * rp_cols[None]
            third += eps ** 2 * np.einsum("...ij,...j->...i", md["r"], p_vec)[None]

        if zd is not None:
            z_vec = np.zeros((npts, 3))
            dz = np.zeros((npts, 3, 2))
            for i in range(2):
                z_vec[:, i] = zd[i]["m"] * zd[i]["c"]
                dz[:, i, :] = (zd[i]["m1"] * zd[i]["c"][..., None]
                               + zd[i]["m"][..., None] * zd[i]["cy"] / eps)
            rz_cols = (np.einsum("...ijb,...j->...ib", md["dr"], z_vec)
                       + np.einsum("...ij,...jb->...ib", md["r"], dz))
            grad_cols += h * eps * rz_cols[None]

        if gd is not None:
            g_now = np.zeros((nt, npts, 3))
            g_int = np.zeros((nt, npts, 3))
            dg_int = np.zeros((nt, npts, 3, 2))
            for i, comp in enumerate(gd):
                prof_val = comp["prof"].val(x3c)
                prof_int = comp["prof"].integral(x3c)
                cell_val = comp["m"] * comp["c"]
                g_now[..., i] = prof_val * cell_val[None]
                g_int[..., i] = prof_int * cell_val[None]
                d_cell = (comp["m1"] * comp["c"][..., None]
                          + comp["m"][..., None] * comp["cy"] / eps)
                dg_int[..., i, :] = prof_int[..., None] * d_cell[None]
            rg_cols = (np.einsum("pijb,tpj->tpib", md["dr"], g_int)
                       + np.einsum("pij,tpjb->tpib", md["r"], dg_int))
            grad_cols += h ** 2 * rg_cols
            third += h * np.einsum("pij,tpj->tpi", md["r"], g_now)

        out = np.empty((nt, npts, 3, 3))
        out[..., :2] = grad_cols
        out[..., 2] = third
        return out


def build_recovery(ansatz: RecoveryAnsatz, h: float) -> RecoverySampler:
    """Sampler for u_h and its exact scaled gradient at thickness h."""
    return RecoverySampler(ansatz, h)


# ---------------------------------------------------------------------------
# energy quadrature and diagnostics
# ---------------------------------------------------------------------------

def _composite_gauss_1d(cells, per_cell):
    gp, gw = np.polynomial.legendre.leggauss(per_cell)
    starts = np.arange(cells) / cells
    pts = (starts[:, None] + (gp[None, :] + 1.0) * 0.5 / cells).ravel()
    wts = np.tile(gw * 0.5 / cells, cells)
    return pts, wts


def plane_quadrature(k, per_cell):
    """Tensor composite Gauss rule resolving k cells per direction on S."""
    p, w = _composite_gauss_1d(k, per_cell)
    xp = np.stack(np.meshgrid(p, p, indexing="ij"), axis=-1).reshape(-1, 2)
    wp = np.outer(w, w).ravel()
    return xp, wp


def field_bandwidth(fld: MaterialField) -> int:
    """Largest active integer frequency of the stored samples over the torus."""
    n1, n2 = fld.grid_size
    coeff = np.fft.fft2(fld.samples, axes=(1, 2)) / (n1 * n2)
    mags = np.abs(coeff).max(axis=(0, 3, 4))
    xi1, xi2 = int_frequencies(n1, n2)
    active = mags > 1e-12 * (mags.max() + 1e-300)
    if not active.any():
        return 0
    return int(np.maximum(np.abs(xi1), np.abs(xi2))[active].max())


def _resolve_rules(sampler, mat, per_cell, x3_gauss):
    freq = max(1.0, sampler.ansatz.max_cell_frequency, float(field_bandwidth(mat)))
    need = int(math.ceil(8 * freq))
    if per_cell is None:
        per_cell = need
    if per_cell < need:
        raise QuadratureResolutionError(
            f"{per_cell} Gauss points per eps period cannot resolve cell "
            f"frequency {freq:g}; need at least {need}")
    if x3_gauss is None:
        x3_gauss = max(6, mat.n_x3)
    return per_cell, x3_gauss


def energy3d(sampler: RecoverySampler, mat: MaterialField,
             per_cell: int | None = None, x3_gauss: int | None = None) -> float:
    """Scaled elastic energy h^{-2} int W(x3, x'/eps, grad_h u_h) over S x I.

    Tensor-product Gauss quadrature with per_cell points per eps period per
    in-plane direction (at least 8 per oscillation of the integrand) and a
    Gauss rule in x3.
    """
    per_cell, x3_gauss = _resolve_rules(sampler, mat, per_cell, x3_gauss)
    xp, wp = plane_quadrature(sampler.k, per_cell)
    t, wt = np.polynomial.legendre.leggauss(x3_gauss)
    t = 0.5 * t
    wt = 0.5 * wt

    f_all = sampler.grad(xp, t)
    y1 = np.mod(xp[:, 0] / sampler.eps, 1.0)
    y2 = np.mod(xp[:, 1] / sampler.eps, 1.0)
    total = 0.0
    for j, (tj, wj) in enumerate(zip(t, wt)):
        q_pts = mat.eval_at(np.full(len(xp), tj), y1, y2)
        e_voigt = green_strain_voigt(np.ascontiguousarray(f_all[j]))
        total += quadform_energy(np.ascontiguousarray(q_pts), e_voigt, wj * wp)
    return total / sampler.h ** 2


def strain(sampler: RecoverySampler, xp, x3):
    """Scaled nonlinear strain samples (sqrt(F^T F) - I)/h via eigendecomposition."""
    f = sampler.grad(np.asarray(xp, dtype=float), np.asarray(x3, dtype=float))
    c = np.einsum("...ki,...kj->...ij", f, f)
    w, v = np.linalg.eigh(c)
    if w.min() <= 0:
        raise ValueError("F^T F is not positive definite; degenerate deformation")
    root = np.einsum("...ik,...k,...jk->...ij", v, np.sqrt(w), v)
    return (root - np.eye(3)) / sampler.h


def corrector_strain(ansatz: RecoveryAnsatz, xp, x3, y):
    """Limit corrector matrix: sym grad_y zeta + x3 hess_y phi in-plane block,
    g = (gbar1/2, gbar2/2, gbar3) in the third row/column."""
    xp = np.asarray(xp, dtype=float)
    x3 = np.asarray(x3, dtype=float)[:, None]
    y = np.asarray(y, dtype=float)
    npts = xp.shape[0]
    nt = x3.shape[0]
    out = np.zeros((nt, npts, 3, 3))
    if ansatz.zeta is not None:
        for i, z in enumerate(ansatz.zeta):
            grad_i = z.macro.val(xp)[:, None] * z.cell.grad(y)
            out[..., i, :2] += 0.5 * grad_i[None]
            out[..., :2, i] += 0.5 * grad_i[None]
    if ansatz.phi is not None:
        hess = ansatz.phi.macro.val(xp)[:, None, None] * ansatz.phi.cell.hess(y)
        out[..., :2, :2] += x3[..., None, None] * hess[None]
    if ansatz.gbar is not None:
        for i, (scalar, prof) in enumerate(ansatz.gbar):
            g_val = scalar.macro.val(xp) * scalar.cell.val(y)
            g_val = g_val[None] * prof.val(x3)
            fac = 0.5 if i < 2 else 1.0
            out[..., i, 2] += fac * g_val
            if i < 2:
                out[..., 2, i] += fac * g_val
    return out


def limit_strain(ansatz: RecoveryAnsatz, xp, x3, eps):
    """Two-scale limit of the scaled strain along the recovery family:
    iota(x3 Pi + q_V) + corrector terms at y = x'/eps."""
    xp = np.asarray(xp, dtype=float)
    x3v = np.asarray(x3, dtype=float)[:, None]
    pi = ansatz.iso.curvature(xp)
    qv = ansatz.q_v(xp)
    out = corrector_strain(ansatz, xp, x3, xp / eps)
    out[..., :2, :2] += (x3v[..., None, None] * pi[None]
                         + np.broadcast_to(qv, (len(x3v),) + qv.shape))
    return out


def density_w(q_mats, f):
    """Frame-indifferent energy density W = Q((F^T F - I)/2), batched."""
    from .voigt import sym3_to_coords

    f = np.asarray(f, dtype=float)
    c = np.einsum("...ki,...kj->...ij", f, f)
    e = sym3_to_coords(0.5 * (c - np.eye(3)))
    return np.einsum("...i,...ij,...j->...", e, np.asarray(q_mats, dtype=float), e)


def expansion_residual(sampler: RecoverySampler, xp, x3):
    """Deviation of R^T grad_h u_h from the identity-plus-leading-orders form.

    Subtracts the eps-order skew block built from grad_y phi and the h-order
    collection (membrane strain, curvature, corrector gradients, shear
    column), then reports the max norm and the expected envelope
    eps^2 + h*eps + h^2/eps.
    """
    a = sampler.ansatz
    h, eps = sampler.h, sampler.eps
    xp = np.asarray(xp, dtype=float)
    x3 = np.asarray(x3, dtype=float)
    f = sampler.grad(xp, x3)
    r = a.iso.frame(xp)
    rtf = np.einsum("pji,tpjk->tpik", r, f)

    nt, npts = rtf.shape[:2]
    lead = np.broadcast_to(np.eye(3), (nt, npts, 3, 3)).copy()

    y = xp / eps
    if a.phi is not None:
        dyphi = a.phi.macro.val(xp)[:, None] * a.phi.cell.grad(y)
        lead[..., 0, 2] += eps * dyphi[None, :, 0]
        lead[..., 1, 2] += eps * dyphi[None, :, 1]
        lead[..., 2, 0] -= eps * dyphi[None, :, 0]
        lead[..., 2, 1] -= eps * dyphi[None, :, 1]

    du = a.iso.du(xp)
    dv = a.v.grad(xp)
    n = a.iso.normal(xp)
    mu = a.mu_v(xp)
    pi = a.iso.curvature(xp)
    x3c = x3[:, None, None, None]

    m_coll = np.zeros((nt, npts, 3, 3))
    memb = np.einsum("pia,pib->pab", du, dv)
    m_coll[..., :2, :2] += memb[None] + x3c * pi[None]
    mu_du = np.einsum("pi,pia->pa", mu, du)
    n_dv = np.einsum("pi,pia->pa", n, dv)
    m_coll[..., 0, 2] += mu_du[None, :, 0]
    m_coll[..., 1, 2] += mu_du[None, :, 1]
    m_coll[..., 2, 0] += n_dv[None, :, 0]
    m_coll[..., 2, 1] += n_dv[None, :, 1]
    if a.phi is not None:
        hess = a.phi.macro.val(xp)[:, None, None] * a.phi.cell.hess(y)
        m_coll[..., :2, :2] += x3c * hess[None]
    if a.zeta is not None:
        for i, z in enumerate(a.zeta):
            grad_i = z.macro.val(xp)[:, None] * z.cell.grad(y)
            m_coll[..., i, :2] += grad_i[None]
    if a.gbar is not None:
        for i, (scalar, prof) in enumerate(a.gbar):
            g_val = (scalar.macro.val(xp) * scalar.cell.val(y))[None] * prof.val(
                x3[:, None])
            m_coll[..., i, 2] += g_val

    residual = rtf - lead - h * m_coll
    bound = eps ** 2 + h * eps + h ** 2 / eps
    return float(np.abs(residual).max()), bound


def strain_expansion_residual(sampler: RecoverySampler, xp, x3):
    """Max norm of F^T F - I - 2 h E_limit, the metric form of the strain
    expansion; o(h) along the recovery family."""
    xp = np.asarray(xp, dtype=float)
    x3 = np.asarray(x3, dtype=float)
    f = sampler.grad(xp, x3)
    c = np.einsum("tpki,tpkj->tpij", f, f)
    e_lim = limit_strain(sampler.ansatz, xp, x3, sampler.eps)
    residual = c - np.eye(3) - 2.0 * sampler.h * e_lim
    return float(np.abs(residual).max())


def two_scale_test(f_h, chi, g_cell: TrigPoly, eps: float, candidate,
                   per_cell: int = 8, x3_gauss: int = 4, cell_grid: int = 64):
    """Two-scale pairing check: quadrature both sides of the defining limit.

    f_h(xp, x3) samples the sequence member; chi(xp, x3) is the smooth window;
    g_cell is a mean-zero torus polynomial; candidate(xp, x3, y) evaluates the
    claimed two-scale limit.  Returns (lhs, rhs) with

        lhs = int_Omega f_h(x) chi(x) g(x'/eps) dx
        rhs = int_Omega int_Y candidate(x, y) chi(x) g(y) dy dx.
    """
    k = 1.0 / eps
    if abs(k - round(k)) > 1e-8 * k:
        raise ValueError("eps must be a reciprocal integer")
    freq = max(1.0, g_cell.max_frequency)
    need = int(math.ceil(8 * freq))
    if per_cell < need:
        raise QuadratureResolutionError(
            f"{per_cell} points per period cannot resolve frequency {freq:g}")
    xp, wp = plane_quadrature(int(round(k)), per_cell)
    t, wt = np.polynomial.legendre.leggauss(x3_gauss)
    t = 0.5 * t
    wt = 0.5 * wt

    g_fast = g_cell.val(xp / eps)
    lhs = 0.0
    for tj, wj in zip(t, wt):
        x3_arr = np.array([tj])
        lhs += wj * float((wp * f_h(xp, x3_arr)[0] * chi(xp, x3_arr)[0] * g_fast).sum())

    ny = cell_grid
    yy = (np.arange(ny) + 0.5) / ny
    y = np.stack(np.meshgrid(yy, yy, indexing="ij"), axis=-1).reshape(-1, 2)
    g_y = g_cell.val(y)
    rhs = 0.0
    chunk = max(1, 65536 // len(y))
    for tj, wj in zip(t, wt):
        x3_arr = np.array([tj])
        chi_vals = chi(xp, x3_arr)[0]
        for lo in range(0, len(xp), chunk):
            sl = slice(lo, min(lo + chunk, len(xp)))
            nx = sl.stop - sl.start
            xp_rep = np.repeat(xp[sl], len(y), axis=0)
            y_rep = np.tile(y, (nx, 1))
            f_vals = candidate(xp_rep, x3_arr, y_rep)[0].reshape(nx, len(y))
            cell_avg = (f_vals * g_y[None, :]).mean(axis=1)
            rhs += wj * float((wp[sl] * chi_vals[sl] * cell_avg).sum())
    return lhs, rhs


@dataclass
class ConvergenceReport:
    """h-indexed energies against the limit target, rows by decreasing h."""

    rows: list
    target: float
    fitted_order: float | None

    def csv_rows(self):
        header = ["k", "h", "eps", "plane_points", "x3_points", "energy",
                  "target", "gap", "fin_ratio", "strain_residual_over_h"]
        out = [header]
        for r in self.rows:
            out.append([r[key] for key in header])
        return out


def convergence_study(ansatz: RecoveryAnsatz, mat: MaterialField, ks,
                      per_cell: int | None = None, x3_gauss: int | None = None,
                      macro_rule: int = 12, cell_grid: int = 32,
                      sample_points: int = 200) -> ConvergenceReport:
    """Energy sweep along h = k^{-3/2} with expansion-residual diagnostics.

    ks must be increasing integers >= 2 (so h decreases along the rows); the
    target integral is evaluated once by direct quadrature.
    """
    ks = [int(k) for k in ks]
    if any(k < 2 for k in ks):
        raise ValueError("period counts k must be at least 2")
    if any(k2 <= k1 for k1, k2 in zip(ks, ks[1:])):
        raise ValueError("period counts must increase (h must decrease)")

    target = bending_target(ansatz, mat, macro_rule=macro_rule,
                            cell_grid=cell_grid, x3_gauss=x3_gauss)
    rng = np.random.default_rng(1234)
    xp_s = rng.uniform(0.0, 1.0, (sample_points, 2))
    x3_s = np.linspace(-0.5, 0.5, 7)

    rows = []
    for k in ks:
        h = snap_h(k)
        sampler = build_recovery(ansatz, h)
        energy = energy3d(sampler, mat, per_cell=per_cell, x3_gauss=x3_gauss)
        res, bound = expansion_residual(sampler, xp_s, x3_s)
        sres = strain_expansion_residual(sampler, xp_s, x3_s)
        pc = per_cell if per_cell is not None else _resolve_rules(
            sampler, mat, None, x3_gauss)[0]
        rows.append({
            "k": k, "h": h, "eps": sampler.eps,
            "plane_points": (k * pc) ** 2,
            "x3_points": x3_gauss if x3_gauss is not None else max(6, mat.n_x3),
            "energy": energy, "target": target, "gap": abs(energy - target),
            "fin_ratio": res / bound, "strain_residual_over_h": sres / h,
        })

    gaps = np.array([r["gap"] for r in rows])
    hs = np.array([r["h"] for r in rows])
    if (gaps > 1e-14).all() and len(rows) >= 2:
        fitted = float(np.polyfit(np.log(hs), np.log(gaps), 1)[0])
    else:
        fitted = None
    return ConvergenceReport(rows=rows, target=target, fitted_order=fitted)


def bending_target(ansatz: RecoveryAnsatz, mat: MaterialField,
                   macro_rule: int = 16, cell_grid: int = 32,
                   x3_gauss: int | None = None) -> float:
    """Limit energy int_S int_I int_Y Q(x3, y, iota(x3 Pi + q_V) + U) dy dx3 dx'
    by direct tensor quadrature, independent of the deformation sweep."""
    from .voigt import sym3_to_coords

    if x3_gauss is None:
        x3_gauss = max(4, mat.n_x3)
    gp, gw = np.polynomial.legendre.leggauss(macro_rule)
    pts1 = 0.5 * (gp + 1.0)
    wts1 = 0.5 * gw
    xp = np.stack(np.meshgrid(pts1, pts1, indexing="ij"), axis=-1).reshape(-1, 2)
    wxp = np.outer(wts1, wts1).ravel()

    ny = cell_grid
    yy1 = (np.arange(ny) + 0.5) / ny
    y = np.stack(np.meshgrid(yy1, yy1, indexing="ij"), axis=-1).reshape(-1, 2)
    ny2 = len(y)

    t, wt = np.polynomial.legendre.leggauss(x3_gauss)
    t = 0.5 * t
    wt = 0.5 * wt

    total = 0.0
    chunk = max(1, 65536 // ny2)
    for tj, wj in zip(t, wt):
        q_cells = mat.eval_at(np.full(ny2, tj), y[:, 0], y[:, 1])  # (ny2, 6, 6)
        for lo in range(0, len(xp), chunk):
            sl = slice(lo, min(lo + chunk, len(xp)))
            nx = sl.stop - sl.start
            xp_rep = np.repeat(xp[sl], ny2, axis=0)
            y_rep = np.tile(y, (nx, 1))
            e_mat = corrector_strain(ansatz, xp_rep, np.array([tj]), y_rep)[0]
            pi = ansatz.iso.curvature(xp[sl])
            qv = ansatz.q_v(xp[sl])
            macro = np.repeat(tj * pi + qv, ny2, axis=0)
            e_mat[..., :2, :2] += macro
            coords = sym3_to_coords(e_mat)
            vals = np.einsum("pi,pij,pj->p", coords,
                             np.tile(q_cells, (nx, 1, 1)), coords)
            total += wj * float((wxp[sl, None] * vals.reshape(nx, ny2) / ny2).sum())
    return total
