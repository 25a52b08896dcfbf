"""Model families built on learnable radial power bases.

Five families share one flat, named-segment parameter vector:

* ``direct``      -- sum of radial powers plus a log-primitive term
* ``angular2d``   -- radial branch plus Fourier (optionally half-integer) modes
* ``angular3d``   -- radial branch plus real spherical harmonic modes
* ``multicenter`` -- per-center power sums with learnable source locations
* ``msn``         -- coordinate-wise power sums (separable baseline)

Each family provides the forward value, closed-form spatial gradient and
Laplacian, and analytic Jacobians of value / Laplacian / normal derivative
with respect to every raw parameter (exponent ladders included via the
chain rule).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict

import numpy as np

from .basis import (
    ExponentLadder,
    LogPrimitiveParams,
    StabilizationConfig,
    floor_r,
    ladder_exponents,
    ladder_jacobian,
    log_primitive,
    log_primitive_dmu,
    raw_gaps_for_exponents,
)
from . import harmonics

STAB = StabilizationConfig()


@dataclass(frozen=True)
class ModelKind:
    """Model family tag plus the hyperparameters that fix the layout."""

    family: str
    dim: int
    k: int
    mu_min: float = -2.0
    mu_max: float = 4.0
    eps_gap: float = 0.01
    eps_log: float = 1e-4
    # angular families
    k_ang: int = 0
    m_max: int = 0
    half_integer: bool = False
    n_max: int = 0
    l_max: int = 0
    ang_mu_min: float = -2.0
    ang_mu_max: float = 4.0
    # multicenter
    n_centers: int = 0

    @staticmethod
    def direct(dim, k=12, mu_min=-2.0, mu_max=4.0, **kw):
        return ModelKind("direct", dim, k, mu_min, mu_max, **kw)

    @staticmethod
    def angular2d(k_r=6, k_a=4, m_max=4, half_integer=False, n_max=1,
                  mu_min=-2.0, mu_max=4.0, ang_mu_min=None, ang_mu_max=None, **kw):
        return ModelKind("angular2d", 2, k_r, mu_min, mu_max,
                         k_ang=k_a, m_max=m_max, half_integer=half_integer,
                         n_max=n_max,
                         ang_mu_min=mu_min if ang_mu_min is None else ang_mu_min,
                         ang_mu_max=mu_max if ang_mu_max is None else ang_mu_max, **kw)

    @staticmethod
    def angular3d(k_r=6, k_a=4, l_max=2, mu_min=-2.0, mu_max=4.0,
                  ang_mu_min=None, ang_mu_max=None, **kw):
        return ModelKind("angular3d", 3, k_r, mu_min, mu_max,
                         k_ang=k_a, l_max=l_max,
                         ang_mu_min=mu_min if ang_mu_min is None else ang_mu_min,
                         ang_mu_max=mu_max if ang_mu_max is None else ang_mu_max, **kw)

    @staticmethod
    def multicenter(dim, n_centers, k=9, mu_min=-2.0, mu_max=4.0, **kw):
        return ModelKind("multicenter", dim, k, mu_min, mu_max,
                         n_centers=n_centers, **kw)

    @staticmethod
    def msn(dim, k=12, mu_min=-2.0, mu_max=4.0, **kw):
        return ModelKind("msn", dim, k, mu_min, mu_max, **kw)

    @property
    def n_ang(self) -> int:
        if self.family == "angular2d":
            n = 2 * self.m_max
            if self.half_integer:
                n += 2 * (self.n_max + 1)
            return n
        if self.family == "angular3d":
            return (self.l_max + 1) ** 2 - 1
        return 0


def segments(kind: ModelKind):
    """Named parameter segments and their shapes, in layout order."""
    f = kind.family
    if f == "direct":
        return [("coeffs", (kind.k,)), ("raw_gaps", (kind.k,)),
                ("log_coeff", ()), ("log_mu", ()), ("bias", ())]
    if f in ("angular2d", "angular3d"):
        return [("coeffs", (kind.k,)), ("raw_gaps", (kind.k,)),
                ("ang_coeffs", (kind.n_ang, kind.k_ang)),
                ("ang_raw_gaps", (kind.k_ang,)),
                ("log_coeff", ()), ("log_mu", ()), ("bias", ())]
    if f == "multicenter":
        j, d, k = kind.n_centers, kind.dim, kind.k
        return [("centers", (j, d)), ("coeffs", (j, k)), ("raw_gaps", (j, k)),
                ("log_coeffs", (j,)), ("bias", ())]
    if f == "msn":
        return [("coeffs", (kind.dim, kind.k)), ("raw_gaps", (kind.dim, kind.k)),
                ("bias", ())]
    raise ValueError(f"unknown model family {f!r}")


class ParamLayout:
    """Offsets into the flat parameter vector for one model kind."""

    def __init__(self, kind: ModelKind):
        self.kind = kind
        self.slices = {}
        self.shapes = {}
        off = 0
        for name, shape in segments(kind):
            n = int(np.prod(shape)) if shape else 1
            self.slices[name] = slice(off, off + n)
            self.shapes[name] = shape
            off += n
        self.count = off

    def get(self, theta: np.ndarray, name: str) -> np.ndarray:
        seg = theta[self.slices[name]]
        shape = self.shapes[name]
        return seg.reshape(shape) if shape else seg[0]

    def set(self, theta: np.ndarray, name: str, value) -> None:
        theta[self.slices[name]] = np.asarray(value, dtype=float).ravel()

    def zeros(self) -> np.ndarray:
        return np.zeros(self.count)

    def entry_name(self, i: int) -> str:
        for name, sl in self.slices.items():
            if sl.start <= i < sl.stop:
                shape = self.shapes[name]
                if not shape:
                    return name
                idx = np.unravel_index(i - sl.start, shape)
                return f"{name}[{','.join(map(str, idx))}]"
        raise IndexError(i)


def param_count(kind: ModelKind) -> int:
    return ParamLayout(kind).count


# ---------------------------------------------------------------------------
# shared helpers
# ---------------------------------------------------------------------------

def _as_batch(kind, x):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.shape[1] != kind.dim:
        raise ValueError(f"points have dimension {x.shape[1]}, model expects {kind.dim}")
    return x, single


def _radial(x, center=None):
    y = x if center is None else x - center
    r = floor_r(np.linalg.norm(y, axis=1), STAB)
    return y, r, np.log(r)


def _ladder(kind, raw, ang=False):
    lo = kind.ang_mu_min if ang else kind.mu_min
    hi = kind.ang_mu_max if ang else kind.mu_max
    return ExponentLadder(raw, lo, hi, kind.eps_gap)


def exponents(kind: ModelKind, theta: np.ndarray):
    """Derived radial exponents: (K,) for most families, (J, K) or (d, K)."""
    la = ParamLayout(kind)
    raw = la.get(theta, "raw_gaps")
    if raw.ndim == 1:
        return ladder_exponents(_ladder(kind, raw))
    return np.stack([ladder_exponents(_ladder(kind, row)) for row in raw])


def angular_exponents(kind: ModelKind, theta: np.ndarray):
    la = ParamLayout(kind)
    return ladder_exponents(_ladder(kind, la.get(theta, "ang_raw_gaps"), ang=True))


def _log_params(kind, theta, la):
    return LogPrimitiveParams(coeff=float(la.get(theta, "log_coeff")),
                              mu_log=float(la.get(theta, "log_mu")),
                              eps_log=kind.eps_log)


def _angular_tables(kind, x):
    """Angular basis values / derivatives and Laplacian structure at x."""
    if kind.family == "angular2d":
        theta_ang = np.arctan2(x[:, 1], x[:, 0])
        g = harmonics.angular_basis_2d(kind.m_max, kind.half_integer, kind.n_max, theta_ang)
        gp = harmonics.angular_basis_2d_dtheta(kind.m_max, kind.half_integer, kind.n_max, theta_ang)
        eig = harmonics.angular_eigenvalues_2d(kind.m_max, kind.half_integer, kind.n_max)
        return {"g": g, "gp": gp, "eig": eig}
    degrees, pv = harmonics.solid_harmonic_values(kind.l_max, x)
    pg = harmonics.solid_harmonic_gradients(kind.l_max, x)
    return {"pv": pv, "pg": pg, "deg": degrees}


# ---------------------------------------------------------------------------
# direct family (also the radial branch of the angular families)
# ---------------------------------------------------------------------------

def _radial_value_jac(kind, la, theta, r, ell, want_jac, out_jac=None):
    """Value of the radial + log-primitive branch; fills jac columns if asked."""
    a = la.get(theta, "coeffs")
    ladder = _ladder(kind, la.get(theta, "raw_gaps"))
    mu = ladder_exponents(ladder)
    lp = _log_params(kind, theta, la)
    pw = np.exp(mu[None, :] * ell[:, None])
    psi = log_primitive(r, lp.mu_log, lp, STAB)
    phi = pw @ a + lp.coeff * psi + float(la.get(theta, "bias"))
    if want_jac:
        out_jac[:, la.slices["coeffs"]] = pw
        dmu = a[None, :] * pw * ell[:, None]
        out_jac[:, la.slices["raw_gaps"]] = dmu @ ladder_jacobian(ladder)
        out_jac[:, la.slices["log_coeff"]] = psi[:, None]
        out_jac[:, la.slices["log_mu"]] = (lp.coeff * log_primitive_dmu(r, lp.mu_log, lp, STAB))[:, None]
        out_jac[:, la.slices["bias"]] = 1.0
    return phi


def _radial_slope(kind, la, theta, r, ell):
    """S(r) with grad = S(r) * x: sum a_k mu_k r^(mu_k-2) + c0 r^(mu_log-2)."""
    a = la.get(theta, "coeffs")
    mu = ladder_exponents(_ladder(kind, la.get(theta, "raw_gaps")))
    lp = _log_params(kind, theta, la)
    pw2 = np.exp((mu[None, :] - 2.0) * ell[:, None])
    return pw2 @ (a * mu) + lp.coeff * np.exp((lp.mu_log - 2.0) * ell)


def _radial_lap_jac(kind, la, theta, r, ell, want_jac, out_jac=None):
    d = kind.dim
    a = la.get(theta, "coeffs")
    ladder = _ladder(kind, la.get(theta, "raw_gaps"))
    mu = ladder_exponents(ladder)
    lp = _log_params(kind, theta, la)
    pw2 = np.exp((mu[None, :] - 2.0) * ell[:, None])
    lam = mu * (mu + d - 2)
    rlog2 = np.exp((lp.mu_log - 2.0) * ell)
    lap = pw2 @ (a * lam) + lp.coeff * (lp.mu_log + d - 2) * rlog2
    if want_jac:
        out_jac[:, la.slices["coeffs"]] = pw2 * lam[None, :]
        dmu = a[None, :] * pw2 * ((2 * mu + d - 2)[None, :] + lam[None, :] * ell[:, None])
        out_jac[:, la.slices["raw_gaps"]] = dmu @ ladder_jacobian(ladder)
        out_jac[:, la.slices["log_coeff"]] = ((lp.mu_log + d - 2) * rlog2)[:, None]
        out_jac[:, la.slices["log_mu"]] = (lp.coeff * rlog2 * (1.0 + (lp.mu_log + d - 2) * ell))[:, None]
    return lap


def _radial_normal_jac(kind, la, theta, r, ell, xdotn, want_jac, out_jac=None):
    a = la.get(theta, "coeffs")
    ladder = _ladder(kind, la.get(theta, "raw_gaps"))
    mu = ladder_exponents(ladder)
    lp = _log_params(kind, theta, la)
    pw2 = np.exp((mu[None, :] - 2.0) * ell[:, None])
    rlog2 = np.exp((lp.mu_log - 2.0) * ell)
    g = (pw2 @ (a * mu) + lp.coeff * rlog2) * xdotn
    if want_jac:
        out_jac[:, la.slices["coeffs"]] = pw2 * mu[None, :] * xdotn[:, None]
        dmu = a[None, :] * pw2 * (1.0 + mu[None, :] * ell[:, None]) * xdotn[:, None]
        out_jac[:, la.slices["raw_gaps"]] = dmu @ ladder_jacobian(ladder)
        out_jac[:, la.slices["log_coeff"]] = (rlog2 * xdotn)[:, None]
        out_jac[:, la.slices["log_mu"]] = (lp.coeff * rlog2 * ell * xdotn)[:, None]
    return g


# ---------------------------------------------------------------------------
# angular branches
# ---------------------------------------------------------------------------

def _ang_powers(kind, la, theta, ell):
    """Exponent ladder, coefficients, and r^lambda tables for the angular branch."""
    ladder = _ladder(kind, la.get(theta, "ang_raw_gaps"), ang=True)
    lam = ladder_exponents(ladder)
    c = la.get(theta, "ang_coeffs")
    return ladder, lam, c


def _ang2d_value_jac(kind, la, theta, ell, tab, want_jac, out_jac=None):
    ladder, lam, c = _ang_powers(kind, la, theta, ell)
    g = tab["g"]
    rw = np.exp(lam[None, :] * ell[:, None])            # (N, K_a)
    basis = g[:, :, None] * rw[:, None, :]              # (N, n_ang, K_a)
    phi = np.einsum("nmj,mj->n", basis, c)
    if want_jac:
        out_jac[:, la.slices["ang_coeffs"]] = basis.reshape(len(ell), -1)
        dlam = np.einsum("nmj,mj->nj", basis, c) * ell[:, None]
        out_jac[:, la.slices["ang_raw_gaps"]] = dlam @ ladder_jacobian(ladder)
    return phi


def _ang2d_grad(kind, la, theta, x, ell, tab):
    _, lam, c = _ang_powers(kind, la, theta, ell)
    g, gp = tab["g"], tab["gp"]
    rw2 = np.exp((lam[None, :] - 2.0) * ell[:, None])
    tvec = np.stack([-x[:, 1], x[:, 0]], axis=1)
    sr = np.einsum("nm,mj,nj,j->n", g, c, rw2, lam)     # radial part coefficient
    st = np.einsum("nm,mj,nj->n", gp, c, rw2)           # tangential part coefficient
    return sr[:, None] * x + st[:, None] * tvec


def _ang2d_lap_jac(kind, la, theta, ell, tab, want_jac, out_jac=None):
    ladder, lam, c = _ang_powers(kind, la, theta, ell)
    g, eig = tab["g"], tab["eig"]
    rw2 = np.exp((lam[None, :] - 2.0) * ell[:, None])
    amp = lam[None, :] ** 2 - eig[:, None]              # (n_ang, K_a): lam^2 - m^2
    basis = g[:, :, None] * rw2[:, None, :]
    lap = np.einsum("nmj,mj->n", basis * amp[None, :, :], c)
    if want_jac:
        out_jac[:, la.slices["ang_coeffs"]] = (basis * amp[None, :, :]).reshape(len(ell), -1)
        dlam = np.einsum("nmj,mj->nj",
                         basis * (2 * lam[None, None, :] + amp[None, :, :] * ell[:, None, None]),
                         c)
        out_jac[:, la.slices["ang_raw_gaps"]] = dlam @ ladder_jacobian(ladder)
    return lap


def _ang2d_normal_jac(kind, la, theta, x, ell, tab, normals, want_jac, out_jac=None):
    ladder, lam, c = _ang_powers(kind, la, theta, ell)
    g, gp = tab["g"], tab["gp"]
    rw2 = np.exp((lam[None, :] - 2.0) * ell[:, None])
    xdotn = np.einsum("nd,nd->n", x, normals)
    tdotn = -x[:, 1] * normals[:, 0] + x[:, 0] * normals[:, 1]
    base = rw2[:, None, :] * (lam[None, None, :] * g[:, :, None] * xdotn[:, None, None]
                              + gp[:, :, None] * tdotn[:, None, None])
    gval = np.einsum("nmj,mj->n", base, c)
    if want_jac:
        out_jac[:, la.slices["ang_coeffs"]] = base.reshape(len(ell), -1)
        extra = rw2[:, None, :] * g[:, :, None] * xdotn[:, None, None]
        dlam = np.einsum("nmj,mj->nj", extra + base * ell[:, None, None], c)
        out_jac[:, la.slices["ang_raw_gaps"]] = dlam @ ladder_jacobian(ladder)
    return gval


def _ang3d_tables(kind, la, theta, ell, tab):
    ladder, lam, c = _ang_powers(kind, la, theta, ell)
    deg = tab["deg"]
    s = lam[None, :] - deg[:, None]                     # (n_ang, K_a)
    rs = np.exp(s[None, :, :] * ell[:, None, None])     # (N, n_ang, K_a)
    return ladder, lam, c, deg, s, rs


def _ang3d_value_jac(kind, la, theta, ell, tab, want_jac, out_jac=None):
    ladder, lam, c, deg, s, rs = _ang3d_tables(kind, la, theta, ell, tab)
    basis = rs * tab["pv"][:, :, None]
    phi = np.einsum("nmj,mj->n", basis, c)
    if want_jac:
        out_jac[:, la.slices["ang_coeffs"]] = basis.reshape(len(ell), -1)
        dlam = np.einsum("nmj,mj->nj", basis * ell[:, None, None], c)
        out_jac[:, la.slices["ang_raw_gaps"]] = dlam @ ladder_jacobian(ladder)
    return phi


def _ang3d_grad(kind, la, theta, x, ell, tab):
    _, lam, c, deg, s, rs = _ang3d_tables(kind, la, theta, ell, tab)
    rs2 = rs * np.exp(-2.0 * ell)[:, None, None]
    wx = np.einsum("nmj,mj->n", rs2 * s[None, :, :] * tab["pv"][:, :, None], c)
    wg = np.einsum("nmj,mj->nm", rs, c)                 # weight on grad p_m
    return wx[:, None] * x + np.einsum("nm,nmd->nd", wg, tab["pg"])


def _ang3d_lap_jac(kind, la, theta, ell, tab, want_jac, out_jac=None):
    ladder, lam, c, deg, s, rs = _ang3d_tables(kind, la, theta, ell, tab)
    amp = s * (s + 2 * deg[:, None] + 1)                # Laplacian factor, d=3
    rs2 = rs * np.exp(-2.0 * ell)[:, None, None]
    basis = rs2 * tab["pv"][:, :, None]
    lap = np.einsum("nmj,mj->n", basis * amp[None, :, :], c)
    if want_jac:
        out_jac[:, la.slices["ang_coeffs"]] = (basis * amp[None, :, :]).reshape(len(ell), -1)
        damp = 2 * s + 2 * deg[:, None] + 1
        dlam = np.einsum("nmj,mj->nj",
                         basis * (damp[None, :, :] + amp[None, :, :] * ell[:, None, None]), c)
        out_jac[:, la.slices["ang_raw_gaps"]] = dlam @ ladder_jacobian(ladder)
    return lap


def _ang3d_normal_jac(kind, la, theta, x, ell, tab, normals, want_jac, out_jac=None):
    ladder, lam, c, deg, s, rs = _ang3d_tables(kind, la, theta, ell, tab)
    rs2 = rs * np.exp(-2.0 * ell)[:, None, None]
    xdotn = np.einsum("nd,nd->n", x, normals)
    pgdotn = np.einsum("nmd,nd->nm", tab["pg"], normals)
    base = (rs2 * s[None, :, :] * tab["pv"][:, :, None] * xdotn[:, None, None]
            + rs * pgdotn[:, :, None])
    gval = np.einsum("nmj,mj->n", base, c)
    if want_jac:
        out_jac[:, la.slices["ang_coeffs"]] = base.reshape(len(ell), -1)
        extra = rs2 * tab["pv"][:, :, None] * xdotn[:, None, None]
        dlam = np.einsum("nmj,mj->nj", extra + base * ell[:, None, None], c)
        out_jac[:, la.slices["ang_raw_gaps"]] = dlam @ ladder_jacobian(ladder)
    return gval


# ---------------------------------------------------------------------------
# multicenter family
# ---------------------------------------------------------------------------

def _mc_center_pieces(kind, la, theta, x, j):
    centers = la.get(theta, "centers")
    y, r, ell = _radial(x, centers[j])
    a = la.get(theta, "coeffs")[j]
    ladder = _ladder(kind, la.get(theta, "raw_gaps")[j])
    mu = ladder_exponents(ladder)
    c0 = la.get(theta, "log_coeffs")[j]
    return y, r, ell, a, ladder, mu, c0


def _mc_value_jac(kind, la, theta, x, want_jac, out_jac=None):
    n = len(x)
    phi = np.full(n, float(la.get(theta, "bias")))
    if want_jac:
        out_jac[:, la.slices["bias"]] = 1.0
    for j in range(kind.n_centers):
        y, r, ell, a, ladder, mu, c0 = _mc_center_pieces(kind, la, theta, x, j)
        pw = np.exp(mu[None, :] * ell[:, None])
        phi += pw @ a + c0 * ell
        if want_jac:
            k = kind.k
            sl_c = la.slices["coeffs"]
            out_jac[:, sl_c.start + j * k: sl_c.start + (j + 1) * k] = pw
            dmu = a[None, :] * pw * ell[:, None]
            sl_g = la.slices["raw_gaps"]
            out_jac[:, sl_g.start + j * k: sl_g.start + (j + 1) * k] = dmu @ ladder_jacobian(ladder)
            out_jac[:, la.slices["log_coeffs"].start + j] = ell
            # terms depend on x - c_j, so center sensitivity is minus the spatial slope
            pw2 = np.exp((mu[None, :] - 2.0) * ell[:, None])
            slope = pw2 @ (a * mu) + c0 * np.exp(-2.0 * ell)
            sl_ctr = la.slices["centers"]
            d = kind.dim
            out_jac[:, sl_ctr.start + j * d: sl_ctr.start + (j + 1) * d] = -slope[:, None] * y
    return phi


def _mc_grad(kind, la, theta, x):
    grad = np.zeros_like(x)
    for j in range(kind.n_centers):
        y, r, ell, a, ladder, mu, c0 = _mc_center_pieces(kind, la, theta, x, j)
        pw2 = np.exp((mu[None, :] - 2.0) * ell[:, None])
        slope = pw2 @ (a * mu) + c0 * np.exp(-2.0 * ell)
        grad += slope[:, None] * y
    return grad


def _mc_lap_jac(kind, la, theta, x, want_jac, out_jac=None):
    d = kind.dim
    lap = np.zeros(len(x))
    for j in range(kind.n_centers):
        y, r, ell, a, ladder, mu, c0 = _mc_center_pieces(kind, la, theta, x, j)
        pw2 = np.exp((mu[None, :] - 2.0) * ell[:, None])
        lam = mu * (mu + d - 2)
        rinv2 = np.exp(-2.0 * ell)
        lap += pw2 @ (a * lam) + c0 * (d - 2) * rinv2
        if want_jac:
            k = kind.k
            sl_c = la.slices["coeffs"]
            out_jac[:, sl_c.start + j * k: sl_c.start + (j + 1) * k] = pw2 * lam[None, :]
            dmu = a[None, :] * pw2 * ((2 * mu + d - 2)[None, :] + lam[None, :] * ell[:, None])
            sl_g = la.slices["raw_gaps"]
            out_jac[:, sl_g.start + j * k: sl_g.start + (j + 1) * k] = dmu @ ladder_jacobian(ladder)
            out_jac[:, la.slices["log_coeffs"].start + j] = (d - 2) * rinv2
            pw3 = np.exp((mu[None, :] - 3.0) * ell[:, None])
            dlap_dr = pw3 @ (a * lam * (mu - 2)) - 2.0 * c0 * (d - 2) * np.exp(-3.0 * ell)
            sl_ctr = la.slices["centers"]
            out_jac[:, sl_ctr.start + j * d: sl_ctr.start + (j + 1) * d] = \
                -(dlap_dr / r)[:, None] * y
    return lap


def _mc_normal_jac(kind, la, theta, x, normals, want_jac, out_jac=None):
    d = kind.dim
    gval = np.zeros(len(x))
    for j in range(kind.n_centers):
        y, r, ell, a, ladder, mu, c0 = _mc_center_pieces(kind, la, theta, x, j)
        ydotn = np.einsum("nd,nd->n", y, normals)
        pw2 = np.exp((mu[None, :] - 2.0) * ell[:, None])
        slope = pw2 @ (a * mu) + c0 * np.exp(-2.0 * ell)
        gval += slope * ydotn
        if want_jac:
            k = kind.k
            sl_c = la.slices["coeffs"]
            out_jac[:, sl_c.start + j * k: sl_c.start + (j + 1) * k] = \
                pw2 * mu[None, :] * ydotn[:, None]
            dmu = a[None, :] * pw2 * (1.0 + mu[None, :] * ell[:, None]) * ydotn[:, None]
            sl_g = la.slices["raw_gaps"]
            out_jac[:, sl_g.start + j * k: sl_g.start + (j + 1) * k] = dmu @ ladder_jacobian(ladder)
            out_jac[:, la.slices["log_coeffs"].start + j] = np.exp(-2.0 * ell) * ydotn
            pw3 = np.exp((mu[None, :] - 3.0) * ell[:, None])
            dslope_dr = pw3 @ (a * mu * (mu - 2)) - 2.0 * c0 * np.exp(-3.0 * ell)
            sl_ctr = la.slices["centers"]
            out_jac[:, sl_ctr.start + j * d: sl_ctr.start + (j + 1) * d] = \
                -(dslope_dr * ydotn / r)[:, None] * y - slope[:, None] * normals
    return gval


# ---------------------------------------------------------------------------
# msn family (coordinate-wise separable baseline)
# ---------------------------------------------------------------------------

def _msn_pieces(kind, la, theta):
    a = la.get(theta, "coeffs")
    raws = la.get(theta, "raw_gaps")
    ladders = [_ladder(kind, raws[i]) for i in range(kind.dim)]
    mus = np.stack([ladder_exponents(l) for l in ladders])
    return a, ladders, mus


def _msn_value_jac(kind, la, theta, x, want_jac, out_jac=None):
    a, ladders, mus = _msn_pieces(kind, la, theta)
    y = floor_r(np.abs(x), STAB)
    ell = np.log(y)                                     # (N, d)
    pw = np.exp(mus[None, :, :] * ell[:, :, None])      # (N, d, K)
    phi = np.einsum("nik,ik->n", pw, a) + float(la.get(theta, "bias"))
    if want_jac:
        out_jac[:, la.slices["coeffs"]] = pw.reshape(len(x), -1)
        sl_g = la.slices["raw_gaps"]
        k = kind.k
        for i in range(kind.dim):
            dmu = a[None, i, :] * pw[:, i, :] * ell[:, i, None]
            out_jac[:, sl_g.start + i * k: sl_g.start + (i + 1) * k] = \
                dmu @ ladder_jacobian(ladders[i])
        out_jac[:, la.slices["bias"]] = 1.0
    return phi


def _msn_grad(kind, la, theta, x):
    a, ladders, mus = _msn_pieces(kind, la, theta)
    y = floor_r(np.abs(x), STAB)
    ell = np.log(y)
    pw1 = np.exp((mus[None, :, :] - 1.0) * ell[:, :, None])
    return np.einsum("nik,ik,ik->ni", pw1, a, mus) * np.sign(x)


def _msn_lap_jac(kind, la, theta, x, want_jac, out_jac=None):
    a, ladders, mus = _msn_pieces(kind, la, theta)
    y = floor_r(np.abs(x), STAB)
    ell = np.log(y)
    pw2 = np.exp((mus[None, :, :] - 2.0) * ell[:, :, None])
    lam = mus * (mus - 1.0)
    lap = np.einsum("nik,ik,ik->n", pw2, a, lam)
    if want_jac:
        out_jac[:, la.slices["coeffs"]] = (pw2 * lam[None, :, :]).reshape(len(x), -1)
        sl_g = la.slices["raw_gaps"]
        k = kind.k
        for i in range(kind.dim):
            dmu = a[None, i, :] * pw2[:, i, :] * (
                (2 * mus[i] - 1.0)[None, :] + lam[i][None, :] * ell[:, i, None])
            out_jac[:, sl_g.start + i * k: sl_g.start + (i + 1) * k] = \
                dmu @ ladder_jacobian(ladders[i])
    return lap


def _msn_normal_jac(kind, la, theta, x, normals, want_jac, out_jac=None):
    a, ladders, mus = _msn_pieces(kind, la, theta)
    y = floor_r(np.abs(x), STAB)
    ell = np.log(y)
    sgn = np.sign(x)
    pw1 = np.exp((mus[None, :, :] - 1.0) * ell[:, :, None])
    per_coord = pw1 * (a * mus)[None, :, :]             # (N, d, K)
    gval = np.einsum("nik,ni->n", per_coord, sgn * normals)
    if want_jac:
        w = (sgn * normals)[:, :, None]
        out_jac[:, la.slices["coeffs"]] = (pw1 * mus[None, :, :] * w).reshape(len(x), -1)
        sl_g = la.slices["raw_gaps"]
        k = kind.k
        for i in range(kind.dim):
            dmu = a[None, i, :] * pw1[:, i, :] * (1.0 + mus[i][None, :] * ell[:, i, None]) \
                * (sgn[:, i] * normals[:, i])[:, None]
            out_jac[:, sl_g.start + i * k: sl_g.start + (i + 1) * k] = \
                dmu @ ladder_jacobian(ladders[i])
    return gval


# ---------------------------------------------------------------------------
# public API
# ---------------------------------------------------------------------------

def value_and_jac(kind: ModelKind, theta: np.ndarray, x, jac: bool = True):
    """Model value phi(x) and, if requested, d phi / d theta, shape (N, P)."""
    x, single = _as_batch(kind, x)
    la = ParamLayout(kind)
    out = np.zeros((len(x), la.count)) if jac else None
    if kind.family == "direct":
        _, r, ell = _radial(x)
        phi = _radial_value_jac(kind, la, theta, r, ell, jac, out)
    elif kind.family in ("angular2d", "angular3d"):
        _, r, ell = _radial(x)
        phi = _radial_value_jac(kind, la, theta, r, ell, jac, out)
        tab = _angular_tables(kind, x)
        if kind.family == "angular2d":
            phi = phi + _ang2d_value_jac(kind, la, theta, ell, tab, jac, out)
        else:
            phi = phi + _ang3d_value_jac(kind, la, theta, ell, tab, jac, out)
    elif kind.family == "multicenter":
        phi = _mc_value_jac(kind, la, theta, x, jac, out)
    elif kind.family == "msn":
        phi = _msn_value_jac(kind, la, theta, x, jac, out)
    else:
        raise ValueError(kind.family)
    if single:
        return (phi[0], out[0] if jac else None)
    return phi, out


def forward(kind: ModelKind, theta: np.ndarray, x):
    return value_and_jac(kind, theta, x, jac=False)[0]


def spatial_gradient(kind: ModelKind, theta: np.ndarray, x):
    """Closed-form gradient of the model in its spatial argument."""
    x, single = _as_batch(kind, x)
    la = ParamLayout(kind)
    if kind.family == "direct":
        _, r, ell = _radial(x)
        grad = _radial_slope(kind, la, theta, r, ell)[:, None] * x
    elif kind.family == "angular2d":
        _, r, ell = _radial(x)
        tab = _angular_tables(kind, x)
        grad = _radial_slope(kind, la, theta, r, ell)[:, None] * x \
            + _ang2d_grad(kind, la, theta, x, ell, tab)
    elif kind.family == "angular3d":
        _, r, ell = _radial(x)
        tab = _angular_tables(kind, x)
        grad = _radial_slope(kind, la, theta, r, ell)[:, None] * x \
            + _ang3d_grad(kind, la, theta, x, ell, tab)
    elif kind.family == "multicenter":
        grad = _mc_grad(kind, la, theta, x)
    elif kind.family == "msn":
        grad = _msn_grad(kind, la, theta, x)
    else:
        raise ValueError(kind.family)
    return grad[0] if single else grad


def laplacian_and_jac(kind: ModelKind, theta: np.ndarray, x, jac: bool = True):
    x, single = _as_batch(kind, x)
    la = ParamLayout(kind)
    out = np.zeros((len(x), la.count)) if jac else None
    if kind.family == "direct":
        _, r, ell = _radial(x)
        lap = _radial_lap_jac(kind, la, theta, r, ell, jac, out)
    elif kind.family in ("angular2d", "angular3d"):
        _, r, ell = _radial(x)
        lap = _radial_lap_jac(kind, la, theta, r, ell, jac, out)
        tab = _angular_tables(kind, x)
        if kind.family == "angular2d":
            lap = lap + _ang2d_lap_jac(kind, la, theta, ell, tab, jac, out)
        else:
            lap = lap + _ang3d_lap_jac(kind, la, theta, ell, tab, jac, out)
    elif kind.family == "multicenter":
        lap = _mc_lap_jac(kind, la, theta, x, jac, out)
    elif kind.family == "msn":
        lap = _msn_lap_jac(kind, la, theta, x, jac, out)
    else:
        raise ValueError(kind.family)
    if single:
        return (lap[0], out[0] if jac else None)
    return lap, out


def laplacian(kind: ModelKind, theta: np.ndarray, x):
    return laplacian_and_jac(kind, theta, x, jac=False)[0]


def normal_derivative_and_jac(kind: ModelKind, theta: np.ndarray, x, normals,
                              jac: bool = True):
    """grad phi . n at the given points, plus its parameter Jacobian."""
    x, single = _as_batch(kind, x)
    normals = np.asarray(normals, dtype=float).reshape(x.shape)
    la = ParamLayout(kind)
    out = np.zeros((len(x), la.count)) if jac else None
    if kind.family == "direct":
        _, r, ell = _radial(x)
        xdotn = np.einsum("nd,nd->n", x, normals)
        g = _radial_normal_jac(kind, la, theta, r, ell, xdotn, jac, out)
    elif kind.family in ("angular2d", "angular3d"):
        _, r, ell = _radial(x)
        xdotn = np.einsum("nd,nd->n", x, normals)
        g = _radial_normal_jac(kind, la, theta, r, ell, xdotn, jac, out)
        tab = _angular_tables(kind, x)
        if kind.family == "angular2d":
            g = g + _ang2d_normal_jac(kind, la, theta, x, ell, tab, normals, jac, out)
        else:
            g = g + _ang3d_normal_jac(kind, la, theta, x, ell, tab, normals, jac, out)
    elif kind.family == "multicenter":
        g = _mc_normal_jac(kind, la, theta, x, normals, jac, out)
    elif kind.family == "msn":
        g = _msn_normal_jac(kind, la, theta, x, normals, jac, out)
    else:
        raise ValueError(kind.family)
    if single:
        return (g[0], out[0] if jac else None)
    return g, out


# ---------------------------------------------------------------------------
# exact-representation constructors (used by oracles and init verification)
# ---------------------------------------------------------------------------

def exact_power_sum(kind: ModelKind, powers, coeffs) -> np.ndarray:
    """Parameters encoding sum_j coeffs_j * r^powers_j exactly (direct family)."""
    if kind.family != "direct":
        raise ValueError("exact_power_sum targets the direct family")
    powers = np.asarray(powers, dtype=float)
    coeffs = np.asarray(coeffs, dtype=float)
    if kind.k < len(powers) + 1 and not np.isclose(powers.max(), kind.mu_max):
        raise ValueError("need K >= J + 1 to pin the top exponent")
    mus, amps = _fill_exponent_slots(powers, coeffs, kind.k, kind.mu_min, kind.mu_max)
    la = ParamLayout(kind)
    theta = la.zeros()
    la.set(theta, "coeffs", amps)
    la.set(theta, "raw_gaps", raw_gaps_for_exponents(mus, kind.mu_min, kind.mu_max, kind.eps_gap))
    return theta


def _fill_exponent_slots(powers, coeffs, k, mu_min, mu_max):
    """Strictly increasing K-point exponent grid containing the requested powers."""
    order = np.argsort(powers)
    powers, coeffs = powers[order], coeffs[order]
    slots = list(powers)
    amps = list(coeffs)
    if not np.isclose(slots[-1], mu_max):
        slots.append(mu_max)
        amps.append(0.0)
    lo = slots[-2] if len(slots) > 1 else mu_min
    while len(slots) < k:
        # insert padding exponents strictly between the two largest entries
        pad = 0.5 * (lo + slots[-1])
        slots.insert(-1, pad)
        amps.insert(-1, 0.0)
        lo = pad
    if len(slots) > k:
        raise ValueError(f"{len(slots)} exponent slots needed but only K={k} available")
    order = np.argsort(slots)
    return np.asarray(slots)[order], np.asarray(amps)[order]


def exact_log(kind: ModelKind, coeff: float = 1.0) -> np.ndarray:
    """Parameters encoding coeff * log r via the log-primitive limit."""
    la = ParamLayout(kind)
    theta = la.zeros()
    la.set(theta, "raw_gaps", np.zeros(la.shapes["raw_gaps"]))
    la.set(theta, "log_coeff", coeff)
    la.set(theta, "log_mu", 0.0)
    return theta


def exact_multi_source_log(kind: ModelKind, centers, weights) -> np.ndarray:
    """Multicenter parameters encoding sum_j w_j log ||x - c_j|| exactly."""
    if kind.family != "multicenter":
        raise ValueError("requires the multicenter family")
    la = ParamLayout(kind)
    theta = la.zeros()
    la.set(theta, "centers", np.asarray(centers, dtype=float))
    la.set(theta, "log_coeffs", np.asarray(weights, dtype=float))
    la.set(theta, "raw_gaps", np.zeros(la.shapes["raw_gaps"]))
    return theta


def exact_multicenter_power(kind: ModelKind, centers, weights, power: float) -> np.ndarray:
    """Multicenter parameters encoding sum_j w_j ||x - c_j||^power exactly."""
    la = ParamLayout(kind)
    theta = la.zeros()
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    la.set(theta, "centers", centers)
    mus, _ = _fill_exponent_slots(np.array([power]), np.array([1.0]),
                                  kind.k, kind.mu_min, kind.mu_max)
    raw = raw_gaps_for_exponents(mus, kind.mu_min, kind.mu_max, kind.eps_gap)
    slot = int(np.argmin(np.abs(mus - power)))
    coeffs = np.zeros((kind.n_centers, kind.k))
    for j, w in enumerate(np.atleast_1d(weights)):
        coeffs[j, slot] = w
    la.set(theta, "coeffs", coeffs)
    la.set(theta, "raw_gaps", np.tile(raw, (kind.n_centers, 1)))
    return theta


def exact_crack(kind: ModelKind) -> np.ndarray:
    """Half-integer angular parameters encoding r^(1/2) cos(theta/2) exactly."""
    if kind.family != "angular2d" or not kind.half_integer:
        raise ValueError("requires the half-integer 2D angular family")
    la = ParamLayout(kind)
    theta = la.zeros()
    mus, _ = _fill_exponent_slots(np.array([0.5]), np.array([1.0]),
                                  kind.k_ang, kind.ang_mu_min, kind.ang_mu_max)
    la.set(theta, "ang_raw_gaps",
           raw_gaps_for_exponents(mus, kind.ang_mu_min, kind.ang_mu_max, kind.eps_gap))
    slot = int(np.argmin(np.abs(mus - 0.5)))
    c = np.zeros((kind.n_ang, kind.k_ang))
    c[2 * kind.m_max, slot] = 1.0                       # first half-integer cosine mode
    la.set(theta, "ang_coeffs", c)
    la.set(theta, "raw_gaps", np.zeros(kind.k))
    return theta


def exact_dipole(kind: ModelKind) -> np.ndarray:
    """3D angular parameters encoding z / r^3 = r^(-2) * sqrt(4 pi / 3) Y_1^0."""
    if kind.family != "angular3d":
        raise ValueError("requires the 3D angular family")
    if not (kind.ang_mu_min < -2.0):
        raise ValueError("dipole needs the angular exponent range to include -2")
    la = ParamLayout(kind)
    theta = la.zeros()
    mus, _ = _fill_exponent_slots(np.array([-2.0]), np.array([1.0]),
                                  kind.k_ang, kind.ang_mu_min, kind.ang_mu_max)
    la.set(theta, "ang_raw_gaps",
           raw_gaps_for_exponents(mus, kind.ang_mu_min, kind.ang_mu_max, kind.eps_gap))
    slot = int(np.argmin(np.abs(mus + 2.0)))
    c = np.zeros((kind.n_ang, kind.k_ang))
    c[1, slot] = np.sqrt(4.0 * np.pi / 3.0)             # (l, m) = (1, 0) entry
    la.set(theta, "ang_coeffs", c)
    return theta


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def params_to_json(kind: ModelKind, theta: np.ndarray) -> str:
    la = ParamLayout(kind)
    doc = {"kind": asdict(kind), "segments": {}}
    for name in la.slices:
        val = la.get(theta, name)
        doc["segments"][name] = val.tolist() if isinstance(val, np.ndarray) else float(val)
    return json.dumps(doc, indent=2)


def params_from_json(text: str):
    doc = json.loads(text)
    kind = ModelKind(**doc["kind"])
    la = ParamLayout(kind)
    theta = la.zeros()
    for name, val in doc["segments"].items():
        la.set(theta, name, np.asarray(val, dtype=float))
    return kind, theta


def exponent_spectrum(kind: ModelKind, theta: np.ndarray):
    """(exponent, coefficient) pairs for the radial branch."""
    la = ParamLayout(kind)
    mu = exponents(kind, theta)
    a = la.get(theta, "coeffs")
    return list(zip(np.ravel(mu).tolist(), np.ravel(a).tolist()))
