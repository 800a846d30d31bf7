"""Closed-form oracles for the oscillating-ODE family and its limit.

The scalar family  d/dt u_n + sin(2*pi*n*x) u_n = f  has the explicit
solution (zero initial datum, unit-step source)

    u_n(t, x) = (1 - exp(-t*s)) / s,    s = sin(2*pi*n*x),

continuously extended by t where s = 0.  Its homogenised limit is the
convolution with the modified Bessel kernel I_0,

    u_hom(t, x) = int_0^t I_0(t - s) f(s, x) ds,

and the limit material law is the double series

    M(z) = 1 + sum_j ( - sum_m (2m)!/((2^m m!)^2) z^{-2m} )^j,

whose closed form is (1 - z^{-2})^{1/2}; the Laplace transform of I_0
is 1/sqrt(z^2 - 1) = (z*M(z))^{-1}, which ties the two together.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import quad

__all__ = [
    "ode_exact",
    "bessel_i0",
    "i0_antiderivative",
    "ode_hom_exact",
    "conv_i0",
    "SeriesLaw",
    "series_material_law",
    "series_closed_form",
    "laplace_i0",
]


def ode_exact(n, t, x, source=None):
    """Solution of d/dt u + sin(2*pi*n*x) u = f, u(0) = 0, at (t, x).

    For the default unit-step source (f = 1 for t > 0) the closed form
    (1 - e^{-t s})/s is used, continuously extended by t at s = 0.  For a
    callable source f(t), the convolution int_0^t e^{-(t-r) s} f(r) dr is
    evaluated by adaptive quadrature to 1e-10.  Vectorised over x.
    """
    if t < 0.0:
        raise ValueError("time must be nonnegative")
    x = np.asarray(x, dtype=float)
    s = np.sin(2.0 * math.pi * n * x)
    if source is None:
        out = np.where(s == 0.0, t, -np.expm1(-t * np.where(s == 0.0, 1.0, s)) / np.where(s == 0.0, 1.0, s))
        return out if out.ndim else float(out)
    scalars = np.atleast_1d(s)
    vals = np.empty_like(scalars)
    for i, si in enumerate(scalars):
        val, _ = quad(lambda r: math.exp(-(t - r) * si) * source(r), 0.0, t, epsabs=1e-12, epsrel=1e-10, limit=200)
        vals[i] = val
    vals = vals.reshape(s.shape)
    return vals if vals.ndim else float(vals)


def bessel_i0(x):
    """Modified Bessel function I_0 by its power series, for 0 <= x <= 50.

    I_0(x) = sum_m (x/2)^{2m} / (m!)^2, summed to relative tail 1e-15.
    """
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(xs < 0.0):
        raise ValueError("I_0 series oracle defined for nonnegative arguments")
    if np.any(xs > 50.0):
        raise ValueError("argument outside the supported range [0, 50]")
    out = np.empty_like(xs)
    for i, v in enumerate(xs):
        q = 0.25 * v * v
        term = 1.0
        total = 1.0
        m = 0
        while True:
            m += 1
            term *= q / (m * m)
            total += term
            if term <= 1e-15 * total:
                break
        out[i] = total
    out = out.reshape(np.shape(x))
    return out if out.ndim else float(out)


def i0_antiderivative(t):
    """int_0^t I_0 by termwise integration of the series.

    int_0^t I_0 = sum_m t^{2m+1} / ((m!)^2 4^m (2m+1)).
    """
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(ts < 0.0):
        raise ValueError("time must be nonnegative")
    out = np.empty_like(ts)
    for i, v in enumerate(ts):
        q = 0.25 * v * v
        coeff = 1.0  # 1 / ((m!)^2 4^m) * t^{2m+1} accumulated below
        term = v
        total = v
        m = 0
        while term > 0.0:
            m += 1
            coeff *= q / (m * m)
            term = coeff * v / (2 * m + 1)
            total += term
            if term <= 1e-15 * total:
                break
        out[i] = total
    out = out.reshape(np.shape(t))
    return out if out.ndim else float(out)


def ode_hom_exact(t, source=None):
    """Homogenised solution int_0^t I_0(t-s) f(s) ds at time t.

    The unit-step source integrates the I_0 series termwise (no
    quadrature error); callable sources use adaptive quadrature at 1e-10.
    """
    if np.any(np.asarray(t) < 0.0):
        raise ValueError("time must be nonnegative")
    if source is None:
        return i0_antiderivative(t)
    return conv_i0(source, t)


def conv_i0(source, t):
    """Convolution int_0^t I_0(t-s) source(s) ds by adaptive quadrature."""
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.empty_like(ts)
    for i, v in enumerate(ts):
        if v == 0.0:
            out[i] = 0.0
            continue
        val, _ = quad(lambda s: bessel_i0(v - s) * source(s), 0.0, v, epsabs=1e-12, epsrel=1e-10, limit=200)
        out[i] = val
    out = out.reshape(np.shape(t))
    return out if out.ndim else float(out)


class SeriesLaw:
    """The double-series limit material law with certified truncation.

    Evaluation sums the inner series S(z) = sum_m (2m)!/((2^m m!)^2) z^{-2m}
    with a geometric tail bound in |z^{-2}|, then the outer alternating
    geometric series in (-S) with tail |S|^{J+1}/(1-|S|).  Both bounds are
    a posteriori; the truncation orders actually used are recorded.
    """

    def __init__(self, tol=1e-12):
        self.tol = float(tol)
        self.m_max = 0
        self.j_max = 0

    def inner_sum(self, z, tol=None):
        """S(z) with tail bound <= tol; requires |z^{-2}| < 1."""
        tol = self.tol if tol is None else tol
        w = 1.0 / (complex(z) * complex(z))
        aw = abs(w)
        if aw >= 1.0:
            raise ValueError("series law evaluated outside its convergence region |z^-2| < 1")
        c = 1.0
        wp = 1.0 + 0.0j
        total = 0.0 + 0.0j
        m = 0
        while True:
            m += 1
            c *= (2.0 * m - 1.0) / (2.0 * m)  # c_m = (2m)!/(4^m (m!)^2)
            wp *= w
            term = c * wp
            total += term
            # tail: coefficients decrease, so |tail| <= |term| * aw/(1-aw)
            if abs(term) * aw / (1.0 - aw) <= tol * max(1.0, abs(total)):
                break
            if m > 10_000:
                raise ArithmeticError("inner series failed to converge")
        self.m_max = max(self.m_max, m)
        return total

    def __call__(self, z, tol=None):
        tol = self.tol if tol is None else tol
        S = self.inner_sum(z, tol=0.1 * tol)
        aS = abs(S)
        if aS >= 1.0:
            raise ValueError("outer series diverges: |S(z)| >= 1 (need Re z > 2)")
        term = 1.0 + 0.0j
        total = 1.0 + 0.0j
        j = 0
        while True:
            j += 1
            term *= -S
            total += term
            if abs(term) * aS / (1.0 - aS) <= tol * max(1.0, abs(total)):
                break
            if j > 100_000:
                raise ArithmeticError("outer series failed to converge")
        self.j_max = max(self.j_max, j)
        return total


def series_material_law(z, tol=1e-12):
    """M(z) = 1 + sum_j (-sum_m (2m)!/((2^m m!)^2) z^{-2m})^j."""
    return SeriesLaw(tol=tol)(z)


def series_closed_form(z):
    """Closed form (1 - z^{-2})^{1/2} of the series law (principal branch)."""
    z = complex(z)
    return complex(np.sqrt(1.0 - 1.0 / (z * z)))


def laplace_i0(z, tol=1e-8, points_per_unit=8):
    """Truncated Laplace transform int_0^{T*} e^{-z t} I_0(t) dt.

    T* is chosen from the bound I_0(t) <= e^t so the truncation tail
    e^{(1-Re z) T*}/(Re z - 1) stays below tol; the finite integral uses
    composite Gauss-Legendre panels on an analytic integrand.
    """
    z = complex(z)
    if z.real <= 1.0:
        raise ValueError("Laplace transform of I_0 needs Re z > 1")
    T = math.log(1.0 / (tol * (z.real - 1.0))) / (z.real - 1.0)
    T = min(max(T, 1.0), 50.0)
    n_panels = max(8, int(points_per_unit * T))
    gx, gw = np.polynomial.legendre.leggauss(12)
    edges = np.linspace(0.0, T, n_panels + 1)
    total = 0.0 + 0.0j
    for a, b in zip(edges[:-1], edges[1:]):
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        ts = mid + half * gx
        vals = np.exp(-z * ts) * bessel_i0(ts)
        total += half * np.dot(gw, vals)
    return total
