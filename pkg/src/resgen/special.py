"""Modified Bessel function of the second kind and the von Karman covariance.

``K_nu(x)`` is evaluated for real order by reducing to ``|mu| <= 1/2`` with
``nu = mu + n`` and recurring upward in order. ``K_mu`` and ``K_{mu+1}``
come from Temme's series for ``x < 2`` and from Steed's continued fraction
(CF2) otherwise. The gamma-ratio terms Temme's series needs are taken from
the Taylor series of ``1/Gamma``, which keeps them accurate at ``mu -> 0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._accel import njit
from .errors import DomainError, NumericError, ValidationError

NU_LIMIT = 2.0

# 1/Gamma(z) = sum_k c_k z^k, k = 1..26 (Abramowitz & Stegun 6.1.34).
_RGAMMA = np.array([
    1.0,
    0.5772156649015329,
    -0.6558780715202538,
    -0.0420026350340952,
    0.1665386113822915,
    -0.0421977345555443,
    -0.0096219715278770,
    0.0072189432466630,
    -0.0011651675918591,
    -0.0002152416741149,
    0.0001280502823882,
    -0.0000201348547807,
    -0.0000012504934821,
    0.0000011330272320,
    -0.0000002056338417,
    0.0000000061160950,
    0.0000000050020075,
    -0.0000000011812746,
    0.0000000001043427,
    0.0000000000077823,
    -0.0000000000036968,
    0.0000000000005100,
    -0.0000000000000206,
    -0.0000000000000054,
    0.0000000000000014,
    0.0000000000000001,
])

_EPS = 1e-16
_MAXIT = 10000


@njit
def _temme_gammas(mu, coef):
    # 1/Gamma(1+x) = sum_m coef[m] x^m; gam2 is its even part,
    # gam1 = -(odd part)/x, both as power series in mu^2.
    gam1 = 0.0
    gam2 = 0.0
    pw = 1.0
    n = coef.shape[0]
    for m in range(0, n, 2):
        gam2 += coef[m] * pw
        if m + 1 < n:
            gam1 -= coef[m + 1] * pw
        pw *= mu * mu
    gampl = gam2 - mu * gam1
    gammi = gam2 + mu * gam1
    return gam1, gam2, gampl, gammi


@njit
def _bessel_k_core(nu, x, coef):
    nu = abs(nu)
    nl = int(nu + 0.5)
    xmu = nu - nl
    xmu2 = xmu * xmu
    xi = 1.0 / x
    xi2 = 2.0 * xi
    pi = math.pi
    converged = False
    if x < 2.0:
        x2 = 0.5 * x
        pimu = pi * xmu
        fact = 1.0 if abs(pimu) < _EPS else pimu / math.sin(pimu)
        d = -math.log(x2)
        e = xmu * d
        fact2 = 1.0 if abs(e) < _EPS else math.sinh(e) / e
        gam1, gam2, gampl, gammi = _temme_gammas(xmu, coef)
        ff = fact * (gam1 * math.cosh(e) + gam2 * fact2 * d)
        s = ff
        e = math.exp(e)
        p = 0.5 * e / gampl
        q = 0.5 / (e * gammi)
        c = 1.0
        d = x2 * x2
        s1 = p
        for i in range(1, _MAXIT):
            ff = (i * ff + p + q) / (i * i - xmu2)
            c *= d / i
            p /= i - xmu
            q /= i + xmu
            dl = c * ff
            s += dl
            s1 += c * (p - i * ff)
            if abs(dl) < abs(s) * _EPS:
                converged = True
                break
        rkmu = s
        rk1 = s1 * xi2
    else:
        b = 2.0 * (1.0 + x)
        d = 1.0 / b
        h = d
        delh = d
        q1 = 0.0
        q2 = 1.0
        a1 = 0.25 - xmu2
        q = a1
        c = a1
        a = -a1
        s = 1.0 + q * delh
        for i in range(2, _MAXIT):
            a -= 2 * (i - 1)
            c = -a * c / i
            qnew = (q1 - b * q2) / a
            q1 = q2
            q2 = qnew
            q += c * qnew
            b += 2.0
            d = 1.0 / (b + a * d)
            delh = (b * d - 1.0) * delh
            h += delh
            dels = q * delh
            s += dels
            if abs(dels / s) < _EPS:
                converged = True
                break
        h = a1 * h
        rkmu = math.sqrt(pi / (2.0 * x)) * math.exp(-x) / s
        rk1 = rkmu * (xmu + x + 0.5 - h) * xi
    for i in range(1, nl + 1):
        rktemp = (xmu + i) * xi2 * rk1 + rkmu
        rkmu = rk1
        rk1 = rktemp
    if not converged:
        return -1.0
    return rkmu


def bessel_k(nu: float, x: float) -> float:
    """Modified Bessel function of the second kind, ``K_nu(x)``.

    Parameters
    ----------
    nu : float
        Order, ``-2 <= nu <= 2``. ``K_nu = K_-nu``.
    x : float
        Argument, ``x > 0``.
    """
    nu = float(nu)
    x = float(x)
    if not math.isfinite(x) or x <= 0.0:
        raise DomainError(f"bessel_k needs x > 0, got {x!r}")
    if not math.isfinite(nu) or abs(nu) > NU_LIMIT:
        raise DomainError(f"bessel_k order must lie in [-{NU_LIMIT}, {NU_LIMIT}], got {nu!r}")
    r = _bessel_k_core(nu, x, _RGAMMA)
    if r < 0.0:
        raise NumericError(f"bessel_k({nu}, {x}) did not converge")
    return r


@dataclass(frozen=True)
class VonKarmanParams:
    """Parameters of the von Karman covariance ``A^2 C (z/L)^nu K_nu(z/L)``.

    ``amplitude`` is in log10(ohm-m) units, ``length`` in meters.
    """

    amplitude: float = 1.0
    scale: float = 1.0
    length: float = 100.0
    nu: float = 0.5

    def __post_init__(self):
        if not self.amplitude > 0:
            raise ValidationError(f"amplitude must be > 0, got {self.amplitude}")
        if not self.scale > 0:
            raise ValidationError(f"scale must be > 0, got {self.scale}")
        if not self.length > 0:
            raise ValidationError(f"length must be > 0, got {self.length}")
        if not 0.0 < self.nu <= NU_LIMIT:
            raise ValidationError(f"nu must lie in (0, {NU_LIMIT}], got {self.nu}")

    @property
    def variance(self) -> float:
        """Covariance at zero lag."""
        return self.amplitude**2 * self.scale * 2.0 ** (self.nu - 1.0) * math.gamma(self.nu)


def von_karman_cov(z: float, p: VonKarmanParams) -> float:
    """Covariance of log-resistivity at separation ``z`` (meters)."""
    z = float(z)
    if not z >= 0.0:
        raise DomainError(f"lag must be >= 0, got {z!r}")
    if z == 0.0:
        return p.variance
    t = z / p.length
    k = bessel_k(p.nu, t)
    return p.amplitude**2 * p.scale * t**p.nu * k


def von_karman_matrix(depths, p: VonKarmanParams) -> np.ndarray:
    """Covariance matrix ``cov(|d_i - d_j|)`` for a list of depths."""
    d = np.asarray(depths, dtype=np.float64)
    n = d.shape[0]
    out = np.empty((n, n))
    cache = {}
    for i in range(n):
        for j in range(i, n):
            lag = abs(float(d[i] - d[j]))
            v = cache.get(lag)
            if v is None:
                v = cache[lag] = von_karman_cov(lag, p)
            out[i, j] = out[j, i] = v
    return out
