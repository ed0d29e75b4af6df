"""Activation functions and their Gaussian-moment parameters.

An activation enters the spectral theory only through three numbers computed
against the Gaussian the pre-activations approach: its variance theta1, its
squared mean slope theta2, and its squared mean half-curvature theta3.  All
three are evaluated by Gauss-Hermite quadrature with node doubling, after the
function has been centered so that E f(sigma * N) = 0.

The centering constants for monomials are the Gaussian moments
E N^(2k) = (2k-1)!! (odd double factorials).  Writing the even double
factorial (2k)!! here would be wrong already at k = 1 (E N^2 = 1, not 2);
``gaussian_moment`` keeps that straight and centering always uses the exact
moment, cross-checked by quadrature in the tests.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable

import numpy as np
from numpy.polynomial import hermite_e as herme
from numpy.polynomial import polynomial as npoly

from .errors import ConfigError, ParameterError, QuadratureError

__all__ = [
    "Activation",
    "ThetaParams",
    "gaussian_expectation",
    "theta_params",
    "identity",
    "relu",
    "cos_family",
    "even_centered_monomial",
    "taylor_centered",
    "polynomial",
    "hermite_mixture",
    "parse_activation",
    "double_factorial",
    "gaussian_moment",
]

# central-difference step; analytic derivatives are always preferred
_FD_STEP = float(np.finfo(float).eps) ** (1.0 / 3.0)


def double_factorial(n: int) -> int:
    """n!! with the convention 0!! = (-1)!! = 1."""
    out = 1
    while n > 1:
        out *= n
        n -= 2
    return out


def gaussian_moment(j: int) -> int:
    """E N^j for standard Gaussian N: (j-1)!! for even j, 0 for odd j."""
    return 0 if j % 2 else double_factorial(j - 1)


@lru_cache(maxsize=32)
def _gh_nodes(n: int):
    # Golub-Welsch on the Jacobi matrix of the e^{-t^2} weight; numpy's
    # hermgauss evaluates the polynomials directly and overflows past ~500
    # nodes, while the eigenvalue route stays finite (extreme-node weights
    # underflow harmlessly to zero)
    jac = np.zeros((n, n))
    off = np.sqrt(np.arange(1, n) / 2.0)
    idx = np.arange(n - 1)
    jac[idx, idx + 1] = off
    jac[idx + 1, idx] = off
    nodes, vecs = np.linalg.eigh(jac)
    weights = vecs[0] ** 2  # already normalized: sum = 1 = integral / sqrt(pi)
    return np.sqrt(2.0) * nodes, weights


def gaussian_expectation(
    g: Callable[[np.ndarray], np.ndarray],
    sigma: float = 1.0,
    tol: float = 1e-10,
    min_nodes: int = 64,
    max_nodes: int = 1024,
) -> float:
    """E[g(sigma * N)] by Gauss-Hermite quadrature with node doubling.

    Doubles the node count until two successive estimates differ by less than
    ``tol``; raises :class:`QuadratureError` (reporting the last two
    estimates) if ``max_nodes`` is reached without stabilizing.
    """
    prev = None
    n = min_nodes
    while True:
        x, w = _gh_nodes(n)
        vals = np.asarray(g(sigma * x), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise QuadratureError(
                f"integrand not finite on quadrature nodes (sigma={sigma}, n={n})"
            )
        est = float(w @ vals)
        if prev is not None and abs(est - prev) < tol * max(1.0, abs(est)):
            return est
        if n >= max_nodes:
            raise QuadratureError(
                f"Gauss-Hermite did not stabilize below {tol:g} at {max_nodes} "
                f"nodes; last two estimates {prev!r} and {est!r}"
            )
        prev, n = est, 2 * n


@dataclass(frozen=True)
class Activation:
    """An entrywise function with optional analytic derivatives.

    ``shift`` is the constant subtracted from ``fn`` so the centered function
    has zero Gaussian mean at scale ``shift_sigma``; calling the activation
    applies the shift.  ``smooth`` marks whether the function satisfies the
    smoothness hypotheses of the spectral theory; non-smooth activations (e.g.
    relu) are still usable in simulation but reports flag them.
    """

    label: str
    fn: Callable[[np.ndarray], np.ndarray]
    d1: Callable[[np.ndarray], np.ndarray] | None = None
    d2: Callable[[np.ndarray], np.ndarray] | None = None
    shift: float = 0.0
    shift_sigma: float | None = None
    smooth: bool = True

    def __call__(self, x):
        out = self.fn(np.asarray(x))
        if self.shift != 0.0:
            out = out - self.shift
        return out

    def deriv1(self, x):
        if self.d1 is not None:
            return self.d1(np.asarray(x))
        x = np.asarray(x, dtype=float)
        h = _FD_STEP * np.maximum(1.0, np.abs(x))
        return (self.fn(x + h) - self.fn(x - h)) / (2.0 * h)

    def deriv2(self, x):
        if self.d2 is not None:
            return self.d2(np.asarray(x))
        x = np.asarray(x, dtype=float)
        h = _FD_STEP * np.maximum(1.0, np.abs(x))
        return (self.fn(x + h) - 2.0 * self.fn(x) + self.fn(x - h)) / (h * h)

    def centered_for(self, sigma: float, tol: float = 1e-10) -> "Activation":
        """Return a copy whose Gaussian mean at scale ``sigma`` vanishes."""
        mean = gaussian_expectation(self.__call__, sigma, tol)
        if abs(mean) < 1e-12:
            return self
        return replace(self, shift=self.shift + mean, shift_sigma=sigma)


@dataclass(frozen=True)
class ThetaParams:
    """Gaussian-moment parameters of a centered activation at a given scale."""

    theta1: float
    theta2: float
    theta3: float
    sigma_product: float

    def as_dict(self) -> dict:
        return {
            "theta1": self.theta1,
            "theta2": self.theta2,
            "theta3": self.theta3,
            "sigma_product": self.sigma_product,
        }


def theta_params(
    act: Activation, sigma_product: float = 1.0, tol: float = 1e-10
) -> ThetaParams:
    """Quadrature values of (theta1, theta2, theta3) at scale ``sigma_product``.

    theta1 = E[f(sN)^2], theta2 = (s E[f'(sN)])^2,
    theta3 = ((s^2 / 2) E[f''(sN)])^2, with s = sigma_product and f centered
    (centering is applied automatically when needed).
    """
    if sigma_product <= 0:
        raise ParameterError(f"sigma_product must be positive, got {sigma_product}")
    s = float(sigma_product)
    g = act.centered_for(s, tol)
    theta1 = gaussian_expectation(lambda x: g(x) ** 2, s, tol)
    slope = gaussian_expectation(g.deriv1, s, tol)
    curve = gaussian_expectation(g.deriv2, s, tol)
    return ThetaParams(
        theta1=theta1,
        theta2=(s * slope) ** 2,
        theta3=(0.5 * s * s * curve) ** 2,
        sigma_product=s,
    )


def identity() -> Activation:
    return Activation(
        "identity",
        lambda x: x,
        d1=lambda x: np.ones_like(x),
        d2=lambda x: np.zeros_like(x),
    )


def relu() -> Activation:
    """max(x, 0); outside the smoothness hypotheses, flagged as such."""
    return Activation(
        "relu",
        lambda x: np.maximum(x, 0),
        smooth=False,
    )


def cos_family(alpha: float) -> Activation:
    """Normalized cosine bump (cos(alpha x) - e^{-alpha^2/2}) / Z(alpha).

    Z(alpha)^2 = e^{-alpha^2} (cosh(alpha^2) - 1) = (1 - e^{-alpha^2})^2 / 2,
    which makes the unit-scale Gaussian mean exactly 0 and theta1 exactly 1;
    the mean slope vanishes by parity, so theta2 = 0 for every alpha while
    theta3 grows as alpha decreases.
    """
    a = float(alpha)
    if a <= 0:
        raise ParameterError(f"cos family needs alpha > 0, got {a}")
    z = -math.expm1(-a * a) / math.sqrt(2.0)  # (1 - e^{-a^2}) / sqrt(2)
    if z == 0.0:
        raise ParameterError(f"cos family normalizer underflows at alpha={a}")
    c = math.exp(-a * a / 2.0)

    def fn(x):
        return (np.cos(a * x) - c) / z

    def d1(x):
        return -a * np.sin(a * x) / z

    def d2(x):
        return -a * a * np.cos(a * x) / z

    return Activation(f"cos(alpha={a!r})", fn, d1=d1, d2=d2)


def even_centered_monomial(k: int, normalize: bool = False) -> Activation:
    """x^(2k) minus its Gaussian mean (2k-1)!!, optionally scaled to theta1 = 1.

    The raw unit-scale variance is (4k-1)!! - ((2k-1)!!)^2; with
    ``normalize=True`` the function is divided by its square root, so k = 1
    yields (x^2 - 1)/sqrt(2).
    """
    if k < 1:
        raise ParameterError(f"monomial order k must be >= 1, got {k}")
    if k > 15:
        raise ParameterError(
            f"k={k}: centering constants exceed the exactly representable "
            "integer range (k <= 15 supported)"
        )
    center = float(gaussian_moment(2 * k))
    scale = 1.0
    if normalize:
        raw_var = float(gaussian_moment(4 * k)) - center**2
        scale = 1.0 / math.sqrt(raw_var)
    p = 2 * k

    def fn(x):
        return scale * (x**p - center)

    def d1(x):
        return (scale * p) * x ** (p - 1)

    def d2(x):
        return (scale * p * (p - 1)) * x ** (p - 2)

    return Activation(f"evenmono(k={k},normalize={str(normalize).lower()})", fn, d1=d1, d2=d2)


def _poly_activation(label: str, coef: np.ndarray) -> Activation:
    """Activation from plain power-basis coefficients with exact derivatives."""
    dcoef = npoly.polyder(coef)
    ddcoef = npoly.polyder(coef, 2)
    return Activation(
        label,
        lambda x: npoly.polyval(x, coef),
        d1=lambda x: npoly.polyval(x, dcoef),
        d2=lambda x: npoly.polyval(x, ddcoef),
    )


def taylor_centered(derivs_at_zero) -> tuple[Activation, float]:
    """Centered truncated Taylor polynomial from derivatives at zero.

    Given d[j] = f^(j)(0) for j = 0..k, returns

        P(x) = sum_{j=1}^{k} d[j] (x^j - E N^j) / j!

    together with the removed constant a = sum_{j=0}^{k} d[j] E N^j / j!.
    P has exact zero Gaussian mean at unit scale by construction.
    """
    d = [float(v) for v in derivs_at_zero]
    if len(d) < 2:
        raise ParameterError("need derivatives at least up to order 1")
    k = len(d) - 1
    a = sum(d[j] * gaussian_moment(j) / math.factorial(j) for j in range(k + 1))
    coef = np.zeros(k + 1)
    for j in range(1, k + 1):
        coef[j] = d[j] / math.factorial(j)
    coef[0] = d[0] - a
    label = "taylor(" + ",".join(f"d{j}={d[j]!r}" for j in range(1, k + 1)) + ")"
    return _poly_activation(label, coef), a


def polynomial(coeffs: dict[int, float]) -> Activation:
    """f(x) = sum_j c_j x^j from {j: c_j}, j >= 1; centered on use."""
    if not coeffs or min(coeffs) < 1:
        raise ParameterError("polynomial needs coefficients for powers >= 1")
    top = max(coeffs)
    coef = np.zeros(top + 1)
    for j, c in coeffs.items():
        coef[j] = float(c)
    # exact unit-scale Gaussian mean, so the common sigma = 1 case needs no quadrature shift
    coef[0] = -sum(float(c) * gaussian_moment(j) for j, c in coeffs.items())
    label = "poly(" + ",".join(f"c{j}={float(coeffs[j])!r}" for j in sorted(coeffs)) + ")"
    return _poly_activation(label, coef)


def hermite_mixture(coeffs, label: str | None = None) -> Activation:
    """f = sum_{k>=1} c_k He_k(x) in the probabilists' Hermite basis.

    Zero-mean at unit scale for free since every He_k with k >= 1 integrates
    to zero against the Gaussian.
    """
    c = np.concatenate([[0.0], np.asarray(coeffs, dtype=float)])
    if c.size < 2:
        raise ParameterError("need at least one Hermite coefficient")
    dc = herme.hermeder(c)
    ddc = herme.hermeder(c, 2)
    if label is None:
        label = "hermite(" + ",".join(
            f"c{k}={float(c[k])!r}" for k in range(1, c.size)
        ) + ")"
    return Activation(
        label,
        lambda x: herme.hermeval(x, c),
        d1=lambda x: herme.hermeval(x, dc),
        d2=lambda x: herme.hermeval(x, ddc),
    )


_CALL_RE = re.compile(r"^([a-z]+)\((.*)\)$")


def parse_activation(text: str) -> Activation:
    """Parse an activation spec string.

    Accepted forms::

        identity
        relu
        cos(alpha=1.5)
        evenmono(k=2,normalize=true)
        poly(c1=0.5,c2=1.0)
        taylor(d1=1.0,d2=0.0,d3=-1.0)
        hermite(c1=1.0,c2=0.25)
    """
    s = text.strip().replace(" ", "")
    if s == "identity":
        return identity()
    if s == "relu":
        return relu()
    m = _CALL_RE.match(s)
    if not m:
        raise ConfigError(f"cannot parse activation spec {text!r}")
    head, body = m.group(1), m.group(2)
    kv = {}
    if body:
        for item in body.split(","):
            key, eq, val = item.partition("=")
            if not eq:
                raise ConfigError(f"expected key=value, got {item!r} in {text!r}")
            kv[key] = val
    try:
        if head == "cos":
            return cos_family(float(kv.pop("alpha")))
        if head == "evenmono":
            k = int(kv.pop("k"))
            norm = kv.pop("normalize", "false").lower()
            if norm not in ("true", "false"):
                raise ConfigError(f"normalize must be true/false, got {norm!r}")
            return even_centered_monomial(k, normalize=(norm == "true"))
        if head == "poly":
            coeffs = {_indexed(key, "c", text): float(v) for key, v in kv.items()}
            return polynomial(coeffs)
        if head == "taylor":
            idx = {_indexed(key, "d", text): float(v) for key, v in kv.items()}
            top = max(idx)
            derivs = [idx.get(j, 0.0) for j in range(top + 1)]
            act, _ = taylor_centered(derivs)
            return act
        if head == "hermite":
            idx = {_indexed(key, "c", text): float(v) for key, v in kv.items()}
            top = max(idx)
            return hermite_mixture([idx.get(j, 0.0) for j in range(1, top + 1)])
    except KeyError as exc:
        raise ConfigError(f"missing field {exc} in activation spec {text!r}") from exc
    except (ValueError, ParameterError) as exc:
        raise ConfigError(f"invalid activation spec {text!r}: {exc}") from exc
    raise ConfigError(f"unknown activation kind {head!r} in {text!r}")


def _indexed(key: str, prefix: str, text: str) -> int:
    if not key.startswith(prefix) or not key[len(prefix):].isdigit():
        raise ConfigError(f"expected {prefix}<j>=value fields, got {key!r} in {text!r}")
    j = int(key[len(prefix):])
    if j < (0 if prefix == "d" else 1):
        raise ConfigError(f"index out of range in {key!r} ({text!r})")
    return j
