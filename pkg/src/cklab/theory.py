"""Closed-form and numerical predictions for bulk edges and outliers.

Two prediction routes coexist deliberately.  The closed form for the
rank-one-spike case is computed under two conventions, because the literal
supercritical/subcritical pair

    theta1 (1+a)(gamma+a)/a        /   (1+sqrt(gamma))^2

is not covariant under rescaling the activation (the subcritical branch
forgets theta1), while the covariant pair

    (theta1+a)(theta1*gamma+a)/a   /   theta1 (1+sqrt(gamma))^2

agrees with it exactly at theta1 = 1, is continuous at the threshold
a = sqrt(gamma) * theta1, and scales linearly when (theta1, a) -> (c*theta1,
c*a).  The covariant form is the default headline; both are always reported.
The second route inverts an empirical D-transform and needs no closed-form
bulk, which is what covers the general mean-slope (theta2 != 0) case.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .activations import ThetaParams
from .errors import HypothesisError, NumericError, ParameterError
from .spectra import SpectrumResult

__all__ = [
    "mp_edges",
    "mp_density",
    "mp_zero_mass",
    "mp_cdf",
    "ks_distance",
    "PredictionReport",
    "bbp_prediction",
    "d_transform",
    "outlier_from_d_transform",
    "classify_outliers",
    "wigner_rho",
    "wigner_identity_residual",
]

CONVENTIONS = ("paper", "covariant")


def mp_edges(gamma: float, theta1: float) -> tuple[float, float]:
    """Support edges theta1 * (1 -+ sqrt(gamma))^2 of the Marchenko-Pastur bulk."""
    if gamma <= 0 or theta1 <= 0:
        raise ParameterError(f"gamma and theta1 must be positive, got {gamma}, {theta1}")
    r = math.sqrt(gamma)
    return theta1 * (1.0 - r) ** 2, theta1 * (1.0 + r) ** 2


def mp_zero_mass(gamma: float) -> float:
    """Weight of the atom at zero: max(0, 1 - 1/gamma)."""
    return max(0.0, 1.0 - 1.0 / gamma)


def mp_density(x, gamma: float, theta1: float):
    """Absolutely continuous Marchenko-Pastur density at x (shape gamma, scale theta1)."""
    lo, hi = mp_edges(gamma, theta1)
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    inside = (x > lo) & (x < hi) & (x > 0)
    xi = x[inside]
    out[inside] = np.sqrt((hi - xi) * (xi - lo)) / (2.0 * np.pi * theta1 * gamma * xi)
    return out


def mp_cdf(x, gamma: float, theta1: float, grid: int = 4001):
    """Marchenko-Pastur CDF, including the atom at zero when gamma > 1.

    The bulk integral uses the arcsine substitution that removes both
    square-root edge singularities, so accuracy is uniform up to the edges.
    """
    lo, hi = mp_edges(gamma, theta1)
    t = np.linspace(0.0, np.pi, grid)
    xs = 0.5 * (hi + lo) - 0.5 * (hi - lo) * np.cos(t)
    integrand = mp_density(xs, gamma, theta1) * 0.5 * (hi - lo) * np.sin(t)
    cum = np.concatenate(
        [[0.0], np.cumsum(0.5 * (integrand[1:] + integrand[:-1]) * np.diff(t))]
    )
    atom = mp_zero_mass(gamma)
    cum *= (1.0 - atom) / cum[-1]  # exact total bulk mass
    x = np.asarray(x, dtype=float)
    out = atom + np.interp(x, xs, cum, left=0.0, right=1.0 - atom)
    out = np.where(x < 0.0, 0.0, out)
    return out


def ks_distance(sample, cdf_values_or_fn, *args) -> float:
    """Kolmogorov distance between an eigenvalue sample and a reference CDF.

    ``cdf_values_or_fn`` is either a callable evaluated on the sorted sample
    or a precomputed array of CDF values at the sorted sample points.
    """
    s = np.sort(np.asarray(sample, dtype=float))
    n = s.size
    f = cdf_values_or_fn(s, *args) if callable(cdf_values_or_fn) else np.asarray(cdf_values_or_fn)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))


@dataclass(frozen=True)
class PredictionReport:
    """Closed-form top-eigenvalue prediction with every input echoed."""

    bulk_edge_low: float
    bulk_edge_high: float
    alpha: float
    supercritical: bool
    predicted_lambda1_paper: float
    predicted_lambda1_covariant: float
    convention: str
    theta1: float
    theta2: float
    theta3: float
    kappa: float
    phi: float
    psi: float
    gamma: float

    @property
    def predicted_lambda1(self) -> float:
        """Headline value under the selected convention."""
        if self.convention == "paper":
            return self.predicted_lambda1_paper
        return self.predicted_lambda1_covariant

    def to_json(self, path=None):
        doc = {
            "bulk_edge_low": self.bulk_edge_low,
            "bulk_edge_high": self.bulk_edge_high,
            "alpha": self.alpha,
            "supercritical": self.supercritical,
            "predicted_lambda1": self.predicted_lambda1,
            "predicted_lambda1_paper": self.predicted_lambda1_paper,
            "predicted_lambda1_covariant": self.predicted_lambda1_covariant,
            "convention": self.convention,
            "inputs": {
                "theta1": self.theta1,
                "theta2": self.theta2,
                "theta3": self.theta3,
                "kappa": self.kappa,
                "phi": self.phi,
                "psi": self.psi,
                "gamma": self.gamma,
            },
        }
        if path is not None:
            with open(path, "w") as fh:
                json.dump(doc, fh, sort_keys=True, indent=1)
                fh.write("\n")
        return doc


def bbp_prediction(
    thetas: ThetaParams,
    kappa: float,
    phi: float,
    psi: float,
    convention: str = "covariant",
) -> PredictionReport:
    """Predicted largest eigenvalue for the rank-one-spike regime (theta2 = 0).

    The spike strength is a = theta3 * kappa / psi; the eigenvalue separates
    from the bulk when a > sqrt(gamma) * theta1 and then sits at the
    closed-form position (see module docstring for the two conventions).
    Raises :class:`HypothesisError` when theta2 != 0; that regime has no
    closed form here and callers should invert the D-transform instead.
    """
    if convention not in CONVENTIONS:
        raise ParameterError(f"convention must be one of {CONVENTIONS}, got {convention!r}")
    if phi <= 0 or psi <= 0:
        raise ParameterError(f"phi and psi must be positive, got {phi}, {psi}")
    if kappa < 0:
        raise ParameterError(f"kappa must be >= 0, got {kappa}")
    t1, t2, t3 = thetas.theta1, thetas.theta2, thetas.theta3
    if abs(t2) >= 1e-8:
        raise HypothesisError(
            f"closed-form prediction assumes theta2 = 0, got theta2={t2}; "
            "use outlier_from_d_transform on an empirical bulk instead"
        )
    gamma = phi / psi
    alpha = t3 * kappa / psi
    lo, hi = mp_edges(gamma, t1)
    supercritical = alpha > math.sqrt(gamma) * t1
    if supercritical:
        paper = t1 * (1.0 + alpha) * (gamma + alpha) / alpha
        covariant = (t1 + alpha) * (t1 * gamma + alpha) / alpha
    else:
        paper = (1.0 + math.sqrt(gamma)) ** 2
        covariant = hi
    return PredictionReport(
        bulk_edge_low=lo,
        bulk_edge_high=hi,
        alpha=alpha,
        supercritical=supercritical,
        predicted_lambda1_paper=paper,
        predicted_lambda1_covariant=covariant,
        convention=convention,
        theta1=t1,
        theta2=t2,
        theta3=t3,
        kappa=kappa,
        phi=phi,
        psi=psi,
        gamma=gamma,
    )


def _eigs(spectrum) -> np.ndarray:
    if isinstance(spectrum, SpectrumResult):
        return spectrum.eigenvalues
    return np.asarray(spectrum, dtype=float)


def d_transform(spectrum, z: float, gamma: float) -> float:
    """Empirical D-transform at a real point z above the sampled support.

    D(z) = phi(z) * (gamma * phi(z) + (1 - gamma)/z) with
    phi(z) = mean of z / (z^2 - lambda_i).  Defined for z^2 above every
    sampled eigenvalue; decreasing to 0 as z grows.
    """
    eigs = _eigs(spectrum)
    z = float(z)
    if z <= 0 or z * z <= eigs.max():
        raise ParameterError(
            f"z={z} is inside or below the sampled support (max eigenvalue "
            f"{eigs.max():.6g}); the transform needs z^2 above it"
        )
    phi_hat = float(np.mean(z / (z * z - eigs)))
    return phi_hat * (gamma * phi_hat + (1.0 - gamma) / z)


def outlier_from_d_transform(
    spectrum,
    alpha: float,
    gamma: float,
    square_convention: bool = True,
    edge_pad: float = 1e-3,
) -> float | None:
    """Largest-eigenvalue prediction by inverting the empirical D-transform.

    Solves D(z*) = 1/alpha by bisection just above the sampled support edge
    and returns z*^2 (``square_convention=True``, the choice consistent with
    the closed form at theta2 = 0) or z* itself.  Returns ``None`` when
    1/alpha is not reachable, i.e. the spike is too weak to pull an
    eigenvalue out of the bulk.
    """
    eigs = _eigs(spectrum)
    if alpha <= 0:
        raise ParameterError(f"alpha must be positive, got {alpha}")
    z_lo = max(math.sqrt(max(eigs.max(), 0.0)) * (1.0 + edge_pad), 1e-12)
    target = 1.0 / alpha
    d_edge = d_transform(eigs, z_lo, gamma)
    if target >= d_edge:
        return None
    z_hi = z_lo
    for _ in range(200):
        z_hi *= 2.0
        if d_transform(eigs, z_hi, gamma) < target:
            break
    else:
        raise NumericError(
            f"failed to bracket D(z) = {target:.6g} starting from z={z_lo:.6g}"
        )
    lo, hi = z_lo, z_hi
    while hi - lo > 1e-14 * hi:
        mid = 0.5 * (lo + hi)
        if d_transform(eigs, mid, gamma) > target:
            lo = mid
        else:
            hi = mid
    z_star = 0.5 * (lo + hi)
    return z_star * z_star if square_convention else z_star


def classify_outliers(
    spectrum, bulk_edge_high: float, buffer_constant: float = 5.0, n1: int | None = None
) -> np.ndarray:
    """Eigenvalues beyond the bulk edge by more than the finite-size buffer.

    The cut is bulk_edge_high * (1 + c * n1^(-2/3)); the n1^(-2/3) scale is
    the size of edge fluctuations, so c (default 5) separates genuine spikes
    from ordinary edge noise at simulation sizes.
    """
    eigs = _eigs(spectrum)
    if n1 is None:
        if not isinstance(spectrum, SpectrumResult):
            raise ParameterError("pass n1 explicitly when classifying a bare array")
        n1 = spectrum.shape.n1
    cut = bulk_edge_high * (1.0 + buffer_constant * float(n1) ** (-2.0 / 3.0))
    return eigs[eigs > cut]


def wigner_rho(theta1: float, x: float) -> float:
    """The square-matrix cross-check map rho(x) = x + sqrt(theta1)/x.

    At theta1 = 1, rho(sqrt(a))^2 equals the closed-form outlier position
    (1+a)^2/a of the gamma = 1 case; that identity is asserted on every call.
    For theta1 != 1 the identity fails (see ``wigner_identity_residual``) and
    this form is kept only as the unit-scale consistency check.
    """
    if x <= 0:
        raise ParameterError(f"x must be positive, got {x}")
    rho = x + math.sqrt(theta1) / x
    if theta1 == 1.0:
        a = x * x
        assert abs(rho * rho * a - (1.0 + a) ** 2) <= 1e-12 * (1.0 + a) ** 2
    return rho


def wigner_identity_residual(theta1: float, x: float) -> float:
    """rho(x)^2 minus the covariant gamma = 1 outlier position at a = x^2.

    Zero exactly when theta1 = 1; nonzero otherwise, flagging that the
    unit-scale map does not extend covariantly.
    """
    rho = wigner_rho(theta1, x)
    a = x * x
    return rho * rho - (theta1 + a) ** 2 / a
