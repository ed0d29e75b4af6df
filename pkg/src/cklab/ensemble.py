"""Factor matrices: the nonlinear kernel ensemble and its linear surrogates.

Everything here produces an n1 x m factor F; the object of study is always
the kernel (1/m) F F^T.  The nonlinear ensemble applies an activation
entrywise to a normalized product of two independent rectangular matrices.
The surrogate ensembles replace it by Gaussian noise plus, depending on the
variant, a product term (matching the mean-slope parameter theta2) and a
low-rank spike whose strength combines the half-curvature parameter theta3
with the entry laws' excess kurtosis.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from .activations import Activation, ThetaParams
from .distributions import EntryDistribution, sample_matrix
from .errors import DimensionError, HypothesisError, NumericError, ParameterError
from .streams import stream

__all__ = [
    "Shape",
    "FactorMatrix",
    "SURROGATE_VARIANTS",
    "conjugate_kernel_factor",
    "linear_surrogate_factor",
    "save_factor",
    "load_factor",
]

SURROGATE_VARIANTS = (
    "linear-plain",
    "linear-j2",
    "info-plus-noise-j",
    "gaussian-spike",
)

# below this, the product term is numerically indistinguishable from absent
# (entry perturbation < 1e-8) and its n0-sized matmul is skipped
_THETA2_NEGLIGIBLE = 1e-16


@dataclass(frozen=True)
class Shape:
    """Dimensions (n0, n1, m) and the derived aspect ratios."""

    n0: int
    n1: int
    m: int

    def __post_init__(self):
        for name in ("n0", "n1", "m"):
            v = getattr(self, name)
            if v < 2:
                raise DimensionError(f"{name} must be >= 2, got {v}")

    @property
    def phi(self) -> float:
        return self.n0 / self.m

    @property
    def psi(self) -> float:
        return self.n0 / self.n1

    @property
    def gamma(self) -> float:
        """Aspect ratio n1/m of the factor, equal to phi/psi."""
        return self.phi / self.psi


@dataclass(frozen=True)
class FactorMatrix:
    """An n1 x m factor with provenance; the kernel is (1/m) F F^T."""

    entries: np.ndarray
    model_tag: str
    seed: int
    shape: Shape
    trial: int = 0

    def __post_init__(self):
        n1, m = self.entries.shape
        if (n1, m) != (self.shape.n1, self.shape.m):
            raise DimensionError(
                f"entries {n1}x{m} do not match shape {self.shape.n1}x{self.shape.m}"
            )


def conjugate_kernel_factor(
    shape: Shape,
    dist_w: EntryDistribution,
    dist_x: EntryDistribution,
    act: Activation,
    seed: int,
    trial: int = 0,
    dtype=np.float64,
) -> FactorMatrix:
    """Nonlinear factor Y = f(W X / sqrt(n0)) with f centered for this scale.

    W and X are drawn from role-separated streams of ``seed``; identical
    arguments reproduce Y bit for bit.
    """
    dtype = np.dtype(dtype)
    sigma = math.sqrt(dist_w.variance * dist_x.variance)
    act = act.centered_for(sigma)
    w = sample_matrix(dist_w, shape.n1, shape.n0, seed, role="w", trial=trial, dtype=dtype)
    x = sample_matrix(dist_x, shape.n0, shape.m, seed, role="x", trial=trial, dtype=dtype)
    pre = w @ x
    del w, x
    pre *= dtype.type(1.0 / math.sqrt(shape.n0))
    with np.errstate(over="ignore", invalid="ignore"):
        y = np.asarray(act(pre), dtype=dtype)
    if not np.all(np.isfinite(y)):
        bad = ~np.isfinite(y)
        worst = float(np.max(np.abs(pre[bad])))
        raise NumericError(
            f"activation {act.label} overflowed on entries with pre-activation "
            f"magnitude up to {worst:.6g}"
        )
    return FactorMatrix(y, "nonlinear", seed, shape, trial)


def linear_surrogate_factor(
    shape: Shape,
    thetas: ThetaParams,
    kappa_w: float,
    kappa_x: float,
    variant: str,
    seed: int,
    trial: int = 0,
    dtype=np.float64,
) -> FactorMatrix:
    """Linear stand-in factor for the nonlinear ensemble.

    All variants share the base

        sqrt(theta1 - theta2) * Z + sqrt(theta2 / n0) * W X

    with independent standard Gaussian Z (n1 x m), W (n1 x n0), X (n0 x m),
    and differ in the added spike:

    - ``linear-plain``: no spike (the bulk-law model).
    - ``linear-j2``: rank-2 block spike sqrt(4 theta3 / n0) *
      blockdiag(sqrt(kappa_w) J, sqrt(kappa_x) J) with all-ones blocks of
      sizes ceil(n1/2) x ceil(m/2) and floor(n1/2) x floor(m/2).
    - ``info-plus-noise-j``: rank-1 all-ones spike
      sqrt(theta3 * max(kappa_w, kappa_x) / n0) * J; requires theta2 = 0
      (|theta2| < 1e-8), the hypothesis under which its top eigenvalue has a
      closed form.
    - ``gaussian-spike``: same strength but J replaced by u v^T with
      independent standard Gaussian vectors u, v.

    The excess kurtoses are passed explicitly so surrogates can be probed
    counterfactually, independent of any concrete entry law.
    """
    dtype = np.dtype(dtype)
    if variant not in SURROGATE_VARIANTS:
        raise ParameterError(
            f"unknown variant {variant!r}; expected one of {SURROGATE_VARIANTS}"
        )
    t1, t2, t3 = thetas.theta1, thetas.theta2, thetas.theta3
    if t2 < 0 or t3 < 0 or t1 < 0:
        raise ParameterError(f"theta parameters must be >= 0, got {thetas}")
    if t1 < t2:
        raise ParameterError(
            f"theta1={t1} < theta2={t2}: noise weight sqrt(theta1-theta2) undefined"
        )
    n0, n1, m = shape.n0, shape.n1, shape.m

    f = stream(seed, "z_tilde", trial).standard_normal((n1, m), dtype=dtype)
    f *= dtype.type(math.sqrt(t1 - t2))
    if t2 > _THETA2_NEGLIGIBLE:
        wt = stream(seed, "w_tilde", trial).standard_normal((n1, n0), dtype=dtype)
        xt = stream(seed, "x_tilde", trial).standard_normal((n0, m), dtype=dtype)
        prod = wt @ xt
        del wt, xt
        prod *= dtype.type(math.sqrt(t2 / n0))
        f += prod
        del prod

    if variant == "linear-j2":
        if kappa_w < 0 or kappa_x < 0:
            raise ParameterError("linear-j2 needs kappa_w, kappa_x >= 0")
        amp = math.sqrt(4.0 * t3 / n0)
        r, c = (n1 + 1) // 2, (m + 1) // 2
        f[:r, :c] += dtype.type(amp * math.sqrt(kappa_w))
        f[r:, c:] += dtype.type(amp * math.sqrt(kappa_x))
    elif variant == "info-plus-noise-j":
        if abs(t2) >= 1e-8:
            raise HypothesisError(
                f"info-plus-noise-j requires theta2 = 0 (got {t2}); "
                "use linear-j2 or gaussian-spike for the general case"
            )
        kappa = max(kappa_w, kappa_x)
        if kappa < 0:
            raise ParameterError("spike strength needs max kappa >= 0")
        f += dtype.type(math.sqrt(t3 * kappa / n0))
    elif variant == "gaussian-spike":
        kappa = max(kappa_w, kappa_x)
        if kappa < 0:
            raise ParameterError("spike strength needs max kappa >= 0")
        u = stream(seed, "spike_u", trial).standard_normal(n1, dtype=dtype)
        v = stream(seed, "spike_v", trial).standard_normal(m, dtype=dtype)
        u = u * dtype.type(math.sqrt(t3 * kappa / n0))
        f += u[:, None] * v[None, :]

    return FactorMatrix(f, variant, seed, shape, trial)


_MAGIC = b"CKFM"
_HEADER = struct.Struct("<4sIQQQqq32s")


def save_factor(factor: FactorMatrix, path) -> None:
    """Cache a factor: fixed header, then row-major float64 entries."""
    tag = factor.model_tag.encode("utf-8")
    if len(tag) > 32:
        raise ParameterError(f"model tag too long to serialize: {factor.model_tag!r}")
    header = _HEADER.pack(
        _MAGIC, 1,
        factor.shape.n0, factor.shape.n1, factor.shape.m,
        factor.seed, factor.trial, tag.ljust(32, b"\0"),
    )
    data = np.ascontiguousarray(factor.entries, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(data.tobytes())


def load_factor(path) -> FactorMatrix:
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
        if len(raw) != _HEADER.size:
            raise NumericError(f"truncated factor file {path}")
        magic, version, n0, n1, m, seed, trial, tag = _HEADER.unpack(raw)
        if magic != _MAGIC or version != 1:
            raise NumericError(f"not a factor cache file: {path}")
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != n1 * m:
        raise NumericError(
            f"factor file {path} holds {data.size} entries, expected {n1 * m}"
        )
    entries = data.reshape(n1, m).copy()
    return FactorMatrix(
        entries, tag.rstrip(b"\0").decode("utf-8"), seed, Shape(n0, n1, m), trial
    )
