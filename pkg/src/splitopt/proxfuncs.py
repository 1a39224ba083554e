"""Proximable convex functions.

Each class evaluates its function and computes the proximity operator

    prox_{t f}(v) = argmin_x  0.5 ||x - v||^2 + t f(x),   t > 0,

exactly.  Conjugate proxes are derived through the Moreau decomposition

    prox_{t f*}(v) = v - t prox_{f / t}(v / t),

so no conjugate ever needs its own formula.  Indicator functions return the
+inf sentinel from ``value`` when their constraint is violated; numpy's inf
propagates through objective sums without corrupting finite comparisons.

All instances are immutable and every method is pure.
"""

import numpy as np

__all__ = [
    "ProxFunction",
    "L1Norm",
    "GroupL21",
    "NonnegativeIndicator",
    "BoxIndicator",
    "NuclearNorm",
    "QuadraticDistance",
    "ZeroFunction",
]


def _soft_threshold(v, t):
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


class ProxFunction:
    """Base class; subclasses provide ``value`` and ``_prox``."""

    kind = "abstract"
    weight = 1.0

    def value(self, x):
        raise NotImplementedError

    def _prox(self, step, v):
        raise NotImplementedError

    def prox(self, step, v):
        """prox_{step * f}(v), the exact minimizer of 0.5||x-v||^2 + step f(x)."""
        if step <= 0:
            raise ValueError(f"prox step must be positive, got {step}")
        return self._prox(float(step), np.asarray(v, dtype=float).ravel())

    def prox_conjugate(self, step, v):
        """prox_{step * f*}(v) via the Moreau decomposition."""
        if step <= 0:
            raise ValueError(f"prox step must be positive, got {step}")
        v = np.asarray(v, dtype=float).ravel()
        return v - step * self.prox(1.0 / step, v / step)

    def scaled_conjugate_prox(self, lam, v):
        """prox_{(lam * f)*}(v) = lam * prox_{f* / lam}(v / lam)."""
        if lam <= 0:
            raise ValueError(f"scaling must be positive, got {lam}")
        v = np.asarray(v, dtype=float).ravel()
        return lam * self.prox_conjugate(1.0 / lam, v / lam)

    def envelope_gradient(self, lam, x):
        """Gradient (x - prox_{lam f}(x)) / lam of the Moreau envelope; (1/lam)-Lipschitz."""
        if lam <= 0:
            raise ValueError(f"smoothing parameter must be positive, got {lam}")
        x = np.asarray(x, dtype=float).ravel()
        return (x - self.prox(lam, x)) / lam

    def envelope_value(self, lam, x):
        """inf_y f(y) + ||x - y||^2 / (2 lam), the infimum attained at the prox."""
        if lam <= 0:
            raise ValueError(f"smoothing parameter must be positive, got {lam}")
        x = np.asarray(x, dtype=float).ravel()
        p = self.prox(lam, x)
        return float(self.value(p) + np.sum((x - p) ** 2) / (2.0 * lam))


class L1Norm(ProxFunction):
    """weight * ||x||_1; prox is soft thresholding."""

    kind = "l1"

    def __init__(self, weight):
        if weight < 0:
            raise ValueError("weight must be nonnegative")
        self.weight = float(weight)

    def value(self, x):
        return self.weight * float(np.sum(np.abs(x)))

    def _prox(self, step, v):
        return _soft_threshold(v, step * self.weight)


class GroupL21(ProxFunction):
    """weight * sum_i sqrt(y_i^2 + y_{n+i}^2) on stacked vectors of even length.

    Entry i is paired with entry n+i, matching the layout of the stacked 2-d
    gradient, so this is the isotropic total variation of the gradient image.
    The prox shrinks each pair radially.
    """

    kind = "group-l21"

    def __init__(self, weight):
        if weight < 0:
            raise ValueError("weight must be nonnegative")
        self.weight = float(weight)

    @staticmethod
    def _split(x):
        if x.size % 2:
            raise ValueError(f"grouped norm needs an even-length vector, got {x.size}")
        n = x.size // 2
        return x[:n], x[n:]

    def value(self, x):
        a, b = self._split(np.asarray(x, dtype=float).ravel())
        return self.weight * float(np.sum(np.hypot(a, b)))

    def _prox(self, step, v):
        a, b = self._split(v)
        norms = np.hypot(a, b)
        scale = np.zeros_like(norms)
        nz = norms > 0
        scale[nz] = np.maximum(0.0, 1.0 - step * self.weight / norms[nz])
        return np.concatenate([a * scale, b * scale])


class NonnegativeIndicator(ProxFunction):
    """Indicator of the nonnegative orthant; prox is the projection max(v, 0)."""

    kind = "indicator-nonneg"

    def value(self, x):
        return 0.0 if np.min(x) >= 0 else np.inf

    def _prox(self, step, v):
        return np.maximum(v, 0.0)


class BoxIndicator(ProxFunction):
    """Indicator of the box [lower, upper]^n; prox clamps coordinatewise."""

    kind = "indicator-box"

    def __init__(self, lower, upper):
        if not lower <= upper:
            raise ValueError(f"empty box: [{lower}, {upper}]")
        self.lower = float(lower)
        self.upper = float(upper)

    def value(self, x):
        if np.min(x) >= self.lower and np.max(x) <= self.upper:
            return 0.0
        return np.inf

    def _prox(self, step, v):
        return np.clip(v, self.lower, self.upper)


class NuclearNorm(ProxFunction):
    """weight * (sum of singular values) of a matrix stored flattened.

    The prox is singular value soft thresholding through a full dense SVD,
    which is exact at the matrix sizes used here.  Thresholded singular
    values below 1e-12 are snapped to zero.
    """

    kind = "nuclear"

    def __init__(self, weight, shape):
        if weight < 0:
            raise ValueError("weight must be nonnegative")
        rows, cols = int(shape[0]), int(shape[1])
        if rows < 1 or cols < 1:
            raise ValueError(f"invalid matrix shape {shape}")
        self.weight = float(weight)
        self.shape = (rows, cols)

    def _as_matrix(self, x):
        rows, cols = self.shape
        if x.size != rows * cols:
            raise ValueError(
                f"nuclear norm expects a flattened {rows}x{cols} matrix, got length {x.size}"
            )
        return x.reshape(rows, cols)

    def value(self, x):
        m = self._as_matrix(np.asarray(x, dtype=float).ravel())
        return self.weight * float(np.sum(np.linalg.svd(m, compute_uv=False)))

    def _prox(self, step, v):
        m = self._as_matrix(v)
        u, s, vt = np.linalg.svd(m, full_matrices=False)
        s = np.maximum(s - step * self.weight, 0.0)
        s[s < 1e-12] = 0.0
        return ((u * s) @ vt).ravel()


class QuadraticDistance(ProxFunction):
    """(weight / 2) ||x - center||^2; prox_{t f}(v) = (v + t w center) / (1 + t w)."""

    kind = "quadratic-distance"

    def __init__(self, weight, center):
        if weight < 0:
            raise ValueError("weight must be nonnegative")
        self.weight = float(weight)
        self.center = np.asarray(center, dtype=float).ravel()

    def value(self, x):
        return 0.5 * self.weight * float(np.sum((np.asarray(x, dtype=float).ravel() - self.center) ** 2))

    def _prox(self, step, v):
        tw = step * self.weight
        return (v + tw * self.center) / (1.0 + tw)


class ZeroFunction(ProxFunction):
    """The zero function; prox is the identity."""

    kind = "zero"
    weight = 0.0

    def value(self, x):
        return 0.0

    def _prox(self, step, v):
        return v.copy()
