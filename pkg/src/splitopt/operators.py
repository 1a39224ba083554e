"""Linear operators with exact adjoints.

Every operator maps flat float vectors to flat float vectors and knows its
domain/codomain dimensions.  Images are handled in flattened row-major form;
the operator itself remembers the grid shape.  Operators are immutable after
construction, and ``apply``/``adjoint_apply`` are pure, so instances can be
shared freely across threads.
"""

import numpy as np

__all__ = [
    "LinearMap",
    "DenseMatrix",
    "Identity",
    "Scaled",
    "Composite",
    "Difference1D",
    "Gradient2D",
    "GaussianBlur",
    "DownsampleAverage",
    "make_difference_1d",
    "make_gradient_2d",
    "make_blur_downsample",
    "estimate_norm",
]


class LinearMap:
    """Base class: a bounded linear operator B with adjoint B^T.

    Subclasses implement ``_apply`` and ``_adjoint``; the public methods only
    add dimension checking.  The defining adjoint property is
    <B x, y> = <x, B^T y> for all x, y.
    """

    kind = "abstract"

    def __init__(self, in_dim, out_dim):
        in_dim, out_dim = int(in_dim), int(out_dim)
        if in_dim <= 0 or out_dim <= 0:
            raise ValueError(f"operator dimensions must be positive, got {in_dim}x{out_dim}")
        self.in_dim = in_dim
        self.out_dim = out_dim

    def apply(self, x):
        x = np.asarray(x, dtype=float).ravel()
        if x.size != self.in_dim:
            raise ValueError(
                f"{self.kind}: apply expects a vector of length {self.in_dim}, got {x.size}"
            )
        return self._apply(x)

    def adjoint_apply(self, y):
        y = np.asarray(y, dtype=float).ravel()
        if y.size != self.out_dim:
            raise ValueError(
                f"{self.kind}: adjoint_apply expects a vector of length {self.out_dim}, got {y.size}"
            )
        return self._adjoint(y)

    __call__ = apply

    def _apply(self, x):
        raise NotImplementedError

    def _adjoint(self, y):
        raise NotImplementedError

    def to_dense(self):
        """Materialize the operator as an (out_dim x in_dim) array."""
        cols = np.eye(self.in_dim)
        return np.column_stack([self._apply(cols[:, j]) for j in range(self.in_dim)])


class DenseMatrix(LinearMap):
    """Wrap an explicit matrix."""

    kind = "dense-matrix"

    def __init__(self, matrix):
        m = np.asarray(matrix, dtype=float)
        if m.ndim != 2:
            raise ValueError("dense operator needs a 2-d array")
        super().__init__(m.shape[1], m.shape[0])
        self.matrix = m

    def _apply(self, x):
        return self.matrix @ x

    def _adjoint(self, y):
        return self.matrix.T @ y

    def to_dense(self):
        return self.matrix.copy()


class Identity(LinearMap):
    kind = "identity"

    def __init__(self, n):
        super().__init__(n, n)

    def _apply(self, x):
        return x.copy()

    def _adjoint(self, y):
        return y.copy()


class Scaled(LinearMap):
    """alpha * B for a scalar alpha and base operator B."""

    kind = "scaled"

    def __init__(self, alpha, base):
        super().__init__(base.in_dim, base.out_dim)
        self.alpha = float(alpha)
        self.base = base

    def _apply(self, x):
        return self.alpha * self.base._apply(x)

    def _adjoint(self, y):
        return self.alpha * self.base._adjoint(y)


class Composite(LinearMap):
    """Chain of operators applied first-to-last; adjoint composes in reverse."""

    kind = "composite"

    def __init__(self, parts):
        parts = list(parts)
        if not parts:
            raise ValueError("composite needs at least one part")
        for a, b in zip(parts, parts[1:]):
            if a.out_dim != b.in_dim:
                raise ValueError(
                    f"composite chain mismatch: {a.kind} outputs {a.out_dim}, "
                    f"{b.kind} expects {b.in_dim}"
                )
        super().__init__(parts[0].in_dim, parts[-1].out_dim)
        self.parts = parts

    def _apply(self, x):
        for p in self.parts:
            x = p._apply(x)
        return x

    def _adjoint(self, y):
        for p in reversed(self.parts):
            y = p._adjoint(y)
        return y


class Difference1D(LinearMap):
    """Forward differences of a length-n signal: (Dx)_i = x_{i+1} - x_i.

    D is the (n-1) x n matrix with rows (-1, 1) on adjacent entries.  The
    eigenvalues of D D^T are 2 - 2 cos(i pi / n), i = 1 .. n-1.
    """

    kind = "difference-1d"

    def __init__(self, n):
        if n < 2:
            raise ValueError(f"difference operator needs n >= 2, got {n}")
        super().__init__(n, n - 1)

    def _apply(self, x):
        return x[1:] - x[:-1]

    def _adjoint(self, y):
        out = np.zeros(self.in_dim)
        out[:-1] -= y
        out[1:] += y
        return out


class Gradient2D(LinearMap):
    """Stacked forward-difference gradient of a rows x cols image.

    Output is (horizontal differences, vertical differences), each padded with
    a zero in the last column/row, so the output length is 2 * rows * cols.
    The largest eigenvalue of D D^T approaches 8 from below.
    """

    kind = "gradient-2d"

    def __init__(self, rows, cols):
        if rows < 2 or cols < 2:
            raise ValueError(f"gradient needs at least a 2x2 image, got {rows}x{cols}")
        super().__init__(rows * cols, 2 * rows * cols)
        self.rows = rows
        self.cols = cols

    def _apply(self, x):
        img = x.reshape(self.rows, self.cols)
        h = np.zeros_like(img)
        v = np.zeros_like(img)
        h[:, :-1] = img[:, 1:] - img[:, :-1]
        v[:-1, :] = img[1:, :] - img[:-1, :]
        return np.concatenate([h.ravel(), v.ravel()])

    def _adjoint(self, y):
        n = self.rows * self.cols
        h = y[:n].reshape(self.rows, self.cols)
        v = y[n:].reshape(self.rows, self.cols)
        out = np.zeros((self.rows, self.cols))
        out[:, :-1] -= h[:, :-1]
        out[:, 1:] += h[:, :-1]
        out[:-1, :] -= v[:-1, :]
        out[1:, :] += v[:-1, :]
        return out.ravel()


def _gaussian_kernel(sigma):
    # truncated at radius ceil(3 sigma), renormalized to sum 1
    if sigma <= 0:
        return np.array([1.0])
    radius = int(np.ceil(3.0 * sigma))
    t = np.arange(-radius, radius + 1, dtype=float)
    k = np.exp(-0.5 * (t / sigma) ** 2)
    return k / k.sum()


def _blur_matrix(n, kernel):
    # dense 1-d convolution matrix with symmetric (reflective) boundary
    r = (len(kernel) - 1) // 2
    m = np.zeros((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        padded = np.pad(e, r, mode="symmetric") if r else e
        m[:, j] = np.convolve(padded, kernel, mode="valid")
    return m


class GaussianBlur(LinearMap):
    """Separable Gaussian blur with symmetric boundary extension.

    The kernel sums to one and the boundary extension is reflective, so
    constant images are preserved exactly and the operator norm is <= 1.
    The blur matrices are materialized once per axis; the adjoint is their
    exact transpose.
    """

    kind = "gaussian-blur"

    def __init__(self, rows, cols, sigma):
        if rows < 1 or cols < 1:
            raise ValueError("blur needs a non-degenerate image")
        super().__init__(rows * cols, rows * cols)
        self.rows = rows
        self.cols = cols
        self.sigma = float(sigma)
        kernel = _gaussian_kernel(self.sigma)
        self._m_rows = _blur_matrix(rows, kernel)
        self._m_cols = _blur_matrix(cols, kernel)

    def _apply(self, x):
        img = x.reshape(self.rows, self.cols)
        return (self._m_rows @ img @ self._m_cols.T).ravel()

    def _adjoint(self, y):
        img = y.reshape(self.rows, self.cols)
        return (self._m_rows.T @ img @ self._m_cols).ravel()


class DownsampleAverage(LinearMap):
    """Block averaging over factor x factor blocks.

    The adjoint replicates each low-resolution pixel over its block and
    divides by factor^2 (the exact transpose, not an interpolator).
    """

    kind = "downsample-average"

    def __init__(self, rows, cols, factor):
        factor = int(factor)
        if factor < 1:
            raise ValueError("downsampling factor must be >= 1")
        if rows % factor or cols % factor:
            raise ValueError(
                f"image {rows}x{cols} is not divisible by the downsampling factor {factor}"
            )
        super().__init__(rows * cols, (rows // factor) * (cols // factor))
        self.rows = rows
        self.cols = cols
        self.factor = factor

    def _apply(self, x):
        f = self.factor
        img = x.reshape(self.rows // f, f, self.cols // f, f)
        return img.mean(axis=(1, 3)).ravel()

    def _adjoint(self, y):
        f = self.factor
        img = y.reshape(self.rows // f, self.cols // f)
        up = np.repeat(np.repeat(img, f, axis=0), f, axis=1)
        return (up / (f * f)).ravel()


def make_difference_1d(n):
    """The (n-1) x n forward-difference operator."""
    return Difference1D(n)


def make_gradient_2d(rows, cols):
    """Stacked 2-d forward-difference gradient of a rows x cols image."""
    return Gradient2D(rows, cols)


def make_blur_downsample(rows, cols, sigma, factor):
    """Gaussian blur followed by block averaging (the super-resolution forward map)."""
    return Composite([GaussianBlur(rows, cols, sigma), DownsampleAverage(rows, cols, factor)])


def estimate_norm(op, tol=1e-8, max_iters=5000, seed=0):
    """Estimate the operator norm ||B|| = sqrt(lambda_max(B^T B)) by power iteration.

    Runs power iteration on B^T B from a seeded random start and stops when
    the relative change of the Rayleigh quotient drops below ``tol`` or after
    ``max_iters`` sweeps.  Returns 0.0 for the zero operator.  Deterministic
    for a fixed seed.
    """
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    rng = np.random.default_rng(seed)
    q = rng.standard_normal(op.in_dim)
    nq = np.linalg.norm(q)
    if nq == 0:
        return 0.0
    q /= nq
    lam = 0.0
    for it in range(int(max_iters)):
        w = op._apply(q)
        lam_new = float(w @ w)  # Rayleigh quotient of B^T B at the unit vector q
        q = op._adjoint(w)
        nq = np.linalg.norm(q)
        if nq == 0.0 or lam_new == 0.0:
            return 0.0
        q /= nq
        if it > 0 and abs(lam_new - lam) <= tol * max(lam_new, 1e-300):
            lam = lam_new
            break
        lam = lam_new
    return float(np.sqrt(lam))
