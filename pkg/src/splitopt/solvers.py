"""Splitting solvers for  min_x f(x) + g(x) + h(Bx).

Two outer schemes are implemented, each with a dual and a primal-dual inner
solver for the prox subproblem it cannot evaluate in closed form:

* forward-backward outer loop (prox of g + h o B needed):
  ``solve_fb_dual`` and ``solve_fb_primal_dual``;
* three-operator outer loop with shadow variable z (prox of h o B needed):
  ``solve_tos_dual`` and ``solve_tos_primal_dual``.

Each inner loop runs a fixed number of iterations ``inner_iters`` and, by
default, warm-starts from its previous terminal value.  With one warm-started
inner iteration the four nested schemes collapse to known single-loop
algorithms, which are also provided as standalone implementations:
``solve_pdfp``, ``solve_condat_vu``, ``solve_pd3o``, ``solve_davis_yin``, and
``solve_tos_pd_single`` (the single-loop form of the primal-dual
three-operator scheme).

Step-size conditions, checked against the problem before iterating:
gamma in (0, 2/L); for dual inner solvers lam in (0, 2/lambda_max(B B^T));
for primal-dual inner solvers sigma tau ||B||^2 < 1.  The spectral quantities
use the power-iteration estimate of ||B||.

Stopping: relative change ||x_{k+1} - x_k|| / max(||x_k||, 1e-30) <= eps,
evaluated from the second computed iterate on.  Non-finite iterates or a
1e12-fold objective blow-up abort with ``DivergenceError``.
"""

from dataclasses import dataclass, field

import numpy as np

from .metrics import nmsd as _nmsd
from .metrics import snr as _snr
from .metrics import ssim_global as _ssim
from .operators import Identity

__all__ = [
    "SolverConfig",
    "SolveTrace",
    "IterationRecord",
    "DivergenceError",
    "ConfigError",
    "preset_config",
    "objective",
    "solve_fb_dual",
    "solve_fb_primal_dual",
    "solve_tos_dual",
    "solve_tos_primal_dual",
    "solve_pdfp",
    "solve_condat_vu",
    "solve_pd3o",
    "solve_davis_yin",
    "solve_tos_pd_single",
    "SOLVERS",
]


class ConfigError(ValueError):
    """A step-size or configuration requirement is violated."""


class DivergenceError(RuntimeError):
    """The iteration produced non-finite values or a runaway objective."""

    def __init__(self, solver, iteration, reason):
        super().__init__(f"{solver} diverged at outer iteration {iteration}: {reason}")
        self.solver = solver
        self.iteration = iteration


@dataclass
class SolverConfig:
    """Step sizes and loop controls shared by all solvers.

    ``lam`` drives the dual inner solvers, ``sigma``/``tau`` the primal-dual
    ones; a config may carry both.  ``param_preset`` records the named step
    rule the config was derived from, if any.
    """

    gamma: float
    lam: float | None = None
    sigma: float | None = None
    tau: float | None = None
    inner_iters: int = 1
    eps: float = 1e-6
    max_outer: int = 5000
    warm_start_dual: bool = True
    record_iterates: bool = False
    param_preset: str | None = None

    def __post_init__(self):
        if self.gamma <= 0:
            raise ConfigError(f"gamma must be positive, got {self.gamma}")
        if self.inner_iters < 1:
            raise ConfigError(f"inner_iters must be >= 1, got {self.inner_iters}")
        if self.eps <= 0:
            raise ConfigError(f"eps must be positive, got {self.eps}")
        if self.max_outer < 1:
            raise ConfigError(f"max_outer must be >= 1, got {self.max_outer}")
        for name in ("lam", "sigma", "tau"):
            val = getattr(self, name)
            if val is not None and val <= 0:
                raise ConfigError(f"{name} must be positive, got {val}")


def preset_config(problem, preset, **overrides):
    """Build a SolverConfig from a named step rule.

    type-I:  lam = 1.9 / lambda_max(B B^T), sigma = 1 / ||B||^2, tau = 1.
    type-II: lam = 1 / lambda_max(B B^T),  sigma = tau = 1 / ||B||.

    The spectral constants come from the problem's conventional values
    (``b_lam_max``/``b_norm``) when set, otherwise from power iteration;
    gamma defaults to the problem's suggested value or 1.9/L.
    """
    lam_max = problem.b_lam_max if problem.b_lam_max is not None else problem.exact_b_norm() ** 2
    norm_b = problem.b_norm if problem.b_norm is not None else problem.exact_b_norm()
    if preset == "type-I":
        params = {"lam": 1.9 / lam_max, "sigma": 1.0 / norm_b**2, "tau": 1.0}
    elif preset == "type-II":
        params = {"lam": 1.0 / lam_max, "sigma": 1.0 / norm_b, "tau": 1.0 / norm_b}
    else:
        raise ConfigError(f"unknown preset {preset!r} (expected 'type-I' or 'type-II')")
    if "gamma" not in overrides:
        gamma = problem.gamma_default
        if gamma is None:
            lip = problem.f.lipschitz
            if lip <= 0:
                raise ConfigError("cannot derive gamma for a problem with L = 0; pass gamma=")
            gamma = 1.9 / lip
        params["gamma"] = gamma
    params.update(overrides)
    return SolverConfig(param_preset=preset, **params)


@dataclass
class IterationRecord:
    k: int
    objective: float
    rel_change: float
    inner_count: int
    snr: float | None = None
    nmsd: float | None = None
    ssim: float | None = None


@dataclass
class SolveTrace:
    solver: str
    records: list
    final_x: np.ndarray
    converged: bool
    total_outer: int
    final_state: dict = field(default_factory=dict)
    iterates: list | None = None

    @property
    def final_record(self):
        return self.records[-1]


def objective(problem, x):
    """f(x) + g(x) + h(Bx) with +inf sentinel propagation."""
    return problem.objective(x)


# ---------------------------------------------------------------------------
# shared machinery
# ---------------------------------------------------------------------------

def _check_gamma(problem, gamma):
    lip = problem.f.lipschitz
    if lip > 0 and not gamma < 2.0 / lip:
        raise ConfigError(f"gamma={gamma} outside (0, 2/L) with L={lip:.6g}")


def _check_dual(problem, config):
    _check_gamma(problem, config.gamma)
    if config.lam is None:
        raise ConfigError("dual solver needs lam")
    lam_max = problem.exact_b_norm() ** 2
    if lam_max > 0 and not config.lam < 2.0 / lam_max:
        raise ConfigError(
            f"lam={config.lam} outside (0, 2/lambda_max) with lambda_max={lam_max:.6g}"
        )


def _check_primal_dual(problem, config):
    _check_gamma(problem, config.gamma)
    if config.sigma is None or config.tau is None:
        raise ConfigError("primal-dual solver needs sigma and tau")
    nb2 = problem.exact_b_norm() ** 2
    if config.sigma * config.tau * nb2 >= 1.0:
        raise ConfigError(
            f"sigma*tau*||B||^2 = {config.sigma * config.tau * nb2:.6g} must be < 1"
        )


def _init_primal(problem, x0):
    if x0 is not None:
        return np.asarray(x0, dtype=float).ravel().copy()
    if problem.x0 is not None:
        return np.asarray(problem.x0, dtype=float).ravel().copy()
    return np.zeros(problem.dim)


def _init_dual(problem, y0):
    if y0 is not None:
        return np.asarray(y0, dtype=float).ravel().copy()
    return np.zeros(problem.B.out_dim)


def _run(problem, config, solver, state, step, state_keys):
    """Outer-loop driver: stopping test, divergence guard, trace recording."""
    records = []
    iterates = [] if config.record_iterates else None
    x_prev = None
    obj_ref = None
    converged = False
    k = 0
    gt = problem.ground_truth
    img_shape = problem.image_shape
    for k in range(1, config.max_outer + 1):
        state, x, inner = step(state)
        if not np.all(np.isfinite(x)):
            raise DivergenceError(solver, k, "non-finite iterate")
        obj = problem.objective(x)
        if obj_ref is None and np.isfinite(obj):
            obj_ref = max(abs(obj), 1.0)
        elif obj_ref is not None and np.isfinite(obj) and obj > 1e12 * obj_ref:
            raise DivergenceError(solver, k, f"objective grew to {obj:.3e}")
        rel = np.inf
        if x_prev is not None:
            rel = float(np.linalg.norm(x - x_prev) / max(np.linalg.norm(x_prev), 1e-30))
        rec = IterationRecord(k=k, objective=obj, rel_change=rel, inner_count=inner)
        if gt is not None:
            rec.snr = _snr(gt, x)
            rec.nmsd = _nmsd(gt, x)
            if problem.record_ssim and img_shape is not None:
                rec.ssim = _ssim(
                    gt.reshape(img_shape), x.reshape(img_shape),
                    problem.dynamic_range or 1.0,
                )
        records.append(rec)
        if iterates is not None:
            iterates.append(x.copy())
        if x_prev is not None and rel <= config.eps:
            converged = True
            x_prev = x
            break
        x_prev = x
    return SolveTrace(
        solver=solver,
        records=records,
        final_x=x_prev,
        converged=converged,
        total_outer=k,
        final_state=dict(zip(state_keys, state)),
        iterates=iterates,
    )


# ---------------------------------------------------------------------------
# forward-backward outer loop
# ---------------------------------------------------------------------------

def solve_fb_dual(problem, config, x0=None, y0=None):
    """Forward-backward outer loop; the prox of g + h o B is approximated by
    forward-backward iterations on its dual.

    Outer:  u = x - gamma grad f(x)
    Inner:  y <- prox_{(lam/gamma) h*}( y + (lam/gamma) B prox_{gamma g}(u - gamma B^T y) )
    Update: x <- prox_{gamma g}(u - gamma B^T y)
    """
    _check_dual(problem, config)
    f, g, h, B = problem.f, problem.g, problem.h, problem.B
    gamma, lam, J = config.gamma, config.lam, config.inner_iters
    s = lam / gamma

    def step(state):
        x, y = state
        u = x - gamma * f.gradient(x)
        if not config.warm_start_dual:
            y = np.zeros_like(y)
        for _ in range(J):
            y = h.prox_conjugate(s, y + s * B.apply(g.prox(gamma, u - gamma * B.adjoint_apply(y))))
        x = g.prox(gamma, u - gamma * B.adjoint_apply(y))
        return (x, y), x, J

    return _run(problem, config, "fb-dual",
                (_init_primal(problem, x0), _init_dual(problem, y0)), step, ("x", "y"))


def solve_fb_primal_dual(problem, config, x0=None, y0=None, xbar0=None):
    """Forward-backward outer loop; the prox of g + h o B is approximated by
    primal-dual iterations.

    Outer:  u = x - gamma grad f(x)
    Inner:  xb <- prox_{tau gamma/(1+tau) g}( (xb - tau B^T y + tau u) / (1+tau) )
            y  <- gamma prox_{(sigma/gamma) h*}( (y + sigma B (2 xb' - xb)) / gamma )
    Update: x <- xb

    The inner variables xb, y warm-start from their previous terminal values;
    cold starting resets y = 0 and xb = x at every outer step.
    """
    _check_primal_dual(problem, config)
    f, g, h, B = problem.f, problem.g, problem.h, problem.B
    gamma, sigma, tau, J = config.gamma, config.sigma, config.tau, config.inner_iters
    g_step = tau * gamma / (1.0 + tau)

    def step(state):
        x, xb, y = state
        u = x - gamma * f.gradient(x)
        if not config.warm_start_dual:
            y = np.zeros_like(y)
            xb = x.copy()
        for _ in range(J):
            xb_new = g.prox(g_step, (xb - tau * B.adjoint_apply(y) + tau * u) / (1.0 + tau))
            y = gamma * h.prox_conjugate(sigma / gamma, (y + sigma * B.apply(2.0 * xb_new - xb)) / gamma)
            xb = xb_new
        return (xb, xb, y), xb, J

    x_init = _init_primal(problem, x0)
    xb_init = x_init.copy() if xbar0 is None else np.asarray(xbar0, dtype=float).ravel().copy()
    return _run(problem, config, "fb-pd",
                (x_init, xb_init, _init_dual(problem, y0)), step, ("x", "xbar", "y"))


# ---------------------------------------------------------------------------
# three-operator outer loop
# ---------------------------------------------------------------------------

def solve_tos_dual(problem, config, z0=None, y0=None):
    """Three-operator outer loop; the prox of h o B is approximated by
    forward-backward iterations on its dual.

    x = prox_{gamma g}(z);  u = 2x - z - gamma grad f(x)
    Inner:  y <- prox_{(lam/gamma) h*}( (I - lam B B^T) y + (lam/gamma) B u )
    Update: z <- z + (u - gamma B^T y) - x
    """
    _check_dual(problem, config)
    f, g, h, B = problem.f, problem.g, problem.h, problem.B
    gamma, lam, J = config.gamma, config.lam, config.inner_iters
    s = lam / gamma

    def step(state):
        z, y = state
        x = g.prox(gamma, z)
        u = 2.0 * x - z - gamma * f.gradient(x)
        if not config.warm_start_dual:
            y = np.zeros_like(y)
        bu = B.apply(u)
        for _ in range(J):
            y = h.prox_conjugate(s, y - lam * B.apply(B.adjoint_apply(y)) + s * bu)
        z = z + (u - gamma * B.adjoint_apply(y)) - x
        return (z, y), x, J

    return _run(problem, config, "tos-dual",
                (_init_primal(problem, z0), _init_dual(problem, y0)), step, ("z", "y"))


def solve_tos_primal_dual(problem, config, z0=None, v0=None, y0=None):
    """Three-operator outer loop; the prox of h o B is approximated by
    primal-dual iterations.

    x = prox_{gamma g}(z);  u = 2x - z - gamma grad f(x)
    Inner:  v <- (v - tau B^T y + tau u) / (1+tau)
            y <- gamma prox_{(sigma/gamma) h*}( y/gamma + (sigma/gamma) B (2 v' - v) )
    Update: z <- z + v - x
    """
    _check_primal_dual(problem, config)
    f, g, h, B = problem.f, problem.g, problem.h, problem.B
    gamma, sigma, tau, J = config.gamma, config.sigma, config.tau, config.inner_iters

    def step(state):
        z, v, y = state
        x = g.prox(gamma, z)
        u = 2.0 * x - z - gamma * f.gradient(x)
        if not config.warm_start_dual:
            y = np.zeros_like(y)
            v = x.copy()
        for _ in range(J):
            v_new = (v - tau * B.adjoint_apply(y) + tau * u) / (1.0 + tau)
            y = gamma * h.prox_conjugate(sigma / gamma, y / gamma + (sigma / gamma) * B.apply(2.0 * v_new - v))
            v = v_new
        z = z + v - x
        return (z, v, y), x, J

    z_init = _init_primal(problem, z0)
    v_init = z_init.copy() if v0 is None else np.asarray(v0, dtype=float).ravel().copy()
    return _run(problem, config, "tos-pd",
                (z_init, v_init, _init_dual(problem, y0)), step, ("z", "v", "y"))


# ---------------------------------------------------------------------------
# single-loop schemes
# ---------------------------------------------------------------------------

def solve_pdfp(problem, config, x0=None, y0=None):
    """Primal-dual fixed-point scheme (fb-dual with one warm-started inner step).

    v <- prox_{gamma g}(x - gamma grad f(x) - gamma B^T y)
    y <- prox_{(lam/gamma) h*}(y + (lam/gamma) B v)
    x <- prox_{gamma g}(x - gamma grad f(x) - gamma B^T y)
    """
    _check_dual(problem, config)
    f, g, h, B = problem.f, problem.g, problem.h, problem.B
    gamma, lam = config.gamma, config.lam
    s = lam / gamma

    def step(state):
        x, y = state
        u = x - gamma * f.gradient(x)
        v = g.prox(gamma, u - gamma * B.adjoint_apply(y))
        y = h.prox_conjugate(s, y + s * B.apply(v))
        x = g.prox(gamma, u - gamma * B.adjoint_apply(y))
        return (x, y), x, 1

    return _run(problem, config, "pdfp",
                (_init_primal(problem, x0), _init_dual(problem, y0)), step, ("x", "y"))


def solve_condat_vu(problem, config, form="standard", x0=None, y0=None):
    """Single-loop primal-dual splitting.

    x <- prox_{tau' g}(x - tau' B^T y - tau' grad f(x))
    y <- prox_{sigma' h*}(y + sigma' B (2 x' - x))

    ``form="standard"`` reads sigma' = config.sigma and tau' = config.tau and
    requires 1/tau' - sigma' ||B||^2 > L/2.  ``form="tau1"`` derives
    tau' = gamma/2 and sigma' = sigma/gamma and requires gamma in (0, 2/L)
    and sigma ||B||^2 < 1.
    """
    f, g, h, B = problem.f, problem.g, problem.h, problem.B
    nb2 = problem.exact_b_norm() ** 2
    lip = problem.f.lipschitz
    if form == "standard":
        if config.sigma is None or config.tau is None:
            raise ConfigError("standard form needs sigma and tau")
        sigma_p, tau_p = config.sigma, config.tau
        if not 1.0 / tau_p - sigma_p * nb2 > lip / 2.0:
            raise ConfigError(
                f"1/tau - sigma ||B||^2 = {1.0 / tau_p - sigma_p * nb2:.6g} "
                f"must exceed L/2 = {lip / 2.0:.6g}"
            )
    elif form == "tau1":
        if config.sigma is None:
            raise ConfigError("tau1 form needs sigma")
        _check_gamma(problem, config.gamma)
        if config.sigma * nb2 >= 1.0:
            raise ConfigError(f"sigma ||B||^2 = {config.sigma * nb2:.6g} must be < 1")
        sigma_p, tau_p = config.sigma / config.gamma, config.gamma / 2.0
    else:
        raise ConfigError(f"unknown form {form!r} (expected 'standard' or 'tau1')")

    def step(state):
        x, y = state
        x_new = g.prox(tau_p, x - tau_p * B.adjoint_apply(y) - tau_p * f.gradient(x))
        y = h.prox_conjugate(sigma_p, y + sigma_p * B.apply(2.0 * x_new - x))
        return (x_new, y), x_new, 1

    return _run(problem, config, "condat-vu",
                (_init_primal(problem, x0), _init_dual(problem, y0)), step, ("x", "y"))


def solve_pd3o(problem, config, z0=None, y0=None):
    """Primal-dual three-operator scheme (tos-dual with one warm-started inner step).

    x <- prox_{gamma g}(z)
    y <- prox_{(lam/gamma) h*}( (I - lam B B^T) y + (lam/gamma) B (2x - z - gamma grad f(x)) )
    z <- x - gamma grad f(x) - gamma B^T y
    """
    _check_dual(problem, config)
    f, g, h, B = problem.f, problem.g, problem.h, problem.B
    gamma, lam = config.gamma, config.lam
    s = lam / gamma

    def step(state):
        z, y = state
        x = g.prox(gamma, z)
        grad = f.gradient(x)
        y = h.prox_conjugate(
            s, y - lam * B.apply(B.adjoint_apply(y)) + s * B.apply(2.0 * x - z - gamma * grad)
        )
        z = x - gamma * grad - gamma * B.adjoint_apply(y)
        return (z, y), x, 1

    return _run(problem, config, "pd3o",
                (_init_primal(problem, z0), _init_dual(problem, y0)), step, ("z", "y"))


def solve_davis_yin(problem, config, z0=None, y0=None):
    """Three-operator splitting for B = I (pd3o with lam = 1).

    x <- prox_{gamma g}(z)
    y <- prox_{(1/gamma) h*}( (2x - z - gamma grad f(x)) / gamma )
    z <- x - gamma grad f(x) - gamma y
    """
    if not isinstance(problem.B, Identity):
        raise ConfigError(f"davis-yin requires B = identity, got {problem.B.kind}")
    _check_gamma(problem, config.gamma)
    f, g, h = problem.f, problem.g, problem.h
    gamma = config.gamma

    def step(state):
        z, y = state
        x = g.prox(gamma, z)
        grad = f.gradient(x)
        y = h.prox_conjugate(1.0 / gamma, (2.0 * x - z - gamma * grad) / gamma)
        z = x - gamma * grad - gamma * y
        return (z, y), x, 1

    return _run(problem, config, "davis-yin",
                (_init_primal(problem, z0), _init_dual(problem, y0)), step, ("z", "y"))


def solve_tos_pd_single(problem, config, z0=None, v0=None, y0=None):
    """Single-loop form of the primal-dual three-operator scheme
    (tos-primal-dual with one warm-started inner step).

    x <- prox_{gamma g}(z)
    u = 2x - z - gamma grad f(x)
    v <- (v - tau B^T y + tau u) / (1+tau)
    y <- gamma prox_{(sigma/gamma) h*}( y/gamma + (sigma/gamma) B (2 v' - v) )
    z <- z + v' - x
    """
    _check_primal_dual(problem, config)
    f, g, h, B = problem.f, problem.g, problem.h, problem.B
    gamma, sigma, tau = config.gamma, config.sigma, config.tau

    def step(state):
        z, v, y = state
        x = g.prox(gamma, z)
        u = 2.0 * x - z - gamma * f.gradient(x)
        v_new = (v - tau * B.adjoint_apply(y) + tau * u) / (1.0 + tau)
        y = gamma * h.prox_conjugate(sigma / gamma, y / gamma + (sigma / gamma) * B.apply(2.0 * v_new - v))
        z = z + v_new - x
        return (z, v_new, y), x, 1

    z_init = _init_primal(problem, z0)
    v_init = z_init.copy() if v0 is None else np.asarray(v0, dtype=float).ravel().copy()
    return _run(problem, config, "tos-pd-single",
                (z_init, v_init, _init_dual(problem, y0)), step, ("z", "v", "y"))


SOLVERS = {
    "fb-dual": solve_fb_dual,
    "fb-pd": solve_fb_primal_dual,
    "tos-dual": solve_tos_dual,
    "tos-pd": solve_tos_primal_dual,
    "pdfp": solve_pdfp,
    "condat-vu": solve_condat_vu,
    "pd3o": solve_pd3o,
    "davis-yin": solve_davis_yin,
    "tos-pd-single": solve_tos_pd_single,
}

#: solvers driven by lam (dual inner route) vs sigma/tau (primal-dual route)
DUAL_SOLVERS = ("fb-dual", "tos-dual", "pdfp", "pd3o")
PRIMAL_DUAL_SOLVERS = ("fb-pd", "tos-pd", "condat-vu", "tos-pd-single")
