"""Self-check property suites behind the ``verify`` CLI subcommand.

Each suite returns a list of (name, passed, detail) tuples; the CLI prints
one PASS/FAIL line per property and exits nonzero if any fail.
"""

import numpy as np

from .operators import (
    Composite,
    DenseMatrix,
    DownsampleAverage,
    GaussianBlur,
    Identity,
    Scaled,
    estimate_norm,
    make_blur_downsample,
    make_difference_1d,
    make_gradient_2d,
)
from .problems import SplitProblem, build_fused_lasso
from .proxfuncs import (
    BoxIndicator,
    GroupL21,
    L1Norm,
    NonnegativeIndicator,
    NuclearNorm,
    QuadraticDistance,
    ZeroFunction,
)
from .smooth import LeastSquares
from .solvers import (
    SolverConfig,
    solve_condat_vu,
    solve_davis_yin,
    solve_fb_dual,
    solve_fb_primal_dual,
    solve_pd3o,
    solve_pdfp,
    solve_tos_dual,
    solve_tos_pd_single,
    solve_tos_primal_dual,
)

__all__ = ["prox_suite", "operator_suite", "equivalence_suite", "run_suite", "SUITES"]

_PROX_DIM = 12


def _prox_library(rng):
    return [
        L1Norm(0.7),
        GroupL21(0.9),
        NonnegativeIndicator(),
        BoxIndicator(-0.5, 1.5),
        NuclearNorm(0.8, (3, 4)),
        QuadraticDistance(1.3, rng.standard_normal(_PROX_DIM)),
        ZeroFunction(),
    ]


def prox_suite(seed=0):
    rng = np.random.default_rng(seed)
    funcs = _prox_library(rng)
    results = []

    for f in funcs:
        worst = 0.0
        for _ in range(100):
            lam = float(rng.uniform(0.05, 5.0))
            u = 3.0 * rng.standard_normal(_PROX_DIM)
            resid = f.prox(lam, u) + f.scaled_conjugate_prox(lam, u) - u
            worst = max(worst, float(np.abs(resid).max()))
        results.append((f"moreau-identity[{f.kind}]", worst <= 1e-10, f"max residual {worst:.2e}"))

    for f in funcs:
        worst = 0.0
        for _ in range(100):
            lam = float(rng.uniform(0.05, 5.0))
            v = 3.0 * rng.standard_normal(_PROX_DIM)
            direct = v - f.prox(lam, v)
            resid = f.scaled_conjugate_prox(lam, v) - direct
            worst = max(worst, float(np.abs(resid).max()))
        results.append((f"conjugate-scaling[{f.kind}]", worst <= 1e-10, f"max residual {worst:.2e}"))

    for f in funcs:
        ok = True
        for _ in range(100):
            step = float(rng.uniform(0.05, 5.0))
            x = 3.0 * rng.standard_normal(_PROX_DIM)
            y = 3.0 * rng.standard_normal(_PROX_DIM)
            px, py = f.prox(step, x), f.prox(step, y)
            lhs = float(np.sum((px - py) ** 2))
            rhs = float((x - y) @ (px - py))
            if lhs > rhs + 1e-12:
                ok = False
                break
        results.append((f"firm-nonexpansive[{f.kind}]", ok, "100 random pairs"))

    for f in funcs:
        worst = 0.0
        for _ in range(10):
            lam = float(rng.uniform(0.2, 2.0))
            x = 2.0 * rng.standard_normal(_PROX_DIM)
            grad = f.envelope_gradient(lam, x)
            num = np.empty_like(x)
            h = 1e-6
            for i in range(x.size):
                xp, xm = x.copy(), x.copy()
                xp[i] += h
                xm[i] -= h
                num[i] = (f.envelope_value(lam, xp) - f.envelope_value(lam, xm)) / (2 * h)
            err = np.linalg.norm(grad - num) / max(np.linalg.norm(num), 1e-12)
            worst = max(worst, float(err))
        results.append((f"envelope-gradient[{f.kind}]", worst <= 1e-5, f"max rel err {worst:.2e}"))

    for f in funcs:
        ok = True
        step = 0.8
        v = 2.0 * rng.standard_normal(_PROX_DIM)
        p = f.prox(step, v)
        best = 0.5 * float(np.sum((p - v) ** 2)) + step * f.value(p)
        for _ in range(1000):
            cand = p + rng.standard_normal(_PROX_DIM) * rng.uniform(1e-4, 2.0)
            val = 0.5 * float(np.sum((cand - v) ** 2)) + step * f.value(cand)
            if val < best - 1e-12:
                ok = False
                break
        results.append((f"prox-optimality[{f.kind}]", ok, "1000 random candidates"))

    return results


def _operator_library(rng):
    return [
        Identity(12),
        DenseMatrix(rng.standard_normal((5, 7))),
        make_difference_1d(15),
        make_gradient_2d(6, 5),
        GaussianBlur(8, 8, 1.0),
        DownsampleAverage(8, 8, 2),
        make_blur_downsample(8, 8, 1.0, 2),
        Scaled(-1.7, make_difference_1d(9)),
    ]


def operator_suite(seed=0):
    rng = np.random.default_rng(seed)
    ops = _operator_library(rng)
    results = []

    for op in ops:
        worst = 0.0
        for _ in range(100):
            x = rng.standard_normal(op.in_dim)
            y = rng.standard_normal(op.out_dim)
            bx = op.apply(x)
            bty = op.adjoint_apply(y)
            scale = max(np.linalg.norm(bx) * np.linalg.norm(y),
                        np.linalg.norm(x) * np.linalg.norm(bty), 1e-30)
            worst = max(worst, abs(float(bx @ y - x @ bty)) / scale)
        results.append((f"adjoint-identity[{op.kind}]", worst <= 1e-10, f"max rel {worst:.2e}"))

    for op in ops:
        worst = 0.0
        for _ in range(20):
            x = rng.standard_normal(op.in_dim)
            y = rng.standard_normal(op.in_dim)
            a, b = rng.standard_normal(2)
            resid = op.apply(a * x + b * y) - (a * op.apply(x) + b * op.apply(y))
            scale = max(np.linalg.norm(op.apply(x)), np.linalg.norm(op.apply(y)), 1e-30)
            worst = max(worst, float(np.linalg.norm(resid)) / scale)
        results.append((f"linearity[{op.kind}]", worst <= 1e-10, f"max rel {worst:.2e}"))

    for op in ops:
        est = estimate_norm(op)
        ok = True
        for _ in range(100):
            x = rng.standard_normal(op.in_dim)
            if np.linalg.norm(op.apply(x)) > (1 + 1e-6) * est * np.linalg.norm(x):
                ok = False
                break
        results.append((f"norm-bound[{op.kind}]", ok, f"estimate {est:.6g}"))

    worst = 0.0
    for n in (2, 3, 5, 8, 17, 32):
        d = make_difference_1d(n).to_dense()
        eigs = np.sort(np.linalg.eigvalsh(d @ d.T))
        expected = np.sort(2.0 - 2.0 * np.cos(np.arange(1, n) * np.pi / n))
        worst = max(worst, float(np.abs(eigs - expected).max()))
    results.append(("difference-spectrum-closed-form", worst <= 1e-9, f"max dev {worst:.2e}"))

    m = rng.standard_normal((20, 30))
    est = estimate_norm(DenseMatrix(m))
    true = float(np.linalg.svd(m, compute_uv=False)[0])
    rel = abs(est - true) / true
    results.append(("power-iteration-vs-svd", rel <= 1e-6, f"rel err {rel:.2e}"))

    est = estimate_norm(make_difference_1d(200)) ** 2
    true = 2.0 - 2.0 * np.cos(199 * np.pi / 200)
    results.append(("difference-1d-spectral-constant", abs(est - true) <= 1e-4,
                    f"estimate {est:.6f}, closed form {true:.6f}"))

    est = estimate_norm(make_gradient_2d(64, 64)) ** 2
    results.append(("gradient-2d-spectral-constant", 7.9 <= est <= 8.0, f"estimate {est:.6f}"))

    comp = make_blur_downsample(8, 8, 1.0, 2)
    blur, down = comp.parts
    y = rng.standard_normal(comp.out_dim)
    direct = comp.adjoint_apply(y)
    chained = blur.adjoint_apply(down.adjoint_apply(y))
    results.append(("composite-adjoint-chains", bool(np.array_equal(direct, chained)),
                    "exact equality"))

    return results


def _max_traj_gap(tr_a, tr_b, skip_a=0, skip_b=0):
    xa = tr_a.iterates[skip_a:]
    xb = tr_b.iterates[skip_b:]
    n = min(len(xa), len(xb))
    return max(float(np.abs(a - b).max()) for a, b in zip(xa[:n], xb[:n]))


def equivalence_suite(seed=0, iters=120):
    """The reduction identities, checked pointwise to 1e-12 on a small instance."""
    p = build_fused_lasso(m=30, n=60, seed=seed)
    gamma = 1.9 / p.f.lipschitz
    sigma, tau, lam = 0.25, 1.0, 0.25

    def cfg(**kw):
        base = dict(gamma=gamma, eps=1e-16, max_outer=iters, record_iterates=True)
        base.update(kw)
        return SolverConfig(**base)

    results = []

    gap = _max_traj_gap(solve_fb_dual(p, cfg(lam=lam)), solve_pdfp(p, cfg(lam=lam)))
    results.append(("fb-dual(J=1,warm) == pdfp", gap < 1e-12, f"max gap {gap:.2e}"))

    gap = _max_traj_gap(solve_tos_dual(p, cfg(lam=lam)), solve_pd3o(p, cfg(lam=lam)))
    results.append(("tos-dual(J=1) == pd3o", gap < 1e-12, f"max gap {gap:.2e}"))

    gap = _max_traj_gap(
        solve_tos_primal_dual(p, cfg(sigma=sigma, tau=tau)),
        solve_tos_pd_single(p, cfg(sigma=sigma, tau=tau)),
    )
    results.append(("tos-pd(J=1) == tos-pd-single", gap < 1e-12, f"max gap {gap:.2e}"))

    gap = _max_traj_gap(
        solve_fb_primal_dual(p, cfg(sigma=sigma, tau=tau)),
        solve_condat_vu(p, cfg(sigma=sigma / gamma, tau=tau * gamma / (1 + tau))),
    )
    results.append(("fb-pd(J=1) == condat-vu(reparameterized)", gap < 1e-12, f"max gap {gap:.2e}"))

    rng = np.random.default_rng(seed + 1)
    a = rng.standard_normal((30, 40))
    p_id = SplitProblem(
        f=LeastSquares(DenseMatrix(a), rng.standard_normal(30)),
        g=L1Norm(0.3), h=L1Norm(0.5), B=Identity(40),
    )
    g_id = 1.9 / p_id.f.lipschitz
    c_id = SolverConfig(gamma=g_id, lam=1.0, eps=1e-16, max_outer=iters, record_iterates=True)
    gap = _max_traj_gap(solve_pd3o(p_id, c_id), solve_davis_yin(p_id, c_id))
    results.append(("pd3o(lam=1,B=I) == davis-yin", gap < 1e-12, f"max gap {gap:.2e}"))

    # pdfp == pd3o holds pointwise in the g = 0 regime; start at a stationary
    # point of f so the matched shadow start z0 = x0 - gamma grad f(x0) - gamma B^T y0
    # coincides with x0, and compare with the one-step index offset
    p0 = build_fused_lasso(m=30, n=60, mu1=0.0, seed=seed)
    g0 = 1.9 / p0.f.lipschitz
    x0 = np.linalg.lstsq(p0.f.op.matrix, p0.f.target, rcond=None)[0]
    y0 = np.zeros(p0.B.out_dim)
    z0 = x0 - g0 * p0.f.gradient(x0) - g0 * p0.B.adjoint_apply(y0)
    c0 = SolverConfig(gamma=g0, lam=lam, eps=1e-16, max_outer=iters + 1, record_iterates=True)
    gap = _max_traj_gap(
        solve_pdfp(p0, c0, x0=x0, y0=y0), solve_pd3o(p0, c0, z0=z0, y0=y0), skip_b=1
    )
    results.append(("pdfp == pd3o (x-iterates, matched start)", gap < 1e-12, f"max gap {gap:.2e}"))

    return results


SUITES = {
    "prox": prox_suite,
    "operators": operator_suite,
    "equivalence": equivalence_suite,
}


def run_suite(name, seed=0):
    """Run one suite (or 'all'); returns (results, all_passed)."""
    if name == "all":
        results = []
        for fn in SUITES.values():
            results.extend(fn(seed=seed))
    elif name in SUITES:
        results = SUITES[name](seed=seed)
    else:
        raise ValueError(f"unknown suite {name!r}; choose from {sorted(SUITES)} or 'all'")
    return results, all(ok for _, ok, _ in results)
