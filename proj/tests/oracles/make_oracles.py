"""Reference values for the C++ tests, computed independently of the library.

Run once; the output oracles.json is checked in.
"""
import json
import pathlib

import cvxpy as cp
import mpmath as mp
import numpy as np
from scipy import integrate, optimize, special

mp.mp.dps = 60
HERE = pathlib.Path(__file__).parent


def tail(x):
    return mp.erfc(mp.mpf(x) / mp.sqrt(2)) / 2


def mills(x):
    x = mp.mpf(x)
    return mp.exp(-x * x / 2) / (mp.sqrt(2 * mp.pi) * tail(x))


def mills_derivs(x):
    return [mp.diff(mills, mp.mpf(x), k) for k in (1, 2, 3)]


def second_moment(k):
    k = mp.mpf(k)
    phi = mp.exp(-k * k / 2) / mp.sqrt(2 * mp.pi)
    cdf = 1 - tail(k)
    return (1 + k * k) * cdf + k * phi


def gardner_objective(alpha, kappa, q):
    f = lambda z: special.log_ndtr(-(kappa - np.sqrt(q) * z) / np.sqrt(1 - q)) * np.exp(-z * z / 2)
    e, _ = integrate.quad(f, -np.inf, np.inf, epsabs=1e-14, epsrel=1e-13, limit=400)
    return alpha * e / np.sqrt(2 * np.pi) + 0.5 * q / (1 - q) + 0.5 * np.log1p(-q)


def gardner_rs(alpha, kappa):
    grid = np.arange(0.0, 1 - 1e-4, 1e-4)
    vals = [gardner_objective(alpha, kappa, q) for q in grid]
    i = int(np.argmin(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    r = optimize.minimize_scalar(lambda q: gardner_objective(alpha, kappa, q), bounds=(lo, hi),
                                 method="bounded", options={"xatol": 1e-12})
    return float(r.fun), float(r.x)


def qp_instance(seed, m, n, kappa):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((m, n)) / np.sqrt(n)
    u = rng.standard_normal(n) * np.sqrt(0.6)
    s = cp.Variable(n)
    prob = cp.Problem(cp.Minimize(0.5 * cp.sum_squares(s - u)), [a @ s >= kappa])
    prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-14, tol_gap_rel=1e-14, tol_feas=1e-14)
    return {"m": m, "n": n, "kappa": kappa, "a": a.ravel().tolist(), "u": u.tolist(),
            "sigma": np.asarray(s.value).tolist()}


def main():
    xs = [-40, -38, -20, -10, -5, -2, -1, -0.5, 0, 0.5, 1, 2, 3, 5, 8, 10, 15, 20, 30, 40]
    out = {
        "tail": [{"x": x, "log_tail": float(mp.log(tail(x))), "mills": float(mills(x))} for x in xs],
        "mills_derivs": [{"x": x, "d": [float(v) for v in mills_derivs(x)]}
                         for x in [-5, -2, -1, 0, 0.5, 1, 2, 3, 5, 8]],
        "second_moment": [{"kappa": k, "value": float(second_moment(k))} for k in [-3, -1.5, -1, -0.5, 0, 0.5, 1, 2]],
        "gardner": [],
        "qp": [qp_instance(s, 60, 30, -0.3) for s in (1, 2, 3)],
    }
    for alpha, kappa in [(1.0, -0.5), (5.0, -1.0), (20.0, -1.5)]:
        v, q = gardner_rs(alpha, kappa)
        out["gardner"].append({"alpha": alpha, "kappa": kappa, "value": v, "q_star": q})
    (HERE / "oracles.json").write_text(json.dumps(out, indent=1) + "\n")


if __name__ == "__main__":
    main()
