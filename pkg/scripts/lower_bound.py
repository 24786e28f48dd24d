"""Lower bounds on the cooperative optimum, compared with the locally optimal policy.

The bound model lets every request take the cheapest of three options:
local copy, a neighbor that caches the content, or the server. The delay model
itself must use a caching neighbor even when the server path is faster, so
this model can only be cheaper and its optimum bounds every placement from
below. The script reports the LP relaxation and the dual bound of a
time-limited MILP solve (HiGHS). ``1 - bound / locally_optimal`` caps the
reduction any solver can reach on the instance. The MILP incumbent is also
scored with the actual delay model, which gives a feasible reference value.

Usage: python3 scripts/lower_bound.py [--seeds 5] [--capacity 10] [--time-limit 120]
"""
import argparse

import numpy as np
import scipy.sparse as sp
from scipy.optimize import Bounds, LinearConstraint, milp

from edgecache.policies import noncooperative_delay, place
from edgecache.scenario import build_scenario, template_config, total_average_delay


def bound_model(sc):
    """Cost vector, constraints, integrality and constant of the cheapest-option model.

    Columns: x[n, i] (cache), u[n, i] (serve locally), then one v per
    (n, m, i) with a neighbor path faster than the server.
    """
    N, I = sc.N, sc.I
    c, w = sc.sizes, sc.weights
    s, a = sc.server_delay, sc.access_delay
    bw = sc.topology.bandwidth
    nx = N * I
    cost = [np.zeros(nx), (w * (a - s)).ravel()]
    vmeta = []
    for n in range(N):
        for m in sc.neighbor_lists[n]:
            r = a[n] + c / bw[n, m]
            for i in np.flatnonzero(r < s[n]):
                vmeta.append((n, m, i, w[n, i] * (r[i] - s[n, i])))
    nv = len(vmeta)
    cost.append(np.array([g for *_, g in vmeta]))
    cost = np.concatenate(cost)
    ncol = 2 * nx + nv
    rows, cols, vals, lo, hi = [], [], [], [], []
    r = 0
    for n in range(N):  # capacity
        rows += [r] * I
        cols += list(n * I + np.arange(I))
        vals += list(c)
        lo.append(-np.inf)
        hi.append(sc.capacities[n])
        r += 1
    for k in range(nx):  # u <= x
        rows += [r, r]
        cols += [nx + k, k]
        vals += [1.0, -1.0]
        lo.append(-np.inf)
        hi.append(0.0)
        r += 1
    serve = {k: [nx + k] for k in range(nx)}
    for j, (n, m, i, _) in enumerate(vmeta):  # v <= x of the serving neighbor
        rows += [r, r]
        cols += [2 * nx + j, m * I + i]
        vals += [1.0, -1.0]
        lo.append(-np.inf)
        hi.append(0.0)
        r += 1
        serve[n * I + i].append(2 * nx + j)
    for k in range(nx):  # at most one option besides the server
        rows += [r] * len(serve[k])
        cols += serve[k]
        vals += [1.0] * len(serve[k])
        lo.append(-np.inf)
        hi.append(1.0)
        r += 1
    A = sp.csr_matrix((vals, (rows, cols)), shape=(r, ncol))
    integrality = np.zeros(ncol)
    integrality[:nx] = 1
    return cost, LinearConstraint(A, lo, hi), integrality, float((w * s).sum())


def bounds(sc, time_limit):
    cost, cons, integ, const = bound_model(sc)
    box = Bounds(0, 1)
    lp = milp(cost, constraints=cons, bounds=box)
    mip = milp(cost, constraints=cons, bounds=box, integrality=integ,
               options={"time_limit": time_limit, "disp": False})
    dual = getattr(mip, "mip_dual_bound", None)
    dual = lp.fun if dual is None or not np.isfinite(dual) else max(dual, lp.fun)
    if mip.x is None:
        return const + lp.fun, const + dual, np.nan
    x = mip.x[:sc.N * sc.I].reshape(sc.N, sc.I).round().astype(int)
    return const + lp.fun, const + dual, total_average_delay(sc, x)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--capacity", type=float, default=10.0)
    ap.add_argument("--contents", type=int, default=200)
    ap.add_argument("--men", type=int, default=4)
    ap.add_argument("--time-limit", type=float, default=120.0)
    args = ap.parse_args(argv)
    print("seed,locally_optimal,lp_bound,milp_bound,incumbent_delay,max_reduction")
    for seed in range(args.seeds):
        sc = build_scenario(template_config(men_count=args.men, content_count=args.contents,
                                            capacity_gb=args.capacity, seed=seed))
        lo = noncooperative_delay(sc, place(sc, "locally_optimal")) / sc.N
        lp, dual, primal = (v / sc.N for v in bounds(sc, args.time_limit))
        print(f"{seed},{lo:.6g},{lp:.6g},{dual:.6g},{primal:.6g},{1 - dual / lo:.4f}", flush=True)


if __name__ == "__main__":
    main()
