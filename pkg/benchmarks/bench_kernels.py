"""Compare the compiled kernels with the numpy fallback.

Each backend runs in its own interpreter (the fallback is forced with
``SERRE_GALERKIN_PURE=1``) and times one right-hand-side evaluation and one
RK4 step of a solitary-wave state::

    python benchmarks/bench_kernels.py --n 600,2400,8000 --order 4
"""

import argparse
import json
import os
import subprocess
import sys
import timeit


def measure(ns, order, repeat):
    from serre_galerkin import kernels
    from serre_galerkin.integrator import rk4_step
    from serre_galerkin.semidiscrete import SerreOperator, initial_state
    from serre_galerkin.solutions import SolitaryWave
    from serre_galerkin.spline_space import make_space

    rows = []
    for n in ns:
        L = n / 20.0  # h = 0.1
        sp = make_space(L, n, order)
        w = SolitaryWave(1.2, 0.0, 2 * L)
        st = initial_state(sp, w.eta, w.u)
        op = SerreOperator(sp)
        k = 0.1 * sp.h
        number = max(1, 2000 // n)
        t_rhs = min(timeit.repeat(lambda: op(st.eta.c, st.u.c), number=number, repeat=repeat)) / number
        t_step = min(timeit.repeat(lambda: rk4_step(st, k, op), number=number, repeat=repeat)) / number
        rows.append({"N": n, "rhs_ms": 1e3 * t_rhs, "step_ms": 1e3 * t_step})
    return {"backend": kernels.IMPLEMENTATION, "order": order, "rows": rows}


def run_worker(ns, order, repeat, pure):
    env = dict(os.environ)
    env["SERRE_GALERKIN_PURE"] = "1" if pure else "0"
    cmd = [sys.executable, __file__, "--worker", "--n", ",".join(map(str, ns)), "--order", str(order), "--repeat", str(repeat)]
    out = subprocess.run(cmd, env=env, check=True, capture_output=True, text=True).stdout
    return json.loads(out)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", default="600,2400,8000", help="comma-separated cell counts")
    p.add_argument("--order", type=int, default=4)
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    args = p.parse_args(argv)
    ns = [int(v) for v in args.n.split(",")]
    if args.worker:
        print(json.dumps(measure(ns, args.order, args.repeat)))
        return 0

    fast = run_worker(ns, args.order, args.repeat, pure=False)
    slow = run_worker(ns, args.order, args.repeat, pure=True)
    if fast["backend"] != "cython":
        print("compiled extension not available; both columns use the fallback", file=sys.stderr)
    print(f"order r = {args.order}; times in ms (best of {args.repeat})")
    print(f"{'N':>6} {'rhs ' + fast['backend']:>12} {'rhs ' + slow['backend']:>12} {'step ' + fast['backend']:>13} "
          f"{'step ' + slow['backend']:>13} {'speedup':>8}")
    for a, b in zip(fast["rows"], slow["rows"]):
        print(f"{a['N']:>6} {a['rhs_ms']:>12.3f} {b['rhs_ms']:>12.3f} {a['step_ms']:>13.3f} {b['step_ms']:>13.3f} "
              f"{b['step_ms'] / a['step_ms']:>7.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
