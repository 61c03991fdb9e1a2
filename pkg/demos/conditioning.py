"""Why the Newton system needs regularization and a preconditioner late in a solve.

Solves the 8-bit factory value LP to a tight tolerance, keeps the final
iterate, and solves its Newton system with CG three ways.

    python demos/conditioning.py     # about two minutes
"""

import time

from symqp.apps.mdp import factory_mdp, gen_mdp_lp
from symqp.ipm import SolveOptions, ipm_solve
from symqp.ipm.core import newton_direction
from symqp.lang import compile

last = {}


def keep(e):
    last.update(e)
    print(f"  iter {e['iter']:>2}  mu {e['mu']:.1e}  CG {e['cg'].iterations}")


print("solving the factory value LP to tol 1e-9 ...")
rep = ipm_solve(compile(gen_mdp_lp(factory_mdp())), SolveOptions(tol=1e-9, max_iter=26, precond_k=10, callback=keep))
print(rep.status, "objective", rep.objective)

prob, st = last["problem"], last["state"]
theta = prob.la.to_numpy(last["theta_inv"])
theta = theta[theta > 0]
cap = int(round(prob.la.to_numpy(prob.xpart * prob.col_mask).sum()))
print(f"\nfinal iterate: Theta^-1 from {theta.min():.1e} to {theta.max():.1e}")
print(f"CG cap = system dimension = {cap}, reduction 1e-8\n")

for label, rho, k in [("no regularization", 0.0, 0), ("regularized", 1e-8, 0), ("regularized, 50 pivots", 1e-8, 50)]:
    opts = SolveOptions(rho_primal=rho, rho_dual=rho, precond_k=k, cg_reduction=1e-8, max_cg=cap)
    t0 = time.perf_counter()
    d = newton_direction(prob, st, last["rp"], last["rd"], last["rc"], last["theta_inv"], last["structure"], opts, rho, rho, k)
    state = "converged" if d.cg.converged else "hit the cap"
    print(f"{label:<24} {d.cg.iterations:>4} iterations, {state}, {time.perf_counter() - t0:.1f} s")
