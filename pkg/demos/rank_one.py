"""Walk through the simplest non-trivial case: the free matrix with b_1 = 2.

One bound state at E = 2.5 (beta = 2), and stripping one site gives back
the free matrix, so every term of the step-by-step rule is known in closed
form.  Run:  python demos/rank_one.py
"""

import math

from szego_lab import TruncatedJacobi, eigenvalues_outside, explicit, one_sided_step_rule, step_sum_rule

seq = explicit({1: (1.0, 2.0)})

es = eigenvalues_outside(TruncatedJacobi(seq, 2000))
print("bound states above 2:", es.above, " betas:", es.betas_above)

r = step_sum_rule(seq, 1, 2000)
print(f"Z(J)         = {r.lhs:.8f}   (ln 2 = {math.log(2):.8f})")
print(f"-ln a_1      = {r.coeff_term + 0.0:.8f}")
print(f"ln|beta_1|   = {r.eig_term:.8f}")
print(f"Z(J^(1))     = {r.rhs_tail:.2e}")
print(f"residual     = {r.residual:.2e}  (budget {r.error_budget:.1e})")

r = one_sided_step_rule(seq, "+", 1, 2000)
print(f"\nZ1+(J) = {r.lhs:.8f}  vs ln 2 - 1/4 = {math.log(2) - 0.25:.8f}; residual {r.residual:.1e}")
