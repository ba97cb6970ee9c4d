"""Staged walk from an error-free Coulomb matrix to one with seeded errors.

The base is shifted up by 6C n^(-1-eps), then each site is moved to its
target value by an L35 step (trade b) followed by an L33 step (lower a).
Every step is audited for delta-minoration and the free-tail Z value is
tracked; it has to stay below the bound accumulated from the shift.
"""

from szego_lab import coulomb, staged_audit

target = coulomb(1, 1, error_amp=0.5, error_exp=0.5, error_seed=3)
res = staged_audit(target, coulomb(1, 1), eps=0.5, stages=16, N=4000)

print(f"C = {res.C:.5f}, first staged site = {res.start}")
for row in res.stages[:4]:
    print(row["site"], [(s["spec"]["kind"], s["verdict"]) for s in row["steps"]])
print("...")
print("all stages minorate:", res.verdict, " hypotheses held:", res.hypothesis_ok)
print("Z along the walk:", [round(z, 5) for z in res.z_values], " bound:", round(res.z_bound, 4))
