"""Partial Szegő integrals near each edge for a few Coulomb parameters.

A finite edge integral shows a flat sequence of partial sums as the cutoff
shrinks; a log-divergent one grows linearly in ln(1/eps).  The printed
slope is the fitted growth rate, the class column the resulting verdict
next to the four-region prediction.
"""

from szego_lab import askey_classify, divergence_classify, regularized_coulomb
from szego_lab.perturbation import phase_class

cases = [(1, 0), (0.5, 0.8), (0, 1), (0, -1), (-0.3, 0), (-1, 0), (0.25, 0.5)]

print(f"{'alpha':>6} {'beta':>6} {'slope+':>8} {'slope-':>8}  measured / predicted")
for alpha, beta in cases:
    r = divergence_classify(regularized_coulomb(alpha, beta))
    measured = phase_class(r.at_plus2, r.at_minus2)
    print(f"{alpha:6.2f} {beta:6.2f} {r.slope_plus:8.4f} {r.slope_minus:8.4f}  {measured} / {askey_classify(alpha, beta)}")
