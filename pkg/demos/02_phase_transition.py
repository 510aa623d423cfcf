"""
When does a ball stop being a local maximum?
============================================

Perturb the boundary of B(0, r) in R^n with the normal speed
g_1(x) = n x_1^2 - |x|^2, chosen so the Gaussian measure is preserved to
second order. Half the second derivative of F along that deformation has a
closed form whose sign is that of r^2 - (n + 2).
"""

# %%
import numpy as np

from symstab import NormalPerturbation, second_variation_F
from symstab.variation import closed_form_bound

for n in (2, 3):
    print(f"n = {n}: critical radius sqrt(n+2) = {np.sqrt(n + 2):.4f}")
    for r in (1.0, 1.9, 2.0, 2.1, 2.3, 2.5):
        rep = second_variation_F(NormalPerturbation.g1(n, r))
        print(f"  r={r:4.2f}  quadrature={rep.second_variation: .3e}  "
              f"closed form={closed_form_bound(n, r): .3e}  {rep.phase}")

# %%
# In the plane the complement of a small disk has the same F as a large
# disk of the same measure. The complement B(0, r')^c is locally maximal only
# when r' > 2, which in terms of the paired radius r means r > 0.53928.
from symstab.experiments import paired_radius, threshold_radius

r0 = threshold_radius()
print(f"threshold r = {r0:.7f}, paired radius there = {paired_radius(r0):.12f}")

# %%
# Perturbations orthogonal to the g-basis always decrease F: only the
# negative defect term survives.
f = NormalPerturbation.from_function(2.4, lambda t: np.cos(4 * t), 512).normalized()
print("cos(4 theta) perturbation:", second_variation_F(f).second_variation)
