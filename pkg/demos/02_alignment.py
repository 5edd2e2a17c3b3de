"""Aligning a set of matrices with one right factor K, and the diversity of a set."""

import numpy as np

from phasecluster import align_feasibility, diversity, phases

rng = np.random.default_rng(0)

# any single nonsingular matrix can be aligned to zero phase (its inverse works)
A = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
cert = align_feasibility([A], 0.0)
print("single matrix, achieved half-width:", cert.achieved_halfwidth)

# a set of noisy rotations around two directions
S = [np.exp(1j * t) * (np.eye(2) + 0.2 * rng.normal(size=(2, 2))) for t in (0.1, 0.3, 0.2, 1.3)]
for alpha in (0.2, 0.5, 0.8):
    c = align_feasibility(S, alpha)
    print(f"alpha={alpha}: {'alignable' if c else 'not alignable'}")
    if c:
        for AK in c.products:
            ph = phases(AK)
            print("   phases of A K:", np.round(ph.phases, 3))

# diversity: the smallest alpha that works (bisection on the feasibility problem)
print("diversity of first three:", round(diversity(S[:3]).value, 4))
print("diversity of all four:   ", round(diversity(S).value, 4))

# for unit scalars it is half the shortest arc holding all the angles
print("scalar pair 0.8, -0.4:", round(diversity([[[np.exp(0.8j)]], [[np.exp(-0.4j)]]]).value, 4), "expected 0.6")
