"""Matrix phases: what they are and how they relate to eigenvalues and the numerical range."""

import numpy as np

from phasecluster import classify, numerical_range_boundary, phases, sectorial_factorization

# a normal matrix: phases are just the eigenvalue arguments
U, _ = np.linalg.qr(np.array([[1, 2], [3, 4j]]))
A = U @ np.diag([2 * np.exp(0.3j), 0.5 * np.exp(-0.4j)]) @ U.conj().T
spec = phases(A)
print("class:", classify(A).value)
print("phases:", np.round(spec.phases, 6), "eigen args:", np.round(np.angle(np.linalg.eigvals(A)), 6))

# a non-normal one: T^H D T with unimodular D
T = np.array([[2.0, 1.0], [0.5j, 1.5]])
B = T.conj().T @ np.diag(np.exp([0.9j, -0.2j])) @ T
fac = sectorial_factorization(B)
print("phases of B:", np.round(phases(B).phases, 6))
print("reconstruction error:", np.linalg.norm(fac.T.conj().T @ fac.D @ fac.T - B))

# the numerical range of B sits inside the sector spanned by its phases
pts = numerical_range_boundary(B, 360)
ang = np.angle(pts)
print("numerical range angular span: [%.4f, %.4f]" % (ang.min(), ang.max()))

# singular and indefinite cases
for M in (np.diag([1.0, 1j, 0.0]), np.diag([1j, -1j, 1.0]), np.diag([1, np.exp(2j * np.pi / 3), np.exp(-2j * np.pi / 3)])):
    print(np.round(np.diag(M), 3), "->", classify(M).value)
