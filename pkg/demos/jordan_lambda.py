"""Normalized powers Lambda_n for a Jordan block and an irrational rotation.

For [[2,1],[0,2]] the matrix M^n / (n 2^n) equals [[1/n, 1/2], [0, 1/n]],
so Lambda_n converges at rate 1/n to a rank-one limit.  The rotation
example only converges along continued-fraction denominators.
"""
from __future__ import annotations

import math

import numpy as np

from corrlab.cohomlin import cauchy_report, lambda_n, rotation_example, rotation_subsequence, spectral_data

M = np.array([[2.0, 1.0], [0.0, 2.0]])
S = spectral_data(M)
for n in (10, 40, 1000, 10 ** 6):
    print(n, np.round(lambda_n(M, S, n), 8).tolist())

R = rotation_example(math.sqrt(2) - 1)
SR = spectral_data(R)
seq = rotation_subsequence(SR, max_n=10 ** 8)
print("subsequence", seq[-4:], "max diff", cauchy_report(R, SR, seq)["max_diff"])
print("full sequence max diff", cauchy_report(R, SR, list(range(1, 200)), tail=50)["max_diff"])
