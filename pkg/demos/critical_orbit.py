"""Obstruction polynomials for critical chains in a one-parameter family.

Eliminates the chain system by iterated resultants and evaluates the
resulting integer polynomial at a few rational parameters.  A nonzero value
certifies that no chain of that kind exists for that parameter.
"""
from __future__ import annotations

from fractions import Fraction

from corrlab.algres import periodicity_obstruction_test

for c in (Fraction(7, 5), Fraction(-1), Fraction(0)):
    rep = periodicity_obstruction_test(2, 3, c, 2)
    print(f"c = {c}: certified {rep['certified']}")
    for row in rep["rows"]:
        print(f"  n={row['n']} {row['kind']:12s} P(c)=0: {row['vanishes']!s:5s} numeric chain: {row['numeric_chain']}")
