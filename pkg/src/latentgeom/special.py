"""Scalar confluent hypergeometric function of the first kind."""

from __future__ import annotations

import math

X_MAX = 500.0


def _series(a, b, x, max_terms=200000):
    term = 1.0
    total = 1.0
    terms = [1.0]
    n = 0
    while n < max_terms:
        term *= (a + n) / (b + n) * x / (n + 1)
        n += 1
        if term == 0.0:
            break
        terms.append(term)
        # past the peak of the term sequence once n > |a| + |x|, so a tiny term ends it
        if n > abs(a) + abs(x) + 2 and abs(term) < 1e-17 * abs(total + term):
            break
        total += term
    else:
        raise ArithmeticError("Kummer series did not converge")
    return math.fsum(terms)


def kummer_1f1(a, b, x):
    """``M(a, b, x) = sum_n (a)_n / (b)_n x^n / n!``.

    Negative arguments use ``M(a, b, x) = e^x M(b - a, b, -x)`` so the summed
    series has terms of one sign past the first few.
    """
    a, b, x = float(a), float(b), float(x)
    if b <= 0 and b == math.floor(b):
        raise ValueError("b must not be a nonpositive integer")
    if not abs(x) <= X_MAX:
        raise ValueError(f"|x| must be at most {X_MAX}")
    if a == b:
        return math.exp(x)
    if a == 0 or x == 0:
        return 1.0
    if x < 0:
        return math.exp(x) * _series(b - a, b, -x)
    return _series(a, b, x)
