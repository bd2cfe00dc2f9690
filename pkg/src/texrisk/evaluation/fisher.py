"""Two-sided Fisher exact test via exact integer hypergeometric enumeration.

All tables sharing the margins of [[a, b], [c, d]] have probability
C(r1, a') * C(r2, c1 - a') / C(N, c1); the two-sided p-value sums the
probabilities of tables no more likely than the observed one.  Numerators are
exact Python integers, so the only rounding is the final division.
"""

from __future__ import annotations

from math import comb


def fisher_exact_two_sided(a: int, b: int, c: int, d: int) -> float:
    """Exact two-sided p for the 2x2 table [[a, b], [c, d]]."""
    for value in (a, b, c, d):
        if value < 0 or int(value) != value:
            raise ValueError("table entries must be non-negative integers")
    a, b, c, d = int(a), int(b), int(c), int(d)
    r1, r2 = a + b, c + d
    c1 = a + c
    n = r1 + r2
    if n == 0:
        return 1.0
    lo = max(0, c1 - r2)
    hi = min(c1, r1)
    observed = comb(r1, a) * comb(r2, c1 - a)
    numerator = sum(
        weight
        for a_prime in range(lo, hi + 1)
        if (weight := comb(r1, a_prime) * comb(r2, c1 - a_prime)) <= observed
    )
    return numerator / comb(n, c1)


def odds_ratio(events: int, non_events: int,
               ref_events: int, ref_non_events: int) -> float:
    """(e*h_ref)/(h*e_ref); inf when the denominator is empty, nan when 0/0."""
    numerator = events * ref_non_events
    denominator = non_events * ref_events
    if denominator == 0:
        return float("nan") if numerator == 0 else float("inf")
    return numerator / denominator
