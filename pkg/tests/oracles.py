"""Slow, independent reference implementations used only by the tests."""

import itertools
import math


def brute_pairs(dims, order):
    """All unordered site pairs within squared index distance order**2."""
    coords = list(itertools.product(*[range(n) for n in dims]))
    out = set()
    for (i, a), (j, b) in itertools.combinations(enumerate(coords), 2):
        d2 = sum((p - q) ** 2 for p, q in zip(a, b))
        if d2 <= order * order:
            out.add((i, j))
    return out


def reference_energy_mu(values, dims, mu, beta, temperature, order, floor=1e-3):
    """Direct site-by-site evaluation of the energy over class means."""
    if any(m < 0 or m > 255 for m in mu):
        return math.inf
    labels = []
    for y in values:
        best = 0
        for j in range(1, len(mu)):
            if abs(y - mu[j]) < abs(y - mu[best]):
                best = j
        labels.append(best)
    data = 0.0
    for j in range(len(mu)):
        members = [y for y, lab in zip(values, labels) if lab == j]
        if not members:
            continue
        sigma = max(math.sqrt(sum((y - mu[j]) ** 2 for y in members) / len(members)), floor)
        for y in members:
            data += math.log(sigma) + (y - mu[j]) ** 2 / (2 * sigma * sigma)
    smooth = 0.0
    for s, t in brute_pairs(dims, order):
        smooth += 1 - 2 * (labels[s] == labels[t])
    return data + beta / temperature * smooth
