"""Reference values for tests/unit/test_analysis.cpp (numpy, run offline)."""
import math
from collections import Counter

import numpy as np


def bins(v, b):
    order = sorted(range(len(v)), key=lambda i: (v[i], i))
    out = [0] * len(v)
    i = 0
    while i < len(v):
        j = i
        while j < len(v) and v[order[j]] == v[order[i]]:
            j += 1
        for r in range(i, j):
            out[order[r]] = min(b - 1, i * b // len(v))
        i = j
    return out


def plugin_entropy(counts):
    c = np.array([k for k in counts if k > 0], float)
    p = c / c.sum()
    return -(p * np.log(p)).sum()


def nmi(x, y):
    b = math.ceil(math.sqrt(len(x)) / 2)
    bx, by = bins(x, b), bins(y, b)
    hx = plugin_entropy(Counter(bx).values())
    hy = plugin_entropy(Counter(by).values())
    hxy = plugin_entropy(Counter(zip(bx, by)).values())
    return (hx + hy - hxy) / min(hx, hy)


def residuals(v, c):
    a = np.vstack([np.ones_like(c), c]).T
    return v - a @ np.linalg.lstsq(a, v, rcond=None)[0]


n = 40
x = np.arange(n, dtype=float)
y = np.array([(i * 7) % n for i in range(n)], dtype=float)
y2 = np.array([(i * i) % 13 for i in range(n)], dtype=float)
print("nmi(x, y)  =", repr(nmi(x, y)))
print("nmi(x, y2) =", repr(nmi(x, y2)))

i = np.arange(30.0)
a = np.sin(i)
c = i / 10
b = np.cos(1.3 * i) + 0.5 * a + 0.2 * c
print("partial correlation =", repr(np.corrcoef(residuals(a, c), residuals(b, c))[0, 1]))

xs = np.array([0, 0.25, 0.5, 0.75, 1.0, 0.1, 0.9])
ys = np.array([0.3, 0.5, 0.55, 0.52, 0.2, 0.41, 0.33])
print("polyfit a, b, c =", [repr(v) for v in np.polyfit(xs, ys, 2)])
