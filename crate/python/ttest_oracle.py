"""Reference values for the corrected resampled paired t-test.

The difference vector is defined by a closed-form expression so the Rust
acceptance suite can rebuild it exactly.
"""
import math

from scipy import stats

R, K, N_TRAIN, N_TEST = 10, 10, 2554, 284


def differences():
    return [0.1 + 0.5 * math.sin(1.7 * j + 0.3) * math.cos(0.11 * j) for j in range(R * K)]


def corrected(d):
    m = len(d)
    mean = sum(d) / m
    var = sum((x - mean) ** 2 for x in d) / (m - 1)
    t = mean / math.sqrt((1.0 / m + N_TEST / N_TRAIN) * var)
    p = 2.0 * stats.t.sf(abs(t), m - 1)
    return mean, t, p


if __name__ == "__main__":
    mean, t, p = corrected(differences())
    print(f"mean = {mean!r}")
    print(f"t = {t!r}")
    print(f"p = {float(p)!r}")
