"""Reference Shapiro-Wilk values from scipy.stats.shapiro.

Samples come from a splitmix64 stream so the Rust tests can regenerate them
bit-for-bit (see `tests/common/mod.rs`). Run with:

    python3 crates/core/tests/oracles/shapiro_wilk_reference.py
"""
import math

import scipy
from scipy import stats

MASK = (1 << 64) - 1


class SplitMix64:
    def __init__(self, seed):
        self.state = seed & MASK

    def next_u64(self):
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
        return z ^ (z >> 31)

    def uniform(self):
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def normal(self):
        # Box-Muller, one draw per pair of uniforms.
        u1 = 1.0 - self.uniform()
        u2 = self.uniform()
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)

    def exponential(self):
        return -math.log(1.0 - self.uniform())


def sample(kind, n, seed):
    g = SplitMix64(seed)
    draw = {"normal": g.normal, "uniform": g.uniform, "exponential": g.exponential}[kind]
    return [draw() for _ in range(n)]


CASES = []
seed = 1000
for n in (10, 50, 500, 5000):
    for kind in ("normal", "uniform", "exponential"):
        CASES.append((kind, n, seed))
        seed += 1
for n in (10, 50, 500, 5000):
    for kind in ("normal", "uniform"):
        CASES.append((kind, n, seed))
        seed += 1

EXTRA = [("normal", 50, 7), ("uniform", 100, 11)]

if __name__ == "__main__":
    print(f"// scipy {scipy.__version__}")
    for kind, n, s in CASES + EXTRA:
        w, p = stats.shapiro(sample(kind, n, s))
        print(f'("{kind}", {n}, {s}, {float(w)!r}, {float(p)!r}),')
