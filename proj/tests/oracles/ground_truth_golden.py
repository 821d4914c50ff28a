"""Straight-line reimplementation of the ground-truth process and its seeded
draws, used to freeze the golden values in test_synthetic.cpp.

Usage: python3 ground_truth_golden.py [model_seed] [data_seed] [count]
"""
import math
import sys

M = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15


def mix(z):
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & M
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & M
    return z ^ (z >> 31)


def fnv1a(name):
    h = 0xCBF29CE484222325
    for c in name.encode():
        h ^= c
        h = (h * 0x100000001B3) & M
    return h


class Stream:
    def __init__(self, key):
        self.key = key
        self.counter = 0

    def sub(self, ident):
        if isinstance(ident, str):
            ident = fnv1a(ident)
        return Stream(mix(self.key ^ mix((ident + GAMMA) & M)))

    def u64(self):
        v = mix((self.key + (self.counter + 1) * GAMMA) & M)
        self.counter += 1
        return v

    def uniform(self):
        return (self.u64() >> 11) * 2.0**-53

    def normal(self, mean, sd):
        u1 = 1.0 - self.uniform()
        u2 = self.uniform()
        return mean + sd * (math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2))


def main():
    model_seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
    data_seed = int(sys.argv[2]) if len(sys.argv) > 2 else 0
    count = int(sys.argv[3]) if len(sys.argv) > 3 else 5

    g = Stream(model_seed).sub("ground_truth")
    v = [[g.normal(0.0, 0.01) for _ in range(15)] for _ in range(13)]
    w = [g.normal(0.0, 1.0) for _ in range(13)]
    alphas = [0.0, 0.5, 0.9, 0.99, 0.999]

    x = Stream(data_seed).sub("data").sub("train").sub(0).normal(0.0, 100.0)
    print(repr(x))
    mp = [0.0] * 5
    mm = [0.0] * 5
    mz = [0.0] * 5
    z_prev = 0.0
    for _ in range(count):
        xp = max(x, 0.0)
        xm = max(-x, 0.0)
        dp = mp[3] - mp[4]
        dm = mm[3] - mm[4]
        z = (max(z_prev, 0.0) + max(dp - 0.01, 0.0) - max(-dm - 0.01, 0.0)
             - max(-dp - 0.05, 0.0) + max(dm - 0.05, 0.0))
        for i, a in enumerate(alphas):
            mp[i] = a * mp[i] + (1.0 - a) * xp
            mm[i] = a * mm[i] + (1.0 - a) * xm
            mz[i] = a * mz[i] + (1.0 - a) * z
        z_prev = z
        mu = []
        for i in range(5):
            mu += [mp[i], mm[i], mz[i]]
        o = [xp, -xm] + [sum(vj[k] * mu[k] for k in range(15)) for vj in v]
        x = o[0] + o[1] + sum(w[j] * o[2 + j] for j in range(13))
        print(repr(x))


if __name__ == "__main__":
    main()
