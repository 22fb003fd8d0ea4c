"""Independent 60-digit evaluation of the subsampled-Gaussian RDP accountant.

Direct summation of the closed form (no log-space tricks), used to freeze the
expected values in tests/data/accountant_oracle.json.

    python3 accountant_oracle.py > ../data/accountant_oracle.json
"""
import json
import random

import mpmath as mp

mp.mp.dps = 60

GRID = list(range(2, 65)) + [96, 128, 192, 256]


def eps_gauss(alpha, sigma):
    if sigma == "inf":
        return mp.mpf(0)
    return mp.mpf(alpha) / (2 * mp.mpf(sigma) ** 2)


def amplified(alpha, q, st, ss):
    q = mp.mpf(q)
    e = lambda j: eps_gauss(j, st) + eps_gauss(j, ss)
    e2 = e(2)
    total = 1 + q**2 * mp.binomial(alpha, 2) * min(4 * (mp.exp(e2) - 1), mp.exp(e2) * 2)
    for j in range(3, alpha + 1):
        total += q**j * mp.binomial(alpha, j) * mp.exp((j - 1) * e(j)) * 2
    return mp.log(total) / (alpha - 1)


def account(q, rounds, st, ss, delta):
    best = None
    for a in GRID:
        eps = rounds * amplified(a, q, st, ss) + mp.log(1 / mp.mpf(delta)) / (a - 1)
        if best is None or eps < best[0]:
            best = (eps, a)
    return best


def main():
    out = {}
    out["q0.1_alpha2_sigma1"] = mp.nstr(amplified(2, "0.1", 1, "inf"), 30)
    eps, a = account("0.1", 200, 4, 4, "0.001")
    out["pinned"] = {"q": 0.1, "rounds": 200, "sigma_theta": 4.0, "sigma_s": 4.0,
                     "delta": 1e-3, "eps": mp.nstr(eps, 30), "best_alpha": a}
    rng = random.Random(20241015)
    cases = []
    for _ in range(50):
        st = round(rng.uniform(0.6, 12.0), 6)
        ss = round(rng.uniform(0.6, 12.0), 6)
        q = round(rng.uniform(0.005, 0.6), 6)
        rounds = rng.randint(1, 500)
        delta = rng.choice([1e-3, 1e-5, 1e-6])
        eps, a = account(str(q), rounds, st, ss, repr(delta))
        cases.append({"q": q, "rounds": rounds, "sigma_theta": st, "sigma_s": ss,
                      "delta": delta, "eps": mp.nstr(eps, 30), "best_alpha": a})
    out["random_configs"] = cases
    print(json.dumps(out, indent=1))


if __name__ == "__main__":
    main()
