"""Regenerates bound_oracles.json: closed-form bounds evaluated with mpmath
at 50 digits, using direct (non-recursive) double sums.

    python3 gen_bound_oracles.py > bound_oracles.json
"""
import json
import random

from mpmath import mp, mpf, log, sqrt

mp.dps = 50


def alpha(s, t):
    k = mpf(t + 1)
    kind = s["kind"]
    if kind == "constant":
        return mpf(s["alpha"])
    if kind == "inverse-t":
        return mpf(s["c"]) / k
    if kind == "inverse-nu-t":
        return 1 / (mpf(s["nu"]) * k)
    return 1 / (2 * mpf(s["nu"]) * k)


def power(x, e):
    return mpf(1) if e == 0 else x ** e


def inner(s, lam, t):
    return sum(alpha(s, j) * power(lam, t - 1 - j) for j in range(t))


def m_of_t(s, lam, T):
    return max(inner(s, lam, t) for t in range(1, T))


def c_lambda(lam):
    if lam == 0:
        return mpf(0)
    li = log(1 / lam)
    return li * lam ** li / lam + li ** 2 / (16 * lam) * lam ** (li / 8) + 2 / (lam * li)


def d_lambda(B, L, nu, lam, m, r):
    C = c_lambda(lam)
    return B**2 / (2 * nu**2) + lam**2 * B**2 * C**2 / (2 * nu**2 * m) + 2 * L * r * B * C / nu**2


def ind(c):
    return mpf(1) if c else mpf(0)


def thm1(p):
    B, lam, T, mn = p["B"], p["lam"], p["T"], p["mn"]
    s = p["schedule"]
    first = 2 * B**2 * sum(alpha(s, t) for t in range(1, T)) / mn
    second = 4 * B**2 * sum((1 + alpha(s, t) * B) * inner(s, lam, t) for t in range(1, T))
    return first + second * ind(lam != 0)


def prop1(p):
    B, lam, T, mn = p["B"], p["lam"], p["T"], p["mn"]
    s = p["schedule"]
    if s["kind"] == "constant":
        a = mpf(s["alpha"])
        return 2 * B**2 * a * (T - 1) / mn + 4 * a * B**2 * (1 + a * B) * (T - 1) / (1 - lam) * ind(lam != 1)
    return B**2 * log(T) / mn + 4 * B**2 * (1 + B) / log(T + 1) * ind(lam != 1)


def thm2(p):
    B, lam, mn, nu = p["B"], p["lam"], p["mn"], p["nu"]
    s = p["schedule"]
    g = ind(lam != 0) / (1 - lam)
    if s["kind"] == "constant":
        a = mpf(s["alpha"])
        return 2 * B**2 / (mn * nu) + 4 * (1 + a * B) * B**2 / nu * g
    return 2 * B**2 / (mn * nu) + 4 * (1 + B / nu) * (B**2 / nu) * g


def thm3(p):
    B, L, lam, T, mn, c = p["B"], p["L"], p["lam"], p["T"], p["mn"], p["c"]
    e1 = 1 / (1 + c * L)
    q = c * L / (1 + c * L)
    return c**e1 * T**q / mn + c**e1 * (2 * B**2 * c * L / mn + 4 * (1 + c * B) * B**2 * L * c_lambda(lam)) * T**q


def lemma3(p):
    B, L, lam, T, m, r, D = p["B"], p["L"], p["lam"], p["T"], p["m"], p["r"], p["D"]
    s = p["schedule"]
    s1 = sum(alpha(s, t) for t in range(1, T))
    s2 = sum(alpha(s, t) ** 2 for t in range(1, T))
    M = m_of_t(s, lam, T)
    return D**2 / s1 + 2 * B**2 * s2 / (m * s1) + 8 * L * r * B * M + 2 * lam**2 * B**2 * M**2


def lemma4_parts(p, D):
    B, L, lam, T, m, r, nu = p["B"], p["L"], p["lam"], p["T"], p["m"], p["r"], p["nu"]
    s = p["schedule"]
    if s["kind"] == "constant":
        a = mpf(s["alpha"])
        return (1 - 2 * a * nu) ** (T - 1) * D**2 + (
            4 * a * L * r * B / ((1 - lam) * nu) + lam**2 * B**2 * a / (m * (1 - lam) ** 2 * nu)
        ) * ind(lam != 0)
    return D**2 / (T - 1) + d_lambda(B, L, nu, lam, m, r) * log(T) / (T - 1)


def lemma4(p):
    return lemma4_parts(p, p["D"])


def thm4(p):
    B, L, lam, T, m, r = p["B"], p["L"], p["lam"], p["T"], p["m"], p["r"]
    s = p["schedule"]
    if s["kind"] == "constant":
        a = mpf(s["alpha"])
        return prop1(p) + 4 * r**2 / ((T - 1) * a) + 2 * B**2 * a / m + 8 * L * r * B * a / (1 - lam) * ind(lam != 1) + 2 * lam**2 * B**2 * a**2 / (1 - lam) ** 2
    C = c_lambda(lam)
    return prop1(p) + 2 * lam**2 * B**2 * C**2 + 4 * r**2 / log(T + 1) + 4 * B**2 / (m * log(T + 1)) + 8 * L * r * B * C * ind(lam != 1)


def thm5(p):
    return thm2(p) + p["B"] * sqrt(lemma4_parts(p, 2 * p["r"]))


def draw(rng, bound, variant):
    B = rng.uniform(0.1, 3.0)
    L = rng.uniform(0.1, 3.0)
    nu = rng.uniform(0.01, min(0.5, L))
    lam = rng.uniform(0.01, 0.95)
    m = rng.randint(2, 20)
    n = rng.randint(5, 200)
    T = rng.randint(2, 300)
    r = rng.uniform(0.5, 5.0)
    D = rng.uniform(0.0, 2 * r)
    c = None
    if variant == "constant-alpha":
        limit = {"thm1": 2 / L, "prop1": 2 / L, "thm4": 2 / L, "lemma3": 2 / L,
                 "thm2": 1 / L, "thm5": min(1 / L, 0.49 / nu), "lemma4": min(1 / L, 0.49 / nu)}[bound]
        sched = {"kind": "constant", "alpha": rng.uniform(0.001, limit)}
    elif variant == "inverse-t":
        sched = {"kind": "inverse-t", "c": 1.0}
    elif variant == "inverse-nu-t":
        sched = {"kind": "inverse-nu-t", "nu": nu}
    elif variant == "inverse-two-nu-t":
        sched = {"kind": "inverse-two-nu-t", "nu": nu}
    else:
        c = rng.uniform(0.001, 0.2)
        sched = {"kind": "inverse-t", "c": c}
        n = max(n, 50)
    if bound in ("thm1", "lemma3") and variant == "general":
        sched = rng.choice([
            {"kind": "constant", "alpha": rng.uniform(0.001, 2 / L)},
            {"kind": "inverse-t", "c": rng.uniform(0.01, 2 / L)},
        ])
    return {"B": B, "L": L, "nu": nu, "lam": lam, "m": m, "n": n, "T": T, "r": r,
            "D": D, "c": c, "schedule": sched}


FUNCS = {"thm1": thm1, "prop1": prop1, "thm2": thm2, "thm3": thm3, "lemma3": lemma3,
         "lemma4": lemma4, "thm4": thm4, "thm5": thm5}
VARIANTS = {
    "thm1": ["general"], "thm3": ["general"], "lemma3": ["general"],
    "prop1": ["constant-alpha", "inverse-t"], "thm4": ["constant-alpha", "inverse-t"],
    "thm2": ["constant-alpha", "inverse-nu-t"], "thm5": ["constant-alpha", "inverse-nu-t"],
    "lemma4": ["constant-alpha", "inverse-two-nu-t"],
}


def main():
    rng = random.Random(20240611)
    cases = []
    for bound, variants in VARIANTS.items():
        for variant in variants:
            for _ in range(10):
                raw = draw(rng, bound, variant)
                p = dict(raw)
                for k in ("B", "L", "nu", "lam", "r", "D"):
                    p[k] = mpf(raw[k])
                if raw["c"] is not None:
                    p["c"] = mpf(raw["c"])
                p["mn"] = mpf(raw["m"] * raw["n"])
                value = FUNCS[bound](p)
                cases.append({"bound": bound, "variant": variant, "inputs": raw,
                              "expected": mp.nstr(value, 30)})
    print(json.dumps(cases, indent=1))


if __name__ == "__main__":
    main()
