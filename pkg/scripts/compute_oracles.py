"""Independent reference values for the test suite.

Nothing here imports cmskit: every value is computed from closed forms with
fractions and the math module, then frozen into tests/oracles.json.

    python3 scripts/compute_oracles.py            # rewrite the file
    python3 scripts/compute_oracles.py --check    # compare against the frozen file
"""

import argparse
import json
import math
from fractions import Fraction
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "tests" / "oracles.json"


def stationary(P):
    """Exact left fixed vector of a stochastic matrix given as Fractions (Gauss-Jordan)."""
    n = len(P)
    # (P^T - I) pi = 0 with the last row replaced by sum(pi) = 1
    A = [[P[j][i] - (1 if i == j else 0) for j in range(n)] for i in range(n)]
    A[-1] = [Fraction(1)] * n
    b = [Fraction(0)] * (n - 1) + [Fraction(1)]
    for c in range(n):
        piv = next(r for r in range(c, n) if A[r][c] != 0)
        A[c], A[piv], b[c], b[piv] = A[piv], A[c], b[piv], b[c]
        for r in range(n):
            if r != c and A[r][c] != 0:
                f = A[r][c] / A[c][c]
                A[r] = [x - f * y for x, y in zip(A[r], A[c])]
                b[r] -= f * b[c]
    return [b[i] / A[i][i] for i in range(n)]


def entropy_rate(P, pi):
    return -math.fsum(float(pi[i]) * float(p) * math.log(float(p))
                      for i, row in enumerate(P) for p in row)


def harmonic(N, power):
    return math.fsum(1.0 / n ** power for n in range(N, 0, -1))


def compute():
    P = [[Fraction(7, 10), Fraction(3, 10)], [Fraction(4, 10), Fraction(6, 10)]]
    pi = stationary(P)
    r1_probs = [Fraction(17, 24), Fraction(7, 24)]
    alpha = 0.5
    N = 10 ** 6
    out = {
        # x-coordinate rate 3/2 - p1 is largest at the floor p1 = 53/105
        "example_r2_rate": float(Fraction(3, 2) - Fraction(53, 105)),
        # ratio at x = 0: p0(0)/2 + 2 p1(0) with p0(0) = 17/24, p1(0) = 7/24
        "example_r1_rate": float(Fraction(1, 2) * Fraction(17, 24) + 2 * Fraction(7, 24)),
        "gmarkov_pi": [float(p) for p in pi],
        "gmarkov_pi_exact": [str(p) for p in pi],
        "gmarkov_entropy": entropy_rate(P, pi),
        "gmarkov_M_11": float(pi[0] * P[0][0]),
        "example_r1_pinned_entropy": -math.fsum(float(p) * math.log(float(p)) for p in r1_probs),
        "jo_S2_limit": alpha ** 2 * math.pi ** 2 / 6,
        "jo_S2_partial_1e6": alpha ** 2 * harmonic(N, 2),
        "jo_S1_partial_1e6": alpha * harmonic(N, 1),
        "example_r1_X1_ratio": float(Fraction(7, 8) / Fraction(17, 24)),
        "example_r1_X1_exact": str(Fraction(7, 8) / Fraction(17, 24)),
        # (1/15) sin^2(|0| + |1|) + 53/105
        "example2_p_e1_at_0_1": math.sin(1.0) ** 2 / 15 + 53 / 105,
        "moment_bound_example_r1": 1.0 / (1 - 45 / 48),
        "moment_bound_example_r2": 1.0 / (1 - 209 / 210),
        "moment_bound_gmarkov": 2.0,
    }
    return out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--check", action="store_true")
    args = ap.parse_args()
    values = compute()
    if args.check:
        frozen = json.loads(OUT.read_text())
        bad = [k for k in values if json.dumps(values[k]) != json.dumps(frozen.get(k))]
        print("oracles match" if not bad else f"mismatch: {bad}")
        raise SystemExit(1 if bad else 0)
    OUT.write_text(json.dumps(values, indent=2, sort_keys=True) + "\n")
    print(f"wrote {len(values)} values to {OUT}")


if __name__ == "__main__":
    main()
