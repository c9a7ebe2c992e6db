"""High-precision logistic values for 1000 seeded decision-logit pairs.

Writes ../fixtures/logistic_pairs.tsv with columns z_yes, z_no and
exp(z_yes) / (exp(z_yes) + exp(z_no)), the last from a 60-digit evaluation.
Logits are printed with repr so they round-trip exactly.
"""
import random
from pathlib import Path

from mpmath import mp, mpf, exp

mp.dps = 60


def main():
    rng = random.Random(20240611)
    rows = []
    for n in range(1000):
        scale = [1.0, 10.0, 50.0, 700.0][n % 4]
        zy = rng.uniform(-scale, scale)
        zn = rng.uniform(-scale, scale)
        p = 1 / (1 + exp(mpf(zn) - mpf(zy)))
        rows.append(f"{zy!r}\t{zn!r}\t{mp.nstr(p, 30)}")
    path = Path(__file__).resolve().parent.parent / "fixtures" / "logistic_pairs.tsv"
    path.write_text("\n".join(rows) + "\n")
    print("wrote", path)


if __name__ == "__main__":
    main()
