"""Regenerates boston.csv, a synthetic housing-style regression fixture.

The file mimics the column layout and value ranges of the classic 506-row
housing table (13 features plus a MEDV target) but every value is drawn
from a seeded generator, so the fixture ships no real records and is fully
reproducible: python3 gen_boston.py > boston.csv
"""

import random

random.seed(20240817)

COLS = ["CRIM", "ZN", "INDUS", "CHAS", "NOX", "RM", "AGE",
        "DIS", "RAD", "TAX", "PTRATIO", "B", "LSTAT", "MEDV"]


def row():
    crim = round(random.lognormvariate(-1.0, 1.6), 5)
    zn = round(random.choice([0.0] * 7 + [12.5, 25.0, 50.0, 80.0]), 2)
    indus = round(random.uniform(0.5, 27.0), 2)
    chas = 1 if random.random() < 0.07 else 0
    nox = round(random.uniform(0.38, 0.87), 3)
    rm = round(random.gauss(6.3, 0.7), 3)
    age = round(random.uniform(3.0, 100.0), 1)
    dis = round(random.uniform(1.1, 12.0), 4)
    rad = random.choice([1, 2, 3, 4, 5, 6, 7, 8, 24])
    tax = random.choice([187, 222, 276, 307, 330, 398, 437, 666, 711])
    ptratio = round(random.uniform(12.6, 22.0), 1)
    b = round(random.uniform(2.5, 396.9), 2)
    lstat = round(random.uniform(1.7, 38.0), 2)
    medv = (22.0 + 5.2 * (rm - 6.3) - 0.55 * lstat / 2.0
            - 2.4 * crim / (1.0 + crim) - 6.0 * (nox - 0.55)
            + 0.02 * (100.0 - age) / 10.0 + random.gauss(0.0, 2.0))
    medv = round(min(max(medv, 5.0), 50.0), 1)
    return [crim, zn, indus, chas, nox, rm, age, dis, rad, tax,
            ptratio, b, lstat, medv]


print(",".join(COLS))
for _ in range(506):
    print(",".join(str(v) for v in row()))
