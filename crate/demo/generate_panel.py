"""Writes the synthetic forecaster panel used by the demo.

Three forecasters are accurate, fifteen share a common shock, the rest are
noisy. Some columns start late, stop early or skip quarters.
"""

import random
from pathlib import Path

SEED = 20240611
FORECASTERS = 23
SEARCH_ROWS = 70
ROOT = Path(__file__).resolve().parent


def quarters(start_year, start_q, count):
    year, q = start_year, start_q
    for _ in range(count):
        yield f"{year}Q{q}"
        q += 1
        if q == 5:
            year, q = year + 1, 1


def main():
    rng = random.Random(SEED)
    dates = list(quarters(1999, 3, 106))
    actual, level = [], 1.5
    for _ in dates:
        level = 1.5 + 0.6 * (level - 1.5) + rng.gauss(0.0, 0.8)
        actual.append(level)

    kinds = ["skilled"] * 3 + ["herd"] * 15 + ["noisy"] * 5
    bias = [rng.gauss(0.0, 0.15) for _ in kinds]
    noise = {"skilled": 0.25, "herd": 0.35, "noisy": 0.9}
    start = [0] * FORECASTERS
    stop = [len(dates)] * FORECASTERS
    for j in rng.sample(range(FORECASTERS), 4):
        start[j] = rng.randrange(2, 25)
    for j in rng.sample(range(FORECASTERS), 3):
        stop[j] = rng.randrange(60, 100)

    rows = []
    for t, y in enumerate(actual):
        common = rng.gauss(0.0, 0.7)
        cells = []
        for j, kind in enumerate(kinds):
            if t < start[j] or t >= stop[j] or rng.random() < 0.05:
                cells.append("NA")
                continue
            value = y + bias[j] + rng.gauss(0.0, noise[kind])
            if kind == "herd":
                value += common
            cells.append(f"{value:.3f}")
        rows.append(cells + [f"{y:.3f}"])

    header = ["date"] + [f"f{j + 1:02d}" for j in range(FORECASTERS)] + ["actual"]

    def write(path, count):
        lines = [",".join(header)]
        lines += [",".join([d] + r) for d, r in zip(dates[:count], rows[:count])]
        path.write_text("\n".join(lines) + "\n")

    write(ROOT / "workspace" / "panel_search.csv", SEARCH_ROWS)
    write(ROOT / "data" / "panel_extended.csv", len(dates))


if __name__ == "__main__":
    main()
