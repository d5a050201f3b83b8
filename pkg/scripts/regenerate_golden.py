"""Rewrite the figure datasets checked in under tests/golden/.

Figures 5 and 7 are written at full resolution; the sweep figures 4 and 6
use a reduced grid so the files stay small.  Run after an intentional
change to the numerics and review the diff.
"""
import argparse
from pathlib import Path

from csumsim.cli import figure_files

GOLDEN_POINTS = {4: 11, 5: None, 6: 11, 7: None}


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default=str(Path(__file__).resolve().parents[1] / "tests" / "golden"))
    args = parser.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for fig, points in GOLDEN_POINTS.items():
        files = figure_files(fig) if points is None else figure_files(fig, points)
        for name, text in files.items():
            (out / name).write_text(text, encoding="utf-8", newline="")
            print(out / name)


if __name__ == "__main__":
    main()
