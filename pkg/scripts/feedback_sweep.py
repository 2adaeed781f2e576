"""Spectral abscissa and certificate constant of a config under feedback scaling."""
import argparse
from pathlib import Path

from dynbc.cli import _sweep_summary, load_config, sweep_feedback

HERE = Path(__file__).resolve().parent


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("config", type=Path, nargs="?", default=HERE / "configs" / "plate.json")
    ap.add_argument("--scales", type=float, nargs="+", default=[round(0.1 * i, 1) for i in range(11)])
    args = ap.parse_args()
    rows = sweep_feedback(load_config(args.config), args.scales)
    for r in rows:
        M = "-" if r["M"] is None else f"{r['M']:.3e}"
        print(f"s={r['s']:4.2f}  abscissa={r['spectral_abscissa']:+.5f}  M={M}  {r['verdict'] or ''}")
    print(_sweep_summary(rows))


if __name__ == "__main__":
    main()
