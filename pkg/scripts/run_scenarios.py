"""Run every config in scripts/configs and write reports under scripts/results."""
import argparse
import json
from pathlib import Path

from dynbc.cli import load_config, run_config

HERE = Path(__file__).resolve().parent


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--configs", type=Path, default=HERE / "configs")
    ap.add_argument("--out", type=Path, default=HERE / "results")
    args = ap.parse_args()
    for path in sorted(args.configs.glob("*.json")):
        report = run_config(load_config(path), args.out / path.stem)
        status = {k: v["status"] for k, v in report["checks"].items()}
        print(f"{path.stem:24s} {json.dumps(status)}")


if __name__ == "__main__":
    main()
