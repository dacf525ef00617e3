"""Generate a synthetic fortnight and run the week-ahead comparison end to end.

    python3 scripts/run_synthetic_experiment.py --out runs/synthetic --roads 4 --seed 0
"""
import argparse
import logging
from pathlib import Path

from jamcast.cli import main as cli_main


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("runs/synthetic"))
    ap.add_argument("--roads", type=int, default=4)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")

    args.out.mkdir(parents=True, exist_ok=True)
    data = args.out / "synthetic.csv"
    cfg = args.out / "synth.toml"
    cfg.write_text(f"seed = {args.seed}\nroads = {args.roads}\ndays = 14\n")
    rc = cli_main(["synth", "--config", str(cfg), "--out", str(data)])
    if rc:
        return rc
    rc = cli_main([
        "experiment", "--data", str(data), "--out", str(args.out / "experiment"),
        "--random", str(args.roads), "--seed", str(args.seed),
    ])
    if rc == 0:
        print((args.out / "experiment" / "comparison.csv").read_text())
    return rc


if __name__ == "__main__":
    raise SystemExit(main())
