"""Print the AMWR span log (prediction window and accuracy) for one synthetic road."""
import argparse

from jamcast.amwr import run_amwr
from jamcast.ingestion import SynthConfig, synth_generate
from jamcast.pipeline import WeekSplit, road_rows


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--road", default="road00")
    args = ap.parse_args()
    data = synth_generate(SynthConfig(seed=args.seed, roads=1 + int(args.road[4:]), days=14))
    split = WeekSplit.consecutive("2019-04-15")
    run = run_amwr(road_rows(data, args.road), forecast_start=split.test_start)
    print(f"training window {run.training_window:.0f} s")
    for s in run.spans:
        print(f"{s.start} window={s.prediction_window:>7.0f} n={s.n_points:>4} acc={s.accuracy:.3f}")


if __name__ == "__main__":
    main()
