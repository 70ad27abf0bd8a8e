import argparse
import logging
import sys

from oankit.evaluation.bench import find_operating_point
from oankit.evaluation.bench import read_sweep_csv


def get_parser():
    parser = argparse.ArgumentParser(
        description="Check a sweep for a threshold meeting the trade-off targets",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    parser.add_argument("sweep_csv", type=str, help="sweep.csv written by sweep")
    parser.add_argument("--min_skip_ratio", type=float, default=0.4)
    parser.add_argument("--min_gate_recall", type=float, default=0.95)
    parser.add_argument(
        "--max_map_drop", type=float, default=0.01, help="mAP drop from T=0"
    )
    return parser


def main(cmd=None):
    args = get_parser().parse_args(cmd)
    logging.basicConfig(
        level="INFO",
        format="%(asctime)s (%(module)s:%(lineno)d) %(levelname)s: %(message)s",
    )
    rows = read_sweep_csv(args.sweep_csv)
    best = find_operating_point(
        rows, args.min_skip_ratio, args.min_gate_recall, args.max_map_drop
    )
    if best is None:
        logging.error(
            f"No threshold reaches skip_ratio>={args.min_skip_ratio}, "
            f"gate_recall>={args.min_gate_recall} within {args.max_map_drop} mAP"
        )
        return 1
    logging.info(
        f"T={best.threshold:.4f}: skip_ratio={best.skip_ratio:.3f} "
        f"gate_recall={best.gate_recall:.3f} mAP={best.mAP:.4f}"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
