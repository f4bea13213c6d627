"""Tower, correlation and verification for the intermittent circle map, via the CLI."""
import argparse
import os

from decaycorr import cli

HERE = os.path.dirname(os.path.abspath(__file__))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=os.path.join(HERE, os.pardir, "configs", "intermittent.json"))
    ap.add_argument("--out", default="runs/intermittent")
    ap.add_argument("--seed", type=int)
    args = ap.parse_args()
    extra = ["--out", args.out] + (["--seed", str(args.seed)] if args.seed is not None else [])
    for command in ("tower", "correlate", "verify"):
        code = cli.run([command, "--config", args.config] + extra)
        print(f"{command}: exit {code}")
        if code not in (cli.EXIT_OK, cli.EXIT_FAIL):
            raise SystemExit(code)


if __name__ == "__main__":
    main()
