"""Command-line HiGHS driver: ``python -m trstl.milp.highs_runner model.lp solution.sol``.

Reads an LP file, solves it with highspy and writes a raw HiGHS solution file.

``--start FILE`` passes a MIP start as ``name value`` lines covering every
column; HiGHS keeps it as the first incumbent if it is feasible.
"""

import argparse
import sys


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("model")
    ap.add_argument("solution")
    ap.add_argument("--time-limit", type=float, default=600.0)
    ap.add_argument("--mip-gap", type=float, default=0.0)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--start", help="MIP start, one 'name value' line per column")
    ap.add_argument("--verbose", action="store_true")
    args = ap.parse_args(argv)

    import highspy

    h = highspy.Highs()
    h.setOptionValue("output_flag", args.verbose)
    h.setOptionValue("time_limit", args.time_limit)
    h.setOptionValue("mip_rel_gap", args.mip_gap)
    h.setOptionValue("mip_abs_gap", 0.0)
    h.setOptionValue("threads", args.threads)
    if h.readModel(args.model) == highspy.HighsStatus.kError:
        print(f"cannot read {args.model}", file=sys.stderr)
        return 2
    if args.start:
        _set_start(h, highspy, args.start)
    h.run()
    h.writeSolution(args.solution, 0)
    return 0


def _set_start(h, highspy, path: str) -> None:
    values = {}
    with open(path) as fh:
        for line in fh:
            if line.strip():
                name, value = line.split()
                values[name] = float(value)
    names = h.getLp().col_names_
    missing = [n for n in names if n not in values]
    if missing:
        print(f"start ignored: no value for {missing[0]}", file=sys.stderr)
        return
    sol = highspy.HighsSolution()
    sol.col_value = [values[n] for n in names]
    sol.value_valid = True
    h.setSolution(sol)


if __name__ == "__main__":
    sys.exit(main())
