#!/usr/bin/env python3
"""Decide feasibility of an exported SDPA sparse file with an external solver.

The file is read as the problem: find block-diagonal Y >= 0 with
F_k . Y = c_k for every constraint k. Usage:

    qqc feasible problem.json --q 1 --eps 0 --export-sdpa prog.dat-s
    python3 scripts/sdpa_crosscheck.py prog.dat-s [more.dat-s ...]

Prints one line per file with the cvxpy status and the equality residual.
"""

import argparse
import re
import sys

import cvxpy as cp
import numpy as np


def tokens(line):
    line = line.split("*")[0].split('"')[0]
    return [t for t in re.split(r"[\s,{}()]+", line) if t]


def parse(path):
    with open(path) as fh:
        lines = [tokens(l) for l in fh]
    lines = [l for l in lines if l]
    m = int(lines[0][0])
    nblocks = int(lines[1][0])
    sizes = [int(v) for v in lines[2][:nblocks]]
    c = np.array([float(v) for v in lines[3][:m]])
    entries = [(int(k), int(b), int(i), int(j), float(v)) for k, b, i, j, v in (l[:5] for l in lines[4:])]
    return m, sizes, c, entries


def build(m, sizes, c, entries):
    blocks = [cp.Variable((abs(s), abs(s)), symmetric=True) if s > 0 else cp.Variable(abs(s)) for s in sizes]
    cons = [Y >> 0 if s > 0 else Y >= 0 for Y, s in zip(blocks, sizes)]
    lhs = [0] * m
    for k, b, i, j, v in entries:
        if k == 0:
            continue
        Y, s = blocks[b - 1], sizes[b - 1]
        if s < 0:
            term = v * Y[i - 1]
        elif i == j:
            term = v * Y[i - 1, j - 1]
        else:
            term = 2 * v * Y[i - 1, j - 1]
        lhs[k - 1] = lhs[k - 1] + term
    cons += [lhs[k] == c[k] for k in range(m)]
    return blocks, cons, lhs


def check(path, solver):
    m, sizes, c, entries = parse(path)
    blocks, cons, lhs = build(m, sizes, c, entries)
    prob = cp.Problem(cp.Minimize(0), cons)
    prob.solve(solver=solver)
    residual = float("nan")
    if prob.status in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
        values = np.array([float(np.asarray(getattr(e, "value", e))) for e in lhs])
        residual = float(np.max(np.abs(values - c)))
    verdict = "FEASIBLE" if prob.status in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE) else (
        "INFEASIBLE" if prob.status in (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE) else "UNDECIDED")
    print(f"{path}: {verdict} (cvxpy status {prob.status}, m={m}, blocks={sizes}, max residual {residual:.2e})")
    return verdict


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("files", nargs="+")
    ap.add_argument("--solver", default="CLARABEL")
    args = ap.parse_args()
    verdicts = [check(f, args.solver) for f in args.files]
    sys.exit(0 if "UNDECIDED" not in verdicts else 3)


if __name__ == "__main__":
    main()
