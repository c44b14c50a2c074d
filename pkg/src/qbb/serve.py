"""Reference external oracle: answers one request line with simulated annealing.

Usage as an oracle command: ``external:python -m qbb.serve [--sweeps N]``.
"""

from __future__ import annotations

import argparse
import json
import sys

from .model import QuboModel
from .oracles import OracleConfig, simulated_annealing


def answer(line: str, sweeps: int = 100) -> str:
    req = json.loads(line)
    model = QuboModel(int(req["n"]), {(int(i), int(j)): c for i, j, c in req["terms"]}, req.get("offset", 0.0))
    cfg = OracleConfig(seed=int(req.get("seed", 0)), num_reads=int(req.get("num_reads", 10)), budget=sweeps)
    pool = simulated_annealing(model, cfg)
    samples = [{"bits": "".join(str(int(b)) for b in bits), "energy": value} for bits, value in pool]
    return json.dumps({"samples": samples}, separators=(",", ":"))


def main(argv=None) -> int:
    p = argparse.ArgumentParser(prog="qbb-serve", description=__doc__.splitlines()[0])
    p.add_argument("--sweeps", type=int, default=100)
    args = p.parse_args(argv)
    line = sys.stdin.readline()
    if not line.strip():
        print("empty request", file=sys.stderr)
        return 1
    try:
        sys.stdout.write(answer(line, args.sweeps) + "\n")
    except (ValueError, KeyError, TypeError) as exc:
        print(f"bad request: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
