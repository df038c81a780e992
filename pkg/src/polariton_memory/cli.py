"""Command-line runner: ``polariton-memory run <experiment> --config cfg.yaml``.

Writes ``<experiment>.csv`` and ``<experiment>.json`` into ``--out``. Exit
codes: 0 all assertions pass, 2 invalid config, 3 an assertion failed,
4 dimension overflow.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np
import scipy
import yaml

from . import __version__
from .errors import ConfigInvalid, DimensionOverflow, UnknownScenario
from .experiments import REGISTRY, resolve

log = logging.getLogger("polariton_memory")

EXIT_OK, EXIT_CONFIG, EXIT_ASSERT, EXIT_OVERFLOW = 0, 2, 3, 4


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    if isinstance(x, (complex, np.complexfloating)):
        return format(complex(x).real, ".17g") + ("+" if complex(x).imag >= 0 else "") + format(complex(x).imag, ".17g") + "j"
    return str(x)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return float(x)
    if isinstance(x, (complex, np.complexfloating)):
        return [complex(x).real, complex(x).imag]
    return x


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigInvalid(f"cannot read config {path}: {exc}") from exc
    return {} if data is None else data


def fingerprint(cfg: dict) -> dict:
    blob = json.dumps(_jsonable(cfg), sort_keys=True).encode()
    return {
        "config_sha256": hashlib.sha256(blob).hexdigest(),
        "numpy": np.__version__,
        "package": __version__,
        "python": ".".join(map(str, sys.version_info[:3])),
        "scipy": scipy.__version__,
    }


def run_experiment(name: str, raw: dict, out_dir: Path, seed=None, engine=None) -> int:
    if name not in REGISTRY:
        raise UnknownScenario(f"unknown experiment {name!r}; choose from {', '.join(sorted(REGISTRY))}")
    exp = REGISTRY[name]
    raw = dict(raw)
    if seed is not None:
        if "seed" not in exp.schema:
            raise ConfigInvalid(f"{name} takes no seed")
        raw["seed"] = seed
    if engine is not None:
        if "engine" not in exp.schema:
            raise ConfigInvalid(f"{name} has a single engine")
        raw["engine"] = engine
    cfg = resolve(exp, raw)
    outcome = exp.run(cfg)

    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / f"{name}.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(outcome.columns)
        for row in outcome.rows:
            w.writerow([_fmt(v) for v in row])
    passed = all(ok for _, ok in outcome.assertions)
    summary = {
        "experiment": name,
        "config": cfg,
        "seeds": {"seed": cfg["seed"]} if "seed" in cfg else {},
        "results": outcome.summary,
        "assertions": [{"name": n, "passed": ok} for n, ok in outcome.assertions],
        "passed": passed,
        "fingerprint": fingerprint(cfg),
    }
    with open(out_dir / f"{name}.json", "w") as fh:
        json.dump(_jsonable(summary), fh, sort_keys=True, indent=2)
        fh.write("\n")
    for n, ok in outcome.assertions:
        log.info("%s %s", "PASS" if ok else "FAIL", n)
    return EXIT_OK if passed else EXIT_ASSERT


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="polariton-memory", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run one experiment")
    r.add_argument("experiment", help=", ".join(sorted(REGISTRY)))
    r.add_argument("--config", help="YAML file with experiment parameters")
    r.add_argument("--seed", type=int, help="override the seed of stochastic experiments")
    r.add_argument("--out", default=".", help="output directory (default: current directory)")
    r.add_argument("--engine", choices=("exact", "bosonic"), help="override the engine")
    r.add_argument("-v", "--verbose", action="store_true")
    sub.add_parser("list", help="list experiments and their parameters")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list":
        for name in sorted(REGISTRY):
            keys = ", ".join(f"{k}={d!r}" for k, (_, d) in REGISTRY[name].schema.items())
            print(f"{name}: {keys}")
        return EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return run_experiment(args.experiment, load_config(args.config), Path(args.out), args.seed, args.engine)
    except (ConfigInvalid, UnknownScenario) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DimensionOverflow as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OVERFLOW


if __name__ == "__main__":
    sys.exit(main())
