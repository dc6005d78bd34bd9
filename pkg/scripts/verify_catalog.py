#!/usr/bin/env python3
"""
Catalog Verification Sweep

Runs the residual checks for every background, instanton, dHYM branch and
special Lagrangian leaf in the catalog and prints a summary table.

Usage:
    python scripts/verify_catalog.py [--grid-points 30] [--output sweep.json]
"""

import argparse
import logging
import sys
import time
from pathlib import Path
from typing import Callable, Dict, List, Tuple

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from app import COMMANDS  # noqa: E402
from models import GeometryError, ReportCollector, RunConfig  # noqa: E402
from utils import format_sci, load_tolerances, print_banner, setup_logging, write_report  # noqa: E402

logger = logging.getLogger("verify_catalog")

# (label, command, options)
SWEEP: List[Tuple[str, str, Dict]] = [
    ("canonical CP² structure", "verify-structure", {"family": "canonical_CP2", "cone_param": 1.0}),
    ("canonical S²×S² structure", "verify-structure", {"family": "canonical_S2xS2", "cone_param": 1.0}),
    ("conti_salamon structure", "verify-structure", {"family": "conti_salamon"}),
    ("CP³-type Einstein profile", "einstein-check", {"family": "CP3_type"}),
    ("negative KE Einstein profile", "einstein-check", {"family": "negative_KE_dual"}),
    ("Airy deformation μ = 1", "deformation-check", {"mu": 1.0}),
    ("Airy deformation μ = −1", "deformation-check", {"mu": -1.0}),
    ("CP² spectrum", "spectrum", {"manifold": "CP2", "k_max": 12, "check_eigenfunctions": True}),
    ("S²×S² polynomial profiles", "spectrum", {"manifold": "S2xS2", "k_max": 60, "polynomial_only": True}),
    ("κ for k = 3 on CP²", "solve-kappa", {"family": "canonical_CP2", "cone_param": 1.0, "k": 3, "polynomial": True}),
    ("μ = 12 instanton on CP²", "verify-instanton", {"family": "canonical_CP2", "cone_param": 1.0, "k": 1}),
    ("μ = 0 instanton on CP²", "verify-instanton", {"family": "canonical_CP2", "cone_param": 1.0, "c2": 1.0}),
    ("Killing duals", "killing-check", {"family": "canonical_CP2", "cone_param": 1.0}),
    ("Levi-Civita", "levi-civita-check", {"family": "canonical_CP2", "cone_param": 1.0}),
    ("dHYM branches", "dhym solve", {"c": "0,1,8", "H_min": 0.5, "H_max": 10.0}),
    ("dHYM on O(−3), C = 8", "dhym verify", {"c": "0,1", "cone_param": 8.0}),
    ("dHYM branch counts", "dhym count-branches", {"c": "0.5,1,4,9", "cone_param": 8.0}),
    ("sLag leaves on CP²", "slag verify", {"family": "canonical_CP2", "cone_param": 1.0, "y": 0.3}),
    ("sLag family 1 on S²×S²", "slag verify", {"family": "canonical_S2xS2", "cone_param": 1.0, "leaf_family": 1}),
    ("sLag family 2 on S²×S²", "slag verify", {"family": "canonical_S2xS2", "cone_param": 1.0, "leaf_family": 2}),
]


class CatalogSweep:
    """Runs every sweep entry through the CLI handlers and tallies the verdicts."""

    def __init__(self, grid_points: int, seed: int):
        self.grid_points = grid_points
        self.seed = seed
        self.tolerances = load_tolerances()
        self.results: List[Dict] = []

    def run_entry(self, label: str, command: str, options: Dict) -> Dict:
        config = RunConfig(command=command, grid_points=self.grid_points, seed=self.seed,
                           tolerances=self.tolerances, options=dict(options))
        handler: Callable = COMMANDS[command]
        start = time.time()
        try:
            with ReportCollector() as collector:
                passed = handler(config, collector)
            sups = [r["sup_residual"] for r in collector.records
                    if isinstance(r.get("sup_residual"), float) and not r.get("control")]
            worst = max(sups) if sups else float("nan")
            error = None
        except GeometryError as e:
            passed, worst, error = False, float("nan"), f"{type(e).__name__}: {e}"
            logger.error(f"❌ {label}: {error}")
        return {"label": label, "command": command, "passed": passed, "worst_residual": worst,
                "seconds": round(time.time() - start, 2), "error": error}

    def run(self) -> bool:
        print_banner("🔬 Catalog verification sweep")
        for label, command, options in SWEEP:
            result = self.run_entry(label, command, options)
            self.results.append(result)
            status = "✅" if result["passed"] else "⚠️"
            print(f"{status} {label:<32} worst {format_sci(result['worst_residual'])}  ({result['seconds']} s)")
        passed = sum(1 for r in self.results if r["passed"])
        print_banner(f"📊 Sweep Results: {passed}/{len(self.results)} passed")
        return passed == len(self.results)


def main() -> int:
    parser = argparse.ArgumentParser(description="Run the full catalog of residual checks")
    parser.add_argument("--grid-points", type=int, default=30)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--output", help="JSON or CSV summary file")
    parser.add_argument("--log-file", default="verify_log.txt")
    args = parser.parse_args()

    setup_logging(log_file=args.log_file)
    sweep = CatalogSweep(args.grid_points, args.seed)
    ok = sweep.run()
    if args.output:
        write_report(sweep.results, args.output)
        logger.info(f"Summary written to {args.output}")
    return 0 if ok else 1


if __name__ == "__main__":
    raise SystemExit(main())
