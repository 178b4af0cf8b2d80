#!/usr/bin/env python3
"""Run the bundled demo scenario and print a run summary.

Usage: python scripts/run_demo.py [out_dir]
"""

from __future__ import annotations

import sys
from pathlib import Path

from artifact.sim import demo_scenario, run, verify_output


def main() -> int:
    out_dir = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("demo_out")
    scenario = demo_scenario()
    world, report = run(scenario, out_dir)

    metrics = report.dag_metrics
    print(f"agents:            {', '.join(world.agents)}")
    print(f"cycles:            {scenario.cycles}")
    print(f"artifacts:         {metrics['artifact_count']}")
    print(f"synthesis:         {metrics['synthesis_count']}")
    print(f"avg dag depth:     {metrics['avg_dag_depth']:.3f}")
    print(f"posts:             {report.posts}")
    print(f"reactions:         {report.reactions}")
    print(f"mutations:         {report.mutations}")
    print(f"needs fulfilled:   {len(report.need_latencies)}")
    if report.mean_need_latency_seconds is not None:
        hours = report.mean_need_latency_seconds / 3600
        print(f"mean need latency: {hours:.2f} simulated hours")
    print(f"output directory:  {out_dir}")

    violations = verify_output(out_dir)
    if violations:
        for violation in violations:
            print(f"INVARIANT VIOLATION: {violation}", file=sys.stderr)
        return 1
    print("invariants:        all checks passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
