"""Throughput measurement: random agents over loopback, frames counted agent-side.

Run:  python3 demos/05_benchmark.py
For real numbers use the CLI, which runs longer and defaults to
subprocess isolation per instance:

    lockstep-bench --instances=1,2,4 --seconds=30 --scene=seek_avoid
"""

from lockstep.bench import BenchConfig, physical_cores, run_benchmark

print(f"this machine: {physical_cores()} physical cores\n")

cfg = BenchConfig(
    instances=(1, 2),
    seconds=3.0,
    trials=1,
    warmup_frames=30,
    mode="subprocess",  # one process per instance, like production use
)
report = run_benchmark(cfg)
print(report.table())
print()
for line in report.machine_lines():
    print(line)
