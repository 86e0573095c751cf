"""Throughput benchmark: random agents driving concurrent server instances.

Each instance is a complete served pipeline: a server bound to loopback
plus a random agent speaking the real wire protocol, requesting the pixel
observation every step. Frames are counted agent-side (one per
StepResponse) after a warmup, so the reported rate covers simulation,
rendering, encoding, and transport together.

In subprocess mode (the default) every instance runs in its own process,
so instances scale across cores; in-process mode keeps everything in one
process and is only for quick checks and tests. Results are reported per
instance count as mean total frames/sec with the standard deviation
across trials.
"""

from __future__ import annotations

import argparse
import json
import random
import statistics
import subprocess
import sys
import threading
import time
from dataclasses import dataclass, field

import psutil

from . import client, wire
from .server import ServerConfig, serve
from .wire import DType, Tensor


@dataclass
class BenchConfig:
    instances: tuple[int, ...] = (1, 2)
    seconds: float = 10.0
    width: int = 96
    height: int = 72
    scene: str = "seek_avoid"
    mode: str = "subprocess"  # or "inprocess"
    warmup_frames: int = 60
    trials: int = 3
    seed: int = 1

    def __post_init__(self):
        if any(k < 1 for k in self.instances):
            raise ValueError("instance counts must be >= 1")
        if self.seconds < 1.0:
            raise ValueError("bench duration must be >= 1 s")


@dataclass
class TrialResult:
    per_instance: list[float]

    @property
    def total_fps(self) -> float:
        return sum(self.per_instance)


@dataclass
class BenchRow:
    instances: int
    trials: list[TrialResult] = field(default_factory=list)
    failures: list[str] = field(default_factory=list)

    @property
    def total_fps(self) -> float:
        return statistics.fmean(t.total_fps for t in self.trials) if self.trials else 0.0

    @property
    def sigma(self) -> float:
        totals = [t.total_fps for t in self.trials]
        return statistics.pstdev(totals) if len(totals) > 1 else 0.0


@dataclass
class BenchReport:
    config: BenchConfig
    rows: list[BenchRow] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(not row.failures for row in self.rows)

    def table(self) -> str:
        lines = [
            f"scene={self.config.scene} resolution={self.config.width}x{self.config.height} "
            f"seconds={self.config.seconds:g} trials={self.config.trials} "
            f"mode={self.config.mode} physical_cores={physical_cores()}",
            f"{'Instances':>9}  {'Total frames/sec':>16}  {'sigma':>8}",
        ]
        for row in self.rows:
            lines.append(f"{row.instances:>9}  {row.total_fps:>16.1f}  {row.sigma:>8.1f}")
            if row.failures:
                lines.append(f"           FAILED: {'; '.join(row.failures)}")
        return "\n".join(lines)

    def machine_lines(self) -> list[str]:
        out = []
        for row in self.rows:
            for i, trial in enumerate(row.trials):
                out.append("#bench " + json.dumps({
                    "instances": row.instances, "trial": i,
                    "total_fps": round(trial.total_fps, 2),
                    "per_instance": [round(f, 2) for f in trial.per_instance],
                }))
            out.append("#bench " + json.dumps({
                "instances": row.instances,
                "total_fps_mean": round(row.total_fps, 2),
                "sigma": round(row.sigma, 2),
                "failures": row.failures,
            }))
        return out


def physical_cores() -> int:
    return psutil.cpu_count(logical=False) or psutil.cpu_count() or 1


def drive_random_agent(address: str, scene: str, seconds: float, warmup_frames: int,
                       width: int, height: int, seed: int) -> tuple[int, float]:
    """Run a uniform-random agent against a server; returns (frames, elapsed)."""
    rng = random.Random(seed)
    channel = client.connect(address)
    try:
        world = channel.create_world({"scene": scene, "seed": seed})
        specs = channel.join_world(world, {"pixels_width": width, "pixels_height": height})
        pixels_uid = specs.sensor_by_name("PIXELS").uid
        requested = (pixels_uid,)

        def random_actions() -> dict[int, Tensor]:
            actions = {}
            for spec in specs.actuators:
                if spec.dtype == DType.BOOL:
                    actions[spec.uid] = Tensor.from_scalar(rng.random() < 0.5, DType.BOOL)
                elif spec.bounds is not None:
                    lo, hi = spec.bounds
                    actions[spec.uid] = Tensor.from_scalar(rng.uniform(lo, hi), spec.dtype)
            return actions

        channel.reset()
        for _ in range(warmup_frames):
            response = channel.step(random_actions(), requested)
            if response.state.is_terminal:
                channel.reset()
        frames = 0
        start = time.perf_counter()
        while time.perf_counter() - start < seconds:
            response = channel.step(random_actions(), requested)
            frames += 1
            if response.state.is_terminal:
                channel.reset()
        elapsed = time.perf_counter() - start
        channel.leave_world()
        return frames, elapsed
    finally:
        channel.close()


def run_single_instance(scene: str, seconds: float, warmup_frames: int,
                        width: int, height: int, seed: int) -> dict:
    """One complete instance: loopback server plus its driver, in this process."""
    server = serve(ServerConfig(address="127.0.0.1:0"))
    try:
        frames, elapsed = drive_random_agent(
            server.address, scene, seconds, warmup_frames, width, height, seed)
    finally:
        server.close()
    return {"frames": frames, "seconds": elapsed, "fps": frames / elapsed}


def _worker_argv(cfg: BenchConfig, seed: int) -> list[str]:
    return [
        sys.executable, "-m", "lockstep.bench", "--worker",
        "--scene", cfg.scene,
        "--seconds", str(cfg.seconds),
        "--warmup", str(cfg.warmup_frames),
        "--resolution", f"{cfg.width}x{cfg.height}",
        "--seed", str(seed),
    ]


def _run_trial(cfg: BenchConfig, k: int, trial: int) -> TrialResult | str:
    """Run one trial at instance count k; returns a result or a failure note."""
    seeds = [cfg.seed + trial * 1000 + i for i in range(k)]
    if cfg.mode == "inprocess":
        results: list[dict | None] = [None] * k
        errors: list[str] = []

        def run(i: int):
            try:
                results[i] = run_single_instance(
                    cfg.scene, cfg.seconds, cfg.warmup_frames, cfg.width, cfg.height, seeds[i])
            except Exception as e:
                errors.append(f"instance {i}: {e!r}")

        threads = [threading.Thread(target=run, args=(i,)) for i in range(k)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        if errors:
            return "; ".join(errors)
        return TrialResult([r["fps"] for r in results])

    procs = [subprocess.Popen(_worker_argv(cfg, seed), stdout=subprocess.PIPE,
                              stderr=subprocess.PIPE, text=True) for seed in seeds]
    per_instance = []
    failures = []
    budget = cfg.seconds * 3 + 60
    for i, proc in enumerate(procs):
        try:
            out, err = proc.communicate(timeout=budget)
        except subprocess.TimeoutExpired:
            proc.kill()
            failures.append(f"instance {i}: timed out")
            continue
        if proc.returncode != 0:
            failures.append(f"instance {i}: exit {proc.returncode}: {err.strip()[-200:]}")
            continue
        per_instance.append(json.loads(out.strip().splitlines()[-1])["fps"])
    if failures:
        return "; ".join(failures)
    return TrialResult(per_instance)


def run_benchmark(cfg: BenchConfig) -> BenchReport:
    report = BenchReport(cfg)
    for k in cfg.instances:
        row = BenchRow(k)
        for trial in range(cfg.trials):
            outcome = _run_trial(cfg, k, trial)
            if isinstance(outcome, str):
                row.failures.append(f"trial {trial}: {outcome}")
            else:
                row.trials.append(outcome)
        report.rows.append(row)
    return report


def _parse_resolution(text: str) -> tuple[int, int]:
    w, _, h = text.partition("x")
    return int(w), int(h)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="lockstep-bench",
        description="Measure total frames/sec across concurrent server instances.",
    )
    parser.add_argument("--instances", default="1,2,4,8,16",
                        help="comma-separated instance counts")
    parser.add_argument("--seconds", type=float, default=30.0)
    parser.add_argument("--scene", default="seek_avoid")
    parser.add_argument("--resolution", default="96x72")
    parser.add_argument("--trials", type=int, default=3)
    parser.add_argument("--warmup", type=int, default=60)
    parser.add_argument("--mode", choices=["subprocess", "inprocess"], default="subprocess")
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    args = parser.parse_args(argv)

    width, height = _parse_resolution(args.resolution)
    if args.worker:
        result = run_single_instance(args.scene, args.seconds, args.warmup,
                                     width, height, args.seed)
        print(json.dumps(result), flush=True)
        return 0

    cfg = BenchConfig(
        instances=tuple(int(k) for k in args.instances.split(",")),
        seconds=args.seconds, width=width, height=height, scene=args.scene,
        mode=args.mode, warmup_frames=args.warmup, trials=args.trials, seed=args.seed,
    )
    report = run_benchmark(cfg)
    print(report.table())
    for line in report.machine_lines():
        print(line)
    return 0 if report.ok else 1


if __name__ == "__main__":
    sys.exit(main())
