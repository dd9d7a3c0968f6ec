#!/usr/bin/env python3
"""Smoke test for the jobmover_sim_py extension module.

Builds are found in target/release or target/debug (whichever exists,
release preferred).  The cdylib is copied next to this script under the
importable name, so no packaging step is needed:

    cargo build --release -p jobmover-sim-py
    python3 python/smoke_test.py
"""

import os
import shutil
import sys
import tempfile

HERE = os.path.dirname(os.path.abspath(__file__))
ROOT = os.path.dirname(HERE)


def locate_extension():
    for profile in ("release", "debug"):
        src = os.path.join(ROOT, "target", profile, "libjobmover_sim_py.so")
        if os.path.exists(src):
            dst = os.path.join(HERE, "jobmover_sim_py.so")
            if not os.path.exists(dst) or os.path.getmtime(src) > os.path.getmtime(dst):
                shutil.copyfile(src, dst)
            return dst
    sys.exit("no extension found; run `cargo build --release -p jobmover-sim-py` first")


locate_extension()
sys.path.insert(0, HERE)

import jobmover_sim_py as jm  # noqa: E402

checks = 0


def check(cond, label):
    global checks
    if not cond:
        sys.exit(f"FAIL: {label}")
    checks += 1
    print(f"  ok: {label}")


print("== config ==")
cfg = jm.SimConfig(8, 8)
check(cfg.num_servers == 8 and cfg.cores_per_server == 8, "constructor fields")
cfg.horizon = 7 * 86400
cfg.rng_seed = 11
cfg.placement = "spread"
cfg.mover_interval = 1800
check(cfg.placement == "spread", "placement setter round-trips")
check(cfg.mover_algorithm == "drain-greedy", "default algorithm")
cfg.mover_algorithm = "ffd-repack"
check(cfg.mover_algorithm == "ffd-repack", "algorithm setter round-trips")
cfg.mover_algorithm = "drain-greedy"

try:
    cfg.placement = "sideways"
    sys.exit("FAIL: bogus placement accepted")
except ValueError:
    check(True, "bogus placement raises ValueError")

check(cfg.power_managed is None, "always-on by default")
cfg.set_power_managed(300, 250.0)
check(cfg.power_managed == (300, 250.0), "managed power round-trips")
cfg.set_always_on()
check(cfg.power_managed is None, "back to always-on")
cfg.validate()
check("SimConfig" in repr(cfg), "repr mentions the type")

parsed = jm.SimConfig.parse(
    "num_servers = 4\ncores_per_server = 4\nhorizon = 172800\nplacement = spread\n"
)
check(parsed.num_servers == 4 and parsed.placement == "spread", "parse()")

print("== trace round-trip ==")
trace = jm.generate(cfg, seed=7)
check(len(trace) > 50, f"generated {len(trace)} jobs")
check(all(len(j) == 4 for j in trace[:10]), "jobs are 4-tuples")
with tempfile.TemporaryDirectory() as td:
    path = os.path.join(td, "trace.txt")
    jm.save_trace(trace, path)
    back = jm.load_trace(path)
    check(back == trace, "save/load round-trips exactly")

print("== paired run ==")
base, mover = jm.run_pair(cfg, trace)
check(mover.moved_jobs > 0, f"mover migrated {mover.moved_jobs} jobs")
check(base.moved_jobs == 0, "baseline never migrates")
check(
    base.completed_jobs <= mover.completed_jobs,
    f"completions {base.completed_jobs} <= {mover.completed_jobs}",
)
imp = jm.efficiency_improvement(mover, base)
check(imp > 0.0, f"improvement {imp:.1f}%")
check(0.0 < mover.exploitation() <= 1.0, f"exploitation {mover.exploitation():.4f}")
check(mover.moved_fraction_pct() > 0.0, "moved fraction positive")

samples = mover.samples()
check(len(samples) > 10, f"{len(samples)} samples")
t0, used, installed, powered, queued, ccs = samples[0]
check(installed == 64, "installed cores in samples")
csv = mover.csv()
check(
    csv.splitlines()[0]
    == "time_s,used_cores,installed_cores,powered_on_cores,queued_jobs,cumulative_core_seconds",
    "csv header exact",
)
check(mover.config().num_servers == 8, "report carries its config")
with tempfile.TemporaryDirectory() as td:
    out = os.path.join(td, "m.csv")
    mover.save_csv(out)
    check(open(out).read() == csv, "save_csv writes csv()")

print("== single run + energy ==")
cfg2 = jm.SimConfig(8, 8)
cfg2.horizon = 7 * 86400
cfg2.set_power_managed(0, 100.0)
rep = jm.run(cfg2, trace)
e = jm.energy(rep)
check(
    e["consumed_server_seconds"] <= e["baseline_server_seconds"],
    "managed power never exceeds always-on",
)
check(e["saving_pct"] >= 0.0, f"energy saving {e['saving_pct']:.1f}%")
check(e["consumed_wh"] is not None, "wattage yields Wh figures")
check("SimReport" in repr(rep), "report repr mentions the type")

# run() with trace=None generates from the config's own workload spec.
cfg3 = jm.SimConfig(2, 2)
cfg3.horizon = 86400
rep3 = jm.run(cfg3)
check(rep3.total_jobs_seen > 0, "run(config) generates a workload")

print(f"\nall {checks} checks passed")
