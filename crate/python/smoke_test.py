#!/usr/bin/env python3
"""Build-and-import smoke test for the fvsim Python bindings.

Builds the extension crate with cargo, copies the shared library next to
a temporary directory under the name Python expects, imports it, and
exercises one representative call from each API family against known
closed-form values. Exits nonzero on the first failure.
"""

import math
import pathlib
import shutil
import subprocess
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parents[1]


def build_and_import():
    subprocess.run(["cargo", "build", "-p", "fvsim-py"], cwd=ROOT, check=True)
    built = ROOT / "target" / "debug" / "libfvsim.so"
    if not built.exists():  # e.g. macOS
        built = ROOT / "target" / "debug" / "libfvsim.dylib"

    stage = pathlib.Path(tempfile.mkdtemp(prefix="fvsim-py."))
    shutil.copy2(built, stage / "fvsim.so")
    sys.path.insert(0, str(stage))


build_and_import()

import fvsim  # noqa: E402


def check(name, got, want, tol=0.0):
    ok = abs(got - want) <= tol if tol else got == want
    if not ok:
        print(f"FAIL {name}: got {got!r}, want {want!r}")
        sys.exit(1)
    print(f"ok {name}: {got!r}")


# Geometry: snake ordering reverses odd rows.
g23 = fvsim.Geometry(2, 3)
check("n_sites", g23.n_sites, 6)
check("snake_index(1, 0)", g23.snake_index(1, 0), 5)
check("snake_index(1, 2)", g23.snake_index(1, 2), 3)
check("site_coords(4)", g23.site_coords(4), (1, 1))

# Droplet energetics: peak at sigma/delta with height pi sigma^2/delta.
bp = fvsim.BubbleParams(2.0, 0.5)
check("critical_radius", bp.critical_radius(), 4.0, 1e-15)
check("barrier_height", bp.barrier_height(), math.pi * 8.0, 1e-12)
check(
    "energy at critical radius",
    fvsim.bubble_energy_2d(bp, bp.critical_radius()),
    bp.barrier_height(),
    1e-12,
)

# Product-state energy: 2x2 all-down at J=1, g=0, h=0.1 has four
# satisfied bonds (-4) and a longitudinal penalty (+0.4).
g22 = fvsim.Geometry(2, 2)
down = fvsim.MpsState.all_down(g22)
params_classical = fvsim.ModelParams(j=1.0, g=0.0, h=0.1)
check("all-down energy", down.energy(params_classical), -3.6, 1e-12)
check("all-down entropy", down.central_entropy(), 0.0, 1e-12)
check("all-down magnetization", down.magnetization(), -1.0, 1e-12)

# Sampling a basis state is deterministic regardless of seed.
shots = down.sample(25, seed=9)
assert all(bits == [False] * 4 for bits in shots), "all-down sampling"
print("ok sampling: 25/25 shots all-down")

# Ground-state search at g=0, h=-0.1 must find the classical all-down
# configuration: E = -4 - 0.1 * 4 = -4.4.
res = fvsim.dmrg_ground_state(g22, fvsim.ModelParams(j=1.0, g=0.0, h=-0.1), chi=8)
check("dmrg classical energy", res.energy, -4.4, 1e-10)
check("dmrg variance", res.variance, 0.0, 1e-9)

# Variational energy agrees with the dense oracle away from the
# classical point.
params = fvsim.ModelParams(j=1.0, g=1.0, h=0.1)
res = fvsim.dmrg_ground_state(g22, params, chi=16, energy_tol=1e-12)
exact = fvsim.exact_spectrum(g22, params, k=1)[0]
check("dmrg vs dense energy", res.energy, exact, 1e-8)

# Quench evolution: return probability starts at 1, decays, and matches
# the dense oracle at t = 0.2.
quench = fvsim.ModelParams(j=1.0, g=1.0, h=-0.2)
ev = fvsim.Evolution(quench, res.state, dt=0.05, chi=16)
check("initial return probability", ev.return_probability(), 1.0, 1e-12)
ev.run(4)
check("time after 4 steps", ev.time, 0.2, 1e-12)
oracle = fvsim.exact_return_curve(quench, res.state, [0.2])[0]
check("return probability vs dense", ev.return_probability(), oracle, 1e-5)
obs = ev.observe()
assert obs.max_bond >= 1 and obs.discarded_weight >= 0.0
print(f"ok observation: {obs!r}")

# Cluster statistics: chain sites 0 and 5 of a 2x3 snake are vertical
# neighbours (0,0) and (1,0), so they form one cluster of two.
sizes = fvsim.snapshot_cluster_sizes(g23, [True, False, False, False, False, True])
check("cluster sizes", sorted(sizes), [2])

# First-passage extraction is exact on exponential decay.
ts = [0.37 * k for k in range(1, 21)]
t_fpt = fvsim.first_passage_time(ts, [math.exp(-t) for t in ts], math.exp(-4.0))
check("first passage on e^-t", t_fpt, 4.0, 1e-9)
assert fvsim.first_passage_time([0.0, 1.0], [1.0, 0.9], 0.5) is None
print("ok first passage: threshold never reached reported as None")

print("smoke test passed")
