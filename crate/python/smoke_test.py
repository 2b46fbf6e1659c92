#!/usr/bin/env python3
"""Smoke test of the hullopt_py extension module.

Builds the cdylib with cargo, stages it under the interpreter-visible name,
and exercises the main types: model construction, the high-fidelity solver,
the POD-GPR surrogate, non-dominated sorting, and a tiny end-to-end pipeline
run.

Usage: python3 python/smoke_test.py
"""

import shutil
import subprocess
import sys
import sysconfig
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent


def build_extension() -> Path:
    subprocess.run(
        ["cargo", "build", "-p", "hullopt-py", "--release"],
        cwd=REPO,
        check=True,
    )
    built = REPO / "target" / "release" / "libhullopt_py.so"
    if not built.exists():  # macOS
        built = REPO / "target" / "release" / "libhullopt_py.dylib"
    if not built.exists():
        sys.exit("could not find the built extension library")
    stage = Path(tempfile.mkdtemp(prefix="hullopt_py_"))
    suffix = sysconfig.get_config_var("EXT_SUFFIX") or ".so"
    target = stage / f"hullopt_py{suffix}"
    shutil.copyfile(built, target)
    return stage


def main() -> None:
    stage = build_extension()
    sys.path.insert(0, str(stage))
    import hullopt_py as hp

    # model + high-fidelity solver
    model = hp.Model.demo(nx=16)
    assert model.n_params == 5
    assert model.n_elements == 16 * 20
    assert model.total_configurations() == 62720.0
    default = model.default_config()
    qois = model.solve_qois(default)
    assert qois["mass_t"] > 0.0
    assert qois["penalized_t"] >= qois["mass_t"]
    print(f"default config QoIs: {qois}")

    snapshot = model.solve(default)
    sx = snapshot.component("hogging", "sigma_x")
    assert len(sx) == model.n_elements
    assert all(v == 0.0 for v in snapshot.component("hogging", "sigma_z"))

    # surrogate on a handful of samples
    import random

    rng = random.Random(7)
    domains = model.domains
    labels = model.param_labels
    configs = [default] + [
        [rng.choice(domains[label]) for label in labels] for _ in range(9)
    ]
    configs = [list(c) for c in {tuple(c) for c in configs}]
    surrogate = hp.Surrogate.fit(model, configs, tau=0.01, restarts=1, max_iters=30)
    assert 1 <= surrogate.rank <= len(configs)
    preds = surrogate.predict_qois([default])
    truth = model.solve_qois(default)
    mass_err = abs(preds[0]["mass_t"] - truth["mass_t"])
    assert mass_err < 1.0, f"surrogate mass off by {mass_err}"
    print(f"surrogate rank {surrogate.rank}, prediction at default: {preds[0]}")

    # non-dominated sorting and hypervolume
    layers = hp.non_dominated_sort([[1.0, 2.0], [2.0, 1.0], [1.0, 3.0], [3.0, 3.0]])
    assert sorted(layers[0]) == [0, 1]
    assert layers[1] == [2] and layers[2] == [3]
    hv = hp.hypervolume([[1.0, 3.0], [2.0, 2.0], [3.0, 1.0]], [4.0, 4.0])
    assert abs(hv - 6.0) < 1e-12

    # tiny end-to-end pipeline
    run_dir = Path(tempfile.mkdtemp(prefix="hullopt_run_")) / "run"
    stages = hp.run_pipeline(str(run_dir), seed=3, nx=16, quick=True)
    assert len(stages) >= 1
    best = hp.incumbent(str(run_dir))
    assert best["penalized_t"] <= stages[0]["penalized_t"] + 1e-9
    print(f"pipeline stages: {stages}")
    print(f"incumbent: {best}")

    print("smoke test passed")


if __name__ == "__main__":
    main()
