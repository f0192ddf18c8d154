"""Builds the extension module, imports it and runs compile, train and evaluate.

Usage: python3 python/smoke_test.py [--no-build]
"""

import importlib
import json
import pathlib
import shutil
import subprocess
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent


def build_module(dest: pathlib.Path, build: bool) -> None:
    if build:
        subprocess.run(
            ["cargo", "build", "-p", "zsltl-py", "--features", "extension-module"],
            cwd=ROOT,
            check=True,
        )
    lib = ROOT / "target" / "debug" / "libzsltl_py.so"
    if not lib.exists():
        sys.exit(f"missing {lib}; build with --features extension-module")
    shutil.copy(lib, dest / "zsltl_py.so")


def main() -> None:
    with tempfile.TemporaryDirectory() as tmp:
        build_module(pathlib.Path(tmp), "--no-build" not in sys.argv)
        sys.path.insert(0, tmp)
        z = importlib.import_module("zsltl_py")

        c = json.loads(z.compile("!b U a"))
        assert c["automaton"]["states"] >= 2, c
        assert any(s["reach"] == ["a"] for s in c["subgoals"]), c["subgoals"]

        try:
            z.compile("F (")
        except ValueError:
            pass
        else:
            raise AssertionError("malformed formula accepted")

        trainer = {"total_interactions": 128, "steps_per_iter": 128, "minibatch": 64,
                   "epochs": 1, "actor_hidden": [8], "critic_hidden": [8]}
        env = {"env": "letterworld", "grid_size": 5, "letters": ["a", "b"], "copies_per_letter": 1}
        ckpt, log = z.train(json.dumps(trainer), json.dumps(env))
        assert len(json.loads(log)) == 1

        opts = json.dumps({"episodes": 4, "seeds": [0]})
        report = json.loads(z.evaluate(ckpt, ["F a"], opts))
        spec = report["specs"][0]
        total = spec["success_rate"] + spec["violation_rate"] + spec["other_rate"]
        assert abs(total - 1.0) < 1e-12, spec
        print(f"zsltl_py {z.__version__}: ok ({spec['spec']}: success {spec['success_rate']:.2f})")


if __name__ == "__main__":
    main()
