"""The command-line workflow, driven end to end from Python.

Everything the library does is reachable from the ``hopfkit`` console
script through a flat config file: hypothesis checks, the bifurcation
point with its Jacobian certificate, branch continuation, and -- for the
semilinear example -- comparison against the closed-form branch.  This
script writes a config, runs all four subcommands, and peeks at the
reports they leave behind.  (Each ``main([...])`` call below is exactly
``hopfkit <subcommand> ...`` on a shell.)
"""

import json
import pathlib
import tempfile

from hopfkit.cli import main

CONFIG = """\
# coarse grid: instant to run; tighten dx / raise L for production
problem.variant = semilinear
problem.L = 20
problem.dx = 0.2
solver.n_t = 8
solver.alpha_max = 0.5
solver.alpha_steps = 10
solver.n_max_resolvent = 8
"""

workdir = pathlib.Path(tempfile.mkdtemp(prefix="hopfkit-demo-"))
config = workdir / "run.cfg"
config.write_text(CONFIG)
out = workdir / "out"

for command in ("check", "extended", "branch", "verify-exact"):
    print(f"$ hopfkit {command} --config {config.name}")
    code = main([command, "--config", str(config), "--out", str(out)])
    print(f"  -> exit {code}\n")
    assert code == 0

print(f"reports in {out}:")
for path in sorted(out.iterdir()):
    print(f"  {path.name}")

summary = json.loads((out / "branch_summary.json").read_text())
print(f"\nbranch summary: {summary['points']} points, "
      f"passed = {summary['passed']}, "
      f"curvature c2 = {summary['fit']['c2']:.6f}")

exact = json.loads((out / "exact_summary.json").read_text())
print(f"closed-form check: max |lambda - alpha^2| = "
      f"{exact['max_lambda_error']:.2e} (tolerance {exact['tolerance']:.0e})")
