import math

import pytest

SCENARIO_ECHO = """\
[profile]
v0 = 20.0
rho = 0.5
drop_start = 0.0
drop_length = 500.0

[platoon]
n = 100
T = 1.0

[sim]
x1_start = -100.0
duration = 260.0
dt = 0.01
record_interval = 0.1
integrator = rk4

[perturbations]
"""


def synth_series(vehicle, samples=120):
    """A plausible drop traversal: cruise, ramp down, plateau."""
    rows_v = []
    rows_h = []
    for k in range(samples):
        x = -100.0 + vehicle * 2.0 + k * 6.0
        if x < 0:
            v = 20.0
        elif x < 500.0:
            v = 20.0 - 0.02 * x
        else:
            v = 10.0
        h = float("nan") if vehicle == 1 else 1.0 + 0.01 * math.sin(0.02 * x)
        rows_v.append((x, v))
        rows_h.append((x, h))
    return rows_v, rows_h


def write_artifacts(root, vehicles):
    (root / "plots").mkdir(parents=True)
    (root / "scenario.cfg").write_text(SCENARIO_ECHO, encoding="utf-8")
    for vehicle in vehicles:
        rows_v, rows_h = synth_series(vehicle)
        with open(root / "plots" / f"velocity_v{vehicle:03d}.csv", "w") as fh:
            fh.write("x,v\n")
            fh.writelines(f"{x!r},{v!r}\n" for x, v in rows_v)
        with open(root / "plots" / f"headway_v{vehicle:03d}.csv", "w") as fh:
            fh.write("x,headway\n")
            fh.writelines(f"{x!r},{h!r}\n" for x, h in rows_h)
    return root


@pytest.fixture
def artifact_dir(tmp_path):
    return write_artifacts(tmp_path / "run", tuple(range(10, 101, 10)))
