"""Render velocity and headway figures from platoonlab plot CSVs.

This is a drawing tool only: every number it plots comes straight out of
the run artifacts (the per-vehicle ``x,v`` / ``x,headway`` series plus the
profile constants echoed in ``scenario.cfg``).  Two figures per artifact
directory:

* velocity over position, one series per selected vehicle, with reference
  lines at the cruise speed and the post-drop plateau; the last vehicle is
  highlighted in gold,
* time headway over position with a reference line at the commanded
  headway; the last vehicle is highlighted in red.

Styles are pinned so re-rendering the same artifacts gives identical
files.  A missing or malformed CSV aborts with the offending filename.
"""

from __future__ import annotations

import argparse
import csv
import math
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

VELOCITY_PATTERN = re.compile(r"velocity_v(\d+)\.csv$")

STYLE = {
    "figure.figsize": (8.0, 4.5),
    "figure.dpi": 120,
    "savefig.dpi": 120,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 10,
    "legend.fontsize": 8,
}

VELOCITY_HIGHLIGHT = "gold"
HEADWAY_HIGHLIGHT = "red"


class SchemaError(RuntimeError):
    """A plot CSV is missing, unreadable, or not in the expected schema."""

    def __init__(self, path, detail: str):
        self.path = Path(path)
        super().__init__(f"{path}: {detail}")


@dataclass(frozen=True)
class FigureSpec:
    """What to draw: which artifact directory, which vehicles, where to."""

    input_dir: Path
    output_dir: Path
    vehicles: tuple[int, ...]
    image_format: str = "png"
    labels: dict = field(
        default_factory=lambda: {
            "position": "position (m)",
            "velocity": "speed (m/s)",
            "headway": "time headway (s)",
        }
    )

    def __post_init__(self):
        if not self.vehicles:
            raise ValueError("vehicle list must not be empty")


def discover_vehicles(input_dir: Path) -> tuple[int, ...]:
    """Vehicle indices present in ``<input_dir>/plots``."""
    plot_dir = Path(input_dir) / "plots"
    found = []
    if plot_dir.is_dir():
        for path in plot_dir.iterdir():
            match = VELOCITY_PATTERN.search(path.name)
            if match:
                found.append(int(match.group(1)))
    return tuple(sorted(found))


def read_series(path: Path, columns: tuple[str, str]) -> tuple[list, list]:
    """Read a two-column numeric CSV, failing loudly on any drift."""
    path = Path(path)
    if not path.is_file():
        raise SchemaError(path, "file not found")
    xs: list[float] = []
    ys: list[float] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != list(columns):
            raise SchemaError(
                path, f"expected header {','.join(columns)!r}, got {header!r}"
            )
        for row_no, row in enumerate(reader, start=2):
            if len(row) != 2:
                raise SchemaError(path, f"row {row_no}: expected 2 fields, got {len(row)}")
            try:
                xs.append(float(row[0]))
                ys.append(float(row[1]))
            except ValueError:
                raise SchemaError(
                    path, f"row {row_no}: non-numeric value {row!r}"
                ) from None
    if not xs:
        raise SchemaError(path, "no data rows")
    return xs, ys


def read_profile_constants(scenario_path: Path) -> dict:
    """Pull v0, rho and T out of the scenario echo (plain key = value)."""
    path = Path(scenario_path)
    if not path.is_file():
        raise SchemaError(path, "file not found")
    wanted = {"v0": None, "rho": None, "T": None}
    for raw in path.read_text(encoding="utf-8").splitlines():
        line = raw.split("#", 1)[0].strip()
        if "=" not in line:
            continue
        key, value = (part.strip() for part in line.split("=", 1))
        if key in wanted and wanted[key] is None:
            try:
                wanted[key] = float(value)
            except ValueError:
                raise SchemaError(path, f"key {key} is not numeric: {value!r}") from None
    missing = [key for key, value in wanted.items() if value is None]
    if missing:
        raise SchemaError(path, f"missing keys: {', '.join(missing)}")
    return wanted


def _series_color(position: int, count: int):
    cmap = plt.get_cmap("viridis")
    if count == 1:
        return cmap(0.0)
    return cmap(0.75 * position / (count - 1))


def _plot_series(ax, spec: FigureSpec, kind: str, highlight_color: str):
    columns = ("x", "v") if kind == "velocity" else ("x", "headway")
    count = len(spec.vehicles)
    last = max(spec.vehicles)
    for pos, vehicle in enumerate(sorted(spec.vehicles)):
        path = Path(spec.input_dir) / "plots" / f"{kind}_v{vehicle:03d}.csv"
        xs, ys = read_series(path, columns)
        pairs = [(x, y) for x, y in zip(xs, ys) if not math.isnan(y)]
        if not pairs:
            if kind == "headway":
                # the leader's headway is undefined everywhere; keep the
                # series slot so the figure still carries one entry per
                # selected vehicle
                ax.plot([], [], label=f"vehicle {vehicle} (undefined)")
                continue
            raise SchemaError(path, "series contains no plottable points")
        xs, ys = zip(*pairs)
        if vehicle == last:
            ax.plot(
                xs,
                ys,
                color=highlight_color,
                linewidth=2.2,
                zorder=5,
                label=f"vehicle {vehicle}",
            )
        else:
            ax.plot(
                xs,
                ys,
                color=_series_color(pos, count),
                linewidth=0.9,
                label=f"vehicle {vehicle}",
            )


def build_velocity_figure(spec: FigureSpec, constants: dict):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        _plot_series(ax, spec, "velocity", VELOCITY_HIGHLIGHT)
        v0 = constants["v0"]
        plateau = (1.0 - constants["rho"]) * v0
        ax.axhline(v0, color="0.4", linestyle="--", linewidth=0.8, label="_cruise")
        ax.axhline(plateau, color="0.4", linestyle="--", linewidth=0.8, label="_plateau")
        ax.annotate(f"{v0:g} m/s", xy=(0.01, v0), xycoords=("axes fraction", "data"),
                    va="bottom", fontsize=8, color="0.3")
        ax.annotate(f"{plateau:g} m/s", xy=(0.01, plateau),
                    xycoords=("axes fraction", "data"), va="top", fontsize=8,
                    color="0.3")
        ax.set_xlabel(spec.labels["position"])
        ax.set_ylabel(spec.labels["velocity"])
        ax.set_title("vehicle speed over position")
        ax.legend(loc="upper right", ncols=2)
        fig.tight_layout()
    return fig


def build_headway_figure(spec: FigureSpec, constants: dict):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        _plot_series(ax, spec, "headway", HEADWAY_HIGHLIGHT)
        T = constants["T"]
        ax.axhline(T, color="0.4", linestyle="--", linewidth=0.8, label="_headway")
        ax.annotate(f"T = {T:g} s", xy=(0.01, T), xycoords=("axes fraction", "data"),
                    va="bottom", fontsize=8, color="0.3")
        ax.set_xlabel(spec.labels["position"])
        ax.set_ylabel(spec.labels["headway"])
        ax.set_title("time headway over position")
        ax.legend(loc="lower right", ncols=2)
        fig.tight_layout()
    return fig


def render(spec: FigureSpec) -> tuple[Path, Path]:
    """Write the velocity and headway figures; returns the two paths."""
    constants = read_profile_constants(Path(spec.input_dir) / "scenario.cfg")
    out = Path(spec.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    velocity_path = out / f"velocity.{spec.image_format}"
    headway_path = out / f"headway.{spec.image_format}"
    fig = build_velocity_figure(spec, constants)
    try:
        fig.savefig(velocity_path)
    finally:
        plt.close(fig)
    fig = build_headway_figure(spec, constants)
    try:
        fig.savefig(headway_path)
    finally:
        plt.close(fig)
    return velocity_path, headway_path


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="platoon-figures",
        description="Render velocity and headway figures from a platoonlab "
        "artifact directory.",
    )
    parser.add_argument("input_dir", help="run artifact directory (with plots/)")
    parser.add_argument("--out", help="output directory (default: <input>/figures)")
    parser.add_argument(
        "--vehicles",
        help="comma-separated vehicle indices (default: every vehicle with "
        "plot data)",
    )
    parser.add_argument("--format", default="png", choices=("png", "svg", "pdf"))
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1

    input_dir = Path(args.input_dir)
    if args.vehicles:
        try:
            vehicles = tuple(int(v) for v in args.vehicles.split(","))
        except ValueError:
            print(f"--vehicles expects integers, got {args.vehicles!r}", file=sys.stderr)
            return 1
    else:
        vehicles = discover_vehicles(input_dir)
    if not vehicles:
        print(f"no plot series found under {input_dir}/plots", file=sys.stderr)
        return 1
    out_dir = Path(args.out) if args.out else input_dir / "figures"
    try:
        spec = FigureSpec(
            input_dir=input_dir,
            output_dir=out_dir,
            vehicles=vehicles,
            image_format=args.format,
        )
        velocity_path, headway_path = render(spec)
    except SchemaError as exc:
        print(f"bad input: {exc}", file=sys.stderr)
        return 2
    print(velocity_path)
    print(headway_path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
