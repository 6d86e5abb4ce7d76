"""
This module contains the writers and readers of the files produced by
`magconfine`: one trajectory CSV per particle, JSON reports and SVG figures.
All outputs are deterministic for a fixed scenario and seed.
"""

import json
import logging
import os
import re
from typing import Optional, Sequence

import matplotlib as mpl
import numpy as np
import pandas as pd
import xarray as xr
from matplotlib.figure import Figure
from matplotlib.patches import Circle

from .dynamics import ParticleParams, Trajectory
from .geometry import CollarChart, to_normal

log = logging.getLogger(__name__)


class OutputFormatError(ValueError):
    """Malformed trajectory CSV or report file."""


CSV_SCHEMA = 1
CSV_COLUMNS = ("t", "x", "y", "vx", "vy", "n", "s", "p_n", "p_s", "A", "H")

_HEADER = re.compile(
    r"^# magconfine-trajectory schema=(?P<schema>\d+) particle=(?P<particle>\d+) "
    r"status=(?P<status>\w+) H0=(?P<H0>\S+)(?: charge=(?P<charge>\S+) mass=(?P<mass>\S+))?$"
)


def trajectory_filename(index: int) -> str:
    return f"trajectory_{index:03d}.csv"


def write_trajectory_csv(trajectory: Trajectory, fpath: str) -> str:
    """Writes a trajectory with its diagnostics as CSV. The first line is a
    comment carrying the schema version, particle index, status, energy and
    particle parameters; columns are t, x, y, vx, vy, n, s, p_n, p_s, A, H with
    empty n..A outside the collars and floats in shortest round-trip form.

    :param trajectory: Trajectory, with or without diagnostics
    :type trajectory: Trajectory
    :param fpath: Output filepath
    :type fpath: str

    :returns: Output filepath
    :rtype: str
    """

    df = trajectory.samples.reset_coords(drop=True).to_dataframe().reset_index()
    for column in CSV_COLUMNS:
        if column not in df:
            df[column] = np.nan
    df = df[list(CSV_COLUMNS)]

    header = (
        f"# magconfine-trajectory schema={CSV_SCHEMA} particle={trajectory.index} "
        f"status={trajectory.status} H0={trajectory.H0!r} "
        f"charge={trajectory.params.charge!r} mass={trajectory.params.mass!r}\n"
    )
    with open(fpath, "w", encoding="utf-8", newline="") as f:
        f.write(header)
        df.to_csv(f, index=False, na_rep="", lineterminator="\n")
    return fpath


def _components(df: pd.DataFrame, charts: Optional[Sequence[CollarChart]]) -> np.ndarray:
    """Collar index per row, -1 where n is empty. With several charts the first
    one containing the position wins, as in `diagnostics_pass`."""

    inside = np.isfinite(df["n"].values)
    component = np.where(inside, 0, -1)
    if charts is not None and len(charts) > 1:
        positions = df[["x", "y"]].values
        for i in np.flatnonzero(inside):
            component[i] = next(
                (j for j, chart in enumerate(charts) if to_normal(chart, positions[i]) is not None),
                -1,
            )
    return component


def read_trajectory_csv(fpath: str, charts: Optional[Sequence[CollarChart]] = None) -> Trajectory:
    """Reads a trajectory CSV written by `write_trajectory_csv`. The collar
    index of each sample is restored from the filled n column, so that the
    bounds can be verified again from the file alone.

    :param fpath: Filepath of trajectory CSV
    :type fpath: str
    :param charts: Collar charts of the scenario, needed to tell collars apart
        when there are several, defaults to None
    :type charts: Sequence[CollarChart], optional

    :returns: Trajectory with the CSV columns, and `component` when the file
        carries diagnostics
    :rtype: Trajectory
    """

    with open(fpath, encoding="utf-8") as f:
        first = f.readline().rstrip("\n")

    match = _HEADER.match(first)
    if match is None:
        raise OutputFormatError(
            f"Malformed trajectory CSV {fpath!r}: missing schema comment line"
        )
    if int(match["schema"]) != CSV_SCHEMA:
        raise OutputFormatError(
            f"Unsupported trajectory CSV schema {match['schema']} in {fpath!r}"
        )

    try:
        df = pd.read_csv(fpath, skiprows=1, dtype=float, float_precision="round_trip")
    except (ValueError, pd.errors.ParserError) as exc:
        raise OutputFormatError(f"Malformed trajectory CSV {fpath!r}: {exc}") from None

    if tuple(df.columns) != CSV_COLUMNS:
        raise OutputFormatError(
            f"Malformed trajectory CSV {fpath!r}: expected columns {','.join(CSV_COLUMNS)}"
        )
    if df.empty or not np.all(np.diff(df["t"].values) > 0):
        raise OutputFormatError(
            f"Malformed trajectory CSV {fpath!r}: times must be strictly increasing"
        )

    samples = xr.Dataset.from_dataframe(df.set_index("t"))
    # H is filled on every sample once diagnostics have run
    if np.all(np.isfinite(df["H"].values)):
        samples = samples.assign(component=("t", _components(df, charts)))
    params = ParticleParams(
        charge=float(match["charge"] or 1.0), mass=float(match["mass"] or 1.0)
    )
    return Trajectory(
        samples, match["status"], float(match["H0"]), params, index=int(match["particle"])
    )


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if np.isfinite(value) else None
    return value


def write_report(report: dict, fpath: str) -> str:
    """Writes a report as JSON, 2-space indented, with NaN and infinities
    written as null."""

    with open(fpath, "w", encoding="utf-8", newline="\n") as f:
        json.dump(_jsonable(report), f, indent=2, allow_nan=False)
        f.write("\n")
    return fpath


def _boundary_radii(domain: dict) -> list:
    if domain["kind"] == "disc":
        return [domain["R"]]
    return [domain["R1"], domain["R2"]]


def plot_trajectories(
    trajectories: Sequence[Trajectory],
    domain: dict,
    fpath: str,
    title: Optional[str] = None,
    center: tuple = (0.0, 0.0),
) -> str:
    """Draws the boundary circle(s) of the domain and one polyline per
    trajectory, and saves the figure as SVG. Trajectories with a single sample
    are drawn as a dot.

    :param trajectories: Trajectories to draw, in particle order
    :type trajectories: Sequence[Trajectory]
    :param domain: Domain description, e.g. {"kind": "disc", "R": 1.0}
    :type domain: dict
    :param fpath: Output filepath (.svg)
    :type fpath: str
    :param title: Caption, typically the field expression, defaults to None
    :type title: str, optional
    :param center: Centre of the domain, defaults to (0, 0)
    :type center: tuple, optional

    :returns: Output filepath
    :rtype: str
    """

    radii = _boundary_radii(domain)
    fig = Figure(figsize=(6, 6))
    ax = fig.add_subplot()
    colors = mpl.colormaps["tab10"].colors

    for R in radii:
        ax.add_patch(Circle(center, R, fill=False, color="black", linewidth=1.2))

    for i, trajectory in enumerate(trajectories):
        color = colors[i % len(colors)]
        xy = trajectory.positions
        if len(xy) == 1:
            ax.plot(xy[:, 0], xy[:, 1], "o", color=color, markersize=4)
        else:
            ax.plot(xy[:, 0], xy[:, 1], color=color, linewidth=0.6)

    extent = 1.05 * max(radii)
    ax.set_xlim(center[0] - extent, center[0] + extent)
    ax.set_ylim(center[1] - extent, center[1] + extent)
    ax.set_aspect("equal")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    if title:
        ax.set_title(f"B = {title}")

    with mpl.rc_context({"svg.hashsalt": "magconfine", "svg.fonttype": "none"}):
        fig.savefig(fpath, format="svg", metadata={"Date": None})
    log.debug("Wrote %s", os.path.basename(fpath))
    return fpath
