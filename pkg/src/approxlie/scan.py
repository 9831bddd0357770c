"""Grid sweeps of the symmetry pipeline and region partitioning.

Cells are ordered row-major with ``x`` varying fastest; cell ``(i, j)``
sits at ``x = x_min + i*x_step``, ``u = u_min + j*u_step`` and has flat
index ``j*nx + i``.
"""

from __future__ import annotations

import json
import math
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .detsys import ODEError, ODESpec, generate_determining_system
from .expr import EvaluationError
from .giforms import BORDERLINE, STABLE, UNSTABLE, NumericalFailure, ToleranceConfig, involutive_completion
from .isoclass import ISOMORPHIC, IsoConfig, test_isomorphism
from .jet import CoefficientMatrixFunction, assemble_matrix
from .liestruct import ExtensionError, structure_constants

__all__ = [
    "AxisRange", "GridSpec", "PointResult", "Region", "RegionMap", "ERROR", "STATUSES",
    "analyze_point", "scan_grid", "partition_regions", "export", "write_csv", "write_json",
    "read_json", "write_heatmap", "CSV_HEADER", "PALETTE",
]

ERROR = "error"
STATUSES = (STABLE, BORDERLINE, UNSTABLE, ERROR)
CSV_HEADER = "x,u,status,dim,qprime,sigma_lie_max,sigma_jacobi_max,region"


@dataclass(frozen=True)
class AxisRange:
    lo: float
    hi: float
    step: float

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi) and math.isfinite(self.step)):
            raise ValueError("range bounds must be finite")
        if not self.step > 0:
            raise ValueError("range step must be positive")
        if not self.lo < self.hi:
            raise ValueError("range minimum must be below its maximum")

    @classmethod
    def parse(cls, text: str) -> "AxisRange":
        """``"a:b:step"``"""
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"range {text!r} is not of the form min:max:step")
        try:
            lo, hi, step = (float(p) for p in parts)
        except ValueError:
            raise ValueError(f"range {text!r} has a non-numeric field") from None
        return cls(lo, hi, step)

    @property
    def count(self) -> int:
        return int(math.floor((self.hi - self.lo) / self.step + 1e-9)) + 1

    def values(self) -> list[float]:
        # rounding keeps 0.6 from printing as 0.6000000000000001
        return [round(self.lo + i * self.step, 12) for i in range(self.count)]


@dataclass(frozen=True)
class GridSpec:
    x: AxisRange
    u: AxisRange
    tol: float
    kmax: int = 8
    rho: float = 10.0

    def __post_init__(self):
        ToleranceConfig(self.tol, self.kmax, self.rho)  # validates

    @property
    def shape(self) -> tuple[int, int]:
        """(nu, nx): rows are u values, columns x values."""
        return self.u.count, self.x.count

    def points(self) -> list[tuple[float, float]]:
        xs = self.x.values()
        return [(x, u) for u in self.u.values() for x in xs]

    def tolerance_config(self) -> ToleranceConfig:
        return ToleranceConfig(self.tol, self.kmax, self.rho)

    def to_json(self) -> dict:
        return {"x": [self.x.lo, self.x.hi, self.x.step], "u": [self.u.lo, self.u.hi, self.u.step],
                "tol": self.tol, "kmax": self.kmax, "rho": self.rho}

    @classmethod
    def from_json(cls, d: dict) -> "GridSpec":
        return cls(AxisRange(*d["x"]), AxisRange(*d["u"]), d["tol"], d["kmax"], d["rho"])


@dataclass(eq=False)
class PointResult:
    x: float
    u: float
    status: str
    dim: int | None = None
    qprime: int | None = None
    sigma_lie_max: float | None = None
    sigma_jacobi_max: float | None = None
    theta_max: float | None = None
    tensor: np.ndarray | None = None     # present iff stable and dim >= 1
    message: str = ""

    def __post_init__(self):
        if self.status not in STATUSES:
            raise ValueError(f"unknown status {self.status!r}")
        if (self.dim is not None) != (self.status in (STABLE, BORDERLINE)):
            raise ValueError("dimension is present exactly for stable and borderline points")
        has_tensor = self.status == STABLE and self.dim >= 1
        if (self.tensor is not None) != has_tensor:
            raise ValueError("tensor is present exactly for stable points of dimension >= 1")

    def __eq__(self, other):
        if not isinstance(other, PointResult):
            return NotImplemented
        a, b = self.to_json(), other.to_json()
        return a == b

    def to_json(self) -> dict:
        return {
            "x": self.x, "u": self.u, "status": self.status, "dim": self.dim,
            "qprime": self.qprime, "sigma_lie_max": self.sigma_lie_max,
            "sigma_jacobi_max": self.sigma_jacobi_max, "theta_max": self.theta_max,
            "c": None if self.tensor is None else self.tensor.tolist(), "message": self.message,
        }

    @classmethod
    def from_json(cls, d: dict) -> "PointResult":
        c = d.get("c")
        if c is not None:
            r = d["dim"]
            c = np.array(c, dtype=float).reshape(r, r, r)
        return cls(d["x"], d["u"], d["status"], d.get("dim"), d.get("qprime"),
                   d.get("sigma_lie_max"), d.get("sigma_jacobi_max"), d.get("theta_max"),
                   c, d.get("message", ""))


def analyze_point(M0: CoefficientMatrixFunction, ode: ODESpec | None, point,
                  cfg: ToleranceConfig) -> PointResult:
    """Full pipeline at one base point; failures become status ``error``."""
    x, u = point
    try:
        if ode is not None:
            ode.check_point(x, u)
        form = involutive_completion(M0, (x, u), cfg)
        if form.status == UNSTABLE:
            return PointResult(x, u, UNSTABLE)
        if form.dim == 0:
            return PointResult(x, u, form.status, 0, form.qprime)
    except (ODEError, EvaluationError, NumericalFailure) as exc:
        return PointResult(x, u, ERROR, message=f"{type(exc).__name__}: {exc}")
    try:
        tensor, rep = structure_constants(form)
    except ExtensionError as exc:
        # a borderline point keeps its dimension; a stable one must extend
        if form.status == BORDERLINE:
            return PointResult(x, u, BORDERLINE, form.dim, form.qprime, message=str(exc))
        return PointResult(x, u, ERROR, message=f"ExtensionError: {exc}")
    return PointResult(
        x, u, form.status, form.dim, form.qprime, rep.sigma_lie_max, rep.sigma_jacobi_max,
        rep.theta_max, tensor.c if form.status == STABLE else None,
    )


_WORKER: dict = {}


def _init_worker(M0, ode, cfg):
    _WORKER.update(M0=M0, ode=ode, cfg=cfg)


def _work(point):
    return analyze_point(_WORKER["M0"], _WORKER["ode"], point, _WORKER["cfg"])


def scan_grid(ode: ODESpec, grid: GridSpec, workers: int | None = None) -> list[PointResult]:
    """One :class:`PointResult` per cell in row-major order.

    ``workers`` > 1 spreads the points over a process pool; the per-point
    computation does not depend on the process, so the output is identical.
    """
    M0 = assemble_matrix(generate_determining_system(ode))
    cfg = grid.tolerance_config()
    points = grid.points()
    if workers is None or workers <= 1:
        return [analyze_point(M0, ode, p, cfg) for p in points]
    chunk = max(1, len(points) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker,
                             initargs=(M0, ode, cfg)) as pool:
        return list(pool.map(_work, points, chunksize=chunk))


@dataclass
class Region:
    id: int
    dim: int
    representative: int          # flat cell index
    tensor: np.ndarray
    count: int = 0


@dataclass
class RegionMap:
    shape: tuple[int, int]       # (nu, nx)
    ids: np.ndarray              # flat, row-major, 0 = not in any region
    regions: list[Region] = field(default_factory=list)

    def grid(self) -> np.ndarray:
        return self.ids.reshape(self.shape)

    def to_json(self) -> list[dict]:
        return [{"id": r.id, "dim": r.dim, "representative": r.representative, "count": r.count}
                for r in self.regions]


def _cell_tensor(res: PointResult) -> np.ndarray:
    return res.tensor if res.tensor is not None else np.zeros((0, 0, 0))


def partition_regions(results: list[PointResult], shape: tuple[int, int],
                      cfg: IsoConfig | None = None) -> RegionMap:
    """Flood-fill stable cells into 4-connected regions of one isomorphism class.

    Seeds are taken in row-major order and each candidate cell is compared
    with its region's seed (the representative), never with other members.
    """
    cfg = cfg or IsoConfig()
    nu, nx = shape
    if len(results) != nu * nx:
        raise ValueError(f"{len(results)} results do not fill a {nu}x{nx} grid")
    ids = np.zeros(nu * nx, dtype=int)
    regions: list[Region] = []
    for seed, res in enumerate(results):
        if ids[seed] or res.status != STABLE:
            continue
        rid = len(regions) + 1
        rep = _cell_tensor(res)
        region = Region(rid, res.dim, seed, rep)
        regions.append(region)
        ids[seed] = rid
        tested: set[int] = {seed}
        queue = deque([seed])
        while queue:
            cell = queue.popleft()
            region.count += 1
            j, i = divmod(cell, nx)
            for dj, di in ((0, 1), (1, 0), (0, -1), (-1, 0)):
                jj, ii = j + dj, i + di
                if not (0 <= jj < nu and 0 <= ii < nx):
                    continue
                nb = jj * nx + ii
                if nb in tested or ids[nb]:
                    continue
                tested.add(nb)
                other = results[nb]
                if other.status != STABLE or other.dim != res.dim:
                    continue
                if test_isomorphism(_cell_tensor(other), rep, cfg).outcome == ISOMORPHIC:
                    ids[nb] = rid
                    queue.append(nb)
    return RegionMap((nu, nx), ids, regions)


# --- export -----------------------------------------------------------------

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


def write_csv(results: list[PointResult], path, regions: RegionMap | None = None) -> None:
    lines = [CSV_HEADER]
    for idx, r in enumerate(results):
        region = "" if regions is None else str(int(regions.ids[idx]))
        lines.append(",".join([_fmt(r.x), _fmt(r.u), r.status, _fmt(r.dim), _fmt(r.qprime),
                               _fmt(r.sigma_lie_max), _fmt(r.sigma_jacobi_max), region]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_json(results: list[PointResult], path, grid: GridSpec | None = None,
               regions: RegionMap | None = None) -> None:
    doc = {
        "grid": None if grid is None else grid.to_json(),
        "cells": [r.to_json() for r in results],
        "region_ids": None if regions is None else regions.ids.tolist(),
        "regions": None if regions is None else regions.to_json(),
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


def read_json(path) -> tuple[list[PointResult], GridSpec | None, RegionMap | None]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    results = [PointResult.from_json(d) for d in doc["cells"]]
    grid = None if doc.get("grid") is None else GridSpec.from_json(doc["grid"])
    regions = None
    if doc.get("region_ids") is not None:
        shape = grid.shape if grid is not None else (1, len(results))
        ids = np.array(doc["region_ids"], dtype=int)
        regs = [Region(d["id"], d["dim"], d["representative"],
                       _cell_tensor(results[d["representative"]]), d["count"])
                for d in doc["regions"]]
        regions = RegionMap(shape, ids, regs)
    return results, grid, regions


# stable dimensions 0..8; anything larger shares the last colour
PALETTE = {
    0: (0, 0, 0),
    1: (230, 25, 75),
    2: (60, 180, 75),
    3: (255, 225, 25),
    4: (0, 130, 200),
    5: (245, 130, 48),
    6: (145, 30, 180),
    7: (70, 240, 240),
    8: (240, 50, 230),
    "9+": (128, 64, 0),
    BORDERLINE: (128, 128, 128),
    UNSTABLE: (255, 255, 255),
    ERROR: (255, 0, 0),
}


def _colour(r: PointResult) -> tuple[int, int, int]:
    if r.status != STABLE:
        return PALETTE[r.status]
    return PALETTE[r.dim] if r.dim <= 8 else PALETTE["9+"]


def legend_path(path) -> Path:
    p = Path(path)
    return p.with_name(p.stem + ".legend.json")


def write_heatmap(results: list[PointResult], shape: tuple[int, int], path,
                  grid: GridSpec | None = None) -> Path:
    """Binary PPM (P6), one pixel per cell, largest u on the top row."""
    nu, nx = shape
    if len(results) != nu * nx:
        raise ValueError(f"{len(results)} results do not fill a {nu}x{nx} grid")
    img = bytearray()
    for j in range(nu - 1, -1, -1):
        for i in range(nx):
            img.extend(_colour(results[j * nx + i]))
    Path(path).write_bytes(f"P6\n{nx} {nu}\n255\n".encode("ascii") + bytes(img))
    legend = {
        "width": nx, "height": nu, "orientation": "x increases left to right, u increases bottom to top",
        "colors": {str(k): list(v) for k, v in PALETTE.items()},
        "grid": None if grid is None else grid.to_json(),
    }
    lp = legend_path(path)
    lp.write_text(json.dumps(legend, indent=1) + "\n", encoding="utf-8")
    return lp


def export(results: list[PointResult], fmt: str, path, grid: GridSpec | None = None,
           regions: RegionMap | None = None) -> None:
    if fmt == "csv":
        write_csv(results, path, regions)
    elif fmt == "json":
        write_json(results, path, grid, regions)
    elif fmt == "heatmap":
        if grid is None:
            raise ValueError("heatmap export needs the grid shape")
        write_heatmap(results, grid.shape, path, grid)
    else:
        raise ValueError(f"unknown export format {fmt!r}")
