import json

import numpy as np
import pytest

from approxlie.detsys import ODESpec
from approxlie.giforms import BORDERLINE, STABLE, UNSTABLE
from approxlie.isoclass import IsoConfig
from approxlie.liestruct import StructureTensor
from approxlie.scan import (
    CSV_HEADER, ERROR, PALETTE, AxisRange, GridSpec, PointResult, export, legend_path,
    partition_regions, read_json, scan_grid, write_csv, write_heatmap, write_json,
)

from conftest import BUMP_ODE

S2 = StructureTensor.from_brackets(2, {(0, 1): {1: 1.0}}).c


def cell(x, u, status=STABLE, dim=2, tensor="auto"):
    if isinstance(tensor, str):
        tensor = (S2 if dim == 2 else np.zeros((dim,) * 3)) if status == STABLE and dim else None
    return PointResult(x, u, status, dim if status in (STABLE, BORDERLINE) else None,
                       2 if status in (STABLE, BORDERLINE) else None, tensor=tensor)


def test_axis_range():
    r = AxisRange.parse("0:5:0.2")
    assert r.count == 26
    vals = r.values()
    assert vals[0] == 0.0 and vals[-1] == 5.0 and vals[3] == 0.6
    assert AxisRange(0, 1, 0.3).values() == [0.0, 0.3, 0.6, 0.9]


@pytest.mark.parametrize("text", ["0:5", "a:1:0.1", "1:0:0.1", "0:1:0", "0:1:-1", "0:inf:1"])
def test_axis_range_rejects(text):
    with pytest.raises(ValueError):
        AxisRange.parse(text)


def test_grid_points_row_major():
    g = GridSpec(AxisRange(0, 1, 0.5), AxisRange(0, 2, 1), 1e-3)
    assert g.shape == (3, 3)
    assert g.points()[:4] == [(0.0, 0.0), (0.5, 0.0), (1.0, 0.0), (0.0, 1.0)]


def test_point_result_invariants():
    with pytest.raises(ValueError):
        PointResult(0, 0, "maybe")
    with pytest.raises(ValueError):
        PointResult(0, 0, UNSTABLE, dim=2)
    with pytest.raises(ValueError):
        PointResult(0, 0, STABLE)                    # stable needs a dimension
    with pytest.raises(ValueError):
        PointResult(0, 0, STABLE, dim=2, qprime=2)   # ... and a tensor when dim >= 1
    with pytest.raises(ValueError):
        PointResult(0, 0, BORDERLINE, 2, 2, tensor=S2)
    PointResult(0, 0, STABLE, 0, 2)


def test_free_particle_grid_is_one_sl3_region():
    g = GridSpec(AxisRange(-1, 1, 0.5), AxisRange(0, 1, 0.5), 1e-9)
    res = scan_grid(ODESpec.from_text("diff(u,x,2)"), g)
    assert all(r.status == STABLE and r.dim == 8 for r in res)
    rm = partition_regions(res, g.shape)
    assert len(rm.regions) == 1 and rm.regions[0].count == len(res)
    assert set(rm.ids.tolist()) == {1}


def test_leading_coefficient_zero_is_error_cell():
    g = GridSpec(AxisRange(-0.5, 0.5, 0.5), AxisRange(0, 0.5, 0.5), 1e-9)
    res = scan_grid(ODESpec.from_text("x*diff(u,x,2) + u"), g)
    statuses = [r.status for r in res]
    assert statuses[1] == ERROR and statuses[4] == ERROR
    assert "vanishes" in res[1].message
    assert all(s != ERROR for i, s in enumerate(statuses) if i not in (1, 4))


def test_domain_error_is_error_cell():
    g = GridSpec(AxisRange(-1, 1, 1), AxisRange(0, 1, 1), 1e-9)
    res = scan_grid(ODESpec.from_text("diff(u,x,2) + ln(x)*u"), g)
    assert [r.status for r in res[:3]][:2] == [ERROR, ERROR]
    assert res[2].status == STABLE


def test_all_abelian_single_region():
    res = [cell(x, 0, dim=3) for x in range(4)]
    rm = partition_regions(res, (1, 4))
    assert rm.ids.tolist() == [1, 1, 1, 1]


def test_two_islands_get_two_ids():
    res = [cell(0, 0), cell(1, 0, UNSTABLE), cell(2, 0)]
    rm = partition_regions(res, (1, 3))
    assert rm.ids.tolist() == [1, 0, 2]
    assert [r.count for r in rm.regions] == [1, 1]


def test_non_isomorphic_neighbours_split():
    ab = np.zeros((2, 2, 2))
    res = [cell(0, 0), cell(1, 0, tensor=ab), cell(2, 0, dim=0)]
    rm = partition_regions(res, (1, 3), IsoConfig(starts=5))
    assert rm.ids.tolist() == [1, 2, 3]


def test_borderline_cells_get_region_zero():
    res = [cell(0, 0), cell(1, 0, BORDERLINE), cell(0, 1), cell(1, 1)]
    rm = partition_regions(res, (2, 2))
    ids = rm.grid()
    assert ids[0, 1] == 0
    assert ids[0, 0] == ids[1, 0] == ids[1, 1] == 1


def test_region_ids_partition_the_grid():
    res = [cell(i % 3, i // 3, [STABLE, UNSTABLE, BORDERLINE][i % 3]) for i in range(9)]
    rm = partition_regions(res, (3, 3))
    assert len(rm.ids) == 9
    in_regions = sum(r.count for r in rm.regions)
    assert in_regions + int(np.sum(rm.ids == 0)) == 9


def test_csv_two_by_two(tmp_path):
    res = [cell(0.0, 0.0), cell(0.5, 0.0, UNSTABLE), cell(0.0, 0.5, BORDERLINE), cell(0.5, 0.5)]
    rm = partition_regions(res, (2, 2))
    p = tmp_path / "r.csv"
    write_csv(res, p, rm)
    lines = p.read_text().splitlines()
    assert len(lines) == 5
    assert lines[0] == CSV_HEADER
    assert lines[2] == "0.5,0.0,unstable,,,,,0"


def test_heatmap_dimensions_and_palette(tmp_path):
    res = [cell(i * 0.2, j * 0.2, STABLE, (i + j) % 9) for j in range(26) for i in range(26)]
    res[0] = cell(0, 0, ERROR)
    p = tmp_path / "h.ppm"
    legend = write_heatmap(res, (26, 26), p)
    data = p.read_bytes()
    header = b"P6\n26 26\n255\n"
    assert data.startswith(header)
    pix = np.frombuffer(data[len(header):], dtype=np.uint8).reshape(26, 26, 3)
    assert tuple(pix[-1, 0]) == PALETTE[ERROR]          # (0, 0) is bottom-left
    assert tuple(pix[-1, 1]) == PALETTE[1]
    assert legend == legend_path(p) == tmp_path / "h.legend.json"
    assert json.loads(legend.read_text())["colors"]["0"] == [0, 0, 0]


def test_palette_colours_distinct():
    cols = [PALETTE[k] for k in range(9)] + [PALETTE[s] for s in (BORDERLINE, UNSTABLE, ERROR)]
    assert len(set(cols)) == len(cols)


def test_json_roundtrip(tmp_path):
    g = GridSpec(AxisRange(2.2, 3.0, 0.4), AxisRange(0.0, 0.4, 0.2), 1e-3)
    res = scan_grid(ODESpec.from_text(BUMP_ODE), g)
    rm = partition_regions(res, g.shape)
    p = tmp_path / "r.json"
    write_json(res, p, g, rm)
    back, g2, rm2 = read_json(p)
    assert back == res
    assert g2 == g
    assert np.array_equal(rm2.ids, rm.ids)
    assert rm2.to_json() == rm.to_json()


def test_export_dispatch(tmp_path):
    g = GridSpec(AxisRange(0, 1, 1), AxisRange(0, 1, 1), 1e-9)
    res = [cell(x, u) for u in (0, 1) for x in (0, 1)]
    export(res, "csv", tmp_path / "a.csv")
    export(res, "heatmap", tmp_path / "a.ppm", grid=g)
    assert (tmp_path / "a.legend.json").exists()
    with pytest.raises(ValueError):
        export(res, "png", tmp_path / "a.png")


def test_parallel_equals_serial():
    g = GridSpec(AxisRange(0.6, 1.4, 0.4), AxisRange(0.6, 1.4, 0.4), 1e-3)
    ode = ODESpec.from_text(BUMP_ODE)
    serial = scan_grid(ode, g)
    parallel = scan_grid(ode, g, workers=2)
    assert serial == parallel
