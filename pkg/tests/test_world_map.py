import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cmcl import world_map as wm


def make_text(rows, resolution=1.0, origin=(0, 0, 0)):
    header = f"resolution: {resolution}\norigin: {origin[0]} {origin[1]} {origin[2]}\n\n"
    return header + "\n".join(rows) + "\n"


class TestLoadGrid:
    def test_all_free(self):
        g = wm.load_grid(make_text(["...", "...", "..."]))
        assert g.width == 3 and g.height == 3
        assert g.n_free == 9
        assert g.resolution == 1.0

    def test_single_occupied_top_row(self):
        g = wm.load_grid(make_text(["..#", "...", "..."]))
        assert (g.cells == wm.OCCUPIED).sum() == 1
        # document row 0 is the max-y row -> internal row height-1
        assert g.cells[g.height - 1, 2] == wm.OCCUPIED

    def test_ragged_rows(self):
        with pytest.raises(wm.MapFormatError) as ei:
            wm.load_grid(make_text(["...", "...."]))
        assert ei.value.line == 5  # second map row, after 3 header lines

    def test_unknown_char(self):
        with pytest.raises(wm.MapFormatError) as ei:
            wm.load_grid(make_text(["..x"]))
        assert ei.value.line == 4 and ei.value.column == 3

    def test_missing_resolution(self):
        with pytest.raises(wm.MapFormatError):
            wm.load_grid("origin: 0 0 0\n\n...\n")

    def test_bad_header(self):
        with pytest.raises(wm.MapFormatError):
            wm.load_grid("resolution: zero\n\n...\n")

    def test_unknown_cells_parsed(self):
        g = wm.load_grid(make_text(["?.."]))
        assert g.cells[0, 0] == wm.UNKNOWN

    def test_world_cell_round_trip(self):
        g = wm.load_grid(make_text(["..." for _ in range(3)], resolution=0.25,
                                   origin=(1.0, -2.0, 0.3)))
        rng = np.random.default_rng(1)
        fx = rng.uniform(0, 3, 50)
        fy = rng.uniform(0, 3, 50)
        c, s = math.cos(0.3), math.sin(0.3)
        x = 1.0 + (c * fx - s * fy) * 0.25
        y = -2.0 + (s * fx + c * fy) * 0.25
        ix, iy = g.world_to_cell(x, y)
        cx, cy = g.cell_center(ix, iy)
        assert np.all(np.hypot(cx - x, cy - y) <= 0.25 * math.sqrt(2))


class TestDistanceField:
    def test_occupied_cell_is_zero(self):
        g = wm.load_grid(make_text([".#.", "...", "..."]))
        df = wm.distance_field(g)
        assert df.values[2, 1] == 0.0

    def test_one_row_map(self):
        g = wm.load_grid(make_text(["#...."], resolution=0.5))
        df = wm.distance_field(g)
        assert np.allclose(df.values[0], [0.0, 0.5, 1.0, 1.5, 2.0])

    def test_all_free_is_cap(self):
        g = wm.load_grid(make_text(["...", "..."]))
        df = wm.distance_field(g)
        assert df.cap == (3 + 2) * 1.0
        assert np.all(df.values == df.cap)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(7)
        for _ in range(5):
            h, w = rng.integers(4, 64, size=2)
            cells = (rng.random((h, w)) < 0.08).astype(np.uint8)
            if not cells.any():
                cells[0, 0] = 1
            g = wm.OccupancyGrid(0.1, wm.Pose(0, 0, 0), cells)
            df = wm.distance_field(g)
            oy, ox = np.nonzero(cells == wm.OCCUPIED)
            iy, ix = np.mgrid[0:h, 0:w]
            d2 = (iy[:, :, None] - oy[None, None, :]) ** 2 \
                + (ix[:, :, None] - ox[None, None, :]) ** 2
            brute = np.sqrt(d2.min(axis=2)) * 0.1
            assert np.array_equal(df.values, brute)

    def test_lipschitz(self):
        g = wm.load_grid(make_text(["....#", ".....", "#...."], resolution=0.2))
        v = wm.distance_field(g).values
        bound = 0.2 * math.sqrt(2) + 1e-12
        assert np.all(np.abs(np.diff(v, axis=0)) <= bound)
        assert np.all(np.abs(np.diff(v, axis=1)) <= bound)

    def test_sample_outside_is_cap(self):
        g = wm.load_grid(make_text(["#.."]))
        df = wm.distance_field(g)
        assert df.sample(100.0, 100.0) == df.cap


def box_map(w_m, h_m, res):
    """Rectangular room: free interior with a one-cell wall border."""
    nx = int(round(w_m / res))
    ny = int(round(h_m / res))
    rows = ["#" * nx] + ["#" + "." * (nx - 2) + "#" for _ in range(ny - 2)] + ["#" * nx]
    return wm.load_grid(make_text(rows, resolution=res))


class TestRaycast:
    def test_clamped_at_r_max(self):
        g = box_map(20.0, 2.0, 0.1)
        assert wm.raycast(g, wm.Pose(1.0, 1.0, 0.0), 0.0, 12.0) == 12.0

    def test_perpendicular_wall(self):
        # wall column begins 3.0 m in front of the origin
        res = 0.05
        nx, ny = 100, 20
        rows = []
        for _ in range(ny):
            row = ["."] * nx
            for i in range(int(3.5 / res), nx):
                row[i] = "#"
            rows.append("".join(row))
        g = wm.load_grid(make_text(rows, resolution=res))
        d = wm.raycast(g, wm.Pose(0.5, 0.5, 0.0), 0.0, 12.0)
        assert abs(d - 3.0) <= res

    def test_origin_occupied_errors(self):
        g = wm.load_grid(make_text(["#.."]))
        with pytest.raises(ValueError):
            wm.raycast(g, wm.Pose(0.5, 0.5, 0), 0.0, 5.0)

    def test_origin_outside_errors(self):
        g = wm.load_grid(make_text(["..."]))
        with pytest.raises(ValueError):
            wm.raycast(g, wm.Pose(-1.0, 0.5, 0), 0.0, 5.0)

    def test_unknown_blocks(self):
        g = wm.load_grid(make_text(["..?.."], resolution=1.0))
        assert wm.raycast(g, wm.Pose(0.5, 0.5, 0.0), 0.0, 10.0) == pytest.approx(1.5)

    def test_monotone_in_r_max(self):
        g = box_map(8.0, 6.0, 0.1)
        rng = np.random.default_rng(3)
        pose = wm.Pose(2.0, 3.0, 0.7)
        for bearing in rng.uniform(-math.pi, math.pi, 40):
            full = wm.raycast(g, pose, bearing, 50.0)
            for r_max in (0.5, 2.0, 5.0):
                assert wm.raycast(g, pose, bearing, r_max) == pytest.approx(
                    min(full, r_max))

    def test_bearing_relative_to_heading(self):
        g = box_map(10.0, 4.0, 0.1)
        pose = wm.Pose(5.0, 2.0, math.pi / 2)
        # heading +y, bearing -pi/2 -> ray along +x
        d_east = wm.raycast(g, pose, -math.pi / 2, 20.0)
        assert d_east == pytest.approx(10.0 - 0.1 - 5.0, abs=0.11)


class TestTransforms:
    def test_zero_range(self):
        for bearing in (0.0, 1.0, -2.0):
            p = wm.to_absolute(wm.Detection(0.0, bearing), wm.Pose(1, 2, 0.5))
            assert np.allclose(p, [1, 2])

    def test_quarter_turn(self):
        p = wm.to_absolute(wm.Detection(1.0, 0.0), wm.Pose(0, 0, math.pi / 2))
        assert abs(p[0] - 0.0) < 1e-12 and abs(p[1] - 1.0) < 1e-12

    def test_to_relative_quarter(self):
        d = wm.to_relative((0.0, 1.0), wm.Pose(0, 0, math.pi / 2))
        assert d.range == pytest.approx(1.0, abs=1e-12)
        assert d.bearing == pytest.approx(0.0, abs=1e-12)

    def test_coincident_convention(self):
        d = wm.to_relative((1.0, 2.0), wm.Pose(1, 2, 0.7))
        assert d.range == 0.0 and d.bearing == 0.0

    def test_round_trips(self):
        rng = np.random.default_rng(11)
        for _ in range(1000):
            d = wm.Detection(rng.uniform(0, 10), rng.uniform(-math.pi, math.pi))
            o = wm.Pose(rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(0, 7))
            back = wm.to_relative(wm.to_absolute(d, o), o)
            assert back.range == pytest.approx(d.range, abs=1e-9)
            assert wm.angle_diff(back.bearing, d.bearing) == pytest.approx(0, abs=1e-9)

    @settings(max_examples=200, deadline=None)
    @given(x=st.floats(-100, 100), y=st.floats(-100, 100),
           ox=st.floats(-10, 10), oy=st.floats(-10, 10),
           oth=st.floats(0, 6.28))
    def test_inverse_property(self, x, y, ox, oy, oth):
        o = wm.Pose(ox, oy, oth)
        d = wm.to_relative((x, y), o)
        p = wm.to_absolute(d, o)
        assert math.hypot(p[0] - x, p[1] - y) < 1e-7 * max(1.0, abs(x), abs(y))

    def test_many_matches_scalar(self):
        rng = np.random.default_rng(4)
        states = np.column_stack([rng.uniform(-3, 3, 20), rng.uniform(-3, 3, 20),
                                  rng.uniform(0, 7, 20)])
        d = wm.Detection(2.0, 0.4)
        batch = wm.to_absolute_many(d, states)
        for i in range(20):
            single = wm.to_absolute(d, wm.Pose(*states[i]))
            assert np.allclose(batch[i], single, atol=1e-12)


class TestAngles:
    def test_wrap_angle(self):
        assert wm.wrap_angle(-0.1) == pytest.approx(2 * math.pi - 0.1)
        assert wm.wrap_angle(2 * math.pi) == 0.0

    def test_wrap_bearing_half_open(self):
        assert wm.wrap_bearing(math.pi) == pytest.approx(math.pi)
        assert wm.wrap_bearing(-math.pi) == pytest.approx(math.pi)
        assert wm.wrap_bearing(3 * math.pi / 2) == pytest.approx(-math.pi / 2)
