"""Grid value type, text round-trips, patches, and change application."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from leveltrace import errors, tilegrid
from leveltrace.tilegrid import Change, TileGrid

from conftest import grids


def make_grid(rows):
    return tilegrid.parse_text_level("\n".join(rows) + "\n")


class TestTileTable:
    def test_34_dense_ids(self):
        assert [t.tile_id for t in tilegrid.TILES] == list(range(34))

    def test_glyphs_unique(self):
        glyphs = [t.glyph for t in tilegrid.TILES]
        assert len(set(glyphs)) == 34

    def test_action_tiles_exclude_markers(self):
        assert tilegrid.is_action_tile(tilegrid.EMPTY)
        assert tilegrid.is_action_tile(31)
        assert not tilegrid.is_action_tile(tilegrid.PLAYER)
        assert not tilegrid.is_action_tile(tilegrid.FLAG)


class TestTileGrid:
    def test_rejects_small_grids(self):
        with pytest.raises(errors.GridTooSmall):
            TileGrid(np.zeros((2, 5), dtype=np.int16))
        with pytest.raises(errors.GridTooSmall):
            TileGrid(np.zeros((5, 2), dtype=np.int16))

    def test_rejects_out_of_range_ids(self):
        cells = np.zeros((4, 4), dtype=np.int16)
        cells[1, 2] = 34
        with pytest.raises(errors.OutOfRange):
            TileGrid(cells)

    def test_cells_are_read_only(self):
        g = tilegrid.empty_grid(4, 4)
        with pytest.raises(ValueError):
            g.cells[0, 0] = 1

    def test_cell_accessor_is_x_y(self):
        g = make_grid(["----", "X---", "----"])
        assert g.cell(0, 1) == 1  # x=0, y=1
        assert g.cell(1, 0) == 0

    def test_equality(self):
        a = make_grid(["---", "X--", "---"])
        b = make_grid(["---", "X--", "---"])
        c = make_grid(["---", "-X-", "---"])
        assert a == b
        assert a != c


class TestTextFormat:
    def test_round_trip(self):
        text = "----\nX-E-\nXXXX\n"
        g = tilegrid.parse_text_level(text)
        assert tilegrid.render_text_level(g) == text

    @given(grids())
    @settings(max_examples=60)
    def test_round_trip_any_grid(self, g):
        assert tilegrid.parse_text_level(tilegrid.render_text_level(g)) == g

    def test_unknown_glyph_reports_position(self):
        with pytest.raises(errors.UnknownGlyph) as exc:
            tilegrid.parse_text_level("---\n-@-\n---\n")
        assert exc.value.line == 2
        assert exc.value.col == 2

    def test_ragged_lines_rejected(self):
        with pytest.raises(errors.RaggedLines) as exc:
            tilegrid.parse_text_level("----\n---\n----\n")
        assert exc.value.line == 2

    def test_legend_round_trip(self):
        text = tilegrid.legend_to_text(tilegrid.DEFAULT_LEGEND)
        assert tilegrid.legend_from_text(text) == tilegrid.DEFAULT_LEGEND

    def test_parse_with_custom_legend(self):
        legend = dict(tilegrid.DEFAULT_LEGEND)
        legend["."] = legend.pop("-")
        g = tilegrid.parse_text_level("...\n.X.\n...\n", legend=legend)
        assert g.cell(1, 1) == 1


class TestStateTensor:
    def test_one_hot_shape_and_orientation(self):
        g = make_grid(["---", "E--", "---"])
        t = tilegrid.to_state_tensor(g)
        assert t.shape == (3, 3, 34)
        assert t.dtype == np.float64
        assert t[0, 1, 6] == 1.0  # (x=0, y=1) holds tile 6
        assert t.sum() == 9  # exactly one channel per cell

    @given(grids())
    @settings(max_examples=40)
    def test_tensor_round_trip(self, g):
        assert tilegrid.grid_from_state_tensor(tilegrid.to_state_tensor(g)) == g


class TestPatches:
    def test_all_empty_grid_has_no_patches(self):
        assert tilegrid.extract_patches(tilegrid.empty_grid(5, 5)) == []

    def test_single_tile_patch_count(self):
        # one tile in the middle of 5x5 appears in all nine 3x3 windows
        cells = np.zeros((5, 5), dtype=np.int16)
        cells[2, 2] = 4
        assert len(tilegrid.extract_patches(TileGrid(cells))) == 9

    def test_patch_values_row_major(self):
        g = make_grid(["X--", "-E-", "--o"])
        (patch,) = tilegrid.extract_patches(g)
        assert patch == (1, 0, 0, 0, 6, 0, 0, 0, 5)

    @given(grids(min_side=3, max_side=6))
    @settings(max_examples=40)
    def test_patch_count_bound(self, g):
        n = len(tilegrid.extract_patches(g))
        assert 0 <= n <= (g.width - 2) * (g.height - 2)


class TestChanges:
    def test_diff_then_apply_round_trips(self):
        a = make_grid(["----", "X---", "----"])
        b = make_grid(["--E-", "X--o", "----"])
        changes = tilegrid.diff(a, b)
        assert tilegrid.apply(a, changes) == b

    @given(grids(min_side=3, max_side=5), grids(min_side=3, max_side=5))
    @settings(max_examples=60)
    def test_diff_apply_property(self, a, b):
        if (a.width, a.height) != (b.width, b.height):
            with pytest.raises(errors.DimensionMismatch):
                tilegrid.diff(a, b)
            return
        assert tilegrid.apply(a, tilegrid.diff(a, b)) == b

    def test_diff_of_identical_grids_is_empty(self):
        g = make_grid(["---", "X--", "---"])
        assert tilegrid.diff(g, g) == []

    def test_apply_rejects_stale_before(self):
        g = make_grid(["---", "X--", "---"])
        with pytest.raises(errors.StaleChange):
            tilegrid.apply(g, [Change(0, 0, 5, 6)])  # cell really holds EMPTY

    def test_apply_rejects_duplicate_cell(self):
        g = make_grid(["---", "---", "---"])
        with pytest.raises(errors.StaleChange):
            tilegrid.apply(g, [Change(0, 0, 0, 5), Change(0, 0, 0, 6)])

    def test_apply_rejects_out_of_bounds(self):
        g = make_grid(["---", "---", "---"])
        with pytest.raises(errors.OutOfRange):
            tilegrid.apply(g, [Change(3, 0, 0, 5)])

    def test_changeset_to_grid_renders_after_values(self):
        changes = [Change(0, 0, 0, 5), Change(2, 1, 1, 6)]
        g = tilegrid.changeset_to_grid(changes, 4, 3)
        assert g.cell(0, 0) == 5
        assert g.cell(2, 1) == 6
        assert g.cell(1, 1) == 0

    def test_added_entries_filters_on_empty_before(self):
        changes = [
            Change(0, 0, 0, 5),   # addition
            Change(1, 0, 2, 6),   # replacement
            Change(2, 0, 3, 0),   # deletion
        ]
        assert tilegrid.added_entries(changes) == [Change(0, 0, 0, 5)]
