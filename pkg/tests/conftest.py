import numpy as np
import pytest
from hypothesis import strategies as st

import leveltrace as lt
from leveltrace import tilegrid
from leveltrace.training import TrainConfig, train_model


def grids(min_side=3, max_side=7, tile_pool=None):
    """Strategy for small TileGrids, mostly empty with a few real tiles."""
    pool = list(tile_pool) if tile_pool is not None else list(range(34))
    weighted = [0] * (2 * len(pool)) + pool  # empty cells dominate

    @st.composite
    def build(draw):
        w = draw(st.integers(min_side, max_side))
        h = draw(st.integers(min_side, max_side))
        flat = draw(
            st.lists(st.sampled_from(weighted), min_size=w * h, max_size=w * h)
        )
        return tilegrid.TileGrid(np.array(flat, dtype=np.int16).reshape(h, w))

    return build()


@pytest.fixture(scope="session")
def tiny_corpus():
    params = lt.SyntheticParams(
        n_sessions=6, width=8, height=7, rounds=4,
        min_tiles_per_turn=6, fp_rate=0.15, fn_rate=0.1,
    )
    return lt.gen_synthetic(7, params)


@pytest.fixture(scope="session")
def tiny_run(tiny_corpus):
    """A small trained model shared by attribution/eval/service tests."""
    cfg = TrainConfig(width=8, height=7, epochs=3, lr=2e-3, seed=2)
    return train_model(tiny_corpus.sessions, cfg)
