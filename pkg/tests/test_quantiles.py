import numpy as np
import pytest

from lrorder.errors import QuantileTableError
from lrorder.quantiles import (
    CHERNOFF_LEVELS,
    LRT_LEVELS,
    QuantileTable,
    build_quantile_table,
    chernoff_quantiles,
    chernoff_sd,
    load_table,
    lrt_quantiles,
    simulate_chernoff,
    simulate_lrt_limit,
    write_table,
)


def test_embedded_chernoff_quantiles():
    q = chernoff_quantiles([0.5, 0.9, 0.975])
    assert q[0.975] == pytest.approx(0.9982, abs=0.01)
    assert q[0.5] == pytest.approx(0.0, abs=0.01)
    assert q[0.9] < q[0.975]
    vals = [load_table().chernoff(lv) for lv in CHERNOFF_LEVELS]
    assert np.all(np.diff(vals) > 0)


def test_embedded_lrt_quantiles():
    d = lrt_quantiles(LRT_LEVELS)
    vals = [d[lv] for lv in LRT_LEVELS]
    assert np.all(np.diff(vals) > 0)
    assert d[0.95] > d[0.5] > 0


def test_chernoff_sd_positive():
    # W is known to have standard deviation close to 0.52
    assert chernoff_sd() == pytest.approx(0.52, abs=0.02)


def test_table_records_oracle_parameters():
    meta = load_table().meta
    for prefix in ("chernoff", "lrt"):
        for key in ("replications", "grid_step", "truncation", "seed", "reduced"):
            assert f"{prefix}.{key}" in meta


def test_missing_level():
    with pytest.raises(QuantileTableError):
        load_table().chernoff(0.123)
    with pytest.raises(KeyError):
        lrt_quantiles([0.333])


def test_round_trip(tmp_path):
    table = load_table()
    path = tmp_path / "q.txt"
    write_table(table, path)
    again = load_table(path)
    assert again.chernoff_q == table.chernoff_q
    assert again.lrt_d == table.lrt_d
    assert again.dumps() == table.dumps()


def test_bad_version():
    with pytest.raises(QuantileTableError):
        QuantileTable.loads("version = 99\n")


def test_simulators_are_seeded():
    a = simulate_chernoff(200, grid_step=0.01, seed=4, chunk=64)
    b = simulate_chernoff(200, grid_step=0.01, seed=4, chunk=64)
    np.testing.assert_array_equal(a, b)
    c = simulate_lrt_limit(20, grid_step=0.01, seed=4)
    np.testing.assert_array_equal(c, simulate_lrt_limit(20, grid_step=0.01, seed=4))
    assert np.all(c >= -1e-12)


def test_reduced_build_flags_tolerance():
    small = dict(replications=2000, grid_step=0.01)
    t1 = build_quantile_table(small, dict(replications=100, grid_step=0.01))
    t2 = build_quantile_table(small, dict(replications=100, grid_step=0.01))
    assert t1.dumps() == t2.dumps()
    assert t1.meta["chernoff.reduced"] == "true" and t1.meta["lrt.reduced"] == "true"
    assert float(t1.meta["chernoff.tolerance.0.975"]) > float(
        load_table().meta["chernoff.tolerance.0.975"])
