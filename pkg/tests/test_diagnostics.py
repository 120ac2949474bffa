import csv

import numpy as np
import pytest

from spinorwave.constraints import InitialSurfaceData
from spinorwave.diagnostics import (REPORT_COLUMNS, fornberg_weights,
                                    gauss_codazzi_residuals, l2_norm,
                                    monitor_row, sup_norm, write_rows_csv)
from spinorwave.evolution import (EvolutionConfig, build_initial_state,
                                  evolve)

from conftest import build_scenario, scenario_state


def test_fornberg_weights_known_stencils():
    w = fornberg_weights(0.0, [-1.0, 0.0, 1.0], 1)
    assert np.allclose(w[0], [0.0, 1.0, 0.0])
    assert np.allclose(w[1], [-0.5, 0.0, 0.5])
    w5 = fornberg_weights(0.0, [-2.0, -1.0, 0.0, 1.0, 2.0], 1)
    assert np.allclose(w5[1], [1 / 12, -2 / 3, 0.0, 2 / 3, -1 / 12])
    w_onesided = fornberg_weights(0.0, [0.0, 1.0, 2.0], 1)
    assert np.allclose(w_onesided[1], [-1.5, 2.0, -0.5])


def test_norms():
    arr = np.array([[[3.0, -4.0]]])
    assert sup_norm(arr) == 4.0
    assert l2_norm(arr, 2) == pytest.approx(5.0)
    assert sup_norm(np.zeros(0)) == 0.0


def test_monitor_row_minkowski_all_zero():
    system, state, _ = scenario_state("minkowski", 8)
    row = monitor_row(system, state)
    assert np.isnan(row["ricci_residual"]) and np.isnan(row["ricci_plain"])
    assert row["u_phi_min"] == 1.0 and row["u_phi_max"] == 1.0
    for key, val in row.items():
        if key.startswith(("sup_", "l2_")) or key in ("dirac_residual",
                                                      "slot_consistency"):
            assert val == 0.0, key
    assert abs(row["f_transport"]) <= 1e-15


def test_ricci_residual_cancels_source():
    system, state, _ = scenario_state("pp_wave", 32)
    config = EvolutionConfig(t_end=6 * 0.012, dt=0.012, monitor_every=1,
                             history_len=6)
    result = evolve(system, state, config, monitor=monitor_row)
    last = result.rows[-1]
    assert result.halt == "completed"
    assert last["ricci_plain"] > 1e-3
    assert last["ricci_residual"] <= 1e-4
    assert last["ricci_plain"] / last["ricci_residual"] > 100


def test_ricci_needs_three_slices():
    system, state, _ = scenario_state("pp_wave", 16)
    config = EvolutionConfig(t_end=0.02, dt=0.01, monitor_every=1)
    result = evolve(system, state, config, monitor=monitor_row)
    assert np.isnan(result.rows[0]["ricci_residual"])
    assert np.isnan(result.rows[1]["ricci_residual"])
    assert np.isfinite(result.rows[2]["ricci_residual"])


@pytest.mark.parametrize("name", ("minkowski", "warped"))
def test_gauss_codazzi_exact_scenarios(name):
    system, state, _ = scenario_state(name, 16)
    res = gauss_codazzi_residuals(system, state)
    assert res["hamiltonian"] <= 1e-13
    assert res["momentum"] <= 1e-13


def test_gauss_codazzi_pp_wave_converges():
    vals = []
    for npts in (32, 64):
        system, state, _ = scenario_state("pp_wave", npts)
        res = gauss_codazzi_residuals(system, state)
        vals.append((res["hamiltonian"], res["momentum"]))
    assert vals[0][0] <= 2e-6 and vals[0][1] <= 5e-7
    assert vals[0][0] / vals[1][0] > 8
    assert vals[0][1] / vals[1][1] > 8


def test_gauss_codazzi_flat_twist_closed_form():
    # W = 0.3 Id on a flat 3-slice: Einstein(T,T) = (trW)^2 - tr(W^2) over 2
    system, data, _ = build_scenario("minkowski", 8, n=3)
    twisted = InitialSurfaceData(data.grid, data.g_sigma,
                                 0.3 * np.broadcast_to(np.eye(3),
                                                       data.w_mixed.shape),
                                 data.phi, data.lapse)
    state = build_initial_state(system, twisted, check="off")
    res = gauss_codazzi_residuals(system, state)
    assert res["hamiltonian"] <= 1e-10
    assert np.max(np.abs(res["g_tt"] - 0.27)) <= 1e-10


def test_gauss_codazzi_requires_shift_free_slice():
    system, state, _ = scenario_state("minkowski", 8)
    state.g[..., 0, 1] = 0.1
    state.g[..., 1, 0] = 0.1
    with pytest.raises(ValueError):
        gauss_codazzi_residuals(system, state)


def test_write_rows_csv_column_order(tmp_path):
    row = {c: float(i) for i, c in enumerate(REPORT_COLUMNS)}
    row["extra"] = 99.0
    path = tmp_path / "diag.csv"
    write_rows_csv([row, row], path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        body = list(reader)
    assert header == REPORT_COLUMNS + ["extra"]
    assert len(body) == 2
    assert float(body[0][header.index("ricci_plain")]) == float(
        REPORT_COLUMNS.index("ricci_plain"))
    with pytest.raises(ValueError):
        write_rows_csv([], tmp_path / "empty.csv")
