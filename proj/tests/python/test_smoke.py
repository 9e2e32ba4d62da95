import math

import pytest

import wxkrig


def test_distance_one_degree_latitude():
    assert wxkrig.distance(0.0, 0.0, 1.0, 0.0) == pytest.approx(111.195, abs=1e-3)


def test_distance_euclidean_triangle():
    assert wxkrig.distance(0.0, 0.0, 3.0, 4.0, metric="euclidean-degrees") == pytest.approx(5.0)


def test_distance_rejects_bad_latitude():
    with pytest.raises(wxkrig.ToolkitError):
        wxkrig.distance(91.0, 0.0, 0.0, 0.0)


def test_covariance_shape():
    assert wxkrig.covariance(0.0, sigma2=2.0, range_km=100.0) == pytest.approx(2.0)
    assert wxkrig.covariance(100.0, sigma2=2.0, range_km=100.0) == pytest.approx(0.0)
    assert wxkrig.covariance(50.0, sigma2=2.0, range_km=100.0) == pytest.approx(0.625)


def test_boxcox_cube_root_scaling():
    assert wxkrig.boxcox(8.0) == pytest.approx(3.0)
    assert wxkrig.boxcox(1.0) == pytest.approx(0.0)
    assert wxkrig.boxcox_inverse(wxkrig.boxcox(12.34)) == pytest.approx(12.34)
    with pytest.raises(wxkrig.ToolkitError):
        wxkrig.boxcox(-1.0)


def test_tgk_back_transform_reference_point():
    assert wxkrig.tgk_back_transform(3.0, 0.0, 0.9, 0.0) == pytest.approx(8.3, abs=1e-9)


def test_interpolate_point_idw_average():
    stations = [
        wxkrig.Station("A", 37.0, 10.0),
        wxkrig.Station("B", 37.0, 20.0),
    ]
    out = wxkrig.interpolate_point(
        "idw", stations, [10.0, 14.0], 37.0, 15.0, metric="euclidean-degrees"
    )
    assert out["value"] == pytest.approx(12.0)
    assert out["method_used"] == "idw"
    assert out["fallback"] is False


def test_interpolate_point_nn_tie_breaks_by_id():
    stations = [
        wxkrig.Station("B", 37.0, 20.0),
        wxkrig.Station("A", 37.0, 10.0),
    ]
    out = wxkrig.interpolate_point("nn", stations, [4.0, 1.0], 37.0, 15.0)
    assert out["value"] == 1.0


def test_cdd_toy_series():
    dates = [f"1990-01-{d:02d}" for d in range(1, 8)]
    precip = [5.0, 0.0, 0.5, 0.9, 2.0, 0.0, 3.0]
    out = wxkrig.cdd(dates, precip)
    assert out["period"] == "1990"
    assert out["value"] == 3.0
    assert out["completeness"] == 1.0


def test_mfp_window_sum():
    dates = [f"1990-06-{d:02d}" for d in range(1, 7)]
    out = wxkrig.mfp(dates, [1.0, 2.0, 3.0, 4.0, 5.0, 6.0])
    assert out["period"] == "1990-06"
    assert out["value"] == 20.0


def test_kfold_is_balanced_and_deterministic():
    ids = [f"S{i:03d}" for i in range(138)]
    folds = wxkrig.kfold(ids, k=10, seed=42)
    assert sorted(folds) == sorted(ids)
    assignments = list(folds.values())
    sizes = [assignments.count(f) for f in range(10)]
    assert sorted(sizes) == [13, 13] + [14] * 8
    assert folds == wxkrig.kfold(ids, k=10, seed=42)
    assert folds != wxkrig.kfold(ids, k=10, seed=43)


def test_error_metrics():
    assert wxkrig.rmse([1.0, 2.0], [2.0, 4.0]) == pytest.approx(math.sqrt(2.5))
    assert wxkrig.mae([1.0, 2.0], [2.0, 4.0]) == pytest.approx(1.5)


def test_moment_statistics():
    assert wxkrig.skewness([-1.0, 0.0, 1.0]) == pytest.approx(0.0)
    assert wxkrig.kurtosis([-1.0, 1.0, -1.0, 1.0]) == pytest.approx(1.0)
    with pytest.raises(wxkrig.ToolkitError):
        wxkrig.skewness([2.0, 2.0, 2.0])


@pytest.fixture
def dataset(tmp_path):
    stations = tmp_path / "stations.csv"
    stations.write_text(
        "station_id,lat,lon,elev_m\n"
        "S1,37,10,100\n"
        "S2,37,20,200\n"
        "S3,37,30,300\n"
    )
    lines = ["station_id,date,precip_mm,tmax_f"]
    for s, sid in enumerate(["S1", "S2", "S3"]):
        for day in range(1, 29):
            wet = (day + s) % 3 == 0
            precip = 4.0 + s + 0.25 * day if wet else 0.0
            lines.append(f"{sid},1990-01-{day:02d},{precip},60")
    obs = tmp_path / "obs.csv"
    obs.write_text("\n".join(lines) + "\n")
    return stations, obs


def test_load_validate_and_cross_validate(dataset):
    stations, obs = dataset
    panel = wxkrig.load_dataset(str(stations), str(obs))
    assert panel.n_stations == 3
    assert panel.n_dates == 28
    assert panel.station_ids == ["S1", "S2", "S3"]
    assert panel.dates[0] == "1990-01-01"
    assert panel.precip(0, 0) is None or isinstance(panel.precip(0, 0), float)

    report = wxkrig.validate(panel)
    assert report["ok"] is True
    assert report["missing_cells"] == 0

    rows = wxkrig.cv_daily(panel, "idw", k=3, seed=1)
    assert rows
    years = {r["year"] for r in rows}
    assert "all" in years
    for r in rows:
        assert r["approach"] == "daily"
        assert r["method"] == "idw"
        assert r["variable"] == "P"
        assert r["metric"] in ("RMSE", "MAE")
        assert r["value"] >= 0.0
        assert r["seed"] == 1


def test_cv_index_direct_matches_two_stage_for_nn(dataset):
    stations, obs = dataset
    panel = wxkrig.load_dataset(str(stations), str(obs))
    direct = wxkrig.cv_index(panel, "cdd", "direct", "nn", k=3, policy="break-run")
    two_stage = wxkrig.cv_index(panel, "cdd", "two-stage", "nn", k=3, policy="break-run")
    assert len(direct) == len(two_stage) > 0
    for a, b in zip(direct, two_stage):
        assert a["approach"] == "direct"
        assert b["approach"] == "two-stage"
        assert a["value"] == b["value"]
        assert a["year"] == b["year"]
        assert a["metric"] == b["metric"]


def test_moments_on_panel(dataset):
    stations, obs = dataset
    panel = wxkrig.load_dataset(str(stations), str(obs))
    rows = wxkrig.moments(panel)
    assert rows
    for r in rows:
        assert r["metric"] in ("skewness", "kurtosis")


def test_load_errors_surface_as_toolkit_errors(tmp_path):
    with pytest.raises(wxkrig.ToolkitError):
        wxkrig.load_dataset(str(tmp_path / "nope.csv"), str(tmp_path / "nope2.csv"))
