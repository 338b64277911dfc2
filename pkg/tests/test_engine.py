import numpy as np
import pytest

from loceval import (
    Box,
    EvalConfig,
    ScoreMap,
    TernaryMask,
    center_baseline_maps,
    evaluate_boxes,
    evaluate_masks,
    pack_stream_factory,
    write_scorepack,
)
from loceval.dataset_io import ManifestEntry, SplitManifest
from loceval.engine import prepare_map
from loceval.errors import AnnotationError, ScoreMapError, UnknownImage


def _manifest(rows):
    return SplitManifest([ManifestEntry(i, c, w, h) for i, c, w, h in rows])


def _stream(maps):
    return lambda: iter(maps)


def test_config_validation():
    with pytest.raises(ValueError):
        EvalConfig(task="segmentation")
    with pytest.raises(ValueError):
        EvalConfig(normalization="softmax")
    with pytest.raises(ValueError):
        EvalConfig(tau_mode="dense")
    with pytest.raises(ValueError):
        EvalConfig(n_taus=0)
    with pytest.raises(ValueError):
        EvalConfig(deltas=())
    with pytest.raises(ValueError):
        EvalConfig(deltas=(0.5, 1.2))
    with pytest.raises(ValueError):
        EvalConfig(order="resize-first")
    with pytest.raises(ValueError):
        EvalConfig(pxacc_tau=1.5)


def test_config_grid_covers_unit_interval_half_open():
    g = EvalConfig(n_taus=4).grid()
    np.testing.assert_allclose(g, [0.0, 0.25, 0.5, 0.75])
    g1000 = EvalConfig().grid()
    assert len(g1000) == 1000 and g1000[0] == 0.0 and g1000[-1] == 0.999


def test_config_echo_is_task_dependent():
    be = EvalConfig(task="boxes").config_echo()
    assert be["deltas"] == [0.3, 0.5, 0.7]
    assert "pxacc_tau" not in be
    me = EvalConfig(task="masks", tau_mode="exact").config_echo()
    assert me["taus"] == {"mode": "exact"}
    assert me["pxacc_tau"] == 0.5 and me["per_image_ap"] is False


def test_prepare_map_resize_then_normalize_order_matters():
    # a map whose max lives in a region that shrinks on resize: the two
    # orders give different pixel values
    v = np.zeros((4, 4))
    v[0, 0] = 4.0
    v[2:, 2:] = 2.0
    m = ScoreMap("a", v)
    a = prepare_map(m, (2, 2), EvalConfig(order="normalize-resize"))
    b = prepare_map(m, (2, 2), EvalConfig(order="resize-normalize"))
    assert a.normalized and b.normalized
    assert a.values.shape == b.values.shape == (2, 2)
    assert not np.allclose(a.values, b.values)


def test_prepare_map_norm_none_validates_range():
    cfg = EvalConfig(normalization="none")
    ok = prepare_map(ScoreMap("a", np.array([[0.0, 1.0]])), (1, 2), cfg)
    assert ok.normalized
    np.testing.assert_array_equal(ok.values, [[0.0, 1.0]])
    with pytest.raises(ScoreMapError):
        prepare_map(ScoreMap("a", np.array([[-0.1, 0.5]])), (1, 2), cfg)
    with pytest.raises(ScoreMapError):
        prepare_map(ScoreMap("a", np.array([[0.1, 1.5]])), (1, 2), cfg)


def _indicator_pack(boxes_by_id, sizes):
    maps = []
    for image_id, (h, w) in sizes.items():
        v = np.zeros((h, w))
        for b in boxes_by_id[image_id]:
            v[b.y0:b.y1, b.x0:b.x1] = 1.0
        maps.append(ScoreMap(image_id, v))
    return maps


def test_evaluate_boxes_perfect_indicators():
    boxes = {"a": [Box(2, 2, 8, 8)], "b": [Box(1, 3, 5, 9)]}
    sizes = {"a": (12, 12), "b": (10, 10)}
    manifest = _manifest([("a", "cat", 12, 12), ("b", "cat", 10, 10)])
    maps = _indicator_pack(boxes, sizes)
    res = evaluate_boxes(_stream(maps), boxes, manifest, EvalConfig(n_taus=100))
    assert res.score == 1.0
    assert res.v1_score == 1.0
    assert res.n_images == 2 and res.n_degenerate == 0
    rd = res.results_dict()
    assert rd["primary"] == 1.0
    assert set(rd["per_delta"]) == {"0.3", "0.5", "0.7"}
    assert rd["per_delta"]["0.7"]["best_acc"] == 1.0


def test_evaluate_boxes_resizes_maps_to_annotation_frame():
    # 6x6 map against a 12x12 image: the engine upsamples before sweeping
    boxes = {"a": [Box(2, 2, 10, 10)]}
    manifest = _manifest([("a", "cat", 12, 12)])
    v = np.zeros((6, 6))
    v[1:5, 1:5] = 1.0
    res = evaluate_boxes(
        _stream([ScoreMap("a", v)]), boxes, manifest, EvalConfig(n_taus=200)
    )
    assert res.score > 0.9  # interpolation blurs the border slightly


def test_evaluate_boxes_degenerate_map_counted_and_missed():
    boxes = {"a": [Box(0, 0, 4, 4)], "b": [Box(1, 1, 3, 3)]}
    manifest = _manifest([("a", "cat", 4, 4), ("b", "cat", 4, 4)])
    flat = np.full((4, 4), 0.7)  # constant: min-max normalization degenerates
    good = np.zeros((4, 4))
    good[1:3, 1:3] = 1.0
    maps = [ScoreMap("a", flat), ScoreMap("b", good)]
    res = evaluate_boxes(_stream(maps), boxes, manifest, EvalConfig(n_taus=10))
    assert res.n_degenerate == 1
    # image a misses at every tau; image b recovers its box at tau >= 0.1
    assert res.score == pytest.approx(0.5)


def test_evaluate_boxes_coverage_errors():
    boxes = {"a": [Box(0, 0, 2, 2)]}
    manifest = _manifest([("a", "cat", 4, 4), ("b", "cat", 4, 4)])
    only_a = [ScoreMap("a", np.eye(4))]
    with pytest.raises(AnnotationError) as ei:
        evaluate_boxes(_stream(only_a), boxes, manifest, EvalConfig(n_taus=10))
    assert "b" in str(ei.value)

    stranger = [ScoreMap("zz", np.eye(4))]
    with pytest.raises(UnknownImage):
        evaluate_boxes(_stream(stranger), boxes, manifest, EvalConfig(n_taus=10))


def test_evaluate_boxes_exact_mode_uses_value_grid():
    boxes = {"a": [Box(1, 1, 3, 3)]}
    manifest = _manifest([("a", "cat", 4, 4)])
    v = np.zeros((4, 4))
    v[1:3, 1:3] = 1.0
    cfg = EvalConfig(tau_mode="exact")
    res = evaluate_boxes(_stream([ScoreMap("a", v)]), boxes, manifest, cfg)
    # distinct normalized values are {0, 1}: two thresholds only
    np.testing.assert_array_equal(res.curve.taus, [0.0, 1.0])
    assert res.score == 1.0


def test_evaluate_boxes_exact_mode_all_degenerate_falls_back():
    boxes = {"a": [Box(0, 0, 2, 2)]}
    manifest = _manifest([("a", "cat", 2, 2)])
    flat = [ScoreMap("a", np.full((2, 2), 0.3))]
    res = evaluate_boxes(_stream(flat), boxes, manifest, EvalConfig(tau_mode="exact"))
    np.testing.assert_array_equal(res.curve.taus, [0.0])
    assert res.score == 0.0 and res.n_degenerate == 1


def _mask_setup():
    manifest = _manifest([("a", "cat", 4, 4), ("b", "dog", 4, 4)])
    masks = {}
    maps = []
    for image_id in ("a", "b"):
        lab = np.zeros((4, 4), dtype=int)
        lab[1:3, 1:3] = 1
        masks[image_id] = TernaryMask(lab)
        v = np.zeros((4, 4))
        v[1:3, 1:3] = 1.0
        maps.append(ScoreMap(image_id, v))
    return manifest, masks, maps


def test_evaluate_masks_perfect_maps():
    manifest, masks, maps = _mask_setup()
    cfg = EvalConfig(task="masks", tau_mode="exact")
    res = evaluate_masks(_stream(maps), masks, manifest, cfg)
    assert res.mean_ap == 1.0
    assert res.per_category_ap == {"cat": 1.0, "dog": 1.0}
    assert res.px_acc == 1.0
    counts = res.counts_dict()
    assert counts["n_images"] == 2
    assert counts["n_foreground_pixels"] == 8
    assert counts["n_background_pixels"] == 24
    assert counts["n_ignore_pixels"] == 0


def test_evaluate_masks_grid_close_to_exact():
    rng = np.random.default_rng(5)
    manifest = _manifest([("a", "cat", 8, 8)])
    lab = (rng.random((8, 8)) < 0.4).astype(int)
    lab[0, 0] = 1
    masks = {"a": TernaryMask(lab)}
    v = rng.random((8, 8))
    maps = [ScoreMap("a", v)]
    exact = evaluate_masks(
        _stream(maps), masks, manifest, EvalConfig(task="masks", tau_mode="exact")
    )
    grid = evaluate_masks(
        _stream(maps), masks, manifest, EvalConfig(task="masks", n_taus=100000)
    )
    assert grid.mean_ap == pytest.approx(exact.mean_ap, abs=1e-3)


def test_evaluate_masks_per_image_ap_flag():
    manifest, masks, maps = _mask_setup()
    cfg = EvalConfig(task="masks", tau_mode="exact", per_image_ap=True)
    res = evaluate_masks(_stream(maps), masks, manifest, cfg)
    assert res.per_category_image_ap == {"cat": 1.0, "dog": 1.0}
    assert "per_image_ap" in res.results_dict()

    off = evaluate_masks(
        _stream(maps), masks, manifest, EvalConfig(task="masks", tau_mode="exact")
    )
    assert off.per_category_image_ap is None
    assert "per_image_ap" not in off.results_dict()


def test_evaluate_masks_missing_mask_is_annotation_error():
    manifest, masks, maps = _mask_setup()
    del masks["b"]
    with pytest.raises(AnnotationError):
        evaluate_masks(
            _stream(maps), masks, manifest, EvalConfig(task="masks", tau_mode="exact")
        )


def test_center_baseline_maps_match_manifest_geometry():
    manifest = _manifest([("a", "cat", 6, 4), ("b", "dog", 3, 5)])
    maps = list(center_baseline_maps(manifest))
    assert [m.image_id for m in maps] == ["a", "b"]
    assert maps[0].values.shape == (4, 6)  # (height, width)
    assert maps[1].values.shape == (5, 3)
    for m in maps:
        assert m.normalized
        assert 0.0 < m.values.max() <= 1.0
    # odd dimensions put a pixel exactly at the centre, where the peak is 1
    odd = list(center_baseline_maps(_manifest([("c", "cat", 5, 7)])))[0]
    assert odd.values[3, 2] == pytest.approx(1.0)


def test_pack_stream_factory_reopens(tmp_path):
    path = tmp_path / "p.wsep"
    write_scorepack([ScoreMap("a", np.ones((2, 2)) * 0.5)], path)
    factory = pack_stream_factory(path)
    first = [m.image_id for m in factory()]
    second = [m.image_id for m in factory()]  # a fresh stream each call
    assert first == second == ["a"]
