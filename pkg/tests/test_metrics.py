import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rgbd_augment.dataset import DatasetManifest, Record, write_depth_png, write_mask_png
from rgbd_augment.dataset.codec import save_bytes
from rgbd_augment.errors import EvaluationError, InputError
from rgbd_augment.metrics import EvalConfig, evaluate, evaluate_manifest, evaluate_pairs


def oracle(pred, gt, lo=1e-3, hi=80.0):
    """Direct summation over a flat pixel list."""
    pairs = []
    for p, g in zip(np.ravel(pred).tolist(), np.ravel(gt).tolist()):
        if not (math.isfinite(g) and g > 0 and lo <= g <= hi):
            continue
        pairs.append((g, min(max(p, lo), hi)))
    n = len(pairs)
    d = [0, 0, 0]
    rel = sq = rms = lg = 0.0
    for g, p in pairs:
        r = max(g / p, p / g)
        for j in range(3):
            if r < 1.25 ** (j + 1):
                d[j] += 1
        rel += abs(g - p) / g
        sq += (g - p) ** 2 / g
        rms += (g - p) ** 2
        lg += (math.log(g) - math.log(p)) ** 2
    return dict(delta1=d[0] / n, delta2=d[1] / n, delta3=d[2] / n, rel=rel / n, sq_rel=sq / n,
                rms=math.sqrt(rms / n), rms_log=math.sqrt(lg / n), n_pixels=n)


def random_pair(rng):
    h, w = rng.integers(1, 9, size=2)
    gt = rng.uniform(0.5, 90.0, size=(h, w))
    gt[rng.random((h, w)) < 0.3] = 0.0
    gt.flat[0] = rng.uniform(1, 50)  # at least one valid pixel
    pred = gt * rng.uniform(0.5, 1.6, size=(h, w))
    return pred, gt


class TestAgainstOracle:
    @settings(max_examples=200, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_random_pairs(self, seed):
        rng = np.random.default_rng(seed)
        pred, gt = random_pair(rng)
        got = evaluate(pred, gt).to_dict()
        want = oracle(pred, gt)
        assert got["n_pixels"] == want["n_pixels"]
        for k in want:
            assert abs(got[k] - want[k]) <= 1e-12
        assert got["delta1"] <= got["delta2"] <= got["delta3"]

    def test_boundary_is_strict(self):
        r = evaluate(np.array([[1.0]]), np.array([[1.25]]))
        assert r.delta1 == 0.0
        assert r.delta2 == 1.0 and r.delta3 == 1.0

    def test_perfect_prediction(self):
        gt = np.array([[1.0, 2.0], [3.0, 0.0]])
        r = evaluate(gt.copy(), gt)
        assert r.rel == r.sq_rel == r.rms == r.rms_log == 0.0
        assert r.delta1 == 1.0 and r.n_pixels == 3

    def test_sq_rel_divides_by_ground_truth(self):
        r = evaluate(np.array([[4.0]]), np.array([[2.0]]))
        assert r.sq_rel == pytest.approx(2.0)


class TestValidity:
    def test_range_and_clamp(self):
        gt = np.array([[0.0, 100.0, 10.0, np.nan]])
        pred = np.array([[5.0, 5.0, 1000.0, 5.0]])
        r = evaluate(pred, gt)
        assert r.n_pixels == 1
        assert r.rms == pytest.approx(70.0)  # prediction clamped to 80

    def test_crop(self):
        gt = np.ones((4, 4))
        r = evaluate(np.ones((4, 4)), gt, EvalConfig(crop=(1, 3, 0, 2)))
        assert r.n_pixels == 4

    def test_nan_prediction_is_clamped(self):
        r = evaluate(np.array([[np.nan]]), np.array([[1.0]]))
        assert math.isfinite(r.rel)

    def test_errors(self):
        with pytest.raises(EvaluationError):
            evaluate(np.ones((2, 2)), np.zeros((2, 2)))
        with pytest.raises(InputError):
            evaluate(np.ones((2, 2)), np.ones((2, 3)))
        with pytest.raises(InputError):
            EvalConfig(min_depth=5, max_depth=1)


class TestAggregation:
    def test_pixel_pooled(self, rng):
        a = random_pair(rng)
        b = random_pair(rng)
        res = evaluate_pairs([("a", *a), ("b", *b)])
        pooled = oracle(np.concatenate([a[0].ravel(), b[0].ravel()]), np.concatenate([a[1].ravel(), b[1].ravel()]))
        assert res.aggregate.rel == pytest.approx(pooled["rel"], abs=1e-12)
        assert set(res.per_frame) == {"a", "b"}
        assert res.table_csv().splitlines()[-1].startswith("__pooled__")

    def test_skipped_frames(self):
        res = evaluate_pairs([("ok", np.ones((2, 2)), np.ones((2, 2))), ("empty", np.ones((2, 2)), np.zeros((2, 2)))])
        assert res.skipped == {"empty": "no valid ground-truth pixels"}

    def _manifest(self, tmp_path, name, ids, depth, mask=None):
        recs = []
        for fid in ids:
            p = tmp_path / name / f"{fid}.png"
            save_bytes(p, write_depth_png(depth))
            m = None
            if mask is not None:
                m = tmp_path / name / f"{fid}_mask.png"
                save_bytes(m, write_mask_png(mask))
            recs.append(Record(fid, str(p), str(p), tuple(range(12)), "c", mask=None if m is None else str(m)))
        return DatasetManifest(recs, {"c": [1, 1, 0, 0, 2, 2]})

    def test_manifest_pairing(self, tmp_path):
        gt = self._manifest(tmp_path, "gt", ["x", "y"], np.full((2, 2), 4.0))
        pred = self._manifest(tmp_path, "pred", ["x", "z"], np.full((2, 2), 5.0))
        res = evaluate_manifest(pred, gt)
        assert list(res.per_frame) == ["x"]
        assert res.skipped == {"z": "no ground truth", "y": "no prediction"}
        with pytest.raises(EvaluationError, match="prediction-only"):
            evaluate_manifest(self._manifest(tmp_path, "p2", ["q"], np.ones((2, 2))), gt)

    def test_prediction_masks(self, tmp_path):
        mask = np.array([[True, False], [False, False]])
        gt = self._manifest(tmp_path, "gt", ["x"], np.full((2, 2), 4.0))
        pred = self._manifest(tmp_path, "pred", ["x"], np.where(mask, 4.0, 0.0), mask)
        assert evaluate_manifest(pred, gt, use_pred_masks=True).aggregate.n_pixels == 1
        assert evaluate_manifest(pred, gt).aggregate.n_pixels == 4
