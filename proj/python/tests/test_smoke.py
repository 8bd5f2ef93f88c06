import json
import math
from pathlib import Path

import pytest

import semlink

DATA = Path(__file__).resolve().parents[2] / "tests" / "data"


def toy_vectors(kb):
    table = semlink.WordVectorTable.load(DATA / "toy_glove.txt")
    return {e: semlink.embed_entity(table, e) for e in kb.entities}


def test_kb_and_split():
    kb = semlink.KnowledgeBase.load(DATA / "toy_kb.tsv")
    assert len(kb) == 8
    assert len(kb.entities) == 6
    assert kb.contains(semlink.Triple("person", "uses", "tennis racket"))
    kept, held = semlink.split_kb(kb, 0.75, seed=3)
    assert len(kept) == 6 and len(held) == 2


def test_embedding_errors_carry_code():
    table = semlink.WordVectorTable.load(DATA / "toy_glove.txt")
    assert len(semlink.embed_entity(table, "tennis racket")) == 100
    with pytest.raises(semlink.SemlinkError) as info:
        semlink.embed_entity(table, "zzqx")
    assert info.value.code == "out-of-vocabulary"


def test_ntl_scalar_case():
    p = semlink.NtlRelationParams(1, 1)
    p.weights = [1.0]
    assert semlink.ntl_score(p, [0.5], [0.5]) == pytest.approx(math.tanh(0.25), abs=1e-15)
    g = semlink.ntl_gradients(p, [0.5], [0.5])
    assert g["weights"][0] == pytest.approx((1 - math.tanh(0.25) ** 2) * 0.25, abs=1e-15)


def test_train_ntl_and_rank(tmp_path):
    kb = semlink.KnowledgeBase.load(DATA / "toy_kb.tsv")
    model, losses = semlink.train_ntl(kb, toy_vectors(kb), seed=1)
    assert len(losses) == 200
    assert losses[-1] <= losses[0]
    assert semlink.hits_at_n(model, kb.triples, 1) >= 0.8
    ranked = model.rank_tails("person", "uses")
    assert ranked[0][0] == "tennis racket"
    model.save(tmp_path / "ntl.json")
    again = semlink.NtlModel.load(tmp_path / "ntl.json")
    assert again.raw_score("dog", "with", "person") == model.raw_score("dog", "with", "person")


def test_model_shapes_and_predict():
    baseline = semlink.build_baseline(1)
    assert baseline.parameter_count() == 26124
    fusion = semlink.build_fusion(1)
    assert (fusion.image_branch_length, fusion.concat_width, fusion.output_width) == (128, 1124, 12)
    label, probs = fusion.predict([0.0] * 100, [0.0] * 4096)
    assert 0 <= label < 12
    assert sum(probs) == pytest.approx(1.0, abs=1e-9)
    with pytest.raises(semlink.SemlinkError):
        baseline.predict([0.0] * 99)


def test_fit_small_clusters():
    import random

    rng = random.Random(4)
    centers = [[rng.gauss(0, 1) for _ in range(100)] for _ in range(12)]
    xs, ys = [], []
    for i in range(240):
        c = i % 12
        xs.append([v + 0.3 * rng.gauss(0, 1) for v in centers[c]])
        ys.append(c)
    model = semlink.build_baseline(4)
    report = json.loads(model.fit(xs, ys, epochs=30, seed=4))
    assert report["final_val_accuracy"] >= 0.9
    assert model.accuracy(xs, ys) >= 0.9


def test_nms_and_iou():
    a = semlink.DetBox(0, 0, 2, 2, 0.9, "person")
    b = semlink.DetBox(1, 1, 3, 3, 0.8, "person")
    assert semlink.iou(a, b) == pytest.approx(1 / 7, abs=1e-12)
    dup = semlink.DetBox(0, 0, 2, 2, 0.7, "person")
    kept = semlink.nms([a, dup, b])
    assert [k.score for k in kept] == [0.9, 0.8]
    images = dict(semlink.read_detections(DATA / "detections.jsonl"))
    assert semlink.entities_from_boxes(semlink.nms(images["img_a"])) == ["person", "dog", "umbrella", "handbag"]


def test_numeric_kernels_and_folds():
    assert semlink.softmax([1000.0, 0.0])[0] == pytest.approx(1.0)
    assert semlink.cross_entropy(0, [1.0 / 12] * 12) == pytest.approx(math.log(12), abs=1e-12)
    sizes = [len(f) for f in semlink.kfold_indices(12, 10, 1)]
    assert sizes == [2, 2] + [1] * 8


def test_grad_check_and_cli():
    result = semlink.grad_check("ntl", draws=5, seed=1, coords_per_param=0)
    assert result["max_rel_error"] <= 1e-5
    code, out, _ = semlink.run_cli(["grad-check", "--model", "baseline", "--draws", "2", "--seed", "1"])
    assert code == 0
    assert json.loads(out)["pass"] is True
    code, _, err = semlink.run_cli(["no-such-command"])
    assert code == 2 and err
