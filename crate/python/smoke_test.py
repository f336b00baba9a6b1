"""Builds the extension module and exercises it end to end.

    python python/smoke_test.py

The module is compiled with cargo and copied next to this script as
metakb.so, so no install step is needed.
"""

import collections
import csv
import math
import pathlib
import shutil
import subprocess
import sys
import tempfile

HERE = pathlib.Path(__file__).resolve().parent
ROOT = HERE.parent
CORPUS = ROOT / "data" / "corpus"


def build_module():
    subprocess.run(
        ["cargo", "build", "--release", "-p", "metakb-python"],
        cwd=ROOT,
        check=True,
    )
    shutil.copy(ROOT / "target" / "release" / "libmetakb_py.so", HERE / "metakb.so")
    sys.path.insert(0, str(HERE))


def main():
    build_module()
    import metakb

    print("metakb", metakb.__version__)
    assert len(metakb.ALGORITHMS) == 8
    assert "accuracy" in metakb.METRICS

    ds = metakb.Dataset.load(str(CORPUS / "rings_a.csv"))
    print(ds)
    assert ds.id == "rings_a" and ds.c == 2

    mf = metakb.extract_metafeatures(ds, seed=0)
    assert mf == metakb.extract_metafeatures(ds, seed=0)
    with open(CORPUS / "rings_a.csv") as f:
        counts = collections.Counter(row["class"] for row in csv.DictReader(f))
    total = sum(counts.values())
    entropy = -sum(k / total * math.log2(k / total) for k in counts.values())
    assert math.isclose(mf["class_entropy"], entropy, rel_tol=1e-12)
    print(f"{len(mf)} meta-features, {sum(v is not None for v in mf.values())} defined")

    cfg = metakb.sample_config("rf", seed=4)
    cfg["criterion"] = "gini"
    scores = metakb.evaluate(ds, "rf", cfg, folds=3)
    print("rf accuracy", round(scores["metrics"]["accuracy"]["mean"], 4))

    res = metakb.tune(ds, "dt", strategy="random", budget=5, seed=1)
    assert res["evaluations_used"] == 5

    try:
        metakb.Dataset.load("/no/such/file.csv")
    except FileNotFoundError as e:
        assert "/no/such/file.csv" in str(e)
    else:
        raise AssertionError("missing file accepted")

    ids = ["linear_a", "linear_b", "rings_a", "rings_b", "xor_a", "blobs_a"]
    with tempfile.TemporaryDirectory() as tmp:
        manifest = pathlib.Path(tmp) / "manifest.csv"
        manifest.write_text(
            "id,path,target\n" + "".join(f"{i},{CORPUS / (i + '.csv')},class\n" for i in ids)
        )
        kb = metakb.KnowledgeBase.build(
            str(pathlib.Path(tmp) / "kb"),
            str(manifest),
            algorithms=["lr", "dt", "rf"],
            configs=3,
            metrics=["accuracy"],
            folds=3,
            repeats=1,
        )
        assert len(kb) == len(ids) * 9
        assert kb.stats()["datasets"] == len(ids)

        best = kb.query_best("rings_a", top=3)
        assert len(best) == 3
        assert best[0]["score"] >= best[-1]["score"]

        rec = kb.recommend(ds, top=3, exclude_self=True)
        assert all(n["dataset_id"] != "rings_a" for n in rec["neighbors"])
        assert rec["neighbors"][0]["dataset_id"] == "rings_b"
        print("top pipeline", rec["pipelines"][0]["pipeline_id"])

        rf = kb.recommend(ds, method="rf", trees=20, top=2, exclude_self=True)
        assert len(rf["pipelines"]) == 2

        report = kb.loo_evaluate(trees=20)
        print("loo hit-rate knn", report["knn"]["hit_rate"], "rf", report["rf"]["hit_rate"])

        reopened = metakb.KnowledgeBase.open(str(pathlib.Path(tmp) / "kb"))
        assert len(reopened) == len(kb)

    print("smoke test passed")


if __name__ == "__main__":
    main()
