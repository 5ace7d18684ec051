"""Smoke test for the Python bindings.

Build and install first:  maturin develop --release -m crates/python/Cargo.toml
"""
import json
import math
import os
import sys
import tempfile

import botshare

sys.path.insert(0, os.path.dirname(__file__))
from ttest_oracle import N_TEST, N_TRAIN, corrected, differences  # noqa: E402


def main():
    assert botshare.mae([0.0, 0.0], [3.0, 4.0]) == 3.5
    assert math.isclose(botshare.rmse([0.0, 0.0], [3.0, 4.0]), math.sqrt(12.5), rel_tol=1e-15)

    d = differences()
    t = botshare.paired_ttest(d, N_TRAIN, N_TEST)
    _, t_ref, p_ref = corrected(d)
    assert abs(t["t"] - t_ref) < 1e-10 and abs(t["p"] - p_ref) < 1e-10, t

    with tempfile.TemporaryDirectory() as tmp:
        paths = botshare.generate_synthetic(tmp, n_accounts=300, seed=3)
        data = botshare.Dataset.load(paths["ground_truth"], paths["profiles"], paths["botometer"])
        assert len(data) == 300 and data.view == "all_hums"
        ids, rows, targets = data.features("all")
        assert len(rows[0]) == 30 and len(ids) == len(targets) == 300

        model = botshare.Model.train(data, "LinearRegression", "all")
        preds = model.predict(rows)
        err = botshare.mae(targets, preds)
        path = os.path.join(tmp, "model.json")
        model.save(path)
        again = botshare.Model.load(path).predict(rows)
        assert again == preds

        exp = botshare.run_experiment(
            data,
            algorithms=["ZeroR", "LinearRegression", "SMOreg"],
            feature_sets=["all"],
            k=5,
            repeats=2,
            params={"SMOreg": {"c": 1.0}},
        )
        score, starred = exp.cell("LinearRegression", "all")
        assert json.loads(exp.to_json())["schema_version"] == 1
        print(exp.table("mae"))

        credulous = botshare.Dataset.load(
            paths["ground_truth"], paths["profiles"], paths["botometer"], view="credulous"
        )
        assert 0 < len(credulous) < 300

        try:
            botshare.Model.train(data, "NoSuchAlgorithm", "all")
        except ValueError:
            pass
        else:
            raise AssertionError("unknown algorithm accepted")

    print(f"smoke ok: training MAE {err:.3f}, CV MAE {score:.3f}, starred={starred}")


if __name__ == "__main__":
    main()
