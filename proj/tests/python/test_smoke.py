"""End-to-end smoke tests for the python module."""

import json
import math
import os
import tempfile

import mvtpp


def test_presets_and_stationary_rates():
    ind = mvtpp.hawkes_preset("hawkes_ind")
    assert ind["mu"] == [0.1, 0.05]
    assert ind["alpha"][0] == [0.2, 0.0]
    rates = mvtpp.stationary_rate(ind)
    assert abs(rates[0] - 0.125) < 1e-12
    assert abs(rates[1] - 1.0 / 12.0) < 1e-12

    dep2 = mvtpp.hawkes_preset("hawkes_dep2")
    assert dep2["beta"][4][2] == 8.718


def test_simulation_and_io_round_trip(tmp_path=None):
    seqs = mvtpp.simulate_hawkes("hawkes_dep1", 50, 40.0, seed=11)
    assert len(seqs) == 50
    again = mvtpp.simulate_hawkes("hawkes_dep1", 50, 40.0, seed=11)
    assert seqs == again
    for s in seqs:
        times = s["arrival_times"]
        assert all(b > a for a, b in zip(times, times[1:]))
        assert all(0 <= m < 2 for m in s["marks"])

    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "data.jsonl")
        mvtpp.save_dataset(seqs, path, num_marks=2)
        back = mvtpp.load_dataset(path)
        assert back["num_marks"] == 2
        assert len(back["sequences"]) == 50
        t0 = back["sequences"][0]["arrival_times"]
        assert all(abs(a - b) < 1e-9 for a, b in zip(t0, seqs[0]["arrival_times"]))


def test_split_indices_partition():
    s = mvtpp.split_indices(24576, seed=1)
    assert len(s["train"]) == 14745
    assert len(s["val"]) == 4915
    assert len(s["test"]) == 4916
    assert len(set(s["train"]) | set(s["val"]) | set(s["test"])) == 24576


def test_lnm_closed_forms():
    assert abs(mvtpp.lnm_pdf(1.0, [1.0], [0.0], [1.0]) - 1.0 / math.sqrt(2 * math.pi)) < 1e-9
    assert abs(mvtpp.lnm_log_survival(1.0, [1.0], [0.0], [1.0]) - math.log(0.5)) < 1e-9
    assert mvtpp.lnm_log_survival(0.0, [1.0], [0.0], [1.0]) == 0.0


def test_metrics():
    assert mvtpp.micro_f1([0, 0, 1, 1], [0, 1, 1, 1]) == 75.0
    assert abs(mvtpp.weighted_f1([0, 0, 0, 1], [0, 0, 0, 0], 2) - 0.75 * 6 / 7 * 100) < 1e-9


def test_train_evaluate_sample_pipeline():
    seqs = mvtpp.simulate_hawkes("hawkes_dep1", 120, 30.0, seed=5)
    config = {
        "model": "lnm_dep",
        "hidden_size": 8,
        "embed_size": 4,
        "mixture_components": 2,
        "batch_size": 64,
        "max_epochs": 2,
        "seed": 7,
    }
    with tempfile.TemporaryDirectory() as d:
        summary = mvtpp.train(seqs, config, out_dir=d)
        assert summary["epochs_run"] == 2
        assert math.isfinite(summary["best_val_nll"])
        report = summary["test_report"]
        assert report["model"] == "lnm_dep"
        assert abs(report["total_nll"] - (report["time_nll"] + report["mark_nll"])) < 1e-9

        ckpt = summary["checkpoint"]
        rep = mvtpp.evaluate(ckpt, seqs, num_marks=2)
        assert rep["num_sequences"] == 120

        nll = mvtpp.sequence_nll(ckpt, seqs[0])
        assert math.isfinite(nll["total"])

        generated = mvtpp.sample(ckpt, 30, 30.0, seed=3)
        assert len(generated) == 30
        stats = mvtpp.sampling_report(seqs, generated, num_marks=2)
        assert stats["mark_freq_l1"] <= 2.0
        assert stats["generated_mean_length"] > 0


if __name__ == "__main__":
    failures = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_") and callable(fn):
            try:
                fn()
                print(f"PASS {name}")
            except AssertionError as e:
                failures += 1
                print(f"FAIL {name}: {e}")
    raise SystemExit(1 if failures else 0)
