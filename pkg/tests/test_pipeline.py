import json
from pathlib import Path

import pytest

from hyperlex import RunConfig, compare_strategies, main, run_pipeline
from hyperlex.pipeline import load_config_file, resolve_out_dir


def toy_config(toy_files, out_dir, **overrides):
    settings = dict(
        responses_path=str(toy_files["responses"]),
        norms_paths=(str(toy_files["ratings"]), str(toy_files["counts"])),
        strategy="hypergraph",
        family="linear",
        k_folds=2,
        n_permutations=10,
        out_dir=str(out_dir),
    )
    settings.update(overrides)
    return RunConfig(**settings)


def test_run_pipeline_toy_end_to_end(toy_files, tmp_path):
    out = tmp_path / "out"
    manifest = run_pipeline(toy_config(toy_files, out))
    assert manifest.complete is True
    assert manifest.note == "ok"
    expected = [
        "counts.json",
        "extremes_gap.json",
        "features_hypergraph.csv",
        "manifest.json",
        "metrics_hypergraph_linear.json",
        "moments_concreteness.csv",
        "moments_concreteness.svg",
        "predictions_hypergraph_linear.csv",
        "residuals_hypergraph_linear.csv",
        "residuals_valence_semantic_size.svg",
        "scatter_valence_semantic_size.svg",
        "shap_hypergraph_linear.csv",
        "shap_summary_hypergraph_linear.csv",
    ]
    assert sorted(manifest.artifacts) == expected
    for name in expected:
        assert (out / name).exists(), name

    counts = json.loads((out / "counts.json").read_text())
    assert counts["vocabulary"] == 5
    assert counts["hypergraph"] == {"nodes": 5, "edges": 3}
    assert counts["r123"] == {"nodes": 5, "edges": 5}

    on_disk = json.loads((out / "manifest.json").read_text())
    assert on_disk["complete"] is True
    assert sorted(on_disk["artifacts"] + ["manifest.json"]) == expected
    assert len(on_disk["input_digests"]) == 3
    assert set(on_disk["timings"]) >= {"ingest", "structures", "aggregate",
                                       "regress", "explain", "compartments"}

    metrics = json.loads((out / "metrics_hypergraph_linear.json").read_text())
    for key in ("rmse_mean", "rmse_se", "rmse_std", "r2_mean", "r2_se", "r2_std",
                "per_fold", "leaderboard", "seeds", "fallback_words"):
        assert key in metrics
    assert metrics["strategy"] == "hypergraph"
    assert metrics["family"] == "linear"
    assert metrics["seeds"] == {"split": 7, "model": 11, "null": 23}

    # 3 hyperedge contexts cannot support the extremes statistic: honest error
    gaps = json.loads((out / "extremes_gap.json").read_text())
    assert "error" in gaps["concreteness"]


def test_rerun_is_byte_identical(toy_files, tmp_path):
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    run_pipeline(toy_config(toy_files, out_a))
    run_pipeline(toy_config(toy_files, out_b))
    compared = 0
    for path_a in sorted(out_a.iterdir()):
        if path_a.name == "manifest.json":  # timings and out_dir differ
            continue
        if path_a.suffix not in (".csv", ".json", ".svg"):
            continue
        path_b = out_b / path_a.name
        assert path_b.exists(), path_a.name
        assert path_a.read_bytes() == path_b.read_bytes(), path_a.name
        compared += 1
    assert compared >= 10


def test_cover_import_reproduces_known_values(toy_files, tmp_path):
    out = tmp_path / "out"
    config = toy_config(toy_files, out, strategy="lemon",
                        cover_file=str(toy_files["cover"]), make_figures=False)
    run_pipeline(config)
    rows = (out / "features_lemon.csv").read_text().splitlines()
    header = rows[0].split(",")
    col = header.index("length__lemon")
    dog = next(r for r in rows[1:] if r.startswith("dog,")).split(",")
    assert float(dog[col]) == pytest.approx(25 / 6, abs=1e-12)
    from hyperlex.community import Cover
    reexported = Cover.from_file(out / "cover_lemon.tsv")
    original = Cover.from_file(toy_files["cover"])
    assert reexported.communities == original.communities
    assert reexported.seeds == original.seeds


def test_ego_strategy_features(toy_files, tmp_path):
    out = tmp_path / "out"
    run_pipeline(toy_config(toy_files, out, strategy="ego", make_figures=False))
    rows = (out / "features_ego.csv").read_text().splitlines()
    col = rows[0].split(",").index("length__ego")
    dog = next(r for r in rows[1:] if r.startswith("dog,")).split(",")
    assert float(dog[col]) == pytest.approx(4.4, abs=1e-12)


def test_partition_import(toy_files, tmp_path):
    part_file = tmp_path / "partition.csv"
    part_file.write_text("word,community_id\ndog,0\nbox,0\ncat,0\nzebra,1\nelephant,1\n")
    out = tmp_path / "out"
    config = toy_config(toy_files, out, strategy="louvain",
                        partition_file=str(part_file), make_figures=False)
    run_pipeline(config)
    rows = (out / "features_louvain.csv").read_text().splitlines()
    col = rows[0].split(",").index("length__louvain")
    values = {r.split(",")[0]: float(r.split(",")[col]) for r in rows[1:]}
    assert values["dog"] == pytest.approx(3.0)
    assert values["zebra"] == pytest.approx(6.5)
    assert (out / "partition_louvain.csv").exists()


def test_louvain_and_eva_strategies_run(toy_files, tmp_path):
    for strategy in ("louvain", "eva"):
        out = tmp_path / strategy
        manifest = run_pipeline(toy_config(toy_files, out, strategy=strategy,
                                           make_figures=False))
        assert manifest.complete
        assert (out / f"partition_{strategy}.csv").exists()


def test_export_structures_flag(toy_files, tmp_path):
    out = tmp_path / "out"
    run_pipeline(toy_config(toy_files, out, export_structures=True,
                            make_figures=False))
    assert (out / "edges_r123.tsv").read_text().splitlines()[0] == "word1\tword2"
    hyper_lines = (out / "hyperedges.tsv").read_text().splitlines()
    assert len(hyper_lines) == 3


def test_grid_file_override(toy_files, tmp_path):
    grid_file = tmp_path / "grids.json"
    grid_file.write_text(json.dumps({"svr": {"C": [1.0], "epsilon": [0.1]}}))
    out = tmp_path / "out"
    config = toy_config(toy_files, out, family="svr", grid_file=str(grid_file),
                        make_figures=False)
    run_pipeline(config)
    metrics = json.loads((out / "metrics_hypergraph_svr.json").read_text())
    assert len(metrics["leaderboard"]) == 1
    assert metrics["spec"] == {"C": 1.0, "epsilon": 0.1}


def test_gap_strategy_artifacts(toy_files, tmp_path):
    out = tmp_path / "out"
    run_pipeline(toy_config(toy_files, out, strategy="ego", gap=True,
                            make_figures=False))
    assert (out / "features_ego-gap.csv").exists()
    assert (out / "metrics_ego-gap_linear.json").exists()


def test_failed_run_leaves_partial_manifest(toy_files, tmp_path):
    out = tmp_path / "out"
    config = toy_config(toy_files, out, strategy="louvain",
                        partition_file=str(tmp_path / "missing.csv"))
    with pytest.raises(Exception):
        run_pipeline(config)
    on_disk = json.loads((out / "manifest.json").read_text())
    assert on_disk["complete"] is False
    assert on_disk["note"].startswith("aborted:")
    assert "counts.json" in on_disk["artifacts"]


def test_run_config_validation(toy_files):
    with pytest.raises(ValueError):
        toy_config(toy_files, "x", construction="r5")
    with pytest.raises(ValueError):
        toy_config(toy_files, "x", strategy="psychic")
    with pytest.raises(ValueError):
        toy_config(toy_files, "x", family="catboost")
    with pytest.raises(ValueError):
        toy_config(toy_files, "x", target="frequency")
    with pytest.raises(ValueError):
        toy_config(toy_files, "x", k_folds=1)
    with pytest.raises(ValueError):
        toy_config(toy_files, "x", alpha=1.5)
    with pytest.raises(ValueError):
        toy_config(toy_files, "x", scatter_x="nope")


def test_compartment_features_default(toy_files):
    config = toy_config(toy_files, "x", target="aoa")
    assert config.compartment_features == ("aoa",)
    assert config.families == ("linear",)
    both = toy_config(toy_files, "x", family="all")
    assert both.families == ("linear", "random_forest", "adaboost", "svr")


def test_load_config_file(tmp_path):
    path = tmp_path / "run.conf"
    path.write_text(
        "# comment line\n"
        "responses_path = data/responses.tsv\n"
        "norms_paths = a.csv, b.csv  # trailing comment\n"
        "k_folds = 5\n"
        "gap = true\n"
        "alpha = 0.25\n"
        "nested_cv = off\n"
        "\n"
    )
    values = load_config_file(path)
    assert values["responses_path"] == "data/responses.tsv"
    assert values["norms_paths"] == ("a.csv", "b.csv")
    assert values["k_folds"] == 5
    assert values["gap"] is True
    assert values["alpha"] == 0.25
    assert values["nested_cv"] is False
    bad = tmp_path / "bad.conf"
    bad.write_text("just words\n")
    with pytest.raises(ValueError):
        load_config_file(bad)


def test_load_config_file_rejects_unknown_key(tmp_path):
    path = tmp_path / "typo.conf"
    path.write_text("figures = false\n")  # field is make_figures
    with pytest.raises(ValueError, match=r"typo\.conf:1: unknown config key 'figures'"):
        load_config_file(path)


def test_out_dir_precedence(monkeypatch):
    monkeypatch.delenv("HYPERLEX_OUT_DIR", raising=False)
    assert resolve_out_dir("flagged", "configured") == "flagged"
    assert resolve_out_dir(None, "configured") == "configured"
    assert resolve_out_dir(None, None) == "hyperlex_out"
    monkeypatch.setenv("HYPERLEX_OUT_DIR", "from_env")
    assert resolve_out_dir(None, "configured") == "from_env"
    assert resolve_out_dir("flagged", "configured") == "flagged"


def test_cli_run_exit_zero(toy_files, tmp_path, capsys):
    out = tmp_path / "cli_out"
    code = main([
        "run",
        "--responses", str(toy_files["responses"]),
        "--norms", str(toy_files["ratings"]), str(toy_files["counts"]),
        "--strategy", "hypergraph", "--family", "linear",
        "--k-folds", "2", "--n-permutations", "10",
        "--out-dir", str(out), "--no-figures",
    ])
    assert code == 0
    assert (out / "manifest.json").exists()
    assert "run complete" in capsys.readouterr().out


def test_cli_config_file_with_flag_override(toy_files, tmp_path, monkeypatch):
    monkeypatch.delenv("HYPERLEX_OUT_DIR", raising=False)
    conf = tmp_path / "toy.conf"
    conf.write_text(
        f"responses_path = {toy_files['responses']}\n"
        f"norms_paths = {toy_files['ratings']}, {toy_files['counts']}\n"
        "strategy = hypergraph\n"
        "family = linear\n"
        "k_folds = 2\n"
        "n_permutations = 10\n"
        "make_figures = false\n"
        f"out_dir = {tmp_path / 'from_config'}\n"
    )
    code = main(["run", "--config", str(conf), "--target", "aoa"])
    assert code == 0
    manifest = json.loads((tmp_path / "from_config" / "manifest.json").read_text())
    assert manifest["config"]["target"] == "aoa"  # flag beats file
    assert manifest["config"]["k_folds"] == 2
    assert manifest["config"]["strategy"] == "hypergraph"

    out_env = tmp_path / "from_env"
    monkeypatch.setenv("HYPERLEX_OUT_DIR", str(out_env))
    code = main(["run", "--config", str(conf)])
    assert code == 0
    assert (out_env / "manifest.json").exists()  # env beats config file


def test_cli_missing_inputs_exits(tmp_path):
    with pytest.raises(SystemExit):
        main(["run", "--strategy", "ego", "--out-dir", str(tmp_path / "x")])


def test_cli_bad_input_returns_one(tmp_path):
    code = main([
        "run",
        "--responses", str(tmp_path / "missing.tsv"),
        "--norms", str(tmp_path / "missing.csv"),
        "--out-dir", str(tmp_path / "out"),
    ])
    assert code == 1


def test_cli_verbose_reraises(tmp_path):
    with pytest.raises(Exception):
        main([
            "-v", "run",
            "--responses", str(tmp_path / "missing.tsv"),
            "--norms", str(tmp_path / "missing.csv"),
            "--out-dir", str(tmp_path / "out"),
        ])


def test_compare_strategies_tables(toy_files, tmp_path):
    out = tmp_path / "cmp"
    config = toy_config(toy_files, out, make_figures=False)
    rows = compare_strategies(config, ["non-network", "hypergraph", "ego-gap"],
                              families=("linear",))
    assert len(rows) == 3
    tags = [r["strategy"] for r in rows]
    assert tags == ["non-network", "hypergraph", "ego-gap"]
    csv_lines = (out / "comparison.csv").read_text().splitlines()
    assert csv_lines[0] == \
        "strategy,family,rmse_mean,rmse_se,rmse_std,r2_mean,r2_se,r2_std"
    assert len(csv_lines) == 4
    md = (out / "comparison.md").read_text()
    assert "| family | non-network | hypergraph | ego-gap |" in md
    assert "| linear |" in md
    with pytest.raises(ValueError):
        compare_strategies(config, ["ego"])


def test_cli_compare_exit_zero(toy_files, tmp_path, capsys):
    out = tmp_path / "cmp_cli"
    code = main([
        "compare",
        "--responses", str(toy_files["responses"]),
        "--norms", str(toy_files["ratings"]), str(toy_files["counts"]),
        "--strategies", "non-network", "hypergraph",
        "--families", "linear",
        "--k-folds", "2", "--out-dir", str(out),
    ])
    assert code == 0
    assert (out / "comparison.md").exists()
    assert "compared 2 strategy/family pairs" in capsys.readouterr().out
