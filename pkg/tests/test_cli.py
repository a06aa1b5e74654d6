import json

import numpy as np
import yaml

from gendetect.cli import main
from gendetect.corpus import read_generations, write_documents
from gendetect.classifier import load_model

from .conftest import synth_docs


def _write_config(path, data):
    path.write_text(yaml.safe_dump(data), encoding="utf-8")
    return str(path)


def _generate_config(tmp_path):
    human = synth_docs("cli", 250, 220, 260, 3, zipf=0.3)
    human_path = tmp_path / "human.jsonl"
    write_documents(human, human_path)
    return {
        "generate": {
            "human_corpus": str(human_path),
            "out_dir": str(tmp_path / "gen"),
            "n_records": 160,
            "prompt_words": 10,
            "lm": {"order": 2, "smoothing_k": 0.3},
            "gen_params": {"max_new_tokens": 70, "top_k": 10, "top_p": 0.9},
            "models": [
                {"name": "cli-a", "corpus_slice": [0, 110], "seed": 1},
                {"name": "cli-b", "corpus_slice": [110, 220], "seed": 2},
            ],
        },
        "human_corpus": str(human_path),
        "output_dir": str(tmp_path / "out"),
        "split": {"train_n": 60, "val_n": 20, "rng_seed": 5},
        "filter": {"min_words": 20},
        "features": {"hash_dim": 16384, "hash_seed": 5},
        "training": {"seeds": [0, 1], "learning_rate": 0.3},
    }


def test_cli_generate_matrix_report_roundtrip(tmp_path, capsys):
    config_path = _write_config(tmp_path / "cfg.yaml", _generate_config(tmp_path))

    assert main(["generate", "--config", config_path]) == 0
    a = read_generations(tmp_path / "gen" / "cli-a.jsonl")
    assert len(a) == 160
    assert (tmp_path / "gen" / "cli-a.vocab.txt").exists()

    raw = yaml.safe_load((tmp_path / "cfg.yaml").read_text())
    raw["corpora"] = [str(tmp_path / "gen" / "cli-a.jsonl"), str(tmp_path / "gen" / "cli-b.jsonl")]
    config_path = _write_config(tmp_path / "cfg2.yaml", raw)

    assert main(["matrix", "--config", config_path]) == 0
    assert (tmp_path / "out" / "matrix_auc.csv").exists()
    summary = json.loads((tmp_path / "out" / "summary_cross_matrix.json").read_text())
    assert summary["sources"] == ["cli-a", "cli-b"]

    assert main(["report", "--output-dir", str(tmp_path / "out"), "--verify"]) == 0
    out = capsys.readouterr().out
    assert "matches score dumps" in out


def test_cli_dotted_overrides(tmp_path):
    config = _generate_config(tmp_path)
    config_path = _write_config(tmp_path / "cfg.yaml", config)
    assert main(["generate", "--config", config_path, "--generate.n_records", "40"]) == 0
    assert len(read_generations(tmp_path / "gen" / "cli-a.jsonl")) == 40


def test_cli_filter_and_split(tmp_path):
    config = _generate_config(tmp_path)
    config_path = _write_config(tmp_path / "cfg.yaml", config)
    main(["generate", "--config", config_path])
    src = str(tmp_path / "gen" / "cli-a.jsonl")

    assert main([
        "filter", "--config", config_path, "--input", src,
        "--kept", str(tmp_path / "kept.jsonl"), "--rejected", str(tmp_path / "rej.jsonl"),
    ]) == 0
    kept = read_generations(tmp_path / "kept.jsonl")
    assert kept and all(len(r.completion.split()) >= 20 for r in kept)
    for line in (tmp_path / "rej.jsonl").read_text().splitlines():
        assert json.loads(line)["reason"] in {"short", "repetitive", "banned"}

    assert main([
        "split", "--config", config_path, "--input", src,
        "--out-train", str(tmp_path / "train.jsonl"), "--out-val", str(tmp_path / "val.jsonl"),
    ]) == 0
    assert len(read_generations(tmp_path / "train.jsonl")) == 60
    assert len(read_generations(tmp_path / "val.jsonl")) == 20


def test_cli_train_saves_models(tmp_path):
    config = _generate_config(tmp_path)
    config_path = _write_config(tmp_path / "cfg.yaml", config)
    main(["generate", "--config", config_path])
    raw = yaml.safe_load((tmp_path / "cfg.yaml").read_text())
    raw["corpora"] = [str(tmp_path / "gen" / "cli-a.jsonl"), str(tmp_path / "gen" / "cli-b.jsonl")]
    config_path = _write_config(tmp_path / "cfg2.yaml", raw)

    assert main(["train", "--config", config_path, "--source", "cli-b"]) == 0
    model_path = tmp_path / "out" / "models" / "cli-b__seed0.npz"
    model = load_model(model_path)
    assert model.classes == ["human", "machine"]
    assert np.all(np.isfinite(model.weights))


def test_cli_paired_and_attribute(tmp_path, wm_paired_files):
    (card_wm, wm_path), (card_clean, clean_path) = wm_paired_files
    config = {
        "corpora": [str(wm_path), str(clean_path)],
        "output_dir": str(tmp_path / "out"),
        "split": {"train_n": 150, "val_n": 40, "rng_seed": 3},
        "filter": {"min_words": 50},
        "features": {"hash_dim": 16384, "hash_seed": 5},
        "training": {"seeds": [0, 1], "learning_rate": 0.3},
        "ref_lm": {"order": 0},
    }
    config_path = _write_config(tmp_path / "cfg.yaml", config)
    assert main(["paired", "--flag", "watermark", "--config", config_path]) == 0
    assert (tmp_path / "out" / "summary_paired_watermarked.json").exists()

    gen_config = _generate_config(tmp_path)
    config_path = _write_config(tmp_path / "cfg2.yaml", gen_config)
    main(["generate", "--config", config_path])
    raw = yaml.safe_load((tmp_path / "cfg2.yaml").read_text())
    raw["corpora"] = [str(tmp_path / "gen" / "cli-a.jsonl"), str(tmp_path / "gen" / "cli-b.jsonl")]
    raw["output_dir"] = str(tmp_path / "out_attr")
    config_path = _write_config(tmp_path / "cfg3.yaml", raw)
    assert main(["attribute", "--task", "source", "--config", config_path]) == 0
    assert (tmp_path / "out_attr" / "confusion_source_id.csv").exists()
    assert (tmp_path / "out_attr" / "summary_source_id.json").exists()
