"""
Tests for the command-line interface and its exit codes.
"""

import json
import os
from unittest.mock import patch

import pytest

from cli import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, build_parser, main
from storage.service import storage_service
from tests.helpers import NTU25_PATH


def _common(data, out):
    return ["--topology", NTU25_PATH, "--seed", "3", "--data", str(data), "--out", str(out)]


@pytest.mark.integration
def test_full_command_chain(tmp_path):
    raw = tmp_path / "raw"
    processed = tmp_path / "processed"
    run = tmp_path / "run"

    assert main(
        ["gen-data", "--classes", "3", "--samples-per-class", "10", "--frames", "8"]
        + _common(raw, raw)
    ) == EXIT_OK
    assert main(["preprocess", "--interval", "2"] + _common(raw, processed)) == EXIT_OK
    assert main(["train", "--epochs", "1"] + _common(processed, run)) == EXIT_OK
    assert main(
        ["attack", "--epsilon", "0.1", "--termination", "fr", "--split", "train"]
        + _common(processed, run)
    ) == EXIT_OK

    report = storage_service.read_report(str(run / "report.csv"))
    assert report["epsilon"].tolist() == [0.1]
    assert report["termination"].tolist() == ["fr"]

    results = storage_service.load_results(str(run / "results.jsonl"))
    if results:
        sample_id = results[0].sample_id
        assert main(
            ["dump", "--results", str(run / "results.jsonl"), "--sample-id", sample_id,
             "--frames", "0,1"]
            + _common(processed, run)
        ) == EXIT_OK
        assert os.path.isfile(run / "skeleton_edges.csv")


def test_unknown_config_key_is_a_configuration_error(tmp_path):
    config_path = tmp_path / "experiment.json"
    config_path.write_text(json.dumps({"epsilon_list": [0.1]}), encoding="utf-8")
    code = main(["train", "--config", str(config_path), "--topology", NTU25_PATH])
    assert code == EXIT_CONFIG


def test_bad_epsilon_is_a_configuration_error(tmp_path):
    code = main(
        ["attack", "--topology", NTU25_PATH, "--epsilon", "1.5", "--out", str(tmp_path)]
    )
    assert code == EXIT_CONFIG


def test_missing_topology_is_a_runtime_error(tmp_path, capsys):
    code = main(["train", "--topology", str(tmp_path / "absent.json")])
    assert code == EXIT_RUNTIME
    assert "absent.json" in capsys.readouterr().err


def test_unexpected_exception_is_a_runtime_error(tmp_path, capsys):
    def crash(args, experiment):
        raise RuntimeError("worker crashed")

    with patch.dict("cli.COMMANDS", {"train": crash}):
        code = main(["train"] + _common(tmp_path, tmp_path))
    assert code == EXIT_RUNTIME
    assert "worker crashed" in capsys.readouterr().err


def test_bad_generator_spec(tmp_path):
    code = main(
        ["gen-data", "--classes", "1"] + _common(tmp_path, tmp_path)
    )
    assert code == EXIT_CONFIG


def test_parser_lists():
    args = build_parser().parse_args(
        ["attack", "--epsilon", "0.1,0.3", "--optimizer", "pgd,adam", "--part", "a", "--part", "b+c"]
    )
    assert args.epsilon == [0.1, 0.3]
    assert args.optimizer == ["pgd", "adam"]
    assert args.part == ["a", "b+c"]


def test_parser_rejects_bad_numbers():
    with pytest.raises(SystemExit):
        build_parser().parse_args(["attack", "--epsilon", "0.1,abc"])
