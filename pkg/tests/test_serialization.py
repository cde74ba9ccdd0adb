import json
import os

import pytest

from errors import ConfigError
from serialization import (SCHEMA, load_triple, triple_from_record, triple_record, triple_text,
                           write_artifacts)


def test_triple_file_restores_the_solution(c1_order1, tmp_path):
    _, triple = c1_order1
    paths = write_artifacts(str(tmp_path), {"triple": triple_record(triple, "c1-string")})
    assert paths == [os.path.join(str(tmp_path), "triple.json")]
    restored, name = load_triple(paths[0])
    assert name == "c1-string"
    assert restored.trunc == triple.trunc
    assert restored.working == triple.working
    assert restored.phi == triple.phi
    assert restored.alphabar == triple.alphabar
    for original, loaded in zip(triple.Xbar, restored.Xbar):
        assert original == loaded


def test_rationals_are_written_as_strings(c1_order1):
    _, triple = c1_order1
    record = json.loads(json.dumps(triple_record(triple)))
    assert record["schema"] == SCHEMA
    coefficients = [term["c"] for poly in record["phi"] for term in poly]
    assert "1/2" in coefficients
    assert all(isinstance(c, str) for c in coefficients)


def test_schema_and_kind_are_checked(c1_order1):
    _, triple = c1_order1
    record = triple_record(triple)
    with pytest.raises(ConfigError, match="schema"):
        triple_from_record({**record, "schema": "todahbar/0"})
    with pytest.raises(ConfigError, match="artifact"):
        triple_from_record({**record, "kind": "wkb"})
    with pytest.raises(ConfigError):
        triple_from_record({**record, "phi": record["phi"][:1]})


def test_unreadable_triple(tmp_path):
    path = tmp_path / "triple.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError):
        load_triple(str(path))
    with pytest.raises(ConfigError):
        load_triple(str(tmp_path / "absent.json"))


def test_text_format_uses_text_names(c1_order1, tmp_path):
    _, triple = c1_order1
    artifacts = {"triple": triple_record(triple), "triple_text": triple_text(triple, "c1-string"),
                 "verify": "lax equations: PASS\n"}
    paths = write_artifacts(str(tmp_path), artifacts, fmt="text")
    assert sorted(os.path.basename(p) for p in paths) == ["triple.txt", "verify.txt"]
    assert (tmp_path / "triple.txt").read_text().startswith("# dressing triple 'c1-string'")
    with pytest.raises(ConfigError):
        write_artifacts(str(tmp_path), artifacts, fmt="yaml")
