import pytest

from data.artifact_store import REPO_ROOT, artifact_dir, artifact_root, list_artifacts


def test_environment_roots():
    assert artifact_root("production") == REPO_ROOT / "artifacts" / "production"
    assert artifact_root("laptop") == REPO_ROOT / "artifacts" / "sandbox"


def test_kinds_are_checked():
    with pytest.raises(ValueError, match="artifact kind"):
        artifact_dir("models", create=False)
    assert artifact_dir("traces", "staging", create=False).name == "traces"


def test_listing(tmp_path, monkeypatch):
    monkeypatch.setattr("data.artifact_store.REPO_ROOT", tmp_path)
    assert list_artifacts("codebooks", environment="sandbox") == []
    path = artifact_dir("codebooks", "sandbox")
    (path / "b.jsonl").write_text("")
    (path / "a.jsonl").write_text("")
    (path / "notes.txt").write_text("")
    assert [p.name for p in list_artifacts("codebooks", "*.jsonl", "sandbox")] == ["a.jsonl", "b.jsonl"]
