import pytest

from scenelang import prompting as pr
from scenelang.translator import SceneDescription, render


def test_assets_load_and_strip_comments(assets):
    assert assets.version == "v1"
    for name in pr.ASSET_NAMES:
        text = getattr(assets, name)
        assert text.strip()
        assert not any(line.startswith("#:") for line in text.splitlines())
    assert "[Int QA]" in assets.responsibility
    assert "Never use bullet points." in assets.rules


def test_missing_asset(tmp_path):
    with pytest.raises(pr.MissingAsset):
        pr.load_assets(tmp_path)


def test_empty_asset(tmp_path, assets):
    for name in pr.ASSET_NAMES:
        (tmp_path / f"{name}.txt").write_text(getattr(assets, name))
    (tmp_path / "rules.txt").write_text("#: only a comment\n")
    with pytest.raises(pr.MissingAsset):
        pr.load_assets(tmp_path)


def test_build_prompt_appendix(generated, assets):
    s, _ = generated["appendix_replica"]
    b = pr.build_prompt(render(s), assets)
    assert "The ego agent is heading towards intersection." in b.user_input
    assert b.user_input.count(pr.INPUT_START) == 1
    assert b.user_input.count(pr.INPUT_END) == 1
    assert b == pr.build_prompt(render(s), assets)
    msgs = b.messages()
    assert [m["role"] for m in msgs] == ["system", "user"]
    assert assets.in_context in msgs[0]["content"]


def test_empty_description(assets):
    with pytest.raises(pr.PreconditionError):
        pr.build_prompt(SceneDescription("x", "", "", (), ()), assets)


def test_in_context_samples(assets):
    samples = pr.in_context_samples(assets)
    assert len(samples) == 2
    assert all(s.lstrip().startswith("[Int QA]") for s in samples)
