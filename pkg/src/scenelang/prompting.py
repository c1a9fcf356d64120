"""Four-part prompt assembly from the packaged prompt assets."""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .translator import SceneDescription

ASSET_NAMES = ("system", "responsibility", "rules", "in_context")
INPUT_START = "[start of the input]"
INPUT_END = "[end of the input]"
COMMENT_PREFIX = "#:"


class PromptError(ValueError):
    pass


class MissingAsset(PromptError):
    pass


class PreconditionError(PromptError):
    pass


@dataclass(frozen=True)
class PromptAssets:
    system: str
    responsibility: str
    rules: str
    in_context: str
    version: str


def _strip_comments(text: str) -> tuple[str, str | None]:
    version = None
    kept = []
    for line in text.splitlines():
        if line.startswith(COMMENT_PREFIX):
            body = line[len(COMMENT_PREFIX) :].strip()
            if body.startswith("asset-version:"):
                version = body.split(":", 1)[1].strip()
            continue
        kept.append(line)
    return "\n".join(kept).strip("\n"), version


def load_assets(directory: str | Path | None = None) -> PromptAssets:
    """Read the four prompt texts, from ``directory`` or the packaged copy."""
    texts: dict[str, str] = {}
    versions = set()
    for name in ASSET_NAMES:
        if directory is None:
            ref = resources.files("scenelang").joinpath("assets", "prompts", f"{name}.txt")
        else:
            ref = Path(directory) / f"{name}.txt"
        try:
            raw = ref.read_text(encoding="utf-8")
        except (FileNotFoundError, OSError) as exc:
            raise MissingAsset(f"prompt asset {name!r} not found: {exc}") from None
        body, version = _strip_comments(raw)
        if not body.strip():
            raise MissingAsset(f"prompt asset {name!r} is empty")
        texts[name] = body
        versions.add(version or "unversioned")
    if len(versions) != 1:
        raise MissingAsset(f"prompt assets disagree on version: {sorted(versions)}")
    return PromptAssets(version=versions.pop(), **texts)


@dataclass(frozen=True)
class PromptBundle:
    scenario_id: str
    system: str
    responsibility: str
    rules: str
    in_context: str
    user_input: str
    asset_version: str

    def messages(self) -> list[dict[str, str]]:
        """Chat messages: the four instruction parts, then the scene."""
        instructions = "\n\n".join((self.system, self.responsibility, self.rules, self.in_context))
        return [{"role": "system", "content": instructions}, {"role": "user", "content": self.user_input}]


def build_prompt(desc: SceneDescription, assets: PromptAssets) -> PromptBundle:
    text = desc.full_text
    if not text.strip():
        raise PreconditionError(f"scenario {desc.scenario_id!r} has an empty description")
    if INPUT_START in text or INPUT_END in text:
        raise PreconditionError("description already contains input delimiters")
    for name in ASSET_NAMES:
        if not getattr(assets, name).strip():
            raise MissingAsset(f"prompt asset {name!r} is empty")
    return PromptBundle(
        scenario_id=desc.scenario_id,
        system=assets.system,
        responsibility=assets.responsibility,
        rules=assets.rules,
        in_context=assets.in_context,
        user_input=f"{INPUT_START}\n\n{text}\n\n{INPUT_END}",
        asset_version=assets.version,
    )


_SAMPLE_START = "you may give the following analysis:"


def in_context_samples(assets: PromptAssets) -> list[str]:
    """The example model outputs embedded in the in-context asset."""
    out = []
    for chunk in assets.in_context.split(_SAMPLE_START)[1:]:
        end = chunk.find("Here is another given example")
        out.append((chunk if end < 0 else chunk[:end]).strip("\n") + "\n")
    return out
