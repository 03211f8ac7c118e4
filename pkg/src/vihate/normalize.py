"""Social-media comment cleaning.

Removes forum quotes, links and ``@username`` mentions, collapses whitespace and
NFC-normalizes. Emoji and emoticons are ordinary characters here and pass
through untouched.
"""

from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass

URL_PATTERN = re.compile(r"(?:https?://|www\.)\S+", re.IGNORECASE)
USERNAME_PATTERN = re.compile(r"(?<!\S)@\S{1,64}(?!\S)")


@dataclass(frozen=True)
class RawComment:
    id: str
    body: str
    quoted_block: str | None = None
    topic: str | None = None
    thread: str | None = None


@dataclass(frozen=True)
class NormalizeConfig:
    url_removal: bool = True
    username_removal: bool = True
    quote_removal: bool = True


DEFAULT_CONFIG = NormalizeConfig()


def normalize_text(text: str, config: NormalizeConfig = DEFAULT_CONFIG) -> str:
    """Clean a single piece of text.

    Character offsets in the result count code points, which is what every span
    in this package indexes.
    """
    text = unicodedata.normalize("NFC", text)
    if config.url_removal:
        text = URL_PATTERN.sub("", text)
    if config.username_removal:
        text = USERNAME_PATTERN.sub("", text)
    text = " ".join(text.split())
    # removals never join two non-space characters, but a stray combining mark
    # after a leading space is cheap to re-check
    return unicodedata.normalize("NFC", text)


def normalize(raw: RawComment, config: NormalizeConfig = DEFAULT_CONFIG) -> str:
    body = raw.body
    if not config.quote_removal and raw.quoted_block:
        body = f"{raw.quoted_block} {body}"
    return normalize_text(body, config)


def is_effectively_empty(text: str) -> bool:
    return not text or text.isspace()
