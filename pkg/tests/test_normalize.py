import re
import unicodedata

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vihate.normalize import (
    URL_PATTERN,
    NormalizeConfig,
    RawComment,
    is_effectively_empty,
    normalize,
    normalize_text,
)


@pytest.mark.parametrize("body, quote, expected", [
    ("xem này https://voz.vn/t/abc @user123 vãi =))", None, "xem này vãi =))"),
    ("ngu quá 😂😂", None, "ngu quá 😂😂"),
    ("đồng ý", "thằng kia nói...", "đồng ý"),
    ("  link www.example.com/x?y=1   hay\tquá\n", None, "link hay quá"),
    ("HTTP://VOZ.VN/abc ok", None, "ok"),
    ("mail a@b.com vẫn giữ", None, "mail a@b.com vẫn giữ"),
    (":D :))) =)) <3", None, ":D :))) =)) <3"),
])
def test_normalize_examples(body, quote, expected):
    assert normalize(RawComment("1", body, quote)) == expected


def test_nfc_composition():
    decomposed = unicodedata.normalize("NFD", "thật Chịu")
    assert normalize_text(decomposed) == "thật Chịu"
    assert len(normalize_text(decomposed)) == 9


def test_toggles():
    raw = RawComment("1", "a https://x.y @bob b", quoted_block="q")
    assert normalize(raw, NormalizeConfig(url_removal=False)) == "a https://x.y b"
    assert normalize(raw, NormalizeConfig(username_removal=False)) == "a @bob b"
    assert normalize(raw, NormalizeConfig(quote_removal=False)) == "q a b"


def test_username_length_limit():
    assert normalize_text("@" + "u" * 64 + " x") == "x"
    long_token = "@" + "u" * 65
    assert normalize_text(long_token + " x") == long_token + " x"


@pytest.mark.parametrize("text, expected", [("", True), ("   ", True), ("ok", False), ("\t\n", True)])
def test_is_effectively_empty(text, expected):
    assert is_effectively_empty(text) is expected


PIECES = ["anh", "em", "thật", "quá", "😂", "👍🏽", ":D", "=))", "ạ", "đm", ".", "!", "a@b"]
URLS = ["https://voz.vn/t/abc-123", "http://x.y/z?q=1", "www.facebook.com/abc", "https://t.co/😂x"]
USERS = ["@user123", "@Nguyễn_Văn", "@x", "@" + "k" * 64]


@st.composite
def noisy_comment(draw):
    words = draw(st.lists(st.sampled_from(PIECES), min_size=0, max_size=12))
    injections = draw(st.lists(st.sampled_from(URLS + USERS), max_size=4))
    for item in injections:
        words.insert(draw(st.integers(0, len(words))), item)
    seps = draw(st.lists(st.sampled_from([" ", "  ", "\t", "\n", "  "]), min_size=len(words), max_size=len(words)))
    return "".join(w + s for w, s in zip(words, seps)), words


@settings(max_examples=300)
@given(noisy_comment())
def test_no_urls_or_mentions_survive(case):
    body, _ = case
    out = normalize_text(body)
    assert not URL_PATTERN.search(out)
    assert not any(tok.startswith("@") for tok in out.split())
    assert out == out.strip() and "  " not in out


@settings(max_examples=300)
@given(noisy_comment())
def test_emoji_outside_removed_tokens_preserved(case):
    body, words = case
    out = normalize_text(body)
    kept = [w for w in words if w not in URLS + USERS]
    assert out == " ".join(unicodedata.normalize("NFC", w) for w in kept)


@settings(max_examples=500)
@given(st.text(alphabet=st.sampled_from(list("ab@:/.wh tps😂́ \nđậ")), max_size=40))
def test_idempotent(text):
    once = normalize_text(text)
    assert normalize_text(once) == once
    assert re.search(r"\s\s", once) is None
