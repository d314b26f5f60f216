"""English Snowball stemmer (Porter2), implemented from the published algorithm.

Pure-Python, no external data. Words of one or two letters and the published
exceptional forms are returned unchanged/mapped before the main algorithm runs.
"""

from __future__ import annotations

_VOWELS = frozenset("aeiouy")
_DOUBLES = ("bb", "dd", "ff", "gg", "mm", "nn", "pp", "rr", "tt")
_LI_ENDINGS = frozenset("cdeghkmnrt")

_EXCEPTIONS = {
    "skis": "ski",
    "skies": "sky",
    "dying": "die",
    "lying": "lie",
    "tying": "tie",
    "idly": "idl",
    "gently": "gentl",
    "ugly": "ugli",
    "early": "earli",
    "only": "onli",
    "singly": "singl",
    "sky": "sky",
    "news": "news",
    "howe": "howe",
    "atlas": "atlas",
    "cosmos": "cosmos",
    "bias": "bias",
    "andes": "andes",
}

# Left invariant if they survive step 1a verbatim.
_POST_1A_INVARIANT = frozenset(
    ["inning", "outing", "canning", "herring", "earring", "proceed", "exceed", "succeed"]
)

# R1 starts right after these prefixes instead of at the usual position.
_R1_PREFIXES = ("gener", "commun", "arsen")

_STEP2_RULES = [
    # (suffix, replacement) in longest-first order; None replacement = conditional.
    ("ization", "ize"),
    ("ational", "ate"),
    ("fulness", "ful"),
    ("ousness", "ous"),
    ("iveness", "ive"),
    ("tional", "tion"),
    ("biliti", "ble"),
    ("lessli", "less"),
    ("entli", "ent"),
    ("ation", "ate"),
    ("alism", "al"),
    ("aliti", "al"),
    ("ousli", "ous"),
    ("iviti", "ive"),
    ("fulli", "ful"),
    ("enci", "ence"),
    ("anci", "ance"),
    ("abli", "able"),
    ("izer", "ize"),
    ("ator", "ate"),
    ("alli", "al"),
    ("bli", "ble"),
    ("ogi", None),
    ("li", None),
]

_STEP3_RULES = [
    ("ational", "ate"),
    ("tional", "tion"),
    ("alize", "al"),
    ("icate", "ic"),
    ("iciti", "ic"),
    ("ative", None),
    ("ical", "ic"),
    ("ness", ""),
    ("ful", ""),
]

_STEP4_SUFFIXES = [
    "ement",
    "ance",
    "ence",
    "able",
    "ible",
    "ment",
    "ant",
    "ent",
    "ism",
    "ate",
    "iti",
    "ous",
    "ive",
    "ize",
    "ion",
    "al",
    "er",
    "ic",
]


def _is_vowel(ch: str) -> bool:
    return ch in _VOWELS


def _mark_consonant_ys(word: str) -> str:
    # y at the start or after a vowel acts as a consonant; mark it Y.
    chars = list(word)
    for i, ch in enumerate(chars):
        if ch == "y" and (i == 0 or _is_vowel(chars[i - 1])):
            chars[i] = "Y"
    return "".join(chars)


def _region_after(word: str, start: int) -> int:
    """Position after the first non-vowel that follows a vowel, from `start`."""
    i = start
    n = len(word)
    while i < n and not _is_vowel(word[i]):
        i += 1
    while i < n and _is_vowel(word[i]):
        i += 1
    return min(i + 1, n) if i < n else n


def _compute_r1(word: str) -> int:
    for prefix in _R1_PREFIXES:
        if word.startswith(prefix):
            return len(prefix)
    return _region_after(word, 0)


def _ends_short_syllable(word: str) -> bool:
    n = len(word)
    if n == 2:
        return _is_vowel(word[0]) and not _is_vowel(word[1])
    if n >= 3:
        c1, v, c2 = word[-3], word[-2], word[-1]
        return (
            not _is_vowel(c1)
            and _is_vowel(v)
            and not _is_vowel(c2)
            and c2 not in "wxY"
        )
    return False


def _is_short_word(word: str, r1: int) -> bool:
    return r1 >= len(word) and _ends_short_syllable(word)


def _step0(word: str) -> str:
    for suffix in ("'s'", "'s", "'"):
        if word.endswith(suffix):
            return word[: -len(suffix)]
    return word


def _step1a(word: str) -> str:
    if word.endswith("sses"):
        return word[:-2]
    if word.endswith(("ied", "ies")):
        return word[:-2] if len(word) > 4 else word[:-1]
    if word.endswith(("us", "ss")):
        return word
    if word.endswith("s"):
        # Delete only when a vowel occurs before the penultimate letter.
        if any(_is_vowel(ch) for ch in word[:-2]):
            return word[:-1]
    return word


def _step1b(word: str, r1: int) -> str:
    if word.endswith(("eed", "eedly")):
        suffix_len = 5 if word.endswith("eedly") else 3
        if len(word) - suffix_len >= r1:
            return word[:-suffix_len] + "ee"
        return word
    for suffix in ("ingly", "edly", "ing", "ed"):
        if word.endswith(suffix):
            stem = word[: -len(suffix)]
            if not any(_is_vowel(ch) for ch in stem):
                return word
            if stem.endswith(("at", "bl", "iz")):
                return stem + "e"
            if stem.endswith(_DOUBLES):
                return stem[:-1]
            if _is_short_word(stem, r1):
                return stem + "e"
            return stem
    return word


def _step1c(word: str) -> str:
    if (
        len(word) > 2
        and word[-1] in "yY"
        and not _is_vowel(word[-2])
    ):
        return word[:-1] + "i"
    return word


def _step2(word: str, r1: int) -> str:
    for suffix, replacement in _STEP2_RULES:
        if not word.endswith(suffix):
            continue
        if len(word) - len(suffix) < r1:
            return word
        stem = word[: -len(suffix)]
        if suffix == "ogi":
            return stem + "og" if stem.endswith("l") else word
        if suffix == "li":
            return stem if stem and stem[-1] in _LI_ENDINGS else word
        return stem + replacement
    return word


def _step3(word: str, r1: int, r2: int) -> str:
    for suffix, replacement in _STEP3_RULES:
        if not word.endswith(suffix):
            continue
        if len(word) - len(suffix) < r1:
            return word
        if suffix == "ative":
            return word[:-5] if len(word) - 5 >= r2 else word
        return word[: -len(suffix)] + replacement
    return word


def _step4(word: str, r2: int) -> str:
    for suffix in _STEP4_SUFFIXES:
        if not word.endswith(suffix):
            continue
        if len(word) - len(suffix) < r2:
            return word
        if suffix == "ion":
            return word[:-3] if word[-4:-3] in ("s", "t") else word
        return word[: -len(suffix)]
    return word


def _step5(word: str, r1: int, r2: int) -> str:
    if word.endswith("e"):
        pos = len(word) - 1
        if pos >= r2:
            return word[:-1]
        if pos >= r1 and not _ends_short_syllable(word[:-1]):
            return word[:-1]
        return word
    if word.endswith("l") and len(word) - 1 >= r2 and word[-2:-1] == "l":
        return word[:-1]
    return word


def stem_word(word: str) -> str:
    """Return the Porter2 stem of a lowercase word."""
    word = word.lower()
    if word in _EXCEPTIONS:
        return _EXCEPTIONS[word]
    if len(word) <= 2:
        return word
    if word.startswith("'"):
        word = word[1:]
    word = _mark_consonant_ys(word)
    r1 = _compute_r1(word)
    r2 = _region_after(word, r1)

    word = _step0(word)
    word = _step1a(word)
    if word in _POST_1A_INVARIANT:
        return word
    word = _step1b(word, r1)
    word = _step1c(word)
    word = _step2(word, r1)
    word = _step3(word, r1, r2)
    word = _step4(word, r2)
    word = _step5(word, r1, r2)
    return word.replace("Y", "y")
