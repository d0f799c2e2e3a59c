"""Shared fixtures: the worked APE example used across the suite."""

import pytest

SRC_LINE = ("auto vector masks apply predefined patterns as vector masks "
            "to bitmap and vector objects .")
MT_LINE = ("automatische Vektor- masken vordefinierten Mustern wie Vektor- "
           "masken , Bitmaps und Vektor- objekte anwenden .")
PE_LINE = ("Automatische Vektormasken wenden vordefinierte Mustern als "
           "Vektormasken auf Bitmap- und Vektorobjekte an .")

SRC_PLUS_MT_LINE = SRC_LINE + " BREAK " + MT_LINE

#: MT side with subword pieces merged back into words (12 words).
MT_WORDS = ["automatische", "Vektormasken", "vordefinierten", "Mustern", "wie",
            "Vektormasken", ",", "Bitmaps", "und", "Vektorobjekte", "anwenden", "."]

GOLD_TAGS = "OK OK BAD OK BAD OK BAD BAD OK OK BAD OK".split()

#: Aligned source word per MT subword token, as in the MT-aligned row.
MT_ALIGNMENT = ["auto", "vector", "masks", "apply", "patterns", "as", "vector",
                "masks", "to", "to", "and", "vector", "objects", "apply", "."]

MT_ALIGNED_LINE = ("automatische|auto Vektor-|vector masken|masks "
                   "vordefinierten|apply Mustern|patterns wie|as Vektor-|vector "
                   "masken|masks ,|to Bitmaps|to und|and Vektor-|vector "
                   "objekte|objects anwenden|apply .|.")

#: Word-level (surface, (pos, dep, head-pos)) annotation for the factored row.
SRC_FACTORED_WORDS = [
    ("Auto", ("JJ", "amod", "NNS")),
    ("vector", ("NN", "compound", "NNS")),
    ("masks", ("NNS", "nsubj", "VBP")),
    ("apply", ("VBP", "ROOT", "VBP")),
    ("predefined", ("VBN", "amod", "NNS")),
    ("patterns", ("NNS", "dobj", "VBP")),
    ("as", ("IN", "prep", "NNS")),
    ("vector", ("NN", "compound", "NNS")),
    ("masks", ("NNS", "pobj", "IN")),
    ("to", ("TO", "aux", "VB")),
    ("bitmap", ("VB", "relcl", "NNS")),
    ("and", ("CC", "cc", "VB")),
    ("vector", ("NN", "compound", "NNS")),
    ("objects", ("NNS", "conj", "VB")),
    (".", (".", "punct", "VBP")),
]

MT_FACTORED_WORDS = [
    ("Automatische", ("ADJA", "nk", "NN")),
    ("Vektormasken", ("NN", "sb", "VVINF")),
    ("vordefinierten", ("ADJA", "nk", "NN")),
    ("Mustern", ("NN", "pd", "NN")),
    ("wie", ("KOKOM", "cd", "NN")),
    ("Vektormasken", ("NN", "cj", "KOKOM")),
    (",", ("$,", "punct", "NN")),
    ("Bitmaps", ("NN", "cj", "NN")),
    ("und", ("KON", "cd", "NN")),
    ("Vektorobjekte", ("NN", "cj", "KON")),
    ("anwenden", ("VVINF", "ROOT", "VVINF")),
    (".", ("$.", "punct", "VVINF")),
]

#: Display-marker segmentation of the factored MT side: word -> pieces.
MT_SEGMENTATION = {
    "Vektormasken": ("Vektor-", "masken"),
    "Vektorobjekte": ("Vektor-", "objekte"),
}


@pytest.fixture
def paper_example():
    return {
        "src": SRC_LINE.split(),
        "mt": MT_LINE.split(),
        "pe": PE_LINE.split(),
        "mt_words": MT_WORDS,
        "gold_tags": GOLD_TAGS,
        "src_plus_mt": SRC_PLUS_MT_LINE,
        "mt_alignment": MT_ALIGNMENT,
        "mt_aligned_line": MT_ALIGNED_LINE,
        "src_factored": SRC_FACTORED_WORDS,
        "mt_factored": MT_FACTORED_WORDS,
        "mt_segmentation": MT_SEGMENTATION,
    }


@pytest.fixture
def triple_files(tmp_path):
    """The paper example written out as three parallel one-line files."""
    src = tmp_path / "corpus.src"
    mt = tmp_path / "corpus.mt"
    pe = tmp_path / "corpus.pe"
    src.write_text(SRC_LINE + "\n", encoding="utf-8")
    mt.write_text(MT_LINE + "\n", encoding="utf-8")
    pe.write_text(PE_LINE + "\n", encoding="utf-8")
    return src, mt, pe
