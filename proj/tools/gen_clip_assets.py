#!/usr/bin/env python3
"""Regenerates the CLIP tokenizer assets and golden corpus used by the test suite.

Requires the open_clip_torch wheel (for its tokenizer module and BPE table),
ftfy and regex. Outputs:

  data/clip/vocab.json          token -> id map
  data/clip/merges.txt          "#version: 0.2" header + one merge pair per line
  src/unicode_tables.inc        code point classes used by the pre-tokenizer
  tests/data/clip_golden.jsonl  {"text", "ids"} produced by the reference tokenizer

Usage: gen_clip_assets.py OPEN_CLIP_PACKAGE_DIR REPO_ROOT
"""
import gzip
import html
import json
import os
import random
import sys

import ftfy
import regex


def bytes_to_unicode():
    bs = list(range(ord("!"), ord("~") + 1)) + list(range(ord("¡"), ord("¬") + 1)) + list(range(ord("®"), ord("ÿ") + 1))
    cs = bs[:]
    n = 0
    for b in range(2 ** 8):
        if b not in bs:
            bs.append(b)
            cs.append(2 ** 8 + n)
            n += 1
    return dict(zip(bs, [chr(c) for c in cs]))


def write_vocab(pkg_dir, root):
    lines = gzip.open(os.path.join(pkg_dir, "bpe_simple_vocab_16e6.txt.gz")).read().decode("utf-8").split("\n")
    merges = [tuple(m.split()) for m in lines[1:49152 - 256 - 2 + 1]]
    vocab = list(bytes_to_unicode().values())
    vocab = vocab + [v + "</w>" for v in vocab]
    vocab += ["".join(m) for m in merges]
    vocab += ["<|startoftext|>", "<|endoftext|>"]
    out = os.path.join(root, "data", "clip")
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "vocab.json"), "w", encoding="utf-8") as f:
        json.dump({t: i for i, t in enumerate(vocab)}, f, ensure_ascii=False, separators=(",", ":"))
    with open(os.path.join(out, "merges.txt"), "w", encoding="utf-8") as f:
        f.write("#version: 0.2\n")
        for a, b in merges:
            f.write(f"{a} {b}\n")
    return len(vocab)


def ranges(pred):
    out = []
    start = None
    for cp in range(0x110000 + 1):
        ok = cp < 0x110000 and not (0xD800 <= cp <= 0xDFFF) and pred(chr(cp))
        if ok and start is None:
            start = cp
        elif not ok and start is not None:
            out.append((start, cp - 1))
            start = None
    return out


def write_unicode_tables(root):
    flags = regex.IGNORECASE
    letter = regex.compile(r"[\p{L}]", flags)
    number = regex.compile(r"[\p{N}]", flags)
    other = regex.compile(r"[^\s\p{L}\p{N}]", flags)
    tables = {
        "kLetterRanges": ranges(lambda c: letter.match(c) is not None),
        "kNumberRanges": ranges(lambda c: number.match(c) is not None),
        "kOtherRanges": ranges(lambda c: other.match(c) is not None),
        "kSpaceRanges": ranges(lambda c: c.isspace()),
        # Final-sigma context, probed through str.lower itself: a character is
        # "cased" if it makes a following capital sigma final, "ignorable" if
        # the lookup skips over it.
        "kCasedRanges": ranges(lambda c: (c + "\u03a3").lower()[-1] == "\u03c2"),
        "kCaseIgnorableRanges": ranges(lambda c: ("A" + c + "\u03a3").lower()[-1] == "\u03c2"
                                       and (c + "\u03a3").lower()[-1] != "\u03c2"),
    }
    lower = []
    for cp in range(0x110000):
        if 0xD800 <= cp <= 0xDFFF:
            continue
        c = chr(cp)
        lc = c.lower()
        if lc != c:
            lower.append((cp, [ord(x) for x in lc]))
    with open(os.path.join(root, "src", "unicode_tables.inc"), "w") as f:
        f.write("// Generated by tools/gen_clip_assets.py. Do not edit.\n\n")
        for name, rs in tables.items():
            f.write(f"constexpr CodePointRange {name}[] = {{\n")
            for a, b in rs:
                f.write(f"    {{0x{a:X}, 0x{b:X}}},\n")
            f.write("};\n\n")
        f.write("constexpr LowerMapping kLowerMappings[] = {\n")
        for cp, seq in lower:
            padded = seq + [0] * (3 - len(seq))
            f.write(f"    {{0x{cp:X}, {len(seq)}, {{{', '.join(f'0x{x:X}' for x in padded)}}}}},\n")
        f.write("};\n")


ROOMS = ["bedroom", "living room", "kitchen", "bathroom", "dining room", "study", "children's room", "balcony",
         "cloakroom", "foyer"]
STYLES = ["modern", "Nordic", "Japanese", "wabi-sabi", "industrial", "French", "new Chinese", "minimalist",
          "mid-century", "art déco", "rococò", "Scandinavian"]
QUALITY = ["hd", "high clarity", "no watermark", "4K", "bright", "well-lit", "sharp", "8k uhd"]
FURNITURE = ["bed", "nightstand", "sofa", "coffee table", "TV cabinet", "dining table", "chairs", "wardrobe",
             "desk", "bookshelf", "floor lamp", "pendant light", "rug", "curtains", "armchair", "ottoman",
             "bathtub", "toilet", "vanity", "mirror", "island", "bar stools", "sideboard", "plants"]
ADJ = ["warm", "soft", "neutral", "walnut", "oak", "marble", "matte black", "brushed brass", "linen", "velvet",
       "terrazzo", "cream-colored", "sage green", "terracotta", "ivory", "charcoal", "rattan", "smoked-glass"]
NOUNS = ["walls", "ceiling", "floor", "wood flooring", "tiles", "lighting", "window", "molding", "panels",
         "wallpaper", "cabinetry", "countertop", "backsplash", "headboard", "cushions", "throw pillows"]
EXTRAS = ["The owner's collection of ceramics sits on the shelf.", "It's a 3.5m × 4.2m space.",
          "Ceiling height: 2.8 m (approx.)", "We're using 2700K LEDs; they don't glare.",
          "Built in the 1920s, renovated in 2023!", "Café-style seating — cosy & bright.",
          "Temperature ~22°C, area 18m² / 194 ft².", "A ½-height partition separates the zones...",
          "Naïve folk-art prints hang above the bed.", "日本風 tatami mat in the corner.",
          "Ölmalerei on the east wall; Ñandú feather décor.", "Light #3 dims to 40%, light #4 to 25%.",
          "\"Less is more\" governs the layout.", "I'll add more plants later, you'd like them.",
          "Σ-shaped shelving, ΑΒΓ letters engraved.", "THE LARGE WINDOW FACES SOUTH.",
          "[IMG_0042.jpg] reference @ 1:50 scale", "Costs ≈ $12,500 + tax."]


def sentence(rng):
    parts = [rng.choice(ADJ), rng.choice(NOUNS)]
    if rng.random() < 0.6:
        parts += ["with", rng.choice(ADJ), rng.choice(FURNITURE)]
    s = " ".join(parts)
    return s[0].upper() + s[1:] + rng.choice([".", ",", ";", ".", "!"])


def caption(rng):
    fields = [rng.choice(ROOMS), rng.choice(STYLES)]
    fields += rng.sample(QUALITY, rng.randint(0, 3))
    fields += rng.sample(FURNITURE, rng.randint(0, 6))
    n_sent = rng.choice([0, 1, 2, 4, 8, 12, 20])
    text = " ".join(sentence(rng) if rng.random() < 0.8 else rng.choice(EXTRAS) for _ in range(n_sent))
    if text:
        fields.append(text)
    out = ", ".join(fields)
    if rng.random() < 0.1:
        out = out.replace(" ", rng.choice(["  ", "\t", " \n "]), 3)
    if rng.random() < 0.05:
        out = "  " + out + "  "
    return out


def write_golden(pkg_dir, root, count=1000):
    sys.path.insert(0, os.path.dirname(pkg_dir))
    from open_clip.tokenizer import SimpleTokenizer, basic_clean

    tok = SimpleTokenizer(bpe_path=os.path.join(pkg_dir, "bpe_simple_vocab_16e6.txt.gz"))
    rng = random.Random(20240715)
    rows = []
    while len(rows) < count:
        c = caption(rng)
        # The C++ tokenizer expects already-clean UTF-8; keep only captions the
        # reference cleaner leaves untouched apart from outer whitespace.
        if basic_clean(c) != c.strip() or ftfy.fix_text(c) != c or html.unescape(c) != c:
            continue
        rows.append({"text": c, "ids": tok.encode(c)})
    with open(os.path.join(root, "tests", "data", "clip_golden.jsonl"), "w", encoding="utf-8") as f:
        for r in rows:
            f.write(json.dumps(r, ensure_ascii=False) + "\n")
    return rows


if __name__ == "__main__":
    pkg, repo = sys.argv[1], sys.argv[2]
    if len(sys.argv) > 3 and sys.argv[3] == "--tables-only":
        write_unicode_tables(repo)
        sys.exit(0)
    print("vocab entries:", write_vocab(pkg, repo))
    write_unicode_tables(repo)
    rows = write_golden(pkg, repo)
    lens = sorted(len(r["ids"]) for r in rows)
    print("golden captions:", len(rows), "token lengths min/median/max:", lens[0], lens[len(lens) // 2], lens[-1])
