"""Rebuild the bundled sample corpus and tone/rhyme lexicon.

Source poems: the `chinese-poetry` npm package (MIT, JackeyGao), directory
dist/quantangshi. Readings come from pypinyin; traditional text is converted
with opencc-python-reimplemented.

    npm pack chinese-poetry && tar xzf chinese-poetry-*.tgz
    python3 crates/core/data/build_sample.py package/dist/quantangshi crates/core/data/
"""
import glob
import json
import os
import re
import sys

import opencc
from pypinyin import Style, pinyin

# Characters read with a level tone in Mandarin that carried the entering
# (oblique) tone in the classical system.
ENTERING = set(
    "一七八十白石国出急竹独福觉黑节发学读笛敌德得格隔阁薄博伯泊湿识食实"
    "夕惜昔息席习极集及吉击积迹织职直只质"
    "屋哭粥宿逐族俗伏服佛拂毒熟竹烛叔菊局足卒读"
    "杀插答达拔罚察狭峡甲杂压鸭说雪绝别结洁缺约着觉折舌叠蝶碟劫接"
)
ENTERING = {c for c in ENTERING if "一" <= c <= "鿿"}

CJK = re.compile(r"^[一-鿿]+$")
conv = opencc.OpenCC("t2s")


def readings(ch):
    out = pinyin(ch, style=Style.TONE3, heteronym=True, neutral_tone_with_five=True)[0]
    return out


def tone_class(ch):
    if ch in ENTERING:
        return "Z"
    classes = set()
    for r in readings(ch):
        t = r[-1]
        if not t.isdigit():
            continue
        classes.add("P" if t in "12" else "Z")
    if classes == {"P"}:
        return "P"
    if classes == {"Z"}:
        return "Z"
    if classes == {"P", "Z"}:
        return "E"
    return None


def rhyme_class(ch):
    f = pinyin(ch, style=Style.FINALS, strict=True)[0][0]
    return f or None


def split_lines(paragraphs):
    text = conv.convert("".join(paragraphs))
    parts = [p for p in re.split(r"[，。？！；、]", text) if p]
    return parts


def main(src, out):
    files = sorted(glob.glob(os.path.join(src, "poet.tang.*.json")), key=lambda p: int(p.split(".")[-2]))
    picked = {5: [], 7: []}
    want = 250
    for path in files:
        for poem in json.load(open(path, encoding="utf-8")):
            lines = split_lines(poem["paragraphs"])
            if len(lines) != 4 or not all(CJK.match(l) for l in lines):
                continue
            n = len(lines[0])
            if n not in (5, 7) or any(len(l) != n for l in lines):
                continue
            if len(picked[n]) >= want:
                continue
            t2, t3, t4 = (tone_class(lines[i][-1]) for i in (1, 2, 3))
            r2, r3, r4 = (rhyme_class(lines[i][-1]) for i in (1, 2, 3))
            if t2 not in ("P", "E") or t4 not in ("P", "E") or t3 not in ("Z", "E"):
                continue
            if r2 is None or r2 != r4 or r3 == r2:
                continue
            if any(tone_class(c) is None or rhyme_class(c) is None for l in lines for c in l):
                continue
            picked[n].append("|".join(lines))
        if all(len(v) >= want for v in picked.values()):
            break
    poems = picked[5] + picked[7]
    with open(os.path.join(out, "sample_corpus.txt"), "w", encoding="utf-8") as f:
        for p in poems:
            f.write(p + "\n")

    chars = sorted({c for p in poems for c in p if c != "|"} | set("一声秋雁连天远万里归帆隔水遥惆怅旧游零落处白头萧瑟满江桥散霜风"))
    with open(os.path.join(out, "tone.tsv"), "w", encoding="utf-8") as f:
        for c in chars:
            f.write(f"{c}\t{tone_class(c)}\n")
    with open(os.path.join(out, "rhyme.tsv"), "w", encoding="utf-8") as f:
        for c in chars:
            f.write(f"{c}\t{rhyme_class(c)}\n")
    print(len(picked[5]), len(picked[7]), len(chars))


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
