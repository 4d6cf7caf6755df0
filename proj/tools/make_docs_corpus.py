#!/usr/bin/env python3
"""Build a plain-text English corpus (one paragraph per line) from the
reStructuredText documentation shipped in the Django source distribution.

Usage: make_docs_corpus.py Django-X.Y.Z.tar.gz out.txt [min_chars]
"""
import re
import sys
import tarfile

ROLE = re.compile(r":[a-zA-Z:+-]+:`([^`<]*?)(?:\s*<[^>]*>)?`")
LINK = re.compile(r"`([^`<]*?)\s*<[^>]*>`__?")
LITERAL = re.compile(r"``([^`]*)``")
EMPH = re.compile(r"\*{1,2}([^*]+)\*{1,2}")
REF = re.compile(r"`([^`]*)`_?_?")


def clean_inline(text):
    text = ROLE.sub(lambda m: m.group(1).lstrip("~!"), text)
    text = LINK.sub(r"\1", text)
    text = LITERAL.sub(r"\1", text)
    text = EMPH.sub(r"\1", text)
    text = REF.sub(r"\1", text)
    return re.sub(r"\s+", " ", text).strip()


def paragraphs(rst):
    lines = rst.splitlines()
    out, cur = [], []
    skip_indent = None
    for line in lines:
        stripped = line.strip()
        indent = len(line) - len(line.lstrip())
        if skip_indent is not None:
            if stripped == "" or indent > skip_indent:
                continue
            skip_indent = None
        if stripped.startswith(".."):
            skip_indent = indent
            if cur:
                out.append(" ".join(cur)); cur = []
            continue
        if stripped == "" or re.fullmatch(r"[=\-~^*#+\"'`]{3,}", stripped):
            if cur:
                out.append(" ".join(cur)); cur = []
            continue
        if indent > 0 and not stripped.startswith(("*", "-", "#.")) and not cur:
            continue
        if stripped.startswith((">>>", "$ ", "{%", "<")):
            continue
        body = stripped
        if body.endswith("::"):
            body = body[:-1]
            skip_indent = indent
        cur.append(body)
    if cur:
        out.append(" ".join(cur))
    for p in out:
        p = clean_inline(p)
        letters = sum(c.isalpha() for c in p)
        if len(p) >= 40 and letters / len(p) > 0.75:
            yield p


def main():
    src, dst = sys.argv[1], sys.argv[2]
    min_chars = int(sys.argv[3]) if len(sys.argv) > 3 else 2_600_000
    total = 0
    with tarfile.open(src) as tar, open(dst, "w", encoding="utf-8") as out:
        names = sorted(m.name for m in tar.getmembers()
                       if "/docs/" in m.name and m.name.endswith(".txt")
)
        for name in names:
            rst = tar.extractfile(name).read().decode("utf-8")
            for p in paragraphs(rst):
                out.write(p + "\n")
                total += sum(not c.isspace() for c in p)
            if total >= min_chars:
                break
    print(f"{total} non-whitespace characters", file=sys.stderr)


if __name__ == "__main__":
    main()
