"""Lightweight syntax-aware method extraction for brace-syntax sources.

Two passes: a lexer masks string/char literals and comments (so braces
inside them cannot break nesting) while recording comment spans, then a
structural scan matches class and method bodies by brace balancing.
This is deliberately not a full grammar; it only needs to find maximal
method bodies, their signatures, and the doc comment block directly above.
"""

from __future__ import annotations

import bisect
import re
from dataclasses import dataclass
from typing import Optional

JAVA_KEYWORDS = frozenset(
    """abstract assert boolean break byte case catch char class const continue
    default do double else enum extends final finally float for goto if
    implements import instanceof int interface long native new package private
    protected public return short static strictfp super switch synchronized
    this throw throws transient try void volatile while var record yield
    sealed permits true false null""".split()
)

_CONTROL_NAMES = frozenset(
    "if for while switch catch do try synchronized else return new".split()
)

_MODIFIER_KEYWORDS = frozenset(
    "public private protected static final abstract synchronized native default strictfp transient volatile sealed".split()
)

_CLASS_RE = re.compile(r"\b(class|interface|enum|record)\s+([A-Za-z_$][\w$]*)")
_THROWS_TAIL_RE = re.compile(r"^\s*(throws\s+[\w\s.,<>\[\]$]+)?\s*$")
_IDENT_RE = re.compile(r"[A-Za-z_$][\w$]*")


@dataclass
class CommentSpan:
    start: int  # offset of the first delimiter char
    end: int  # offset one past the last delimiter char
    text: str  # raw text including delimiters
    is_block: bool
    is_doc: bool  # started with /**


@dataclass
class ExtractedMethod:
    name: str
    qualified_name: str
    signature: str
    body: str
    start_line: int
    end_line: int
    leading_comment: Optional[str] = None
    comment_start_line: Optional[int] = None
    comment_end_line: Optional[int] = None


@dataclass
class ParseResult:
    methods: list[ExtractedMethod]
    parse_warning: bool = False


def mask_code(text: str) -> tuple[str, list[CommentSpan]]:
    """Replace comment and string/char literal contents with spaces.

    Newlines are preserved so offsets and line numbers stay valid in the
    masked buffer. Returns the masked text and all comment spans in order.
    """
    out = list(text)
    comments: list[CommentSpan] = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        nxt = text[i + 1] if i + 1 < n else ""
        if c == "/" and nxt == "/":
            j = text.find("\n", i)
            j = n if j == -1 else j
            comments.append(CommentSpan(i, j, text[i:j], is_block=False, is_doc=False))
            for k in range(i, j):
                out[k] = " "
            i = j
        elif c == "/" and nxt == "*":
            j = text.find("*/", i + 2)
            j = n if j == -1 else j + 2
            is_doc = text.startswith("/**", i) and not text.startswith("/**/", i)
            comments.append(CommentSpan(i, j, text[i:j], is_block=True, is_doc=is_doc))
            for k in range(i, j):
                if out[k] != "\n":
                    out[k] = " "
            i = j
        elif c == '"' or c == "'":
            quote = c
            j = i + 1
            while j < n:
                if text[j] == "\\":
                    j += 2
                    continue
                if text[j] == quote or text[j] == "\n":
                    break
                j += 1
            j = min(j, n)
            for k in range(i + 1, j):
                if out[k] != "\n":
                    out[k] = " "
            i = j + 1
        else:
            i += 1
    return "".join(out), comments


def _line_starts(text: str) -> list[int]:
    starts = [0]
    for m in re.finditer(r"\n", text):
        starts.append(m.end())
    return starts


def _line_of(starts: list[int], offset: int) -> int:
    """1-based line number of a character offset."""
    return bisect.bisect_right(starts, offset)


def _match_brace(masked: str, open_idx: int) -> Optional[int]:
    depth = 0
    for i in range(open_idx, len(masked)):
        c = masked[i]
        if c == "{":
            depth += 1
        elif c == "}":
            depth -= 1
            if depth == 0:
                return i
    return None


def _skip_annotations(masked: str, start: int, end: int) -> int:
    """Return the offset of the first header token that is not an
    annotation. Comments were masked to spaces, so they skip as blanks."""
    i = start
    while i < end:
        while i < end and masked[i].isspace():
            i += 1
        if i < end and masked[i] == "@":
            i += 1
            while i < end and (masked[i].isalnum() or masked[i] in "._$"):
                i += 1
            while i < end and masked[i].isspace():
                i += 1
            if i < end and masked[i] == "(":
                depth = 0
                while i < end:
                    if masked[i] == "(":
                        depth += 1
                    elif masked[i] == ")":
                        depth -= 1
                        if depth == 0:
                            i += 1
                            break
                    i += 1
            continue
        break
    return i


def _method_name_from_header(header: str, enclosing_class: Optional[str]) -> Optional[str]:
    """Return the method name if the header looks like a method/constructor
    signature, else None. The header must already be annotation-free."""
    if ";" in header or "=" in header or "->" in header:
        return None
    paren = header.find("(")
    if paren == -1:
        return None
    depth = 0
    close = -1
    for i in range(paren, len(header)):
        if header[i] == "(":
            depth += 1
        elif header[i] == ")":
            depth -= 1
            if depth == 0:
                close = i
                break
    if close == -1:
        return None
    if not _THROWS_TAIL_RE.match(header[close + 1 :]):
        return None
    idents = _IDENT_RE.findall(header[:paren])
    if not idents:
        return None
    name = idents[-1]
    if name in _CONTROL_NAMES or name in ("class", "interface", "enum"):
        return None
    # No return type before the name means constructor; accept only when the
    # name matches the enclosing class (rejects enum constant bodies).
    if all(t in _MODIFIER_KEYWORDS for t in idents[:-1]) and name != enclosing_class:
        return None
    return name


def _merge_line_comments(comments: list[CommentSpan], starts: list[int], text: str) -> list[CommentSpan]:
    """Merge runs of // comments on consecutive lines into one span so a
    //-style doc block associates as a unit."""
    merged: list[CommentSpan] = []
    for c in comments:
        if (
            merged
            and not c.is_block
            and not merged[-1].is_block
            and _line_of(starts, c.start) == _line_of(starts, merged[-1].end - 1) + 1
            and not text[merged[-1].end : c.start].strip()
        ):
            prev = merged[-1]
            merged[-1] = CommentSpan(
                prev.start, c.end, text[prev.start : c.end], is_block=False, is_doc=False
            )
        else:
            merged.append(c)
    return merged


_INLINE_TAG_RE = re.compile(r"\{@\w+\s*([^{}]*)\}")


def strip_comment_markup(raw: str) -> str:
    """Turn a comment block into plain prose: delimiters and leading
    asterisks removed, inline {@tag x} unwrapped, @tag lines dropped."""
    text = raw.strip()
    if text.startswith("/**"):
        text = text[3:]
    elif text.startswith("/*"):
        text = text[2:]
    if text.endswith("*/"):
        text = text[:-2]
    lines = []
    for line in text.splitlines():
        line = line.strip()
        if line.startswith("*"):
            line = line[1:].strip()
        elif line.startswith("//"):
            line = line[2:].strip()
        if line.startswith("@"):
            continue  # javadoc tag lines are metadata, not prose
        lines.append(line)
    prose = "\n".join(lines).strip()
    prose = _INLINE_TAG_RE.sub(lambda m: m.group(1).strip(), prose)
    return prose


def _leading_comment_for(
    comments: list[CommentSpan],
    starts: list[int],
    masked: str,
    region_start: int,
    sig_start: int,
) -> Optional[CommentSpan]:
    """Last comment above the signature with only blank or annotation lines
    in between (the standard doc-comment association rule)."""
    sig_line = _line_of(starts, sig_start)
    best: Optional[CommentSpan] = None
    for c in comments:
        if c.end > sig_start or c.start < region_start:
            continue
        end_line = _line_of(starts, c.end - 1)
        if end_line >= sig_line:
            continue
        ok = True
        for ln in range(end_line + 1, sig_line):
            line_text = masked[starts[ln - 1] : starts[ln] - 1 if ln < len(starts) else len(masked)]
            stripped = line_text.strip()
            if stripped and not stripped.startswith("@"):
                ok = False
                break
        if ok:
            best = c
    return best


def extract_methods(source_text: str, language_tag: str = "java") -> ParseResult:
    """Extract top-level methods (with nested constructs kept inside their
    body) and the doc comment directly above each signature.

    Methods inside anonymous classes or lambdas are not emitted separately;
    the enclosing method spans the whole construct. On unbalanced braces the
    methods found so far are returned with parse_warning set.
    """
    if not source_text.strip():
        return ParseResult([], False)
    masked, comments = mask_code(source_text)
    starts = _line_starts(source_text)
    comments = _merge_line_comments(comments, starts, source_text)
    result = ParseResult([], False)

    def scan(region_start: int, region_end: int, class_stack: list[str]) -> None:
        i = region_start
        seg_start = region_start
        while i < region_end:
            ch = masked[i]
            if ch == ";":
                seg_start = i + 1
            elif ch == "}":
                seg_start = i + 1
            elif ch == "{":
                header_span = (seg_start, i)
                close = _match_brace(masked, i)
                header = masked[seg_start:i]
                cls = _CLASS_RE.search(header)
                if close is None or close > region_end:
                    # salvage whatever sits inside an unclosed class body;
                    # an unclosed method body cannot be trusted
                    result.parse_warning = True
                    if cls:
                        scan(i + 1, region_end, class_stack + [cls.group(2)])
                    return
                if cls:
                    scan(i + 1, close, class_stack + [cls.group(2)])
                else:
                    sig_start = _skip_annotations(masked, seg_start, i)
                    name = _method_name_from_header(
                        masked[sig_start:i], class_stack[-1] if class_stack else None
                    )
                    if name:
                        sig_text = " ".join(source_text[sig_start:i].split())
                        start_line = _line_of(starts, sig_start)
                        end_line = _line_of(starts, close)
                        lead = _leading_comment_for(
                            comments, starts, masked, header_span[0], sig_start
                        )
                        result.methods.append(
                            ExtractedMethod(
                                name=name,
                                qualified_name=".".join(class_stack + [name]),
                                signature=sig_text,
                                body=source_text[sig_start : close + 1],
                                start_line=start_line,
                                end_line=end_line,
                                leading_comment=(
                                    strip_comment_markup(lead.text) if lead else None
                                ),
                                comment_start_line=(
                                    _line_of(starts, lead.start) if lead else None
                                ),
                                comment_end_line=(
                                    _line_of(starts, lead.end - 1) if lead else None
                                ),
                            )
                        )
                i = close
                seg_start = close + 1
            i += 1

    scan(0, len(masked), [])
    return ParseResult(result.methods, result.parse_warning)
