"""Stream events and the line-oriented stream file grammar.

    # comment
    ins <int>
    del <int>        (linear sketch only)
    count <int>
    distinct
    median
"""

from __future__ import annotations

from dataclasses import dataclass

KINDS_WITH_ITEM = ("ins", "del", "count")
KINDS_BARE = ("distinct", "median")


@dataclass(frozen=True)
class StreamUpdate:
    kind: str
    item: int | None = None

    def __post_init__(self):
        if self.kind in KINDS_WITH_ITEM:
            if not isinstance(self.item, int) or isinstance(self.item, bool):
                raise ValueError(f"{self.kind} needs an integer item")
        elif self.kind in KINDS_BARE:
            if self.item is not None:
                raise ValueError(f"{self.kind} takes no item")
        else:
            raise ValueError(f"unknown stream event {self.kind!r}")

    @property
    def is_query(self) -> bool:
        return self.kind not in ("ins", "del")

    def to_line(self) -> str:
        return self.kind if self.item is None else f"{self.kind} {self.item}"


class StreamParseError(ValueError):
    def __init__(self, lineno: int, msg: str):
        super().__init__(f"line {lineno}: {msg}")
        self.lineno = lineno


def parse_stream(text: str) -> list[StreamUpdate]:
    out = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        kind = parts[0]
        if kind in KINDS_WITH_ITEM:
            if len(parts) != 2:
                raise StreamParseError(lineno, f"'{kind}' expects one integer argument")
            try:
                item = int(parts[1])
            except ValueError:
                raise StreamParseError(lineno, f"bad integer {parts[1]!r}") from None
            out.append(StreamUpdate(kind, item))
        elif kind in KINDS_BARE:
            if len(parts) != 1:
                raise StreamParseError(lineno, f"'{kind}' takes no argument")
            out.append(StreamUpdate(kind))
        else:
            raise StreamParseError(lineno, f"unknown command {kind!r}")
    return out


def format_stream(updates) -> str:
    return "".join(u.to_line() + "\n" for u in updates)


def read_stream(path) -> list[StreamUpdate]:
    with open(path) as fh:
        return parse_stream(fh.read())
