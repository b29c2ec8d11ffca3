"""Reader and writer for the key-value plus tabular text format.

Every data file shipped with or consumed by the package uses the same
layout::

    # comment
    key = value
    [section]
    # whitespace separated rows
    1 0 0 0.5

Keys before the first section form the header. Rows inside a section are
split on whitespace (or commas) and kept together with their line numbers so
validators can point at the offending line.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import ValidationError


@dataclass
class Document:
    header: dict[str, str] = field(default_factory=dict)
    header_lines: dict[str, int] = field(default_factory=dict)
    sections: dict[str, list[tuple[int, list[str]]]] = field(default_factory=dict)
    source: str | None = None

    def require(self, key: str) -> str:
        if key not in self.header:
            raise ValidationError(f"missing header key '{key}'", source=self.source)
        return self.header[key]

    def get_int(self, key: str, default: int | None = None) -> int:
        if key not in self.header:
            if default is None:
                self.require(key)
            return default
        try:
            return int(self.header[key])
        except ValueError:
            raise ValidationError(
                f"header key '{key}' must be an integer, got '{self.header[key]}'",
                line=self.header_lines[key],
                source=self.source,
            ) from None

    def get_float(self, key: str, default: float | None = None) -> float:
        if key not in self.header:
            if default is None:
                self.require(key)
            return default
        try:
            return float(self.header[key])
        except ValueError:
            raise ValidationError(
                f"header key '{key}' must be a number, got '{self.header[key]}'",
                line=self.header_lines[key],
                source=self.source,
            ) from None

    def rows(self, name: str, required: bool = True) -> list[tuple[int, list[str]]]:
        if name not in self.sections:
            if required:
                raise ValidationError(f"missing section [{name}]", source=self.source)
            return []
        return self.sections[name]

    def fail(self, message: str, line: int | None = None):
        raise ValidationError(message, line=line, source=self.source)


def parse_document(text: str, source: str | None = None) -> Document:
    doc = Document(source=source)
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
            if not current:
                raise ValidationError("empty section name", line=lineno, source=source)
            if current in doc.sections:
                raise ValidationError(f"duplicate section [{current}]", line=lineno, source=source)
            doc.sections[current] = []
            continue
        if current is None:
            if "=" not in line:
                raise ValidationError(f"expected 'key = value', got '{line}'", line=lineno, source=source)
            key, value = (part.strip() for part in line.split("=", 1))
            if not key:
                raise ValidationError("empty key", line=lineno, source=source)
            if key in doc.header:
                raise ValidationError(f"duplicate key '{key}'", line=lineno, source=source)
            doc.header[key] = value
            doc.header_lines[key] = lineno
        else:
            doc.sections[current].append((lineno, line.replace(",", " ").split()))
    return doc


def parse_floats(doc: Document, lineno: int, tokens: list[str]) -> list[float]:
    try:
        return [float(tok) for tok in tokens]
    except ValueError:
        doc.fail(f"non-numeric value in row: {' '.join(tokens)}", lineno)


def format_number(value: float) -> str:
    """Shortest representation that reads back to the same double."""
    value = float(value)
    if math.isfinite(value) and value == int(value) and abs(value) < 1e15:
        return str(int(value))
    return repr(value)


def render_document(header: dict[str, object], sections: dict[str, tuple[str, list[list[object]]]]) -> str:
    """Render a header and ``{name: (column comment, rows)}`` sections."""
    lines = [f"{key} = {value}" for key, value in header.items()]
    for name, (comment, rows) in sections.items():
        lines.append(f"[{name}]")
        if comment:
            lines.append(f"# {comment}")
        for row in rows:
            lines.append(" ".join(format_number(v) if isinstance(v, (int, float)) and not isinstance(v, bool) else str(v) for v in row))
    return "\n".join(lines) + "\n"
