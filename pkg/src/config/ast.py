"""Abstract syntax tree of configuration files."""

from typing import Any, Dict, List, Optional


class ASTNode:
    """Base class for all AST nodes."""

    def __repr__(self) -> str:
        return self.__class__.__name__


class EntryNode(ASTNode):
    """A ``key = value`` line.

    ``value`` is a Python scalar (int, float, bool, str), a list of scalars,
    or a ``range`` for ``a..b`` (both ends inclusive).
    """

    def __init__(self, key: str, value: Any, line: int, column: int):
        """
        Initialize an EntryNode.

        Args:
            key: Entry key
            value: Parsed value
            line: Line of the key (1-indexed)
            column: Column of the key (1-indexed)
        """
        self.key = key
        self.value = value
        self.line = line
        self.column = column

    def __repr__(self) -> str:
        return f"EntryNode({self.key!r} = {self.value!r}, line={self.line})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, EntryNode):
            return False
        return (self.key, self.value, self.line, self.column) == (other.key, other.value, other.line, other.column)


class SectionNode(ASTNode):
    """A ``[name]`` header and the entries below it."""

    def __init__(self, name: str, line: int, column: int = 1, entries: Optional[List[EntryNode]] = None):
        self.name = name
        self.line = line
        self.column = column
        self.entries: List[EntryNode] = list(entries or [])

    @property
    def head(self) -> str:
        """First component of a dotted name (``engine`` for ``engine.lob``)."""
        return self.name.split(".", 1)[0]

    @property
    def tail(self) -> Optional[str]:
        """Rest of a dotted name, or None."""
        parts = self.name.split(".", 1)
        return parts[1] if len(parts) > 1 else None

    def get(self, key: str) -> Optional[EntryNode]:
        for entry in self.entries:
            if entry.key == key:
                return entry
        return None

    def as_dict(self) -> Dict[str, Any]:
        return {entry.key: entry.value for entry in self.entries}

    def __repr__(self) -> str:
        if not self.entries:
            return f"SectionNode({self.name!r}, [])"
        lines = [f"SectionNode({self.name!r}"]
        for i, entry in enumerate(self.entries):
            prefix = "  ├─ " if i < len(self.entries) - 1 else "  └─ "
            lines.append(prefix + repr(entry))
        lines.append(")")
        return "\n".join(lines)


class ConfigDocument(ASTNode):
    """Root node: the sections of one file, in file order."""

    def __init__(self, sections: List[SectionNode]):
        self.sections = sections

    def section(self, name: str) -> Optional[SectionNode]:
        for section in self.sections:
            if section.name == name:
                return section
        return None

    def __repr__(self) -> str:
        if not self.sections:
            return "ConfigDocument([])"
        lines = ["ConfigDocument("]
        for i, section in enumerate(self.sections):
            last = i == len(self.sections) - 1
            section_lines = repr(section).split("\n")
            lines.append(("  └─ " if last else "  ├─ ") + section_lines[0])
            for line in section_lines[1:]:
                lines.append(("     " if last else "  │  ") + line)
        lines.append(")")
        return "\n".join(lines)
