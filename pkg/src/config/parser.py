"""Parser for the key-value configuration format.

A file is a sequence of ``[section]`` headers, each followed by
``key = value`` lines. Values are numbers, ``true``/``false``, double-quoted
strings, bare words, comma-separated lists of those, or inclusive integer
ranges ``a..b``. ``#`` starts a comment.
"""

import logging
import re
from typing import List, Union

from lark import Lark, Token, Transformer, v_args
from lark.exceptions import UnexpectedCharacters, UnexpectedEOF, UnexpectedInput, UnexpectedToken

from ..errors import UsageError
from .ast import ConfigDocument, EntryNode, SectionNode

logger = logging.getLogger(__name__)

GRAMMAR = r"""
start: (_NL | section | entry)*

section: "[" NAME "]" _NL
entry: NAME "=" value _NL
value: scalar ("," scalar)*

?scalar: RANGE   -> range
       | NUMBER  -> number
       | STRING  -> string
       | NAME    -> word

RANGE.3: /[+-]?\d+\.\.[+-]?\d+/
NUMBER.2: /[+-]?\d+(\.\d+)?([eE][+-]?\d+)?/
STRING: /"(\\.|[^"\\\n])*"/
NAME: /[A-Za-z_][A-Za-z0-9_.\-]*/
COMMENT: /#[^\n]*/
_NL: /\r?\n/

%ignore /[ \t]+/
%ignore COMMENT
"""

INTEGER = re.compile(r"[+-]?\d+$")
BOOLEANS = {"true": True, "false": False}


class ConfigSyntaxError(UsageError):
    """Exception raised when a configuration file is not well-formed."""

    def __init__(self, message: str, line: int, column: int):
        """
        Initialize a ConfigSyntaxError.

        Args:
            message: Error message
            line: Line number where error occurred (1-indexed)
            column: Column number where error occurred (1-indexed)
        """
        self.message = message
        self.line = line
        self.column = column
        super().__init__(f"Syntax error: {message} at line {line}, column {column}")


@v_args(inline=True)
class _ToNodes(Transformer):
    """Turns the parse tree into a flat list of section and entry nodes."""

    def start(self, *items):
        return list(items)

    def section(self, name: Token):
        return SectionNode(str(name), name.line, name.column - 1)

    def entry(self, key: Token, value):
        return EntryNode(str(key), value, key.line, key.column)

    def value(self, *scalars):
        return scalars[0] if len(scalars) == 1 else list(scalars)

    def range(self, token: Token):
        low, high = (int(part) for part in str(token).split(".."))
        return range(low, high + 1)

    def number(self, token: Token):
        text = str(token)
        return int(text) if INTEGER.match(text) else float(text)

    def string(self, token: Token):
        return re.sub(r"\\(.)", r"\1", str(token)[1:-1])

    def word(self, token: Token):
        return BOOLEANS.get(str(token), str(token))


_PARSER = Lark(GRAMMAR, parser="lalr", transformer=_ToNodes())


def _describe(error: UnexpectedInput, text: str) -> str:
    if isinstance(error, UnexpectedCharacters):
        return f"Unexpected character {text[error.pos_in_stream]!r}"
    if isinstance(error, UnexpectedToken):
        if error.token.type == "$END":
            return "Unexpected end of file"
        found = "end of line" if error.token.type == "_NL" else repr(str(error.token))
        expected = sorted(name for name in error.expected if not name.startswith("_"))
        hint = f" (expected {', '.join(expected)})" if expected else ""
        return f"Unexpected {found}{hint}"
    return "Unexpected end of file"


def parse_config(text: str) -> ConfigDocument:
    """
    Parse configuration text.

    Args:
        text: File contents

    Returns:
        ConfigDocument with sections in file order

    Raises:
        ConfigSyntaxError: Malformed line, or an entry before the first section
    """
    if not text.endswith("\n"):
        text += "\n"
    try:
        items: List[Union[SectionNode, EntryNode]] = _PARSER.parse(text)
    except UnexpectedEOF as e:
        raise ConfigSyntaxError(_describe(e, text), text.count("\n"), 1) from None
    except UnexpectedInput as e:
        raise ConfigSyntaxError(_describe(e, text), e.line, e.column) from None

    sections: List[SectionNode] = []
    for item in items:
        if isinstance(item, SectionNode):
            sections.append(item)
        elif not sections:
            raise ConfigSyntaxError(f"Entry {item.key!r} outside a section", item.line, item.column)
        else:
            sections[-1].entries.append(item)
    logger.debug("parsed %d config sections", len(sections))
    return ConfigDocument(sections)
