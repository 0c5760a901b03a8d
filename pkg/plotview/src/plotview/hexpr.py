"""Just enough expression evaluation to draw the h = 0 contour.

The verifier's expression language maps onto Python syntax once `^`
becomes `**`, so after a whitelist tokenization the string is compiled
and evaluated with numpy ufuncs.  Nothing else from the verifier is
reimplemented here.
"""

from __future__ import annotations

import re

import numpy as np

from .records import PlotviewError

_TOKEN = re.compile(
    r"\s*("
    r"\d+\.?\d*(?:[eE][+-]?\d+)?"  # numbers
    r"|\.\d+(?:[eE][+-]?\d+)?"
    r"|x\d+|u\d+|r"  # variables
    r"|sin|cos|tan|exp|log|sqrt"
    r"|\*\*|[-+*/^(),]"
    r")"
)

_FUNCS = {name: getattr(np, name) for name in ("sin", "cos", "tan", "exp", "log", "sqrt")}


def compile_expression(text: str):
    """Compile an expression string to a callable over keyword arrays."""
    pos, out = 0, []
    while pos < len(text):
        if text[pos].isspace():
            pos += 1
            continue
        match = _TOKEN.match(text, pos)
        if match is None:
            raise PlotviewError(f"unsupported token in expression at {text[pos:pos + 12]!r}")
        out.append("**" if match.group(1) == "^" else match.group(1))
        pos = match.end()
    code = compile(" ".join(out), "<expression>", "eval")

    def evaluate(**variables):
        scope = dict(_FUNCS)
        scope.update(variables)
        return eval(code, {"__builtins__": {}}, scope)

    return evaluate
