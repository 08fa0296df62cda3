import math

SIG_DIGITS = 6


def fmt(x) -> str:
    """Render numbers with a fixed 6 significant digits so reports are byte-stable."""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    out = f"{x:.{SIG_DIGITS}g}"
    return "0" if out == "-0" else out
