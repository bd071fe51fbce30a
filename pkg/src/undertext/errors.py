"""Exception and warning types shared across the toolkit.

The CLI maps these onto its exit-code contract: usage problems exit 1
(handled by argparse), DataError exits 2, NumericError exits 3.
"""


class UndertextError(Exception):
    """Base class for all toolkit errors."""


class DataError(UndertextError):
    """Bad or inconsistent input data: missing files, malformed annotation
    lines, dimension mismatches, out-of-bounds points, wrong class counts."""


class NumericError(UndertextError):
    """Numerical failure: indefinite matrices after regularization,
    degenerate clusters, incompatible model/stack pairs."""


class UndertextWarning(UserWarning):
    """Recoverable data oddities: constant bands, duplicate annotation
    points, degenerate rescale ranges."""
