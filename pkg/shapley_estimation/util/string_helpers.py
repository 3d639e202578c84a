"""
Helper functions for turning numbers into the text written to CSV and cache files, and back.
"""
from shapley_estimation.constants import CACHE_SIGNIFICANT_DIGITS, CSV_SIGNIFICANT_DIGITS


def format_real(value, digits=CSV_SIGNIFICANT_DIGITS):
    """
    Format a real with a fixed number of significant digits.

    Negative zero is written as zero so that equal results always produce equal text.

    :param value: (float) - the number; None becomes an empty field
    :return: (str)
    """
    if value is None:
        return ""

    value = float(value)
    if value == 0.0:
        value = 0.0
    return format(value, ".%dg" % digits)


def format_utility(value):
    """Enough digits for a float64 to survive a round trip through text."""
    return format_real(value, CACHE_SIGNIFICANT_DIGITS)


def parse_int_list(text):
    """'0, 1,2' -> [0, 1, 2]; empty text gives an empty list."""
    text = (text or "").strip()
    if not text:
        return []
    return [int(x) for x in text.split(",")]


def parse_float_list(text):
    text = (text or "").strip()
    if not text:
        return []
    return [float(x) for x in text.split(",")]
