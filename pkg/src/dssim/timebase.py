"""Time unit helpers.

The simulator keeps all timestamps and durations as integer nanoseconds so
event ordering never depends on float rounding. Configuration files and
reports use microseconds.
"""

NS_PER_US = 1000


def us_to_ns(us: float) -> int:
    """Convert microseconds to integer nanoseconds (round to nearest)."""
    return round(us * NS_PER_US)


def ns_to_us(ns: int) -> float:
    """Convert integer nanoseconds to microseconds."""
    return ns / NS_PER_US
