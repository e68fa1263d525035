import math
import os

from .exceptions import ValidationError


def check_positive(value, name):
    value = float(value)
    if not (value > 0 and math.isfinite(value)):
        raise ValidationError(f"{name} must be positive and finite, got {value!r}")
    return value


def check_nonnegative(value, name):
    value = float(value)
    if not (value >= 0 and math.isfinite(value)):
        raise ValidationError(f"{name} must be non-negative and finite, got {value!r}")
    return value


def check_tap_angle(theta, name="theta"):
    """Tap separation in radians, strictly inside (0, 2*pi)."""
    theta = float(theta)
    if not (0.0 < theta < 2.0 * math.pi):
        raise ValidationError(f"{name} must lie in (0, 2*pi) rad, got {theta!r}")
    return theta


def wrap_angle(theta):
    return float(theta) % (2.0 * math.pi)


def n_threads():
    """Worker cap from ``RINGBUS_THREADS`` (default 1)."""
    raw = os.environ.get("RINGBUS_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValidationError(f"RINGBUS_THREADS must be an integer, got {raw!r}")
    return max(1, n)


def parallel_map(fn, items):
    """Ordered map, threaded when ``RINGBUS_THREADS`` > 1."""
    items = list(items)
    workers = min(n_threads(), len(items))
    if workers <= 1:
        return [fn(item) for item in items]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
