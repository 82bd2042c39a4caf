import math
import numbers


def _is_real(value):
    return isinstance(value, numbers.Real) and not isinstance(value, bool) and math.isfinite(value)


def validate_positive(name):
    """Returns a validator accepting finite real numbers strictly greater than zero."""
    def _validate(value):
        if not _is_real(value) or value <= 0:
            raise ValueError(f"{name} must be a positive number, got {value!r}.")
    return _validate


def validate_non_negative(name):
    def _validate(value):
        if not _is_real(value) or value < 0:
            raise ValueError(f"{name} must be a non-negative number, got {value!r}.")
    return _validate


def validate_probability(name):
    def _validate(value):
        if not _is_real(value) or not 0 <= value <= 1:
            raise ValueError(f"{name} must lie in [0, 1], got {value!r}.")
    return _validate


def validate_open_unit(name):
    def _validate(value):
        if not _is_real(value) or not 0 < value < 1:
            raise ValueError(f"{name} must lie strictly between 0 and 1, got {value!r}.")
    return _validate


def validate_integer(name, minimum=None):
    """Returns a validator accepting integers, optionally bounded from below."""
    def _validate(value):
        if not isinstance(value, numbers.Integral) or isinstance(value, bool):
            raise ValueError(f"{name} must be an integer, got {value!r}.")
        if minimum is not None and value < minimum:
            raise ValueError(f"{name} must be >= {minimum}, got {value}.")
    return _validate


def validate_boolean(name):
    def _validate(value):
        if not isinstance(value, bool):
            raise ValueError(f"{name} must be True or False, got {value!r}.")
    return _validate


def validate_optional_positive(name):
    inner = validate_positive(name)

    def _validate(value):
        if value is not None:
            inner(value)
    return _validate


def validate_choice(name, allowed):
    def _validate(value):
        if value not in allowed:
            raise ValueError(f"{name} must be one of: {', '.join(str(a) for a in allowed)}")
    return _validate


def validate_instance(name, cls):
    def _validate(value):
        if not isinstance(value, cls):
            raise ValueError(f"{name} must be a {cls.__name__}, got {type(value).__name__}.")
    return _validate


def validate_subset(name, allowed):
    """Returns a validator accepting a non-empty collection whose items are all in allowed."""
    def _validate(value):
        if isinstance(value, (str, bytes)) or not hasattr(value, '__iter__'):
            raise ValueError(f"{name} must be a collection, got {value!r}.")
        items = list(value)
        if not items:
            raise ValueError(f"{name} must not be empty.")
        unknown = [item for item in items if item not in allowed]
        if unknown:
            raise ValueError(f"{name} must be chosen from: {', '.join(str(a) for a in allowed)}; got {unknown}")
    return _validate
