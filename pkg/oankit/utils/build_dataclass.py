import dataclasses
from typing import Any
from typing import Dict
from typing import List
from typing import Mapping
from typing import Union

from typeguard import check_type


def build_dataclass(dataclass, data: Mapping[str, Any], prefix: str = ""):
    """Build a (possibly nested) dataclass from a mapping.

    Unknown keys and type mismatches are collected instead of raised one by
    one, so a caller can report every violation of a config at once.
    Missing keys fall back to the field defaults.

    Returns:
        Tuple of the instance (None on failure) and the list of violations.

    Examples:
        >>> @dataclasses.dataclass
        ... class A:
        ...     x: int = 1
        >>> build_dataclass(A, {"x": 3})
        (A(x=3), [])
        >>> build_dataclass(A, {"y": 3})
        (None, ['y: unknown key'])
    """
    violations: List[str] = []
    if not isinstance(data, Mapping):
        where = prefix.rstrip(".") or "<root>"
        return None, [f"{where}: must be a mapping, got {type(data)}"]

    fields = {f.name: f for f in dataclasses.fields(dataclass)}
    for key in data:
        if key not in fields:
            violations.append(f"{prefix}{key}: unknown key")

    kwargs: Dict[str, Any] = {}
    for name, field in fields.items():
        if name not in data:
            continue
        value = data[name]
        if dataclasses.is_dataclass(field.type):
            sub, sub_violations = build_dataclass(
                field.type, value, prefix=f"{prefix}{name}."
            )
            violations.extend(sub_violations)
            kwargs[name] = sub
            continue
        value = _coerce(field.type, value)
        try:
            check_type(f"{prefix}{name}", value, field.type)
        except TypeError as e:
            violations.append(f"{prefix}{name}: {e}")
            continue
        kwargs[name] = value

    if violations:
        return None, violations
    try:
        retval = dataclass(**kwargs)
    except ValueError as e:
        return None, [f"{prefix}{e}" if prefix else str(e)]
    return retval, []


def _coerce(tp, value):
    """Adapt yaml values to the annotated type: lists to tuples, ints to floats."""
    if tp is float and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    origin = getattr(tp, "__origin__", None)
    args = getattr(tp, "__args__", ())
    if origin is Union:
        non_none = [a for a in args if a is not type(None)]
        return _coerce(non_none[0], value) if len(non_none) == 1 else value
    if origin is tuple and isinstance(value, list):
        if len(args) == 2 and args[1] is Ellipsis:
            return tuple(_coerce(args[0], v) for v in value)
        if len(args) == len(value):
            return tuple(_coerce(a, v) for a, v in zip(args, value))
        return tuple(value)
    return value
