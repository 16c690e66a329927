from __future__ import annotations

from collections.abc import Mapping
from typing import Any, Literal



def merge_dicts(
    a: dict[str, Any],
    b: Mapping[str, Any],
    priority: Literal["raise", "a", "b"] = "raise",
    skip_none: bool = False,
) -> dict[str, Any]:
    """Merge mapping ``b`` into dict ``a`` in place.

    Conflicting keys are resolved by ``priority``: keep ``a``, take ``b`` or
    raise. With ``skip_none`` keys of ``b`` holding ``None`` count as unset.
    """
    for key, val_b in b.items():
        if skip_none and val_b is None:
            continue
        if key not in a:
            a[key] = val_b
            continue
        val_a = a[key]
        if isinstance(val_a, dict) and isinstance(val_b, Mapping):
            merge_dicts(val_a, val_b, priority, skip_none)
        elif val_a != val_b:
            if priority == "b":
                a[key] = val_b
            elif priority == "raise":
                raise ValueError(f"Conflict at {key}: {val_a} != {val_b}")
    return a
