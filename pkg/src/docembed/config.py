"""Key-value configuration with env > flag > file > default precedence."""

from __future__ import annotations

import os

ENV_PREFIX = "DOCEMBED_"


def load_config_file(path) -> dict[str, str]:
    """Parse `key = value` lines; '#' starts a comment, blanks ignored."""
    values: dict[str, str] = {}
    with open(path, encoding="utf-8") as handle:
        for raw in handle:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"malformed config line: {raw.rstrip()!r}")
            key, _, value = line.partition("=")
            values[key.strip()] = value.strip()
    return values


def resolve(key: str, flag_value, file_values: dict[str, str], default, cast=str):
    """Resolve one setting; environment wins, then flag, file, default."""
    env = os.environ.get(ENV_PREFIX + key.upper().replace("-", "_"))
    if env is not None:
        return _cast(env, cast)
    if flag_value is not None:
        return flag_value if not isinstance(flag_value, str) else _cast(flag_value, cast)
    if key in file_values:
        return _cast(file_values[key], cast)
    return default


def _cast(value: str, cast):
    if cast is bool:
        lowered = value.strip().lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"cannot interpret {value!r} as a boolean")
    return cast(value)
