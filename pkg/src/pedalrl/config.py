"""Flat key-value experiment configuration.

One ``key = value`` per line; ``#`` starts a comment; blank lines are
ignored. Values become int, float or bool where they parse as one, else
stay strings. Keys are dotted paths (``plant.inertia``, ``hyper.gamma``)
consumed by the harness; the same ``key=value`` syntax is accepted as CLI
overrides, which win over the file.
"""


def parse_scalar(text: str):
    t = text.strip()
    low = t.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    try:
        return int(t)
    except ValueError:
        pass
    try:
        return float(t)
    except ValueError:
        pass
    return t


def parse_config_text(text: str) -> dict:
    out = {}
    for ln_no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError("config line %d: expected key = value, got %r" % (ln_no, raw))
        key, val = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ValueError("config line %d: empty key" % ln_no)
        out[key] = parse_scalar(val)
    return out


def load_config(path) -> dict:
    with open(path) as fh:
        return parse_config_text(fh.read())


def apply_overrides(cfg: dict, pairs) -> dict:
    """Merge ``key=value`` strings (e.g. from --set flags) into ``cfg``."""
    out = dict(cfg)
    for pair in pairs:
        if "=" not in pair:
            raise ValueError("override %r is not key=value" % pair)
        key, val = pair.split("=", 1)
        out[key.strip()] = parse_scalar(val)
    return out
