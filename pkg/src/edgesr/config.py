"""Flat key=value config files.

One file can hold any mix of ``train.*``, ``sr.*``, ``edge.*`` and
``merge.*`` keys; ``#`` starts a comment.  Keys mirror the config dataclass
field names, so serializing and re-parsing a config is the identity.  The
same format carries the ensemble manifest and the checkpoint config echo.
"""

from dataclasses import fields

from .edgenet import EdgeNetConfig
from .errors import DataError
from .mergenet import MergeConfig
from .srnet import SRConfig


def parse_kv_text(text):
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DataError(f"line {lineno}: expected key=value, got {raw!r}")
        key, val = line.split("=", 1)
        out[key.strip()] = val.strip()
    return out


def read_kv(path):
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise DataError(f"cannot read config {path}: {e}")
    try:
        return parse_kv_text(text)
    except DataError as e:
        raise DataError(f"{path}: {e}")


def format_kv(d):
    return "".join(f"{k}={d[k]}\n" for k in sorted(d))


def write_kv(d, path):
    with open(path, "w", encoding="utf-8") as f:
        f.write(format_kv(d))


# ---------------------------------------------------------------------------
# typed extraction

def _convert(key, val, kind):
    try:
        if kind is bool:
            low = val.lower()
            if low in ("1", "true", "yes"):
                return True
            if low in ("0", "false", "no"):
                return False
            raise ValueError(val)
        if kind is tuple:
            return tuple(int(v) for v in val.split(",") if v.strip())
        return kind(val)
    except ValueError:
        raise DataError(f"config key {key}: cannot parse {val!r} as {kind.__name__}")


def _fill(cls, kv, prefix):
    kwargs = {}
    for f in fields(cls):
        key = prefix + "." + f.name
        if key in kv:
            kind = type(f.default) if f.default is not None else str
            kwargs[f.name] = _convert(key, kv[key], kind)
    return cls(**kwargs)


def _dump(cfg, prefix):
    out = {}
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if isinstance(v, tuple):
            v = ",".join(str(x) for x in v)
        elif isinstance(v, bool):
            v = "true" if v else "false"
        out[prefix + "." + f.name] = str(v)
    return out


def config_from_kv(cls, kv, prefix):
    """Generic dataclass hydration for any prefixed config."""
    return _fill(cls, kv, prefix)


def kv_from_config(cfg, prefix):
    return _dump(cfg, prefix)


def sr_config_from_kv(kv) -> SRConfig:
    return _fill(SRConfig, kv, "sr").validate()


def kv_from_sr_config(cfg) -> dict:
    return _dump(cfg, "sr")


def edge_config_from_kv(kv) -> EdgeNetConfig:
    return _fill(EdgeNetConfig, kv, "edge").validate()


def kv_from_edge_config(cfg) -> dict:
    return _dump(cfg, "edge")


def merge_config_from_kv(kv) -> MergeConfig:
    return _fill(MergeConfig, kv, "merge").validate()


def kv_from_merge_config(cfg) -> dict:
    return _dump(cfg, "merge")
