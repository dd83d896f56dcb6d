"""Structured JSON reports written by the command-line tool."""

import hashlib
import json
import math
import os

from . import __version__


def digest_bytes(data):
    return "sha256:" + hashlib.sha256(data).hexdigest()


def digest_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return "sha256:" + h.hexdigest()


def _clean(obj):
    """Make numpy scalars/arrays JSON-native; reject NaN and infinity."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "tolist"):
        return _clean(obj.tolist())
    if isinstance(obj, float) and not math.isfinite(obj):
        raise ValueError(f"non-finite value {obj!r} in report")
    return obj


def meta(command, input_digest, seed):
    return {"toolkit_version": __version__, "command": command,
            "input_digest": input_digest, "seed": seed}


def dumps(payload):
    return json.dumps(_clean(payload), indent=2, sort_keys=True) + "\n"


def write_json(path, payload):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(payload))
    return path


def write_report(out_dir, name, command, input_digest, seed, body):
    payload = {"meta": meta(command, input_digest, seed)}
    payload.update(body)
    return write_json(os.path.join(out_dir, name), payload)
