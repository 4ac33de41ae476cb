"""Checkpoint directory format: a JSON manifest plus raw array blobs.

A checkpoint is one directory containing ``manifest.json`` and one
binary file per array. Float arrays are stored as little-endian
float64 (``.f64le``), integer arrays as little-endian int64
(``.i64le``); shapes live in the manifest, so the blobs are plain
``tofile`` dumps. Everything else (counters, RNG state, the resolved
run configuration and its hash) is JSON. The manifest is written in
canonical form (sorted keys, fixed indentation, trailing newline), so
saving, loading, and saving again reproduces every byte.
"""

import json
import os
import warnings

import numpy as np

from .errors import ConfigurationError, UsageError

CHECKPOINT_VERSION = 1
MANIFEST_NAME = "manifest.json"
_EXT = {"f64le": ("<f8", ".f64le"), "i64le": ("<i8", ".i64le")}


def _blob_kind(arr):
    if np.issubdtype(arr.dtype, np.floating):
        return "f64le"
    if np.issubdtype(arr.dtype, np.integer):
        return "i64le"
    raise UsageError(f"cannot checkpoint array of dtype {arr.dtype}")


def _flatten(node, path, blobs):
    """Replace arrays in a nested dict with blob descriptors."""
    if isinstance(node, dict):
        return {k: _flatten(v, f"{path}.{k}" if path else k, blobs)
                for k, v in node.items()}
    if isinstance(node, np.ndarray):
        kind = _blob_kind(node)
        name = path + _EXT[kind][1]
        if name in blobs:
            raise UsageError(f"duplicate checkpoint blob name {name!r}")
        blobs[name] = np.ascontiguousarray(node, dtype=_EXT[kind][0])
        return {"__blob__": name, "kind": kind, "shape": list(node.shape)}
    if isinstance(node, (np.floating, np.integer)):
        return node.item()
    return node


def _rehydrate(node, dir_path):
    if isinstance(node, dict):
        if "__blob__" in node:
            dtype, _ = _EXT[node["kind"]]
            blob = os.path.join(dir_path, node["__blob__"])
            expected = int(np.prod(node["shape"], dtype=np.int64))
            flat = np.fromfile(blob, dtype=dtype)
            if flat.size != expected:
                raise ConfigurationError(
                    f"checkpoint blob {blob} holds {flat.size} values, "
                    f"expected {expected}")
            return flat.astype(np.float64 if node["kind"] == "f64le"
                               else np.int64).reshape(node["shape"])
        return {k: _rehydrate(v, dir_path) for k, v in node.items()}
    return node


def save_checkpoint(dir_path, snapshot, config_dict, config_hash):
    """Write one checkpoint directory, replacing any previous contents."""
    os.makedirs(dir_path, exist_ok=True)
    for name in os.listdir(dir_path):
        if name == MANIFEST_NAME or name.endswith((".f64le", ".i64le")):
            os.remove(os.path.join(dir_path, name))
    blobs = {}
    manifest = {
        "version": CHECKPOINT_VERSION,
        "config_hash": config_hash,
        "config": config_dict,
        "episode": snapshot["episode"],
        "snapshot": _flatten(snapshot, "", blobs),
    }
    for name, arr in blobs.items():
        arr.tofile(os.path.join(dir_path, name))
    text = json.dumps(manifest, sort_keys=True, indent=2) + "\n"
    with open(os.path.join(dir_path, MANIFEST_NAME), "w") as fh:
        fh.write(text)
    return dir_path


def load_checkpoint(dir_path, expect_hash=None, force=False):
    """Read a checkpoint directory back into a nested dict.

    Returns the manifest with the ``snapshot`` subtree rehydrated into
    arrays. If ``expect_hash`` is given and disagrees with the stored
    configuration hash, loading is refused unless ``force`` is set, in
    which case a warning is issued instead.
    """
    manifest_path = os.path.join(dir_path, MANIFEST_NAME)
    if not os.path.isfile(manifest_path):
        raise ConfigurationError(f"no checkpoint manifest at {manifest_path}")
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    version = manifest.get("version")
    if version != CHECKPOINT_VERSION:
        raise ConfigurationError(
            f"incompatible checkpoint version {version!r}; this build "
            f"reads version {CHECKPOINT_VERSION}")
    stored = manifest.get("config_hash")
    if expect_hash is not None and stored != expect_hash:
        message = (f"checkpoint at {dir_path} was written under config "
                   f"hash {stored}, current config hashes to {expect_hash}")
        if not force:
            raise ConfigurationError(message + "; pass force to load anyway")
        warnings.warn(message, stacklevel=2)
    manifest["snapshot"] = _rehydrate(manifest["snapshot"], dir_path)
    return manifest
