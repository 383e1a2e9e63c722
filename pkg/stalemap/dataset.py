"""Evaluation datasets on disk.

Layout::

    <root>/manifest.json
    <root>/<sequence_id>/stale/<frame_id>.json
    <root>/<sequence_id>/gt/<frame_id>.json
    <root>/<sequence_id>/pred/<frame_id>.json

Frames of a sequence are listed in the manifest, files are read in that
order.
"""

from __future__ import annotations

from logging import getLogger
from os import makedirs
from os.path import exists, join

from stalemap.errors import SchemaError
from stalemap.exchange import (
    decode_json,
    encode_json,
    load_ground_truth,
    load_map,
    load_prediction,
    save_ground_truth,
    save_map,
    save_prediction,
)
from stalemap.frames import ChangeLabel, Dataset, Frame, Sequence

MANIFEST = "manifest.json"
SCHEMA_VERSION = "1"

PARTS = {
    "stale": {
        "key": "stale",
        "title": "Stale prior",
        "load": load_map,
        "save": save_map,
    },
    "gt": {
        "key": "gt",
        "title": "Change labeled ground truth",
        "load": load_ground_truth,
        "save": save_ground_truth,
    },
    "pred": {
        "key": "pred",
        "title": "Detector output",
        "load": load_prediction,
        "save": save_prediction,
    },
}

log = getLogger(__name__)


def _check_name(name, what):
    if not name or name in (".", "..") or "/" in name or "\\" in name:
        msg = f"`{name}' is not usable as a file name"
        raise SchemaError(what, msg)
    return name


def build_manifest(ds: Dataset) -> dict:
    """Return manifest with frame ids and change tallies."""
    sequences = []
    for sequence in ds.sequences:
        insertions = len(sequence.changed_ids(ChangeLabel.INSERTED))
        deletions = len(sequence.changed_ids(ChangeLabel.DELETED))
        sequences.append(
            {
                "sequence_id": sequence.sequence_id,
                "frames": [it.frame_id for it in sequence.frames],
                "insertions": insertions,
                "deletions": deletions,
            },
        )
    changed = sum(1 for it in ds.sequences if it.has_change())
    return {
        "schema_version": SCHEMA_VERSION,
        "sequences": sequences,
        "totals": {
            "sequences": ds.s,
            "frames": ds.frame_count,
            "change_sequences": changed,
            "unchanged_sequences": ds.s - changed,
            "insertions": sum(it["insertions"] for it in sequences),
            "deletions": sum(it["deletions"] for it in sequences),
        },
    }


def _write(path, data):
    with open(path, "wb") as output:
        output.write(data)


def write_dataset(ds: Dataset, root) -> dict:
    """Write all frames and manifest under root, return the manifest."""
    manifest = build_manifest(ds)
    for sequence in ds.sequences:
        name = _check_name(sequence.sequence_id, "sequence_id")
        for part in PARTS.values():
            directory = join(root, name, part["key"])
            if not exists(directory):
                makedirs(directory)
        for frame in sequence.frames:
            file_name = _check_name(frame.frame_id, "frame_id") + ".json"
            _write(
                join(root, name, "stale", file_name),
                save_map(frame.stale),
            )
            _write(
                join(root, name, "gt", file_name),
                save_ground_truth(frame.ground_truth),
            )
            _write(
                join(root, name, "pred", file_name),
                save_prediction(frame.prediction),
            )
    _write(join(root, MANIFEST), encode_json(manifest))
    log.info(
        "%s: %d sequences, %d frames written",
        root,
        ds.s,
        ds.frame_count,
    )
    return manifest


def read_manifest(root) -> dict:
    """Read and check dataset manifest."""
    path = join(root, MANIFEST)
    with open(path, "rb") as source:
        manifest = decode_json(source.read(), path)
    if not isinstance(manifest, dict):
        raise SchemaError("", "JSON object expected", path)
    version = manifest.get("schema_version")
    if version != SCHEMA_VERSION:
        msg = f"unsupported version {version!r}"
        raise SchemaError("schema_version", msg, path)
    sequences = manifest.get("sequences")
    if not isinstance(sequences, list):
        raise SchemaError("sequences", "list expected", path)
    for i, item in enumerate(sequences):
        if not isinstance(item, dict):
            raise SchemaError(f"sequences[{i}]", "object expected", path)
        frames = item.get("frames")
        if not isinstance(item.get("sequence_id"), str):
            raise SchemaError(
                f"sequences[{i}].sequence_id",
                "string expected",
                path,
            )
        if not isinstance(frames, list) or not all(
            isinstance(it, str) for it in frames
        ):
            raise SchemaError(
                f"sequences[{i}].frames",
                "list of strings expected",
                path,
            )
    return manifest


def _load(root, sequence_id, part, frame_id, normalize):
    path = join(root, sequence_id, part["key"], frame_id + ".json")
    with open(path, "rb") as source:
        return part["load"](source.read(), normalize=normalize, source=path)


def read_dataset(root, *, normalize=True) -> Dataset:
    """Read dataset written by write_dataset."""
    manifest = read_manifest(root)
    sequences = []
    for item in manifest["sequences"]:
        sequence_id = _check_name(item["sequence_id"], "sequence_id")
        frames = []
        for frame_id in item["frames"]:
            _check_name(frame_id, "frame_id")
            stale, gt, pred = (
                _load(root, sequence_id, part, frame_id, normalize)
                for part in PARTS.values()
            )
            try:
                frames.append(Frame(stale, gt, pred))
            except ValueError as err:
                raise SchemaError(
                    "frame_id",
                    str(err),
                    join(root, sequence_id),
                ) from err
        try:
            sequences.append(Sequence(sequence_id, tuple(frames)))
        except ValueError as err:
            path = join(root, MANIFEST)
            raise SchemaError("frames", str(err), path) from err
    ds = Dataset(tuple(sequences))
    log.info("%s: %d sequences, %d frames", root, ds.s, ds.frame_count)
    return ds
