"""Dataset containers and the flat binary cache format.

Cache files are a magic tag, a little-endian uint32 header length, a JSON
header describing array names/shapes/dtypes plus free-form metadata, then
the raw array bytes concatenated in header order.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .concepts import ConceptId, FeatureAnswers
from .geometry import Pose
from .render import PointCloudObservation
from .scene import PlacedObject, SceneState

_MAGIC = b"CLB1"


def save_arrays(path, arrays: dict, meta: dict | None = None) -> None:
    names = list(arrays)
    header = {
        "arrays": [
            {
                "name": name,
                "shape": list(arrays[name].shape),
                "dtype": arrays[name].dtype.name,
            }
            for name in names
        ],
        "meta": meta or {},
    }
    blob = json.dumps(header).encode()
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for name in names:
            fh.write(np.ascontiguousarray(arrays[name]).tobytes())


def load_arrays(path):
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise ValueError(f"{path} is not a cache file")
        (hlen,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(hlen).decode())
        arrays = {}
        for spec in header["arrays"]:
            shape = tuple(spec["shape"])
            dtype = np.dtype(spec["dtype"])
            count = int(np.prod(shape)) if shape else 1
            buf = fh.read(count * dtype.itemsize)
            arrays[spec["name"]] = np.frombuffer(buf, dtype=dtype).reshape(shape).copy()
    return arrays, header["meta"]


# --------------------------------------------------------------------------
# Containers
# --------------------------------------------------------------------------


@dataclass
class LabeledDataset:
    """Query records: state, privileged features (masked if feature queries
    were used), binary label, and optionally the rendered cloud."""

    concept: ConceptId
    feature_answers: FeatureAnswers | None = None
    scenes: list = field(default_factory=list)
    feature_rows: list = field(default_factory=list)
    labels: list = field(default_factory=list)
    clouds: list | None = None

    def append(self, scene, features, label, cloud=None) -> None:
        self.scenes.append(scene)
        self.feature_rows.append(np.asarray(features, dtype=np.float64))
        self.labels.append(int(label))
        if cloud is not None:
            if self.clouds is None:
                self.clouds = []
            self.clouds.append(cloud)

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def features(self) -> np.ndarray:
        return np.asarray(self.feature_rows)

    @property
    def label_array(self) -> np.ndarray:
        return np.asarray(self.labels, dtype=np.int64)


@dataclass
class BootstrapDataset:
    """Auto-labeled records for training the perceptual concept."""

    concept: ConceptId
    scenes: list
    features: np.ndarray  # raw (unmasked) privileged vectors
    labels: np.ndarray
    clouds: list


@dataclass
class EvalDataset:
    """Exactly balanced ground-truth test set."""

    concept: ConceptId
    scenes: list
    features: np.ndarray
    labels: np.ndarray
    clouds: list | None = None


def clouds_matrix(clouds) -> np.ndarray:
    """(B, 2N, 4) training tensor from a list of observations."""
    return np.stack([c.combined() for c in clouds])


# --------------------------------------------------------------------------
# Scene (de)serialization for caching
# --------------------------------------------------------------------------


def scenes_to_arrays(scenes, catalog) -> dict:
    index = {spec.shape_id: i for i, spec in enumerate(catalog)}
    n = len(scenes)
    out = {
        "anchor_shape": np.empty(n, dtype=np.int32),
        "moving_shape": np.empty(n, dtype=np.int32),
        "anchor_pos": np.empty((n, 3)),
        "anchor_quat": np.empty((n, 4)),
        "moving_pos": np.empty((n, 3)),
        "moving_quat": np.empty((n, 4)),
        "camera_pos": np.empty((n, 3)),
        "camera_quat": np.empty((n, 4)),
        "table_height": np.empty(n),
    }
    for i, s in enumerate(scenes):
        out["anchor_shape"][i] = index[s.anchor.spec.shape_id]
        out["moving_shape"][i] = index[s.moving.spec.shape_id]
        out["anchor_pos"][i] = s.anchor.pose.position
        out["anchor_quat"][i] = s.anchor.pose.orientation
        out["moving_pos"][i] = s.moving.pose.position
        out["moving_quat"][i] = s.moving.pose.orientation
        out["camera_pos"][i] = s.camera.position
        out["camera_quat"][i] = s.camera.orientation
        out["table_height"][i] = s.table_height
    return out


def scenes_from_arrays(arrays, catalog) -> list:
    scenes = []
    for i in range(len(arrays["anchor_shape"])):
        scenes.append(
            SceneState(
                anchor=PlacedObject(
                    catalog[int(arrays["anchor_shape"][i])],
                    Pose(arrays["anchor_pos"][i], arrays["anchor_quat"][i]),
                ),
                moving=PlacedObject(
                    catalog[int(arrays["moving_shape"][i])],
                    Pose(arrays["moving_pos"][i], arrays["moving_quat"][i]),
                ),
                camera=Pose(arrays["camera_pos"][i], arrays["camera_quat"][i]),
                table_height=float(arrays["table_height"][i]),
            )
        )
    return scenes


def _clouds_to_arrays(clouds) -> dict:
    return {
        "cloud_anchor": np.stack([c.anchor_points for c in clouds]),
        "cloud_moving": np.stack([c.moving_points for c in clouds]),
    }


def _clouds_from_arrays(arrays):
    return [
        PointCloudObservation(a, m)
        for a, m in zip(arrays["cloud_anchor"], arrays["cloud_moving"])
    ]


def save_eval_dataset(path, ds: EvalDataset, catalog, seed: int | None = None) -> None:
    arrays = scenes_to_arrays(ds.scenes, catalog)
    arrays["features"] = ds.features
    arrays["labels"] = ds.labels.astype(np.int64)
    if ds.clouds is not None:
        arrays.update(_clouds_to_arrays(ds.clouds))
    save_arrays(path, arrays, {"concept": ds.concept.value, "kind": "eval", "seed": seed})


def load_eval_dataset(path, catalog) -> EvalDataset:
    arrays, meta = load_arrays(path)
    clouds = _clouds_from_arrays(arrays) if "cloud_anchor" in arrays else None
    return EvalDataset(
        concept=ConceptId(meta["concept"]),
        scenes=scenes_from_arrays(arrays, catalog),
        features=arrays["features"],
        labels=arrays["labels"],
        clouds=clouds,
    )


def save_bootstrap_dataset(path, ds: BootstrapDataset, catalog, seed=None) -> None:
    arrays = scenes_to_arrays(ds.scenes, catalog)
    arrays["features"] = ds.features
    arrays["labels"] = ds.labels.astype(np.int64)
    arrays.update(_clouds_to_arrays(ds.clouds))
    save_arrays(
        path, arrays, {"concept": ds.concept.value, "kind": "bootstrap", "seed": seed}
    )


def load_bootstrap_dataset(path, catalog) -> BootstrapDataset:
    arrays, meta = load_arrays(path)
    return BootstrapDataset(
        concept=ConceptId(meta["concept"]),
        scenes=scenes_from_arrays(arrays, catalog),
        features=arrays["features"],
        labels=arrays["labels"],
        clouds=_clouds_from_arrays(arrays),
    )


def save_labeled_dataset(path, ds: LabeledDataset, catalog, seed=None) -> None:
    arrays = scenes_to_arrays(ds.scenes, catalog)
    arrays["features"] = ds.features
    arrays["labels"] = ds.label_array
    if ds.clouds is not None:
        arrays.update(_clouds_to_arrays(ds.clouds))
    meta = {
        "concept": ds.concept.value,
        "kind": "labeled",
        "seed": seed,
        "feature_answers": None
        if ds.feature_answers is None
        else {
            "f1_single_object": ds.feature_answers.f1_single_object,
            "f2_frame": ds.feature_answers.f2_frame,
            "f3_sizes_matter": ds.feature_answers.f3_sizes_matter,
        },
    }
    save_arrays(path, arrays, meta)


def load_labeled_dataset(path, catalog) -> LabeledDataset:
    arrays, meta = load_arrays(path)
    fa = meta.get("feature_answers")
    ds = LabeledDataset(
        concept=ConceptId(meta["concept"]),
        feature_answers=None if fa is None else FeatureAnswers(**fa),
    )
    clouds = _clouds_from_arrays(arrays) if "cloud_anchor" in arrays else None
    for i, scene in enumerate(scenes_from_arrays(arrays, catalog)):
        ds.append(
            scene,
            arrays["features"][i],
            int(arrays["labels"][i]),
            None if clouds is None else clouds[i],
        )
    return ds
