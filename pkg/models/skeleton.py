"""
Data models for skeletons and motions.
Contains SkeletonTopology, MotionSample and LabelSet plus the tree operations
(validation, topological order, root paths) the reparameterization relies on.
"""

import heapq
from dataclasses import dataclass, field, replace
from typing import Any, Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from utils.error_handling import (
    BadBoneIndexError,
    CycleError,
    DimensionMismatchError,
    DisconnectedJointError,
    UnknownJointError,
    ValidationError,
)
from utils.validation import array_validator


@dataclass
class SkeletonTopology:
    """Rooted joint tree with contiguous bone ids and named bone groups."""

    joint_count: int
    root: int
    parents: List[Optional[int]]
    parts: Dict[str, FrozenSet[int]] = field(default_factory=dict)
    joint_names: Optional[List[str]] = None
    bones: Optional[List[Tuple[int, int]]] = None
    rest_offsets: Optional[np.ndarray] = None
    name: str = "skeleton"
    parts_approximate: bool = False

    def __post_init__(self):
        """Validate the tree and derive bone indexing."""
        self.parents = [None if p is None else int(p) for p in self.parents]
        self.parts = {str(k): frozenset(int(b) for b in v) for k, v in self.parts.items()}
        if self.bones is not None:
            self.bones = [(int(p), int(c)) for p, c in self.bones]
        if self.rest_offsets is not None:
            self.rest_offsets = array_validator.as_float_array(
                self.rest_offsets, "rest_offsets"
            )

        validate_topology(self)

        if self.bones is None:
            self.bones = [
                (self.parents[j], j) for j in range(self.joint_count) if j != self.root
            ]

        self.bone_index: Dict[Tuple[int, int], int] = {
            pair: bone_id for bone_id, pair in enumerate(self.bones)
        }
        self._bone_of_child = np.full(self.joint_count, -1, dtype=np.int64)
        for bone_id, (_, child) in enumerate(self.bones):
            self._bone_of_child[child] = bone_id

        self._children: Dict[int, List[int]] = {j: [] for j in range(self.joint_count)}
        for j, p in enumerate(self.parents):
            if p is not None:
                self._children[p].append(j)

        self._order: Optional[Tuple[int, ...]] = None
        self._path_matrix: Optional[np.ndarray] = None

    @property
    def bone_count(self) -> int:
        return self.joint_count - 1

    @property
    def parent_of_bone(self) -> np.ndarray:
        return np.array([p for p, _ in self.bones], dtype=np.int64)

    @property
    def child_of_bone(self) -> np.ndarray:
        return np.array([c for _, c in self.bones], dtype=np.int64)

    def parent(self, joint: int) -> Optional[int]:
        """Parent of ``joint`` (None for the root)."""
        self.check_joint(joint)
        return self.parents[joint]

    def children(self, joint: int) -> List[int]:
        self.check_joint(joint)
        return list(self._children[joint])

    def bone_of_child(self, joint: int) -> int:
        """Bone id ending at ``joint``; -1 for the root."""
        self.check_joint(joint)
        return int(self._bone_of_child[joint])

    def topological_order(self) -> List[int]:
        return topological_order(self)

    def path_to_root(self, joint: int) -> List[int]:
        return path_to_root(self, joint)

    def path_matrix(self) -> np.ndarray:
        """
        Root-path incidence matrix P of shape (M, M-1).

        P[j, b] = 1 iff bone b lies on the path from the root to joint j.
        """
        if self._path_matrix is None:
            matrix = np.zeros((self.joint_count, self.bone_count))
            for joint in range(self.joint_count):
                matrix[joint, path_to_root(self, joint)] = 1.0
            matrix.setflags(write=False)
            self._path_matrix = matrix
        return self._path_matrix

    def edges(self) -> List[Tuple[int, int]]:
        """Undirected bone edges as (parent, child) pairs in bone-id order."""
        return list(self.bones)

    def resolve_parts(self, expression: Optional[str]) -> Optional[FrozenSet[int]]:
        """
        Resolve a part expression to a bone set.

        ``None`` or ``"all"`` means no restriction; ``"a+b"`` is the union of
        parts ``a`` and ``b``.
        """
        if expression is None or expression == "all":
            return None
        bones = set()
        for name in expression.split("+"):
            name = name.strip()
            if name not in self.parts:
                raise ValidationError(
                    message=f"Unknown part '{name}' in '{expression}'",
                    field="part",
                    recovery_suggestions=[f"Known parts: {', '.join(sorted(self.parts))}"],
                )
            bones.update(self.parts[name])
        return frozenset(bones)

    def with_parts(self, parts: Dict[str, Iterable[int]], approximate: bool = False):
        """Return a copy of this topology using another part map."""
        return SkeletonTopology(
            joint_count=self.joint_count,
            root=self.root,
            parents=list(self.parents),
            parts={k: frozenset(v) for k, v in parts.items()},
            joint_names=self.joint_names,
            bones=list(self.bones),
            rest_offsets=self.rest_offsets,
            name=self.name,
            parts_approximate=approximate,
        )

    def check_joint(self, joint: int):
        if isinstance(joint, bool) or not isinstance(joint, (int, np.integer)):
            raise UnknownJointError(message=f"Joint {joint!r} is not an index", joint=None)
        if not 0 <= joint < self.joint_count:
            raise UnknownJointError(
                message=f"Joint {joint} outside [0, {self.joint_count - 1}]",
                joint=int(joint),
            )

    def to_dict(self) -> dict:
        """Convert topology to the JSON file layout."""
        data = {
            "name": self.name,
            "joints": self.joint_count,
            "root": self.root,
            "parents": list(self.parents),
            "bones": [list(pair) for pair in self.bones],
            "parts": {k: sorted(v) for k, v in self.parts.items()},
            "parts_approximate": self.parts_approximate,
        }
        if self.joint_names is not None:
            data["joint_names"] = list(self.joint_names)
        if self.rest_offsets is not None:
            data["rest_offsets"] = self.rest_offsets.tolist()
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "SkeletonTopology":
        """Create SkeletonTopology from the JSON file layout."""
        try:
            joint_count = int(data["joints"])
            parents = data["parents"]
        except KeyError as e:
            raise ValidationError(
                message=f"Topology file is missing field {e}", field=str(e)
            )
        return cls(
            joint_count=joint_count,
            root=int(data.get("root", 0)),
            parents=parents,
            parts=data.get("parts", {}),
            joint_names=data.get("joint_names"),
            bones=data.get("bones"),
            rest_offsets=data.get("rest_offsets"),
            name=data.get("name", "skeleton"),
            parts_approximate=bool(data.get("parts_approximate", False)),
        )


def validate_topology(topo: SkeletonTopology) -> None:
    """
    Check every SkeletonTopology invariant.

    Raises:
        CycleError, DisconnectedJointError, BadBoneIndexError naming the
        offending joint or bone; ValidationError for malformed metadata.
    """
    m = topo.joint_count
    if isinstance(m, bool) or m < 1:
        raise ValidationError(message=f"joint_count must be >= 1, got {m}", field="joints")
    if len(topo.parents) != m:
        raise ValidationError(
            message=f"parents has {len(topo.parents)} entries for {m} joints",
            field="parents",
        )
    if not 0 <= topo.root < m:
        raise UnknownJointError(message=f"Root {topo.root} outside [0, {m - 1}]", joint=topo.root)
    if topo.parents[topo.root] is not None:
        raise CycleError(
            message=f"Root joint {topo.root} has parent {topo.parents[topo.root]}",
            joint=topo.root,
        )

    for joint, parent in enumerate(topo.parents):
        if joint == topo.root:
            continue
        if parent is None:
            raise DisconnectedJointError(
                message=f"Joint {joint} has no parent and is unreachable from root {topo.root}",
                joint=joint,
            )
        if not 0 <= parent < m:
            raise DisconnectedJointError(
                message=f"Joint {joint} has parent {parent} outside the skeleton",
                joint=joint,
            )

    reaches_root = {topo.root}
    for start in range(m):
        walk = []
        seen = set()
        joint = start
        while joint not in reaches_root:
            if joint in seen:
                raise CycleError(
                    message=f"Parent relation has a cycle through joint {joint}",
                    joint=joint,
                )
            seen.add(joint)
            walk.append(joint)
            joint = topo.parents[joint]
        reaches_root.update(walk)

    if topo.bones is not None:
        if len(topo.bones) != m - 1:
            raise BadBoneIndexError(
                message=f"{len(topo.bones)} bones listed, expected {m - 1}"
            )
        seen_children = set()
        for bone_id, (parent, child) in enumerate(topo.bones):
            if not 0 <= child < m or child == topo.root or topo.parents[child] != parent:
                raise BadBoneIndexError(
                    message=f"Bone {bone_id} ({parent}->{child}) is not an edge of the tree",
                    bone=bone_id,
                )
            if child in seen_children:
                raise BadBoneIndexError(
                    message=f"Bone {bone_id} repeats child joint {child}", bone=bone_id
                )
            seen_children.add(child)

    owner: Dict[int, str] = {}
    for part, bones in topo.parts.items():
        for bone in bones:
            if not 0 <= bone < m - 1:
                raise BadBoneIndexError(
                    message=f"Part '{part}' names bone {bone} outside [0, {m - 2}]",
                    bone=bone,
                )
            if bone in owner:
                raise BadBoneIndexError(
                    message=f"Bone {bone} appears in parts '{owner[bone]}' and '{part}'",
                    bone=bone,
                )
            owner[bone] = part

    if topo.joint_names is not None and len(topo.joint_names) != m:
        raise ValidationError(
            message=f"{len(topo.joint_names)} joint names for {m} joints",
            field="joint_names",
        )

    if topo.rest_offsets is not None:
        array_validator.require_shape(topo.rest_offsets, (m, 3), "rest_offsets")
        array_validator.require_finite(topo.rest_offsets, "rest_offsets")
        lengths = np.linalg.norm(topo.rest_offsets, axis=1)
        for joint in range(m):
            if joint != topo.root and lengths[joint] <= 0.0:
                raise ValidationError(
                    message=f"Rest offset of joint {joint} has zero length",
                    field="rest_offsets",
                )


def topological_order(topo: SkeletonTopology) -> List[int]:
    """Joints in parent-before-child order from the root, ties by ascending index."""
    if topo._order is None:
        order = []
        heap = [topo.root]
        while heap:
            joint = heapq.heappop(heap)
            order.append(joint)
            for child in topo._children[joint]:
                heapq.heappush(heap, child)
        topo._order = tuple(order)
    return list(topo._order)


def path_to_root(topo: SkeletonTopology, joint: int) -> List[int]:
    """
    Bone ids on the unique root-to-joint path, ordered from the root.

    Raises:
        UnknownJointError: if ``joint`` is not in the skeleton
    """
    topo.check_joint(joint)
    path = []
    current = int(joint)
    while current != topo.root:
        path.append(int(topo._bone_of_child[current]))
        current = topo.parents[current]
    path.reverse()
    return path


@dataclass
class MotionSample:
    """A T x M x 3 joint-coordinate sequence with its class label."""

    coords: np.ndarray
    label: int
    valid_frames: Optional[int] = None
    sample_id: Optional[str] = None

    def __post_init__(self):
        """Validate the motion after initialization."""
        coords = np.array(
            array_validator.as_float_array(self.coords, "coords"), dtype=np.float64
        )
        array_validator.require_shape(coords, (None, None, 3), "coords")
        array_validator.require_finite(coords, "coords")

        if isinstance(self.label, bool) or not isinstance(self.label, (int, np.integer)):
            raise ValidationError(message=f"Label {self.label!r} is not an integer", field="label")
        if self.label < 0:
            raise ValidationError(message=f"Label {self.label} is negative", field="label")
        self.label = int(self.label)

        frames = coords.shape[0]
        if self.valid_frames is None:
            self.valid_frames = frames
        self.valid_frames = int(self.valid_frames)
        if not 0 <= self.valid_frames <= frames:
            raise ValidationError(
                message=f"valid_frames={self.valid_frames} outside [0, {frames}]",
                field="valid_frames",
            )
        if np.any(coords[self.valid_frames :] != 0.0):
            raise ValidationError(
                message="Padded frames beyond valid_frames must be exactly zero",
                field="coords",
            )

        coords.setflags(write=False)
        self.coords = coords

    @property
    def frames(self) -> int:
        return int(self.coords.shape[0])

    @property
    def joint_count(self) -> int:
        return int(self.coords.shape[1])

    @property
    def valid_coords(self) -> np.ndarray:
        return self.coords[: self.valid_frames]

    def check_topology(self, topo: SkeletonTopology):
        """Raise DimensionMismatchError if the motion does not fit ``topo``."""
        if self.joint_count != topo.joint_count:
            raise DimensionMismatchError(
                message=(
                    f"Motion {self.sample_id or ''} has {self.joint_count} joints, "
                    f"topology '{topo.name}' has {topo.joint_count}"
                )
            )

    def with_coords(self, coords: np.ndarray, valid_frames: Optional[int] = None):
        """New sample with replaced coordinates; label and id carried over."""
        return replace(
            self,
            coords=coords,
            valid_frames=self.valid_frames if valid_frames is None else valid_frames,
        )

    def to_dict(self) -> dict:
        """Convert motion to one JSON-lines record."""
        data = {
            "label": self.label,
            "frames": self.frames,
            "valid_frames": self.valid_frames,
            "coords": self.coords.tolist(),
        }
        if self.sample_id is not None:
            data["id"] = self.sample_id
        return data

    @classmethod
    def from_dict(cls, data: dict, default_id: Optional[str] = None) -> "MotionSample":
        """Create MotionSample from one JSON-lines record."""
        for key in ("label", "coords"):
            if key not in data:
                raise ValidationError(message=f"Motion record missing '{key}'", field=key)
        sample = cls(
            coords=data["coords"],
            label=data["label"],
            valid_frames=data.get("valid_frames"),
            sample_id=data.get("id", default_id),
        )
        if "frames" in data and int(data["frames"]) != sample.frames:
            raise DimensionMismatchError(
                message=f"Record declares {data['frames']} frames but holds {sample.frames}"
            )
        return sample


@dataclass
class LabelSet:
    """Class labels of an L-way recognition task."""

    class_count: int
    names: Optional[List[str]] = None

    def __post_init__(self):
        if self.class_count < 1:
            raise ValidationError(message="class_count must be >= 1", field="class_count")
        if self.names is not None and len(self.names) != self.class_count:
            raise ValidationError(
                message=f"{len(self.names)} names for {self.class_count} classes",
                field="names",
            )

    def one_hot(self, label: int) -> np.ndarray:
        """L-vector with a single 1 at ``label``."""
        if not 0 <= label < self.class_count:
            raise ValidationError(
                message=f"Label {label} outside [0, {self.class_count - 1}]", field="label"
            )
        y = np.zeros(self.class_count)
        y[label] = 1.0
        return y

    def name_of(self, label: int) -> str:
        if self.names is None:
            return f"class_{label}"
        return self.names[label]

    @classmethod
    def from_samples(cls, samples: Sequence[MotionSample]) -> "LabelSet":
        if not samples:
            raise ValidationError(message="Cannot infer labels from no samples")
        return cls(class_count=max(s.label for s in samples) + 1)

    def to_dict(self) -> Dict[str, Any]:
        return {"class_count": self.class_count, "names": self.names}
