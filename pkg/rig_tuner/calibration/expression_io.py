from __future__ import annotations

from collections.abc import Mapping, Sequence
from pathlib import Path

import numpy as np

from rig_tuner.utils.errors import ConfigError, RigContractError
from rig_tuner.utils.file_access import read_json, write_json

from .expression_pair import ACTIVATION_TOL, ExpressionPair, PairKind
from .expression_sets import ExpressionTemplate


class ExpressionIO:
    """
    Expression-set JSON and geometry capture files.

    Expression sets are lists of {"name", "controls": {name: value}, "kind",
    "geometry_mask"?, "weight"?}. Geometry captures are either JSON objects
    mapping expression names to float lists or .npz archives keyed by name.
    """

    @classmethod
    def template_from_dict(cls, content: Mapping, path: str | Path | None = None):
        try:
            mask = content.get("geometry_mask")
            return ExpressionTemplate(
                name=str(content["name"]),
                activations={str(k): float(v) for k, v in content.get("controls", {}).items()},
                kind=PairKind(content.get("kind", PairKind.CAPTURED.value)),
                geometry_mask=None if mask is None else tuple(int(i) for i in mask),
                weight=float(content.get("weight", 1.0)),
            )
        except (KeyError, ValueError) as e:
            _error_msg = f"Invalid expression entry {content!r} ({e})"
            raise ConfigError(_error_msg, path) from e

    @classmethod
    def template_to_dict(cls, template: ExpressionTemplate) -> dict:
        content = {
            "name": template.name,
            "controls": dict(template.activations),
            "kind": template.kind.value,
        }
        if template.geometry_mask is not None:
            content["geometry_mask"] = list(template.geometry_mask)
        if template.weight != 1.0:
            content["weight"] = template.weight
        return content

    @classmethod
    def pair_to_dict(cls, pair: ExpressionPair, control_names: Sequence[str]) -> dict:
        template = ExpressionTemplate(
            pair.name,
            {
                name: float(value)
                for name, value in zip(control_names, pair.c, strict=True)
                if abs(value) > ACTIVATION_TOL
            },
            pair.kind,
            None if pair.geometry_mask is None else tuple(int(i) for i in pair.geometry_mask),
            pair.weight,
        )
        return cls.template_to_dict(template)

    @classmethod
    def load_expression_set(cls, path: str | Path) -> list[ExpressionTemplate]:
        content = read_json(path)
        if not isinstance(content, list):
            _error_msg = "Expression set must be a JSON list"
            raise ConfigError(_error_msg, path)
        templates = [cls.template_from_dict(entry, path) for entry in content]
        names = [t.name for t in templates]
        if len(set(names)) != len(names):
            _error_msg = "Expression names must be unique"
            raise ConfigError(_error_msg, path)
        return templates

    @classmethod
    def save_expression_set(
        cls, templates: Sequence[ExpressionTemplate], path: str | Path
    ) -> Path:
        return write_json(path, [cls.template_to_dict(t) for t in templates])

    @classmethod
    def save_pairs(
        cls, pairs: Sequence[ExpressionPair], control_names: Sequence[str], path: str | Path
    ) -> Path:
        return write_json(path, [cls.pair_to_dict(p, control_names) for p in pairs])

    @classmethod
    def load_geometry(cls, path: str | Path) -> dict[str, np.ndarray]:
        path = Path(path)
        if path.suffix == ".npz":
            if not path.is_file():
                _error_msg = "File does not exist"
                raise ConfigError(_error_msg, path)
            with np.load(path) as archive:
                return {name: np.asarray(archive[name], dtype=np.float64) for name in archive.files}

        content = read_json(path)
        if not isinstance(content, dict):
            _error_msg = "Geometry capture must map expression names to vectors"
            raise ConfigError(_error_msg, path)
        return {str(k): np.asarray(v, dtype=np.float64) for k, v in content.items()}

    @classmethod
    def save_geometry(cls, geometry: Mapping[str, np.ndarray], path: str | Path) -> Path:
        path = Path(path)
        if path.suffix == ".npz":
            path.parent.mkdir(parents=True, exist_ok=True)
            np.savez(path, **{k: np.asarray(v) for k, v in geometry.items()})
            return path
        return write_json(path, {k: [float(x) for x in v] for k, v in geometry.items()})

    @classmethod
    def build_pairs(
        cls,
        templates: Sequence[ExpressionTemplate],
        geometry: Mapping[str, np.ndarray],
        control_names: Sequence[str],
    ) -> list[ExpressionPair]:
        missing = [t.name for t in templates if t.name not in geometry]
        if missing:
            _error_msg = f"No captured geometry for expressions: {', '.join(missing)}"
            raise RigContractError(_error_msg)
        return [t.to_pair(control_names, geometry[t.name]) for t in templates]
