from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from numpy.typing import ArrayLike

from rig_tuner.calibration import ExpressionIO, ExpressionPair, ExpressionTemplate
from rig_tuner.rigs import Rig
from rig_tuner.utils.errors import ConfigError, RigContractError
from rig_tuner.utils.file_access import array_fingerprint, read_json, write_json

from .generators import check_disjoint


class CorpusSplit(Enum):
    TRAIN = "train"
    HOLDOUT = "holdout"


@dataclass
class Corpus:
    """
    Expression pairs generated from a known rig. theta_fingerprint is the
    content hash of the generating parameters.
    """

    pairs: list[ExpressionPair]
    split: CorpusSplit
    seed: int
    theta_fingerprint: str
    control_names: list[str]
    metadata: dict = field(default_factory=dict)

    def save(self, directory: str | Path, stem: str | None = None) -> Path:
        """
        Writes <stem>.json (expression set), <stem>_geometry.json and the
        <stem>.meta.json sidecar. Returns the expression set path.
        """
        directory = Path(directory)
        stem = stem or self.split.value
        path = ExpressionIO.save_pairs(self.pairs, self.control_names, directory / f"{stem}.json")
        ExpressionIO.save_geometry(
            {pair.name: pair.v for pair in self.pairs}, directory / f"{stem}_geometry.json"
        )
        write_json(
            directory / f"{stem}.meta.json",
            {
                "split": self.split.value,
                "seed": self.seed,
                "theta_fingerprint": self.theta_fingerprint,
                "control_names": self.control_names,
                **self.metadata,
            },
        )
        return path

    @classmethod
    def load(cls, directory: str | Path, stem: str, control_names: Sequence[str]) -> Corpus:
        directory = Path(directory)
        templates = ExpressionIO.load_expression_set(directory / f"{stem}.json")
        geometry = ExpressionIO.load_geometry(directory / f"{stem}_geometry.json")
        pairs = ExpressionIO.build_pairs(templates, geometry, control_names)
        meta = cls.load_metadata(directory / f"{stem}.meta.json") or {}
        try:
            split = CorpusSplit(meta.pop("split", CorpusSplit.TRAIN.value))
        except ValueError as e:
            raise ConfigError(str(e), directory / f"{stem}.meta.json") from e
        return cls(
            pairs=pairs,
            split=split,
            seed=int(meta.pop("seed", 0)),
            theta_fingerprint=str(meta.pop("theta_fingerprint", "")),
            control_names=list(meta.pop("control_names", control_names)),
            metadata=meta,
        )

    @classmethod
    def load_metadata(cls, path: str | Path) -> dict | None:
        path = Path(path)
        if not path.is_file():
            logging.debug("No corpus metadata at %s", path)
            return None
        content = read_json(path)
        if not isinstance(content, dict):
            _error_msg = "Corpus metadata must be a JSON object"
            raise ConfigError(_error_msg, path)
        return content


def generate_corpus(
    rig: Rig,
    theta_source: ArrayLike,
    templates: Sequence[ExpressionTemplate],
    split: CorpusSplit = CorpusSplit.TRAIN,
    seed: int = 0,
    exclude: Sequence[ExpressionTemplate] = (),
) -> Corpus:
    """
    v_k = R(c_k; theta_source) for every template. Holdout corpora are checked
    against the training templates given in exclude.
    """
    if not templates:
        _error_msg = "A corpus needs at least one template"
        raise RigContractError(_error_msg)
    split = CorpusSplit(split)
    theta_source = rig.check_theta(theta_source)
    if split == CorpusSplit.HOLDOUT and exclude:
        check_disjoint(rig, exclude, templates)

    names = list(rig.control_names)
    pairs = [
        template.to_pair(names, rig.evaluate(template.controls(names), theta_source))
        for template in templates
    ]
    return Corpus(
        pairs=pairs,
        split=split,
        seed=seed,
        theta_fingerprint=array_fingerprint(theta_source),
        control_names=names,
    )
