import logging
from pathlib import Path

import numpy as np

from rig_tuner.utils.errors import ConfigError, RigContractError
from rig_tuner.utils.file_access import read_json, write_json

from .joint_psd_rig import JointPsdRig
from .linear_rig import LinearRig
from .rig import Rig


class RigIO:
    """
    JSON persistence of rigs. Floats are written with their shortest exact
    representation so that theta round-trips bit for bit.
    """

    @classmethod
    def to_dict(cls, rig: Rig) -> dict:
        content = {
            "n_controls": rig.n_controls,
            "m_geometry": rig.m_geometry,
            "theta": [float(x) for x in rig.theta],
            "control_names": list(rig.control_names),
        }
        if isinstance(rig, LinearRig):
            content = {"type": "linear", **content}
            if np.any(rig.neutral_offset != 0):
                content["neutral_offset"] = [float(x) for x in rig.neutral_offset]
            return content

        if isinstance(rig, JointPsdRig):
            rows, cols = rig.sparsity
            return {
                "type": "joint_psd",
                **content,
                "p_psd": rig.p_psd,
                "sparsity": {
                    "rows": [int(r) for r in rows],
                    "cols": [int(c) for c in cols],
                },
                "psd_spec": [list(subset) for subset in rig.psd_spec],
                "primary_mask": [bool(x) for x in rig.primary_mask],
            }

        _error_msg = f"Unsupported rig type {type(rig).__name__}"
        raise RigContractError(_error_msg)

    @classmethod
    def from_dict(cls, content: dict, path: str | Path | None = None) -> Rig:
        try:
            rig_type = content["type"]
            n_controls = int(content["n_controls"])
            m_geometry = int(content["m_geometry"])
            theta = np.array(content["theta"], dtype=np.float64)
            names = content.get("control_names")

            if rig_type == "linear":
                return LinearRig(
                    n_controls,
                    m_geometry,
                    theta,
                    content.get("neutral_offset"),
                    names,
                )
            if rig_type == "joint_psd":
                rig = JointPsdRig(
                    n_controls,
                    m_geometry,
                    content["psd_spec"],
                    content["sparsity"]["rows"],
                    content["sparsity"]["cols"],
                    theta,
                    content.get("primary_mask"),
                    names,
                )
                if "p_psd" in content and int(content["p_psd"]) != rig.p_psd:
                    _error_msg = "p_psd does not match psd_spec length"
                    raise ConfigError(_error_msg, path)
                return rig
        except KeyError as e:
            _error_msg = f"Missing rig field {e}"
            raise ConfigError(_error_msg, path) from e
        except RigContractError as e:
            raise ConfigError(str(e), path) from e

        _error_msg = f"Unknown rig type '{rig_type}'"
        raise ConfigError(_error_msg, path)

    @classmethod
    def load_rig(cls, path: str | Path) -> Rig:
        rig = cls.from_dict(read_json(path), path)
        logging.debug("Loaded %s from %s", rig, path)
        return rig

    @classmethod
    def save_rig(cls, rig: Rig, path: str | Path) -> Path:
        return write_json(path, cls.to_dict(rig))
