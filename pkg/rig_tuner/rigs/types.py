from typing import TypeAlias

import numpy as np
from numpy.typing import NDArray

RigParams: TypeAlias = NDArray[np.float64]
ControlVector: TypeAlias = NDArray[np.float64]
GeometryVector: TypeAlias = NDArray[np.float64]
IndexSet: TypeAlias = NDArray[np.int64]
