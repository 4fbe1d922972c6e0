from pathlib import Path

import numpy as np
import pandas as pd

from models.cadlag import CadlagPath, Grid
from models.series import CoefficientPanel
from repositories.base import BaseRepository


class FrameRepository(BaseRepository[pd.DataFrame]):
    """CSV tables: panels, tail curves, modulus tables and exported paths."""
    suffix = ".csv"

    def read(self, path: Path) -> pd.DataFrame:
        return pd.read_csv(path)

    def write(self, path: Path, obj_in: pd.DataFrame) -> None:
        obj_in.to_csv(path, index=False, lineterminator="\n")


def path_to_frame(path: CadlagPath) -> pd.DataFrame:
    """Columns t, value at the grid points."""
    return pd.DataFrame({"t": path.grid.points(), "value": path.values})


def frame_to_path(frame: pd.DataFrame) -> CadlagPath:
    """Inverse of path_to_frame; the t column must be the uniform grid 0, 1/m, ..., 1."""
    values = frame["value"].to_numpy(dtype=float)
    grid = Grid(values.size - 1)
    if not np.allclose(frame["t"].to_numpy(dtype=float), grid.points()):
        raise ValueError("t column is not a uniform grid on [0, 1]")
    return CadlagPath(grid, values)


def coefficients_to_frame(panel: CoefficientPanel) -> pd.DataFrame:
    """Long table j, t, value of Psi_1..Psi_J."""
    frames = [path_to_frame(term.path).assign(j=term.index) for term in panel.terms]
    return pd.concat(frames, ignore_index=True)[["j", "t", "value"]]
