from pathlib import Path
from typing import Optional

from repositories.base import BaseRepository

PRESET_DIR = Path(__file__).resolve().parent.parent / "presets"


class PresetRepository(BaseRepository[str]):
    """Checked-in experiment configs, one `<name>.cfg` per acceptance experiment."""
    suffix = ".cfg"

    def __init__(self, root: Optional[Path] = None):
        super().__init__(root or PRESET_DIR)

    def read(self, path: Path) -> str:
        return path.read_text(encoding="utf-8")

    def write(self, path: Path, obj_in: str) -> None:
        path.write_text(obj_in, encoding="utf-8")
