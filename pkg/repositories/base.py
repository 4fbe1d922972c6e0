import hashlib
import os
import tempfile
from pathlib import Path
from typing import Generic, List, Optional, TypeVar

PayloadType = TypeVar("PayloadType")


class BaseRepository(Generic[PayloadType]):
    """
    Named artifacts of one payload type stored as files under a root directory.
    Writes go to a temporary file in the same directory and are renamed into
    place, so a reader never sees a partially written file.
    """
    suffix: str = ""

    def __init__(self, root: Path):
        self.root = Path(root)

    def path_for(self, name: str) -> Path:
        return self.root / f"{name}{self.suffix}"

    def get(self, name: str) -> Optional[PayloadType]:
        path = self.path_for(name)
        if not path.is_file():
            return None
        return self.read(path)

    def get_all(self) -> List[str]:
        if not self.root.is_dir():
            return []
        return sorted(path.name[: len(path.name) - len(self.suffix)] for path in self.root.glob(f"*{self.suffix}"))

    def create(self, name: str, obj_in: PayloadType) -> Path:
        self.root.mkdir(parents=True, exist_ok=True)
        path = self.path_for(name)
        fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=self.root)
        os.close(fd)
        try:
            self.write(Path(tmp), obj_in)
            os.chmod(tmp, 0o644)
            os.replace(tmp, path)
        except BaseException:
            Path(tmp).unlink(missing_ok=True)
            raise
        return path

    def delete(self, name: str) -> bool:
        path = self.path_for(name)
        if path.is_file():
            path.unlink()
            return True
        return False

    def checksum(self, name: str) -> str:
        """SHA-256 hex digest of the stored file."""
        return hashlib.sha256(self.path_for(name).read_bytes()).hexdigest()

    def read(self, path: Path) -> PayloadType:
        raise NotImplementedError

    def write(self, path: Path, obj_in: PayloadType) -> None:
        raise NotImplementedError
