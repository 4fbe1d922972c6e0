from pathlib import Path
from typing import Generic, Type, TypeVar

from pydantic import BaseModel

from repositories.base import BaseRepository

DocumentType = TypeVar("DocumentType", bound=BaseModel)


class JsonRepository(BaseRepository[DocumentType], Generic[DocumentType]):
    """pydantic documents stored as indented JSON."""
    suffix = ".json"

    def __init__(self, model: Type[DocumentType], root: Path):
        super().__init__(root)
        self.model = model

    def read(self, path: Path) -> DocumentType:
        return self.model.model_validate_json(path.read_text(encoding="utf-8"))

    def write(self, path: Path, obj_in: DocumentType) -> None:
        path.write_text(obj_in.model_dump_json(indent=2) + "\n", encoding="utf-8")
