import logging
import os
import shutil
import tempfile
from pathlib import Path
from typing import Optional

import pandas as pd
from pydantic import BaseModel

from repositories.base import BaseRepository
from repositories.frame_repository import FrameRepository
from repositories.report_repository import JsonRepository

logger = logging.getLogger(__name__)


class ArtifactRepository:
    """
    Run directory `<output_dir>/<name>` built in a hidden staging directory
    next to it and renamed into place by publish(). Until then the target
    either does not exist or still holds the previous complete run.
    """

    def __init__(self, output_dir: Path, name: str):
        self.output_dir = Path(output_dir)
        self.name = name
        self.target = self.output_dir / name
        self.staging: Optional[Path] = None
        self._written: dict[str, BaseRepository] = {}

    def stage(self) -> Path:
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self.staging = Path(tempfile.mkdtemp(prefix=f".{self.name}.staging-", dir=self.output_dir))
        self.staging.chmod(0o755)
        logger.debug("Staging run directory %s", self.staging)
        return self.staging

    def write_frame(self, name: str, frame: pd.DataFrame) -> str:
        repository = FrameRepository(self._require_staging())
        return self._record(repository, name, frame)

    def write_document(self, name: str, document: BaseModel) -> str:
        repository = JsonRepository(type(document), self._require_staging())
        return self._record(repository, name, document)

    def checksums(self) -> dict[str, str]:
        """SHA-256 of every file written so far, by file name."""
        return {
            repository.path_for(name).name: repository.checksum(name)
            for name, repository in sorted(self._written.items())
        }

    def publish(self) -> Path:
        staging = self._require_staging()
        retired = None
        if self.target.exists():
            retired = Path(tempfile.mkdtemp(prefix=f".{self.name}.retired-", dir=self.output_dir))
            os.replace(self.target, retired / self.name)
        os.replace(staging, self.target)
        if retired is not None:
            shutil.rmtree(retired, ignore_errors=True)
        self.staging = None
        logger.info("Published %s", self.target)
        return self.target

    def discard(self) -> None:
        if self.staging is not None:
            shutil.rmtree(self.staging, ignore_errors=True)
            logger.debug("Discarded staging directory %s", self.staging)
            self.staging = None

    def _record(self, repository: BaseRepository, name: str, payload) -> str:
        path = repository.create(name, payload)
        self._written[name] = repository
        return path.name

    def _require_staging(self) -> Path:
        if self.staging is None:
            raise RuntimeError("stage() must be called before writing artifacts")
        return self.staging
