from pathlib import Path
from typing import ClassVar

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    PROJECT_NAME: ClassVar[str] = "rvseries"
    VERSION: ClassVar[str] = "1.0.0"

    # Series
    MAX_SERIES_TERMS: ClassVar[int] = 10_000

    # Vectorized panels draw this many replicates per stream
    REPLICATE_BLOCK_SIZE: ClassVar[int] = 16_384

    LOG_LEVEL: ClassVar[str] = "INFO"

    # Output (the only value read from the environment)
    RVSERIES_OUTPUT_DIR: Path = Path("results")

    model_config = SettingsConfigDict(env_file=".env", case_sensitive=True, extra="ignore")


settings = Settings()
