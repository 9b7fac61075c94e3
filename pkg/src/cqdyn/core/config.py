"""Toolkit configuration using pydantic-settings."""

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Toolkit settings loaded from environment variables prefixed with ``CQDYN_``."""

    model_config = SettingsConfigDict(
        env_prefix="CQDYN_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    # Application settings
    app_name: str = Field(default="cqdyn", description="Application name")
    app_version: str = Field(default="0.1.0", description="Application version")
    environment: str = Field(
        default="development", description="Environment (development, staging, production)"
    )

    # Logging settings
    log_level: str = Field(default="INFO", description="Logging level")
    log_format: str = Field(default="json", description="Log format (json or console)")

    # Parallelism
    threads: int = Field(default=1, ge=1, le=256, description="Worker cap (CQDYN_THREADS)")

    # Numerical tolerances
    hermitian_tol: float = Field(default=1e-12, gt=0, description="Relative Hermiticity tolerance")
    zero_tol: float = Field(
        default=1e-9, gt=0, description="Zero-eigenvalue tolerance relative to spectral scale"
    )
    metastable_ratio: float = Field(
        default=100.0, ge=1.0, description="Minimum ratio of consecutive decay rates for a gap"
    )
    defective_condition: float = Field(
        default=1e8, gt=1, description="Eigenvector condition number flagged as near-defective"
    )
    atom_merge_distance: float = Field(
        default=1e-9, ge=0, description="Atoms closer than this are merged"
    )
    symmetry_tol: float = Field(default=1e-10, gt=0, description="Generator covariance tolerance")
    conservation_tol: float = Field(
        default=1e-8, gt=0, description="Scale-normalized conservation tolerance"
    )
    dadt_consistency_tol: float = Field(
        default=1e-7, gt=0, description="Agreement required between dA/dt estimators"
    )
    finite_difference_step: float = Field(
        default=1e-4, gt=0, description="Time step for finite-difference dA/dt"
    )

    # Capacity and integration guards
    max_liouvillian_dim: int = Field(
        default=4096, ge=1, description="Largest dense Liouvillian (cells x d^2)"
    )
    kernel_chunk_rows: int = Field(
        default=256, ge=1, description="Rows of W(z|z') materialized at a time"
    )
    kernel_cache_entries: int = Field(
        default=1 << 22, ge=0, description="Kernels with at most this many entries are cached whole"
    )
    trace_abort_tol: float = Field(
        default=1e-6, gt=0, description="Trace deviation that aborts an evolution"
    )
    positivity_abort_tol: float = Field(
        default=1e-6, gt=0, description="Negative eigenvalue magnitude that aborts an evolution"
    )
    boundary_cells: int = Field(
        default=2, ge=0, description="Cells near the grid boundary watched for mass"
    )

    @field_validator("environment")
    @classmethod
    def validate_environment(cls, v: str) -> str:
        """Validate environment value."""
        allowed_environments = {"development", "staging", "production"}
        if v.lower() not in allowed_environments:
            raise ValueError(f"Environment must be one of {allowed_environments}")
        return v.lower()

    @field_validator("log_format")
    @classmethod
    def validate_log_format(cls, v: str) -> str:
        """Validate log format value."""
        if v.lower() not in {"json", "console"}:
            raise ValueError("Log format must be 'json' or 'console'")
        return v.lower()

    @property
    def is_development(self) -> bool:
        """Check if running in development environment."""
        return self.environment == "development"

    @property
    def is_production(self) -> bool:
        """Check if running in production environment."""
        return self.environment == "production"


# Global settings instance
settings = Settings()
