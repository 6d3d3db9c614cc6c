"""
Configuration settings for bridge_trunc
"""
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Application settings, overridable through BRIDGE_TRUNC_* variables"""

    model_config = SettingsConfigDict(
        env_prefix="BRIDGE_TRUNC_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )

    # API Settings
    api_title: str = "Bridge Truncation API"
    api_version: str = "1.0.0"
    api_description: str = "Simulation and verification of random truncations of random matrices"

    # Server Settings
    host: str = "127.0.0.1"
    port: int = 8000
    debug: bool = False

    # Output Settings (BRIDGE_TRUNC_OUT)
    out: str = "reports"

    # Experiment defaults
    default_n: int = 200
    default_grid_m: int = 20
    default_replicates: int = 2000
    z_threshold: float = 4.0
    batches: int = 20
    ks_alpha: float = 0.01
    threads: int = 1

    # Numerical tolerances
    unitarity_tol: float = 1e-10
    stochastic_tol: float = 1e-12
    route_tol: float = 1e-8
    cholesky_jitter: float = 1e-12
    kahan_threshold: int = 1024

    # Logging Settings
    log_level: str = "INFO"
    log_format: str = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


# Global settings instance
settings = Settings()
