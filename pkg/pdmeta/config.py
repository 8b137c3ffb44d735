"""Application configuration management."""

from functools import lru_cache

from dotenv import load_dotenv
from pydantic import Field
from pydantic_settings import BaseSettings


load_dotenv()


class Settings(BaseSettings):
    """Configuration values loaded from environment variables."""

    log_level: str = Field(default="INFO", alias="PDM_LOG_LEVEL")

    # Quadrature
    quad_tol: float = Field(default=1e-12, gt=0, alias="PDM_QUAD_TOL")
    quad_max_depth: int = Field(default=50, ge=1, alias="PDM_QUAD_MAX_DEPTH")
    gauss_cutoff: float = Field(default=12.0, gt=0, alias="PDM_GAUSS_CUTOFF")
    sech_cutoff: float = Field(default=40.0, gt=0, alias="PDM_SECH_CUTOFF")

    # Grids
    half_line_rmin: float = Field(default=0.05, gt=0, alias="PDM_HALF_LINE_RMIN")
    half_line_rmax: float = Field(default=8.0, gt=0, alias="PDM_HALF_LINE_RMAX")
    full_line_half_width: float = Field(default=6.0, gt=0, alias="PDM_FULL_LINE_HALF_WIDTH")
    grid_points: int = Field(default=1600, ge=16, alias="PDM_GRID_POINTS")
    max_dense_n: int = Field(default=4096, ge=16, alias="PDM_MAX_DENSE_N")
    interior_margin: int = Field(default=3, ge=1, alias="PDM_INTERIOR_MARGIN")

    # Analytic probes
    probe_count: int = Field(default=512, ge=8, alias="PDM_PROBE_COUNT")
    probe_min: float = Field(default=0.05, gt=0, alias="PDM_PROBE_MIN")
    probe_max: float = Field(default=8.0, gt=0, alias="PDM_PROBE_MAX")

    # Verification
    batch_size: int = Field(default=8, ge=1, alias="PDM_BATCH_SIZE")
    crosscheck_tol: float = Field(default=1e-9, gt=0, alias="PDM_CROSSCHECK_TOL")

    # Eigenvalues
    classify_tol: float = Field(default=1e-8, gt=0, alias="PDM_CLASSIFY_TOL")
    qr_tol: float = Field(default=1e-14, gt=0, alias="PDM_QR_TOL")
    qr_sweeps_per_eigenvalue: int = Field(default=30, ge=1, alias="PDM_QR_SWEEPS_PER_EIGENVALUE")
    spectrum_points: int = Field(default=400, ge=16, alias="PDM_SPECTRUM_POINTS")
    # 0 uses every eigenpair; k > 0 the k lowest by real part
    orthogonality_pairs: int = Field(default=0, ge=0, alias="PDM_ORTHOGONALITY_PAIRS")

    model_config = {
        "populate_by_name": True,
        "extra": "ignore",
    }

    def cutoff_for(self, decay: str) -> float:
        """Return the improper-integral cutoff for a decay class."""

        if decay == "gauss":
            return self.gauss_cutoff
        if decay == "sech":
            return self.sech_cutoff
        raise ValueError(f"Unknown decay class: {decay}")


@lru_cache
def get_settings() -> Settings:
    """Return cached settings instance."""

    return Settings()
