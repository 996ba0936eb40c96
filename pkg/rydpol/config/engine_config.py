# rydpol/config/engine_config.py
import os

from pydantic_settings import BaseSettings


class EngineSettings(BaseSettings):
    """Engine-wide numerical and runtime settings."""

    # Worker pool (0 means one worker per processing unit)
    workers: int = 0
    log_level: str = "INFO"

    # Dummy-state repopulation rate as a multiple of the largest other rate
    dummy_rate_factor: float = 1000.0

    # Doppler averaging
    doppler_points: int = 41
    doppler_cutoff_sigmas: float = 4.0
    doppler_weights: str = "trapezoid"  # "trapezoid" or "gauss"
    # Trapezoid steps per narrowest velocity-space linewidth; the mesh is refined until met
    doppler_steps_per_width: float = 2.0
    doppler_max_points: int = 200001

    # "linear": weak-probe first-order response; "full": steady state of the full model per grid point
    sweep_solver: str = "linear"

    # Weak-probe default, as a fraction of the intermediate-level decay rate
    probe_rabi_fraction: float = 0.05

    # Peak detection threshold relative to the global maximum
    peak_prominence: float = 0.05

    steady_state_residual_tol: float = 1e-9

    # Output files
    output_format_version: int = 1

    class Config:
        env_file = ".env"
        env_prefix = "RYDPOL_"
        extra = "ignore"

    def resolved_workers(self) -> int:
        """Number of worker processes to use for sweeps."""
        if self.workers and self.workers > 0:
            return self.workers
        return os.cpu_count() or 1


# Global engine settings instance
engine_settings = EngineSettings()

ENGINE_VERSION = "1.0.0"
