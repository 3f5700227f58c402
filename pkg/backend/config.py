import os
from dataclasses import dataclass
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

@dataclass
class Config:
    """Configuration settings for the spectral experiments"""
    # Quadrature node generation
    NEWTON_TOL: float = 1e-15
    NEWTON_MAX_ITER: int = 100

    # Blending parameter for linear elements (G2/L2); the sweep recovers 1/2
    P1_OPTIMAL_TAU: float = float(os.getenv("IGA_P1_OPTIMAL_TAU", "0.5"))

    # Meshes with Λ = √λ·h above this are left out of the asymptotic slope fit
    ASYMPTOTIC_RESOLUTION: float = float(os.getenv("IGA_ASYMPTOTIC_RESOLUTION", "1.0"))

    # Largest N^d allowed for dense materialization of tensor operators
    DENSE_DOF_CAP: int = int(os.getenv("IGA_DENSE_DOF_CAP", "20000"))

    # Experiment output and runtime settings
    OUTPUT_DIR: str = os.getenv("IGA_OUTPUT_DIR", "./results")
    LOG_LEVEL: str = os.getenv("IGA_LOG_LEVEL", "INFO")
    MAX_WORKERS: int = int(os.getenv("IGA_MAX_WORKERS", "1"))  # mesh sweep threads

config = Config()
