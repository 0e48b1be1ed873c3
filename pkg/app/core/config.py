from pathlib import Path
from pydantic_settings import BaseSettings

DATA_DIR = Path(__file__).resolve().parent.parent / "data"


class Settings(BaseSettings):
    PROJECT_NAME: str = "AAA Surveillance MDP"
    VERSION: str = "0.1.0"
    LOG_LEVEL: str = "INFO"

    # Solver Settings
    STOCHASTIC_TOL: float = 1e-9
    GAIN_TOL: float = 1e-9
    BRUTEFORCE_LIMIT: int = 2 ** 16

    # Model Settings
    TERMINAL_REWARD: str = "qaly"  # "qaly" -> c(N) for alive states, "zero" -> 0
    DEFAULT_PARAMS_PATH: Path = DATA_DIR / "illustrative_params.json"

    # Sensitivity / Bias Experiment Settings
    DEFAULT_SEED: int = 0
    DEFAULT_REPLICATES: int = 1000
    DEFAULT_RUPTURE_WIDTH: float = 0.25
    DEFAULT_BIAS_FACTORS: str = "1.0,0.75,0.5"
    DEFAULT_BIAS_BINS: str = "55-60mm,60-65mm,65-70mm"
    SENSITIVITY_WORKERS: int = 1
    SHOW_PROGRESS: bool = False

    class Config:
        env_file = ".env"
        env_prefix = "AAA_"


settings = Settings()
