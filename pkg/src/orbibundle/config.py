from pydantic_settings import BaseSettings, SettingsConfigDict


class OrbiSettings(BaseSettings):
    """Configuración de orbibundle utilizando Pydantic Settings"""

    # Semilla para los puntos de muestreo aleatorios
    SEED: int = 0

    # Cuadratura de Gauss-Legendre
    QUAD_ORDER: int = 48
    QUAD_MAX_ORDER: int = 384
    QUAD_TOLERANCE: float = 1e-6

    # Tolerancias de validación
    MATRIX_TOL: float = 1e-12
    EQUIVARIANCE_TOL: float = 1e-10
    CONNECTION_TOL: float = 1e-8
    PARTITION_TOL: float = 1e-8
    NONVANISHING_THRESHOLD: float = 1e-8
    INVERTIBILITY_TOL: float = 1e-8
    CERTIFICATE_TOL: float = 1e-12
    OBSTRUCTION_NODE_TOL: float = 1e-10
    OBSTRUCTION_INTEGRAL_TOL: float = 1e-8

    # Tamaño de las muestras
    RANDOM_SAMPLES: int = 50
    NONVANISHING_SAMPLES: int = 1000

    # Radio de la bola de fibra del espacio total
    FIBER_HALF_WIDTH: int = 1

    LOG_LEVEL: str = "WARNING"

    model_config = SettingsConfigDict(
        env_prefix="ORBIBUNDLE_", env_file=".env", env_file_encoding="utf-8"
    )


settings = OrbiSettings()
