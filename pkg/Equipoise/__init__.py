from config import Config
from Equipoise.core.logger import LOGS
from Equipoise.utils.exceptions import ConfigError


def _refuse(message: str) -> None:
    LOGS.error(message)
    raise ConfigError(message)


# If any of the numerical settings are unusable stop before anything is fitted
if Config.LOGIT_TOL <= 0:
    _refuse("LOGIT_TOL must be positive! Kindly check again!")
if Config.LOGIT_MAX_ITER < 1:
    _refuse("LOGIT_MAX_ITER must be at least 1! Kindly check again!")
if not 0 < Config.MW_DELTA < 0.5:
    _refuse("MW_DELTA must lie in (0, 0.5)! Kindly check again!")
if not 0 <= Config.BOOT_FAIL_RATIO < 1:
    _refuse("BOOT_FAIL_RATIO must lie in [0, 1)! Kindly check again!")
if not 0 < Config.RUBIN_LO < 1 < Config.RUBIN_HI:
    _refuse("RUBIN_LO/RUBIN_HI must bracket 1! Kindly check again!")
if not 0 < Config.PREVALENCE_LO < 0.5 < Config.PREVALENCE_HI < 1:
    _refuse("PREVALENCE_LO/PREVALENCE_HI must bracket 0.5! Kindly check again!")
if Config.THREADS < 0:
    _refuse("EQUIPOISE_THREADS must be 0 or positive! Kindly check again!")
