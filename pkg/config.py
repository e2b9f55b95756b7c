from os import getenv

from dotenv import load_dotenv

load_dotenv()

class Config(object):
    # propensity model fitting
    LOGIT_TOL = float(getenv("LOGIT_TOL", 1e-8))                    # infinity-norm tolerance on the logistic score
    LOGIT_MAX_ITER = int(getenv("LOGIT_MAX_ITER", 100))             # IRLS iteration cap
    SEPARATION_BOUND = float(getenv("SEPARATION_BOUND", 30))        # max |V beta| before declaring quasi-separation
    RANK_TOL = float(getenv("RANK_TOL", 1e-10))                     # relative pivot threshold for rank checks

    # weights and variance
    MW_DELTA = float(getenv("MW_DELTA", 0.002))                     # half-width of the smoothed matching band
    BREAD_COND_LIMIT = float(getenv("BREAD_COND_LIMIT", 1e12))      # condition number above which the bread is singular
    BOOT_FAIL_RATIO = float(getenv("BOOT_FAIL_RATIO", 0.2))         # tolerated share of failed bootstrap resamples
    BOOT_REPLICATES = int(getenv("BOOT_REPLICATES", 500))           # default B for --variance bootstrap
    EXTREME_WEIGHT = float(getenv("EXTREME_WEIGHT", 100))           # raw weight above which rows are reported

    # overlap diagnostics
    RUBIN_LO = float(getenv("RUBIN_LO", 0.5))                       # variance ratio below this leans ATT
    RUBIN_HI = float(getenv("RUBIN_HI", 2.0))                       # variance ratio above this leans ATC
    PREVALENCE_LO = float(getenv("PREVALENCE_LO", 0.2))             # prevalence below this leans ATT
    PREVALENCE_HI = float(getenv("PREVALENCE_HI", 0.8))             # prevalence above this leans ATC

    # simulation
    SUPERPOP_N = int(getenv("SUPERPOP_N", 1000000))                 # superpopulation size for true estimands
    THREADS = int(getenv("EQUIPOISE_THREADS", 0))                   # parallel workers. 0 for all cores

    # runtime
    LOG_FILE = getenv("LOG_FILE", None)                             # rotating log file. unset for console only
    LOG_LEVEL = getenv("LOG_LEVEL", "INFO")                         # DEBUG, INFO, WARNING or ERROR
    TZ = getenv("TZ", "UTC")                                        # https://en.wikipedia.org/wiki/List_of_tz_database_time_zones

    # do not edit these variables
    REPORT_SCHEMA = "1"
    SIG_DIGITS = 6


# get all config variables in a list
all_vars = [i for i in Config.__dict__.keys() if not i.startswith("__")]
