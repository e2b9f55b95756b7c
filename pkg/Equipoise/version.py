import platform
import time

import numpy
import pandas
import scipy

# versions dictionary
__version__ = {
    "Equipoise": "0.1.0",
    "Python": platform.python_version(),
    "NumPy": numpy.__version__,
    "SciPy": scipy.__version__,
    "pandas": pandas.__version__,
}

# store start time
__start_time__ = time.time()
