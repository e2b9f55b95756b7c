import datetime
import math
import time
from typing import Sequence

import pandas as pd
import psutil
import pytz

from config import Config
from Equipoise.version import __start_time__, __version__


class Formatters:
    def __init__(self) -> None:
        self.time_zone = pytz.timezone(Config.TZ)

    def sig(self, value: float, digits: int = Config.SIG_DIGITS) -> str:
        if value is None or (isinstance(value, float) and math.isnan(value)):
            return "nan"
        return f"{value:.{digits}g}"

    def interval(self, bounds: Sequence[float]) -> str:
        lo, hi = bounds
        return f"[{self.sig(lo)}, {self.sig(hi)}]"

    def table(self, frame: pd.DataFrame) -> str:
        return frame.to_string(index=False, float_format=self.sig)

    def get_readable_time(self, seconds: int) -> str:
        count = 0
        readable = ""
        time_list = []
        time_suffix_list = ["s", "m", "h", "days"]
        while count < 4:
            count += 1
            if count < 3:
                remainder, result = divmod(seconds, 60)
            else:
                remainder, result = divmod(seconds, 24)
            if seconds == 0 and remainder == 0:
                break
            time_list.append(int(result))
            seconds = int(remainder)
        for i in range(len(time_list)):
            time_list[i] = str(time_list[i]) + time_suffix_list[i]
        if len(time_list) == 4:
            readable += time_list.pop() + ", "
        time_list.reverse()
        readable += ":".join(time_list)
        return readable or "0s"

    def timestamp(self) -> str:
        return datetime.datetime.now(self.time_zone).isoformat(timespec="seconds")

    def system_stats(self) -> dict:
        uptime = int(time.time() - __start_time__)
        return {
            "cores": psutil.cpu_count(logical=True),
            "physical_cores": psutil.cpu_count(logical=False),
            "ram": f"{psutil.virtual_memory().percent}%",
            "runtime": self.get_readable_time(uptime),
        }

    def manifest(self, **context) -> dict:
        return {
            "schema": Config.REPORT_SCHEMA,
            "created": self.timestamp(),
            "versions": dict(__version__),
            "system": self.system_stats(),
            **context,
        }


formatter = Formatters()
