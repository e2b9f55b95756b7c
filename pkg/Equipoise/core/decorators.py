from functools import wraps

from Equipoise.core.logger import LOGS
from Equipoise.helpers.strings import TEXTS
from Equipoise.utils.exceptions import DATA_ERROR, EquipoiseException


# run a command and turn package errors into exit codes
def CommandWrapper(func):
    @wraps(func)
    def decorated(*args, **kwargs):
        try:
            func(*args, **kwargs)
        except EquipoiseException as exc:
            LOGS.error(TEXTS.FAILED.format(exc.kind, exc))
            return exc.exit_code
        except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
            LOGS.error(TEXTS.FAILED.format("InputError", exc))
            return DATA_ERROR
        return 0

    return decorated
