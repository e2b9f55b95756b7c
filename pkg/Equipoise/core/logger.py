import logging
from logging.handlers import RotatingFileHandler

from config import Config

handlers = [logging.StreamHandler()]
if Config.LOG_FILE:
    handlers.append(
        RotatingFileHandler(Config.LOG_FILE, maxBytes=(1024 * 1024 * 5), backupCount=10)
    )

logging.basicConfig(
    format="[%(asctime)s]:[%(levelname)s]:[%(name)s]:: %(message)s",
    level=getattr(logging, str(Config.LOG_LEVEL).upper(), logging.INFO),
    datefmt="%H:%M:%S",
    handlers=handlers,
)


logging.getLogger("joblib").setLevel(logging.ERROR)
logging.getLogger("matplotlib").setLevel(logging.ERROR)

LOGS = logging.getLogger("Equipoise")
