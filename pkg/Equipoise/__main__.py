import argparse
import sys

from Equipoise.core.logger import LOGS
from Equipoise.helpers.strings import TEXTS
from Equipoise.plugins import ALL_PLUGINS
from Equipoise.version import __version__


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="equipoise",
        description="Balancing-weight estimators of weighted average treatment effects.",
    )
    parser.add_argument("--version", action="version", version=__version__["Equipoise"])
    subparsers = parser.add_subparsers(dest="command", required=True)
    for plugin in ALL_PLUGINS:
        plugin.register(subparsers)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    LOGS.debug(
        TEXTS.BOOTED.format(
            __version__["Equipoise"],
            __version__["Python"],
            __version__["NumPy"],
            __version__["SciPy"],
            __version__["pandas"],
        )
    )
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
