from .imports import *


class CommandBase:
    """A verb of the ``lexpol`` command line.

    Subclasses are picked up by ``commands()`` without registration; each
    names itself with ``NAME`` and fills in its own argument parser.
    """

    NAME: ClassVar[str] = ""
    DESCRIPTION: ClassVar[str] = ""

    @staticmethod
    def add_args(parser: argparse.ArgumentParser) -> None:
        pass

    def __init__(self, args: argparse.Namespace) -> None:
        self.args = args

    def run(self) -> int:
        raise NotImplementedError


def commands() -> Dict[str, type]:
    return {cls.NAME: cls for cls in CommandBase.__subclasses__() if cls.NAME}


def suite_from_args(args: argparse.Namespace):
    """The positional suite, with parameters from ``--config`` when given."""
    params = load_config(args.config).run.suite_params() if getattr(args, "config", None) else None
    return resolve_suite(args.suite, params)


def add_suite_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("suite", help="built-in suite name or suite definition file")
    parser.add_argument("--config", help="take suite parameters (horizon, shaping, ...) from this config file")
