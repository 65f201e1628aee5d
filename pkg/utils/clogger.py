import logging

from typing import Dict, Optional

DEFAULT_FORMAT = "%(asctime)s| %(name)s | %(levelname)s | %(message)s"


class CLogger(logging.Logger):
    _components: Dict[str, "CLogger"] = {}

    def __init__(self, name: str, level: int = logging.INFO, handlers: Dict[logging.Handler, int] = None,
                 formatter: logging.Formatter = None):
        """
        Initialize a component logger.

        :param name: The name of the component, shown in every line.
        :param level: The logging level.
        :param handlers: Dictionary of handlers and their levels.
        :param formatter: The log formatter, defaults to the project's pipe separated format.
        """
        super().__init__(name, level)
        formatter = formatter or logging.Formatter(DEFAULT_FORMAT)
        if handlers:
            for handler, h_level in handlers.items():
                handler.setLevel(h_level)
                handler.setFormatter(formatter)
                self.addHandler(handler)

    @classmethod
    def for_component(cls, name: str, level: Optional[int] = None) -> "CLogger":
        """
        Return the shared logger of a component, creating it with a stream handler on first use.

        Simulations build many short-lived objects (one per seed, one per sweep entry), so
        loggers are cached by name and only their level is refreshed on later calls.
        """
        logger = cls._components.get(name)
        if logger is None:
            level = logging.INFO if level is None else level
            logger = cls(name, level, {logging.StreamHandler(): logging.DEBUG})
            cls._components[name] = logger
        elif level is not None:
            logger.setLevel(level)
        return logger

    @classmethod
    def set_global_level(cls, level: int) -> None:
        for logger in cls._components.values():
            logger.setLevel(level)

    @staticmethod
    def parse_level(level_name: str) -> int:
        level = logging.getLevelName(str(level_name).upper())
        if not isinstance(level, int):
            raise ValueError(f"Unknown log level: {level_name}")
        return level
