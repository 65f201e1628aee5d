import dataclasses

from typing import Any, Dict, Type, TypeVar, get_type_hints

T = TypeVar("T")


class DeserializationError(ValueError):
    """Raised when raw JSON data does not fit the target dataclass; carries the offending key."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


class Deserializer:
    """A small deserializer turning JSON sections into config dataclasses.

    Note:
    This is a project tool, not a general purpose deserializer. It knows the handful of field
    types used by the config sections (bool, int, float, str, lists of those, Optional).

    Example:
        @dataclass
        class Federation:
            num_clients: int = 10
            omega: float = 0.1

        federation = Deserializer.deserialize(Federation, {"num_clients": 4}, "federation")
        print(federation.num_clients)  # Output: 4
        print(federation.omega)        # Output: 0.1
    """

    @staticmethod
    def deserialize(cls: Type[T], json_data: Dict[str, Any], section: str) -> T:
        """Build a dataclass instance from JSON data.

        Args:
            cls (Type): The dataclass type to build.
            json_data (dict): Raw values; missing keys keep their dataclass defaults.
            section (str): The section name, used to report fully qualified keys.

        Returns:
            The populated dataclass instance.

        Raises:
            DeserializationError: On an unknown key or a value of the wrong type.
        """
        if json_data is None:
            return cls()
        if not isinstance(json_data, dict):
            raise DeserializationError(section, f"expected an object, got {type(json_data).__name__}")

        hints = get_type_hints(cls)
        known = {field.name for field in dataclasses.fields(cls)}

        values = {}
        for key, raw in json_data.items():
            qualified = f"{section}.{key}"
            if key not in known:
                raise DeserializationError(qualified, "unknown key")
            values[key] = Deserializer.coerce(raw, hints[key], qualified)

        return cls(**values)

    @staticmethod
    def coerce(raw: Any, annotation: Any, qualified: str) -> Any:
        origin = getattr(annotation, "__origin__", None)
        args = getattr(annotation, "__args__", ())

        # Optional[X] arrives as Union[X, None]
        if origin is not None and type(None) in args:
            if raw is None:
                return None
            inner = [arg for arg in args if arg is not type(None)][0]
            return Deserializer.coerce(raw, inner, qualified)

        if origin in (list, tuple):
            if not isinstance(raw, (list, tuple)):
                raise DeserializationError(qualified, f"expected a list, got {raw!r}")
            item_type = args[0] if args else Any
            return [Deserializer.coerce(item, item_type, qualified) for item in raw]

        if annotation is bool:
            if isinstance(raw, bool):
                return raw
            if isinstance(raw, str) and raw.lower() in ("true", "false"):
                return raw.lower() == "true"
            raise DeserializationError(qualified, f"expected true/false, got {raw!r}")

        if annotation is int:
            if isinstance(raw, bool) or not isinstance(raw, (int, float, str)):
                raise DeserializationError(qualified, f"expected an integer, got {raw!r}")
            try:
                value = float(raw)
            except ValueError:
                raise DeserializationError(qualified, f"expected an integer, got {raw!r}")
            if not value.is_integer():
                raise DeserializationError(qualified, f"expected an integer, got {raw!r}")
            return int(value)

        if annotation is float:
            if isinstance(raw, bool):
                raise DeserializationError(qualified, f"expected a number, got {raw!r}")
            try:
                return float(raw)
            except (TypeError, ValueError):
                raise DeserializationError(qualified, f"expected a number, got {raw!r}")

        if annotation is str:
            if not isinstance(raw, (str, int, float)) or isinstance(raw, bool):
                raise DeserializationError(qualified, f"expected a string, got {raw!r}")
            return str(raw)

        return raw
