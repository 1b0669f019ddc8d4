"""Exception hierarchy shared by all modules."""


class VecmapError(Exception):
    """Base class for every error raised by this package."""

    category = "error"


class DomainError(VecmapError, ValueError):
    """An argument violates a mathematical precondition."""

    category = "domain"


class SchemaError(VecmapError, ValueError):
    """A scene file does not follow the documented schema.

    ``category`` is one of ``"syntax"``, ``"schema"``, ``"class"`` or
    ``"geometry"`` so callers (and the invalid-corpus tests) can tell
    failure families apart without parsing messages.
    """

    def __init__(self, message, *, category="schema", path=None, line=None):
        self.category = category
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(f"{where}{message}")
