"""Error hierarchy shared by every service.

Each error class carries a short wire code. When a servant raises one while
handling a request, the bus sends an err frame with that code; the caller
may re-raise the matching typed error via `typed_error`.
"""

from __future__ import annotations

# code -> exception class, populated by MinifError.__init_subclass__
CODE_REGISTRY: dict[str, type] = {}


class MinifError(Exception):
    code = "Error"

    def __init__(self, detail: str = ""):
        super().__init__(detail)
        self.detail = detail

    def __init_subclass__(cls, **kw):
        super().__init_subclass__(**kw)
        if "code" not in cls.__dict__:
            cls.code = cls.__name__
        CODE_REGISTRY.setdefault(cls.code, cls)


class RemoteError(MinifError):
    """An err reply received over the bus; `code` is whatever the remote sent."""

    def __init__(self, code: str, detail: str = ""):
        super().__init__(detail)
        self.code = code

    def __str__(self):
        return f"{self.code}: {self.detail}"


def typed_error(code: str, detail: str = "") -> MinifError:
    """Best-effort reconstruction of a typed error from a wire code."""
    cls = CODE_REGISTRY.get(code)
    if cls is None or cls is RemoteError:
        return RemoteError(code, detail)
    return cls(detail)


def code_of(exc: BaseException) -> str:
    return getattr(exc, "code", "Error")
