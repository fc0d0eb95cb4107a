"""Exception types shared across modules."""


class InvalidTrace(ValueError):
    pass


class InvalidConfig(ValueError):
    pass


class InvalidParams(ValueError):
    pass


class FormatError(ValueError):
    """Malformed trace file; carries the 1-based line and optional field."""

    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
        self.message = message


class PolicyRuntimeError(RuntimeError):
    """A policy failed while the simulator was invoking it.

    Wraps the interpreter error (``cause``) with the tick it happened at and,
    when evaluating a suite, the index of the trace.
    """

    def __init__(self, cause, tick: int | None = None, trace_index: int | None = None):
        self.cause = cause
        self.tick = tick
        self.trace_index = trace_index
        super().__init__(self._render())

    def __reduce__(self):
        return (PolicyRuntimeError, (self.cause, self.tick, self.trace_index))

    def __str__(self) -> str:
        return self._render()

    def _render(self) -> str:
        parts = []
        if self.trace_index is not None:
            parts.append(f"trace {self.trace_index}")
        if self.tick is not None:
            parts.append(f"tick {self.tick}")
        where = f" ({', '.join(parts)})" if parts else ""
        return f"policy failed{where}: {self.cause}"
