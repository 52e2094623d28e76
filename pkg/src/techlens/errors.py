"""Exception hierarchy shared by every stage of the pipeline."""


class TechlensError(Exception):
    """Base class for all errors raised by techlens."""


class DomainError(TechlensError, ValueError):
    """An operation was called outside its domain (empty matrix, bad threshold, ...)."""


class CorpusParseError(TechlensError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class SchemaError(TechlensError):
    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)
        self.line = line
        self.field = field


class DictionaryError(TechlensError):
    """Dictionary file could not be loaded (surface collision, malformed header)."""


class FetchError(TechlensError):
    """Transport failure; carries the URL that could not be retrieved."""

    def __init__(self, url: str, reason: str):
        super().__init__(f"{url}: {reason}")
        self.url = url
        self.reason = reason


class NotFoundError(FetchError):
    pass


class FixtureMissingError(FetchError):
    pass


class PageParseError(TechlensError):
    def __init__(self, url: str, reason: str):
        super().__init__(f"{url}: {reason}")
        self.url = url
        self.reason = reason
