"""Exception hierarchy shared by all modules."""


class CMSError(Exception):
    """Base class for toolkit errors."""


class NotIrreducible(CMSError):
    pass


class KindMismatch(CMSError, TypeError):
    pass


class DSLSyntaxError(CMSError):
    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"{message}{where}")


class SemanticError(CMSError, ValueError):
    pass


class DomainError(CMSError, ArithmeticError):
    pass


class SamplerExhausted(CMSError):
    pass


class UnknownBuiltin(CMSError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


class InvalidStochasticMatrix(CMSError, ValueError):
    pass


class InvalidParams(CMSError, ValueError):
    pass


class MissingRate(CMSError):
    pass


class MissingModulus(CMSError):
    pass


class OrphanPoint(CMSError, ValueError):
    pass


class CapExceeded(CMSError):
    pass


class InadmissibleWord(CMSError, ValueError):
    pass


class WrongAlphabet(CMSError, ValueError):
    pass


class VertexMismatch(CMSError, ValueError):
    pass
