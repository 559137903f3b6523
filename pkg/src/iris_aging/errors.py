"""Exception hierarchy shared by every stage of the pipeline."""


class IrisAgingError(Exception):
    """Base class for all domain errors raised by this package."""


class InvalidGeometry(IrisAgingError, ValueError):
    """Segmentation circles violate 0 < PR < IR or pupil-inside-iris."""


class InvalidCircle(InvalidGeometry):
    """A manifest row carries an invalid circle pair."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DegenerateGrid(IrisAgingError, ValueError):
    pass


class DegenerateMask(IrisAgingError, ValueError):
    """No valid (mask-true) pixel is left to average over."""


class ImageFormatError(IrisAgingError, ValueError):
    pass


class MissingPolar(IrisAgingError, ValueError):
    pass


class PolarTooSmall(IrisAgingError, ValueError):
    pass


class ConfigMismatch(IrisAgingError, ValueError):
    pass


class NoOverlap(IrisAgingError, ValueError):
    """Two iris codes share no mutually valid bit at any tested shift."""


class ParseError(IrisAgingError, ValueError):
    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)


class DuplicateId(ParseError):
    pass


class MissingScore(IrisAgingError, KeyError):
    def __init__(self, pair):
        self.pair = tuple(pair)
        super().__init__(f"no score for pair {self.pair[0]},{self.pair[1]}")

    def __str__(self):
        return self.args[0]


class MissingCovariate(IrisAgingError, KeyError):
    def __init__(self, message, pair=None):
        self.pair = pair
        super().__init__(message)

    def __str__(self):
        return self.args[0]


class EmptyInput(IrisAgingError, ValueError):
    pass


class Underdetermined(IrisAgingError, ValueError):
    """Fewer observations than parameters (n <= p)."""


class RankDeficient(IrisAgingError, ValueError):
    def __init__(self, columns):
        self.columns = list(columns)
        super().__init__(f"design matrix is rank deficient in column(s): {', '.join(map(str, self.columns))}")


class InvalidDf(IrisAgingError, ValueError):
    pass


class UnknownModel(IrisAgingError, KeyError):
    def __init__(self, name, known):
        self.name = name
        self.known = list(known)
        super().__init__(f"unknown model {name!r}; known models: {', '.join(self.known)}")

    def __str__(self):
        return self.args[0]


class ModelSpecError(IrisAgingError, ValueError):
    pass
