class MagtrackError(Exception):
    pass



class ParameterError(MagtrackError, ValueError):
    """
    A parameter is outside the range the operation accepts.
    """



class DomainError(MagtrackError, ValueError):
    """
    The inputs are valid numbers, but the model is not defined there (a query
    point inside the coil radius, a non-positive amplifier input, ...)
    """



class InsufficientDataError(MagtrackError):
    pass



class SingularFitError(MagtrackError):
    pass



class MissingCalibrationError(MagtrackError):
    pass



class IncompleteFrameError(MagtrackError):
    pass



class UnderdeterminedError(MagtrackError):
    pass



class AlignmentError(MagtrackError):
    pass



class ScenarioLookupError(MagtrackError, LookupError):
    pass



class ParseError(MagtrackError):
    """
    I carry the file and the 1-based line number that could not be parsed.
    """
    def __init__(self, message, path='', line_number=None):
        self.path = path
        self.line_number = line_number
        if line_number is not None:
            message = "{}:{}: {}".format(path or '<input>', line_number, message)
        super(ParseError, self).__init__(message)



class WorkerError(MagtrackError):
    pass
