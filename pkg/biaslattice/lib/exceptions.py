class BiasLatticeException(Exception):
    exit_code = 1

    def __init__(self, message):
        self.message = message

    def __str__(self):
        return self.message

    def __repr__(self):
        return self.message


class ShapeError(BiasLatticeException):
    '''Raised by a tensor op whose inputs do not conform.  The message
    names the op kind and the offending shapes.'''
    exit_code = 5

    def __init__(self, kind, *shapes):
        shapestr = ', '.join(str(tuple(s)) for s in shapes)
        BiasLatticeException.__init__(self,
            "Shape mismatch in {}: {}".format(kind, shapestr))
        self.kind = kind
        self.shapes = shapes


class GraphError(BiasLatticeException):
    '''Raised when backward is asked for something the graph can't
    deliver (non-scalar loss, loss recorded in some other graph).'''
    exit_code = 5


class NonFiniteError(BiasLatticeException):
    exit_code = 5


class TokenizerError(BiasLatticeException):
    exit_code = 9


class TransducerError(BiasLatticeException):
    exit_code = 10


class InstanceTooLarge(TransducerError):
    '''Raised by the brute-force alignment oracle when the number of
    lattice paths is beyond what we're willing to enumerate.'''
    pass


class CatalogError(BiasLatticeException):
    exit_code = 6


class DataError(BiasLatticeException):
    exit_code = 6


class ConfigError(BiasLatticeException):
    exit_code = 6


class MissingFileError(BiasLatticeException):
    exit_code = 3

    def __init__(self, path, what="file"):
        BiasLatticeException.__init__(self, "No such {}: {}".format(what, path))
        self.path = path


class CheckpointVersionError(BiasLatticeException):
    exit_code = 4


class DivergenceError(BiasLatticeException):
    '''Raised when a training loss goes non-finite.  diagnostics holds
    whatever the trainer knew at the time (epoch, utterance, last good
    losses).'''
    exit_code = 5

    def __init__(self, message, diagnostics=None):
        BiasLatticeException.__init__(self, message)
        self.diagnostics = diagnostics or {}


class ChecksumDriftError(BiasLatticeException):
    '''Frozen base parameters changed during adapter training.  Always
    a bug.'''
    exit_code = 7


class EvalError(BiasLatticeException):
    exit_code = 8
