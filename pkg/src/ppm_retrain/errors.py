"""Exception hierarchy shared by every stage of the pipeline."""


class PPMError(Exception):
    """Base class; the CLI maps any subclass to exit code 2."""


class MissingColumn(PPMError):
    pass


class MalformedTimestamp(PPMError):
    def __init__(self, row, value):
        super().__init__(f"row {row}: cannot parse timestamp {value!r}")
        self.row = row


class MixedAttributeType(PPMError):
    def __init__(self, name, detail=""):
        super().__init__(f"attribute {name!r}: {detail}" if detail else f"attribute {name!r}")
        self.name = name


class XmlSyntax(PPMError):
    def __init__(self, position, msg=""):
        super().__init__(f"XML syntax error at {position}: {msg}")
        self.position = position


class MissingConceptName(PPMError):
    def __init__(self, where):
        super().__init__(f"missing concept:name on {where}")
        self.where = where


class UnknownAttribute(PPMError):
    def __init__(self, name):
        super().__init__(f"unknown attribute {name!r}")
        self.name = name


class RuleSyntax(PPMError):
    pass


class TooFewTraces(PPMError):
    pass


class LengthMismatch(PPMError):
    pass


class EmptyDataset(PPMError):
    pass


class FeatureMismatch(PPMError):
    pass


class EmptyBackground(PPMError):
    pass


class EmptyQuadrant(PPMError):
    pass


class EmptyClass(PPMError):
    pass


class EncodingMismatch(PPMError):
    pass


class ProtectedViolation(PPMError):
    pass


class Unalignable(PPMError):
    def __init__(self, trace_id, constraint, target):
        super().__init__(f"cannot align trace {trace_id!r} to {constraint} = {target}")
        self.trace_id = trace_id
        self.constraint = constraint
        self.target = target


class ConstraintSyntax(PPMError):
    pass


class ConfigError(PPMError):
    pass
