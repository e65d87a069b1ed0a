"""Exception hierarchy shared by all fgdm subsystems."""


class FgdmError(Exception):
    """Base class for every error the pipeline can raise deliberately."""


# graph layer


class EmptyGraph(FgdmError):
    """No nodes survived graph construction."""


class InvariantViolation(FgdmError):
    """A structural invariant (containment forest, unique ids) is broken."""


class ParseError(FgdmError):
    """Malformed DOT input."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


# segmentation


class UnbalancedDelimiters(FgdmError):
    """Brace-dialect source with mismatched delimiters."""

    def __init__(self, message: str, line: int):
        super().__init__(f"{message} (line {line})")
        self.line = line


# gateway


class ProviderUnavailable(FgdmError):
    """Live completion provider failed after exhausting retries."""


class FixtureMiss(FgdmError):
    """Scripted backend has no recorded response for a request digest."""

    def __init__(self, digest: str, tag: str):
        super().__init__(f"no fixture for digest {digest} (tag {tag!r})")
        self.digest = digest
        self.tag = tag


class NoPayloadFound(FgdmError):
    """Response text contains no parseable JSON object."""


class SchemaViolation(FgdmError):
    """A JSON payload was found but no candidate satisfied the schema."""

    def __init__(self, schema_id: str, problems: list[str]):
        super().__init__(f"no {schema_id} payload: " + "; ".join(problems))
        self.schema_id = schema_id
        self.problems = problems


# pipeline


class Agent1Failed(FgdmError):
    """Graph builder agent produced an unusable graph twice in a row."""


# retrieval store


class DuplicateRecordId(FgdmError):
    """Insert collided with an existing record id."""


class VersionMismatch(FgdmError):
    """Persisted store file has an unsupported version."""


class CorruptFile(FgdmError):
    """Persisted store file is not parseable."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


# repair validation


class InconsistentPlan(FgdmError):
    """Edge operations do not reproduce the repaired graph from the original."""


# metrics


class EmptyInput(FgdmError):
    """Aggregation requires at least one value."""


# harness


class EmptyCorpus(FgdmError):
    """Corpus directory contains no buggy program files."""
