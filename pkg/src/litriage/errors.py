"""Error taxonomy shared across the pipeline, mapped to CLI exit codes."""

EXIT_USAGE = 2
EXIT_NETWORK = 3
EXIT_PROTOCOL = 4
EXIT_DATA = 5


class TriageError(Exception):
    """Base class for pipeline failures."""

    exit_code = 1


class NetworkError(TriageError):
    """A remote service stayed unreachable after bounded retries."""

    exit_code = EXIT_NETWORK


class ProtocolError(TriageError):
    """A remote service answered with something we cannot interpret."""

    exit_code = EXIT_PROTOCOL


class DataError(TriageError):
    """A local artifact (corpus, taxonomy, annotations, config) is invalid."""

    exit_code = EXIT_DATA
