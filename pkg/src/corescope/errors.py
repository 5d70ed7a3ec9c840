"""Exception types shared across the suite.

Exit-code mapping (see cli.main): UsageError and ConfigError exit 1,
everything else derived from CorescopeError exits 2.
"""


class CorescopeError(Exception):
    """Base class for runtime failures of the suite."""


class UsageError(CorescopeError):
    """Bad command line or API usage (exit code 1)."""


class ConfigError(UsageError):
    """Malformed or out-of-range config file values."""


class ResourceError(CorescopeError):
    """The host cannot satisfy a benchmark's resource needs (exit code 2)."""


class TrialAbortError(CorescopeError):
    """A trial was aborted before all workers completed."""


class WatchdogError(CorescopeError):
    """A two-thread primitive benchmark exceeded its deadlock watchdog."""
