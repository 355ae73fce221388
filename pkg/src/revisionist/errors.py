"""Exception hierarchy shared across the package.

Every error raised on purpose derives from :class:`RevisionistError`, which
lets the command line map families of failures onto exit codes.
"""

from __future__ import annotations


class RevisionistError(Exception):
    """Base class for all deliberate errors."""


# -- simulated system -------------------------------------------------------

class StepOnTerminated(RevisionistError):
    """A process that already produced its output was asked to step."""


class AlternationViolation(RevisionistError):
    """A process issued two Scans or two Updates back to back."""


class BadComponent(RevisionistError):
    """A component index outside 1..m."""


# -- base objects -----------------------------------------------------------

class ForeignComponent(RevisionistError):
    """A process tried to append to a component it does not own."""


class DuplicateTimestamp(RevisionistError):
    """Two triples for one component carry the same maximal timestamp."""


class BadComponentList(RevisionistError):
    """Block-Update components are empty, repeated, too many or out of range."""


# -- checkers ---------------------------------------------------------------

class MalformedTrace(RevisionistError):
    """A trace is internally inconsistent (bad nesting, bad replay)."""


class TooLarge(RevisionistError):
    """The brute-force oracle was handed a history above its size limit."""


# -- simulation engine ------------------------------------------------------

class BadParameters(RevisionistError):
    """Parameters rejected before any run starts (exit code 2 on the CLI)."""


class BadN(BadParameters):
    """A process count a protocol constructor cannot work with."""


class ProtocolMisbehavior(RevisionistError):
    """A simulated protocol broke the scan/update alternation contract."""


class LocalSimBudgetExceeded(RevisionistError):
    """A local solo simulation did not finish within its step budget."""


class MissingRevisionSource(RevisionistError):
    """A revision refers to a Block-Update that is absent from the history."""


class BadMachine(RevisionistError):
    """A nondeterministic machine description is malformed."""


class NoSoloPath(RevisionistError):
    """Some reachable state of a machine has no terminating solo path."""
