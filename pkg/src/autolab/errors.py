"""Exception types shared across the package."""


class AutolabError(Exception):
    """Base class for every error raised by autolab."""


class UnsupportedLength(AutolabError):
    """The distribution has empty support (or cannot be sampled) at this length."""


class NoExactSupport(AutolabError):
    """The problem only offers a sampler at this length, no exact table."""


class EnumerationTooLarge(AutolabError):
    """An exhaustive enumeration would exceed its configured cap."""


class TooLarge(AutolabError):
    """Exact binomial summation requested above the supported trial count."""


class DomainError(AutolabError, ValueError):
    """An argument lies outside the mathematical domain of a formula."""


class MemberInput(AutolabError):
    """An operation defined only on non-members received a member."""


class GridMismatch(AutolabError):
    """Two time tables do not share the same (x, d) grid."""


class ConfigError(AutolabError):
    """Invalid experiment configuration.

    ``problems`` holds ``(field, message)`` pairs so callers can print
    field-level diagnostics.
    """

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [("config", problems)]
        self.problems = list(problems)
        super().__init__("; ".join(f"{field}: {msg}" for field, msg in self.problems))
