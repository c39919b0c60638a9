"""Exception hierarchy shared by all simqos modules."""


class SimQosError(Exception):
    """Base class for every error raised by simqos."""


class InvalidScenario(SimQosError):
    """Raised when a scenario document fails validation.

    ``errors`` holds every problem found, not just the first one.
    """

    def __init__(self, errors):
        self.errors = list(errors)
        lines = "\n".join(str(e) for e in self.errors)
        super().__init__(f"{len(self.errors)} scenario error(s):\n{lines}")


class InternalEventOrderViolation(SimQosError):
    """The virtual clock would have moved backward. Always a simulator bug."""


class InvalidContract(SimQosError, ValueError):
    pass


class UnknownClass(SimQosError, KeyError):
    pass


class InvalidActionForLevel(SimQosError, ValueError):
    pass


class UnknownTarget(SimQosError, KeyError):
    pass


class UnknownConnection(SimQosError, KeyError):
    pass


class UnknownQci(SimQosError, KeyError):
    pass


class UnknownPhb(SimQosError, KeyError):
    pass


class UnknownDscp(SimQosError, KeyError):
    pass


class AllZero(SimQosError, ValueError):
    """Jain's index is undefined when every value is zero."""


class EmptySamples(SimQosError, ValueError):
    pass


class ConservationViolation(SimQosError):
    """sent != delivered + dropped + in_flight for some flow."""
