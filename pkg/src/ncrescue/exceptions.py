""" Errors raised while rescuing lost packets."""


class RescueError(Exception):
    """ Base class for protocol failures detected during a trial."""


class CodingError(RescueError):
    """ A scheduled transmission mixes packets that cannot be coded."""


class DecodeError(RescueError):
    """ An intended receiver got a transmission it cannot decode."""


class MonotonicityError(RescueError):
    """ A packet's receive-state lost a receiver that held it."""


class RoundCapExceeded(RescueError):
    """ A trial did not empty its queues within the configured rounds."""

    def __init__(self, scheme, trial, rounds, remaining):
        self.scheme = scheme
        self.trial = trial
        self.rounds = rounds
        self.remaining = remaining
        super().__init__(
            f"{scheme} trial {trial} still has {remaining} queued packets "
            f"after {rounds} rounds")

    def __reduce__(self):
        # rebuilt in the parent process when raised by a worker
        return type(self), (self.scheme, self.trial, self.rounds,
                            self.remaining)


class ExperimentAborted(Exception):
    """ A trial of an experiment grid point was aborted."""

    def __init__(self, scheme, point, error):
        self.scheme = scheme
        self.point = point
        self.error = error
        super().__init__(
            f"{scheme} at N={point.n}, ber={point.ber}, "
            f"omega={point.channel.omegas}: {error}")
