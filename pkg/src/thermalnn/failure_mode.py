"""
Purpose: Decide what a batch job does when one of its items fails, e.g. one seed of a
    repeated fit or one candidate of a grid search.
"""

import logging

from .const import RAISE, RECORD, WARN

FAILURE_BEHAVIOURS = (RAISE, RECORD)
FAILURE_MODIFIERS = (WARN,)

logger = logging.getLogger(__name__)


class FailureMode(object):
    """
    RAISE aborts the batch with the first error; RECORD keeps the error with the failed item
    and lets the batch continue. The WARN modifier also logs recorded errors. Unknown
    arguments are ignored and the behaviour defaults to RAISE.
    """

    def __init__(self, *args):
        behaviours = [arg for arg in args if arg in FAILURE_BEHAVIOURS]
        self._behaviour = behaviours[-1] if behaviours else None
        self._modifiers = frozenset(arg for arg in args if arg in FAILURE_MODIFIERS)

    def __repr__(self):
        return "FailureMode({!r}, modifiers={})".format(self.behaviour, self.modifiers)

    @property
    def behaviour(self):
        return self._behaviour or RAISE

    @behaviour.setter
    def behaviour(self, value):
        if value in FAILURE_BEHAVIOURS:
            self._behaviour = value

    @property
    def modifiers(self):
        if not self._modifiers:
            return None
        return tuple(sorted(self._modifiers))

    @property
    def should_raise(self):
        return self.behaviour == RAISE

    @property
    def should_warn(self):
        return WARN in self._modifiers

    def handle(self, error, item):
        """
        :param Exception error: raised while processing item
        :param item: label of the failed item for the log, e.g. "seed 3"
        :return Exception: the error when it is recorded
        """
        if self.should_raise:
            raise error
        if self.should_warn:
            logger.warning("%s failed: %s", item, error)
        return error


def recording():
    """Record and log every failure; the default of repeated fits and grid searches"""
    return FailureMode(RECORD, WARN)
