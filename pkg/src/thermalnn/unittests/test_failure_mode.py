"""
Purpose: Unit tests for the failure_mode.py module
"""

import logging

import pytest

from ..const import RAISE, RECORD, WARN
from ..failure_mode import FailureMode, recording
from ..tnn_exceptions import TrainingError


def test_default_behaviour_raises():
    mode = FailureMode()
    assert mode.behaviour == RAISE
    assert mode.modifiers is None
    with pytest.raises(TrainingError):
        mode.handle(TrainingError("seed 3 diverged"), "seed 3")


def test_unknown_arguments_are_ignored():
    mode = FailureMode("explode", RECORD)
    assert mode.behaviour == RECORD
    mode.behaviour = "explode"
    assert mode.behaviour == RECORD


def test_recording_returns_error_and_warns(caplog):
    mode = recording()
    assert not mode.should_raise
    assert mode.modifiers == (WARN,)
    error = TrainingError("window diverged")
    with caplog.at_level(logging.WARNING):
        assert mode.handle(error, "candidate (1, 2, 1, 4)") is error
    assert "candidate (1, 2, 1, 4) failed" in caplog.text


def test_record_without_warning_is_silent(caplog):
    with caplog.at_level(logging.WARNING):
        FailureMode(RECORD).handle(TrainingError("x"), "seed 1")
    assert caplog.text == ""
