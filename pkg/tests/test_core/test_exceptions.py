"""Tests for the exception hierarchy."""

import pytest

from blowuplab.core import exceptions
from blowuplab.core.exceptions import (
    BlowupLabException,
    EllipticSolveError,
    NonPhysicalStateError,
    ProfileConvergenceError,
    ProfileError,
    SimulationInstabilityError,
    StorageError,
)


def exception_classes():
    return [
        obj
        for obj in vars(exceptions).values()
        if isinstance(obj, type) and issubclass(obj, Exception) and obj is not BlowupLabException
    ]


@pytest.mark.parametrize("cls", exception_classes(), ids=lambda c: c.__name__)
def test_every_error_is_a_lab_error(cls):
    assert issubclass(cls, BlowupLabException)
    assert cls.__doc__


def test_plain_errors_keep_their_message():
    err = exceptions.RescaleError("window is empty")
    assert str(err) == "window is empty"
    with pytest.raises(BlowupLabException):
        raise err


def test_default_messages():
    assert "min value -0.5 at x=1" in str(NonPhysicalStateError(-0.5, 1.0))
    assert "Helmholtz solve failed" in str(EllipticSolveError("Helmholtz", 1e-3))
    assert str(StorageError("run/manifest.json")) == "run/manifest.json: cannot read run file"
    assert isinstance(ProfileConvergenceError(1.0, 0.1), ProfileError)


def test_instability_keeps_the_trajectory():
    marker = object()
    err = SimulationInstabilityError(0.1, 2e-3, 1e-3, marker)
    assert err.trajectory is marker
    assert err.drift == 2e-3
    assert "exceeds limit" in str(err)
