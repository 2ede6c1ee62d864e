import numpy as np
import pytest

from eitbragg.atomic_medium import AtomicParams, FieldParams
from eitbragg.cme import calibrate_k0_scale, derive_coefficients

TARGET_KAPPA = -2600.0  # 1/m


@pytest.fixture(scope="session")
def rb_atomic():
    return AtomicParams()


@pytest.fixture(scope="session")
def rb_fields():
    return FieldParams()


@pytest.fixture(scope="session")
def k0_calibrated(rb_atomic, rb_fields):
    return calibrate_k0_scale(rb_atomic, rb_fields, TARGET_KAPPA)


@pytest.fixture(scope="session")
def atomic_cal(rb_atomic, k0_calibrated):
    return rb_atomic.with_k0_scale(k0_calibrated)


@pytest.fixture(scope="session")
def coeffs_cal(atomic_cal, rb_fields):
    return derive_coefficients(atomic_cal, rb_fields)


@pytest.fixture(scope="session")
def coeffs_unit(rb_atomic, rb_fields):
    return derive_coefficients(rb_atomic, rb_fields)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
