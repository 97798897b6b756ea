import pytest

from cavityspin import (
    QGaussianDensity,
    SystemParams,
    delta_from_fwhm,
    ghz_to_angular,
    mhz_to_angular,
)

# Canonical hybrid-system numbers used throughout the suite: a 2.6915 GHz
# cavity with kappa/2pi = 0.8 MHz coupled to a q = 1.39 ensemble of
# 9.4 MHz FWHM centered on the cavity.
OMEGA_C = ghz_to_angular(2.6915)
KAPPA = mhz_to_angular(0.8)
Q_SHAPE = 1.39
FWHM = mhz_to_angular(9.4)


def resonant_system(omega_mhz: float = 8.56, kappa: float = KAPPA) -> SystemParams:
    return SystemParams(
        omega_c=OMEGA_C,
        omega_s=OMEGA_C,
        omega_p=OMEGA_C,
        kappa=kappa,
        Omega=mhz_to_angular(omega_mhz),
    )


def detuned_system(omega_mhz: float, probe_offset: float,
                   ensemble_offset: float = 0.0) -> SystemParams:
    """Probe (and optionally ensemble center) shifted off the cavity line."""
    return SystemParams(
        omega_c=OMEGA_C,
        omega_s=OMEGA_C + ensemble_offset,
        omega_p=OMEGA_C + probe_offset,
        kappa=KAPPA,
        Omega=mhz_to_angular(omega_mhz),
    )


@pytest.fixture(scope="session")
def ensemble() -> QGaussianDensity:
    return QGaussianDensity(
        omega_s=OMEGA_C, q=Q_SHAPE, delta=delta_from_fwhm(Q_SHAPE, FWHM)
    )
