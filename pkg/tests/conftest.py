"""Shared constructors: the default two-media scenario used across tests."""
import pytest

from dualporo import constitutive as con


@pytest.fixture(scope="session")
def fluids():
    return con.FluidPair(mu_w=1.0e-3, mu_n=2.0e-3)


@pytest.fixture(scope="session")
def matrix_vg():
    return con.VanGenuchtenParams(p_r=1.0e5, n=2.0)


@pytest.fixture(scope="session")
def fracture_vg():
    return con.VanGenuchtenParams(p_r=1.0e4, n=2.0)


@pytest.fixture(scope="session")
def sim1_cset(matrix_vg, fracture_vg, fluids):
    return con.ConstitutiveSet(
        matrix=con.MediumProps(porosity=0.35, permeability=1.0e-13,
                               vg=matrix_vg),
        fracture=con.MediumProps(porosity=0.2, permeability=1.0e-13,
                                 vg=fracture_vg),
        fluids=fluids)
