"""
测试共用的 Omega 形式：四族序列的示例和 tan z 的乘积
"""
import math

import pytest

from fde.coefficient import AffinePowerGenerator, FamilyKind, FiniteFactorSpec, OmegaSpec, SequenceFamily


def four_family_spec(m6=2, m8=2, a0=2.0, shifts=(0.5, 1.0), literal=False):
    """
    gamma_{i,n} = n^2 - i/(M6+1), eta_{i,n} = n^{3/2} + i,
    h_{i,n} = 2 A0 n - A_i, zeta_{i,n} = 2 A0 n + A_i.
    literal=True divides by M6 instead, so gamma_{M6,1} = 0.
    """
    scale = m6 if literal else m6 + 1
    gamma = AffinePowerGenerator(c1=1.0, p=2.0, c3=tuple(-i / scale for i in range(1, m6 + 1)))
    eta = AffinePowerGenerator(c1=1.0, p=1.5, c3=tuple(float(i) for i in range(1, m8 + 1)))
    h = AffinePowerGenerator(c2=2.0 * a0, c3=tuple(-a for a in shifts))
    zeta = AffinePowerGenerator(c2=2.0 * a0, c3=tuple(shifts))
    families = (SequenceFamily(FamilyKind.GAMMA, m6, gamma), SequenceFamily(FamilyKind.ETA, m8, eta),
                SequenceFamily(FamilyKind.H, len(shifts), h), SequenceFamily(FamilyKind.ZETA, len(shifts), zeta))
    return OmegaSpec(FiniteFactorSpec(), families, "four-family")


def tan_spec():
    """tan z = z prod (n pi - z)(n pi + z) / (((2n-1) pi/2 - z)((2n-1) pi/2 + z)), normalized."""
    lattice = AffinePowerGenerator(c2=math.pi)
    half = AffinePowerGenerator(c2=math.pi, c3=-0.5 * math.pi)
    families = (SequenceFamily(FamilyKind.H, 1, lattice), SequenceFamily(FamilyKind.GAMMA, 1, lattice),
                SequenceFamily(FamilyKind.ZETA, 1, half), SequenceFamily(FamilyKind.ETA, 1, half))
    return OmegaSpec(FiniteFactorSpec(delta0=1.0, d2=(0.0,)), families, "tan")


@pytest.fixture(scope="session")
def example_spec():
    return four_family_spec()


@pytest.fixture(scope="session")
def tan_omega():
    return tan_spec()
