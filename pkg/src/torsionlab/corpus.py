"""The reference specs used by the suites, tests and scripts."""
from __future__ import annotations

import numpy as np

from .complexes import (
    ComplexSpec,
    ConstantForm,
    SuperconnectionData,
    TwistedDeRham,
    TwistedDolbeault,
)
from .geometry import Character, ComplexTorus, FlatTorus

PHI = np.array([[0, 0], [1, 0]], dtype=complex)  # F^0 -> F^1

GRAM_T2 = np.array([[1.0, 0.2], [0.2, 1.3]])
GRAM_T3 = np.array([[1.0, 0.1, 0.0], [0.1, 1.2, 0.05], [0.0, 0.05, 0.9]])
CHAR_T2 = (0.3, 0.15)
CHAR_T3 = (0.3, 0.15, 0.4)


def circle(u: float, length: float = 1.0) -> ComplexSpec:
    return ComplexSpec(TwistedDeRham(ConstantForm.zero(1)), FlatTorus([[length ** 2]]),
                       Character((u,)), name=f"circle-u{u}")


def t2_de_rham(char=CHAR_T2, gram=GRAM_T2, flux=None) -> ComplexSpec:
    flux = flux if flux is not None else ConstantForm.zero(2)
    return ComplexSpec(TwistedDeRham(flux), FlatTorus(gram), Character(tuple(char)), name="t2-de-rham")


def t3_flux(theta: float = 1.0, char=CHAR_T3, gram=GRAM_T3) -> ComplexSpec:
    return ComplexSpec(TwistedDeRham(ConstantForm.volume(3, theta)), FlatTorus(gram),
                       Character(tuple(char)), name=f"t3-flux-{theta}")


def dolbeault(u: float, v: float, tau: complex = 1j, area_scale: float = 1.0) -> ComplexSpec:
    return ComplexSpec(TwistedDolbeault(0), ComplexTorus(tau, area_scale, (u, v)),
                       name=f"dolbeault-{u}-{v}-{tau}")


def t2_mass(flux: float = 2.0, mass: float = 1.0, char=CHAR_T2, gram=GRAM_T2) -> ComplexSpec:
    """d + m phi + c dx1^dx2 phi on C ⊕ C: flat (phi^2 = 0) and acyclic for m != 0."""
    form = ConstantForm(2, {(): mass * PHI, (0, 1): flux * PHI})
    return ComplexSpec(SuperconnectionData(1, 1, form), FlatTorus(gram), Character(tuple(char)),
                       name=f"t2-mass-{flux}")


def t3_superconnection(char=CHAR_T3, gram=GRAM_T3, theta: float = 1.0) -> ComplexSpec:
    """d + theta vol ⊗ diag(1, 2) on the even bundle C^2."""
    form = ConstantForm(3, {(0, 1, 2): theta * np.diag([1.0, 2.0])})
    return ComplexSpec(SuperconnectionData(2, 0, form), FlatTorus(gram), Character(tuple(char)),
                       name="t3-superconnection")


GAUGE_GENERATOR = np.array([[0.0, 1.0], [0.0, 0.0]])


def corpus() -> list[ComplexSpec]:
    """Specs for the global health checks (McKean-Singer, regularity)."""
    return [
        circle(0.0),
        circle(0.25),
        t2_de_rham(),
        t2_de_rham(char=(0.0, 0.0)),
        t3_flux(1.0),
        t3_flux(1.0, char=(0.0, 0.0, 0.0)),
        dolbeault(0.5, 0.0),
        t2_mass(),
        t3_superconnection(),
    ]
