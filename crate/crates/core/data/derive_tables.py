"""Regenerates the photon interaction columns of the embedded attenuation tables.

Inputs are the published total mass attenuation (mu/rho, coherent included)
and mass energy-absorption (mu_en/rho) coefficients. The Compton column is the
free-electron Klein-Nishina cross section scaled by the electron density of
the material. The photoelectric column is the energy-absorption coefficient
minus the Compton energy-transfer part, which holds for low-Z media where
fluorescence and radiative losses are negligible below 150 keV.
"""
import numpy as np
from scipy.integrate import quad

R_E = 2.8179403262e-13  # cm
N_A = 6.02214076e23
MEC2 = 510.99895

ENERGIES = [10, 15, 20, 30, 40, 50, 60, 80, 100, 150]

# name, density, Z/A, mu/rho, mu_en/rho
MATERIALS = {
    "air": (1.205e-3, 0.49919,
            [5.120, 1.614, 0.7779, 0.3538, 0.2485, 0.2080, 0.1875, 0.1662, 0.1541, 0.1356],
            [4.742, 1.334, 0.5389, 0.1537, 0.06833, 0.04098, 0.03041, 0.02407, 0.02325, 0.02496]),
    "water": (1.0, 0.55508,
              [5.329, 1.673, 0.8096, 0.3756, 0.2683, 0.2269, 0.2059, 0.1837, 0.1707, 0.1505],
              [4.944, 1.374, 0.5503, 0.1557, 0.06947, 0.04223, 0.03190, 0.02597, 0.02546, 0.02764]),
    "soft_tissue": (1.06, 0.54975,
                    [5.379, 1.694, 0.8223, 0.3792, 0.2688, 0.2264, 0.2048, 0.1823, 0.1693, 0.1492],
                    [4.964, 1.396, 0.5638, 0.1610, 0.07192, 0.04349, 0.03258, 0.02615, 0.02544, 0.02745]),
}


def kn(e_kev):
    k = e_kev / MEC2

    def dsig(c):
        p = 1.0 / (1.0 + k * (1.0 - c))
        return np.pi * R_E**2 * p * p * (p + 1.0 / p - (1.0 - c * c))

    sigma = quad(dsig, -1.0, 1.0, epsabs=0, epsrel=1e-12)[0]
    transfer = quad(lambda c: dsig(c) * (1.0 - 1.0 / (1.0 + k * (1.0 - c))), -1.0, 1.0,
                    epsabs=0, epsrel=1e-12)[0]
    return sigma, transfer / sigma


for name, (rho, z_over_a, total, en) in MATERIALS.items():
    print(f"// {name}, density {rho} g/cm3")
    for e, mu, mu_en in zip(ENERGIES, total, en):
        sigma, frac = kn(e)
        compton = sigma * N_A * z_over_a
        photo = mu_en - compton * frac
        assert photo > 0 and photo + compton <= mu, (name, e)
        print(f"    ({e:.1f}, {mu}, {photo:.5}, {compton:.5}),")
