import math


class DecayConstants:
    """
    210Pb decay constants.

    Attributes:
        lam (float): Decay constant, 1/yr.
        lam_sd (float): Standard deviation of the decay constant, 1/yr.
        half_life (float): Half-life, yr.
    """

    def __init__(self, lam=0.03118, lam_sd=0.00017, half_life=22.23):
        if lam <= 0 or lam_sd < 0 or half_life <= 0:
            raise ValueError("Decay constants must be positive.")
        if abs(math.log(2) / lam - half_life) > 0.01:
            raise ValueError("ln(2)/lambda must match the half-life within 0.01 yr.")
        self.lam = lam
        self.lam_sd = lam_sd
        self.half_life = half_life

    def __repr__(self):
        return f"DecayConstants(lam={self.lam}, lam_sd={self.lam_sd}, half_life={self.half_life})"

    @property
    def mean_life(self):
        return 1.0 / self.lam


PB210 = DecayConstants()
LAMBDA = PB210.lam

# 1 g/cm2 of dry mass = 10 kg/m2
AREAL_MASS_FACTOR = 10.0
