"""Tabulated reference states for the Y8 and MY10 test fluids.

Temperatures in K, pressures in bar, volumes in L/mol, energies in kJ/mol.
"""
import numpy as np

STATES = {
    "A": dict(fluid="y8", T=295.4, p=198.1, v=0.0805680, h=-94.704181, u=-96.300235),
    "B": dict(fluid="y8", T=335.2, p=134.5, v=0.1533446, h=-90.636841, u=-92.699326),
    "C": dict(fluid="y8", T=375.3, p=194.8, v=0.1273056, h=-87.895981, u=-90.375895),
    "D": dict(fluid="my10", T=509.1, p=104.9, v=0.2280903, h=-142.74142, u=-145.13409),
    "E": dict(fluid="my10", T=566.6, p=75.4, v=0.3846589, h=-124.94053, u=-127.84086),
    "F": dict(fluid="my10", T=563.5, p=32.7, v=1.0596464, h=-120.73426, u=-124.19930),
}

# liquid and vapor mole fractions in the component order of the shipped mixtures
COMPOSITIONS = {
    "A": (
        [0.74744792, 0.06057858, 0.03589832, 0.06266242, 0.05032462, 0.04308814],
        [0.84906008, 0.05408446, 0.02725004, 0.03497518, 0.02204618, 0.01258406],
    ),
    "B": (
        [0.47658529, 0.06296756, 0.05092726, 0.13974651, 0.13898012, 0.13079327],
        [0.87746005, 0.05530475, 0.02646516, 0.02656967, 0.01144221, 0.00275817],
    ),
    "C": (
        [0.60400388, 0.05844115, 0.03965730, 0.09067889, 0.09260111, 0.11461768],
        [0.81762325, 0.05652908, 0.03025112, 0.04396745, 0.03070421, 0.02092489],
    ),
    "D": (
        [0.32277170, 0.02889804, 0.03944780, 0.06033169, 0.04080501, 0.03095915, 0.05206707, 0.05247517,
         0.31843114, 0.05381324],
        [0.65714256, 0.04243037, 0.04622895, 0.05625849, 0.03091922, 0.01918057, 0.02668295, 0.02207942,
         0.09209178, 0.00698568],
    ),
    "E": (
        [0.27245022, 0.02539431, 0.03581565, 0.05673424, 0.03964769, 0.03106314, 0.05397352, 0.05603950,
         0.36069877, 0.06818296],
        [0.42483512, 0.03444446, 0.04403788, 0.06315144, 0.04033998, 0.02897407, 0.04616557, 0.04417191,
         0.24142602, 0.03245354],
    ),
    "F": (
        [0.07783597, 0.00953245, 0.01633421, 0.03147630, 0.02627885, 0.02441470, 0.05015849, 0.06088237,
         0.52938744, 0.17369922],
        [0.38155198, 0.03237280, 0.04274357, 0.06330675, 0.04159069, 0.03064750, 0.04998163, 0.04873841,
         0.27340711, 0.03565955],
    ),
}

MY10_EIGENVALUES = (9.9574, 0.0707, -0.0280)


def liquid_vapor(point):
    x, y = COMPOSITIONS[point]
    return np.array(x), np.array(y)
