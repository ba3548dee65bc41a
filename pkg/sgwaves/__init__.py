"""SG Waves - travelling-wave solutions of the damped, driven sine-Gordon equation."""

__version__ = "0.3.0"

from sgwaves.model import Params, State
from sgwaves.profiles import WaveProfile
from sgwaves.shooting import find_array_mu, find_kink_mu

__all__ = [
    "Params",
    "State",
    "WaveProfile",
    "find_array_mu",
    "find_kink_mu",
]
