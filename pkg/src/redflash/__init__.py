"""Vapor-liquid flash calculations in reduced variables for cubic equations of state."""

__version__ = "0.1.0"

from .fluid_db import Component, EosSpec, Mixture, PR, SRK, load_mixture  # noqa: E402
from .isothermal_flash import FlashConfig, FlashResult, flash_pt, flash_vt, stability_test  # noqa: E402
from .nonisothermal_flash import NestedConfig, NestedResult, flash_hp, flash_uv  # noqa: E402

__all__ = [
    "Component", "EosSpec", "Mixture", "PR", "SRK", "load_mixture",
    "FlashConfig", "FlashResult", "flash_pt", "flash_vt", "stability_test",
    "NestedConfig", "NestedResult", "flash_hp", "flash_uv",
]
