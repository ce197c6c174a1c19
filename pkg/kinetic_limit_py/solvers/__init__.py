"""
Интеграторы по времени: уравнения Максвелла, кинетическая система VMB, система Эйлера-Максвелла.
"""

__all__ = ["em_fields", "kinetic_solver", "fluid_solver"]
