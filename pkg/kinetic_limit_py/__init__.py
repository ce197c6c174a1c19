"""
Kinetic Limit Py - кинетический предел системы Власова-Максвелла-Больцмана

Набор инструментов для численного исследования перехода от кинетического
описания (жесткие сферы, число Кнудсена eps) к системе Эйлера-Максвелла:
макро-микро разложение, функции Барнетта, коэффициенты переноса,
AP-интегратор по времени и измерение скорости сходимости по eps.
"""

__version__ = "1.0.0"
__author__ = "Kinetic Limit Team"
__email__ = "team@example.com"

from .cli import main

__all__ = ["main"]
