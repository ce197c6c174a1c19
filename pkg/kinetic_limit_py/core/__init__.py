"""
Слой скоростного пространства: сетки, максвеллианы, оператор столкновений, функции Барнетта.
"""

__all__ = ["grids", "maxwellian", "collision", "burnett"]
