from .ui import Reporter

__all__ = ["Reporter"]
