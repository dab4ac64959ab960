"""Reservoir computing with wave-equation weights for beat prediction.

Submodules are imported on demand; ``import wavereservoir`` stays cheap so
the command line can set thread limits before numpy loads.
"""

__version__ = "0.1.0"
