"""Random walks, Green functions and automata on surface-group Cayley graphs."""
from .group import (GroupPresentation, NormalWord, CayleyBall, reduce_dehn,
                    ball_enumerate, radial_tree_ball)

__version__ = "0.1.0"

__all__ = ["GroupPresentation", "NormalWord", "CayleyBall", "reduce_dehn",
           "ball_enumerate", "radial_tree_ball", "__version__"]
