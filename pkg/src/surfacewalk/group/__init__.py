from .presentation import GroupPresentation, WordError, inverse_word, letter_name
from .words import dehn_reduce, free_reduce, is_identity
from .normal import NormalWord, reduce_dehn, words_equal
from .ball import (CayleyBall, HashCollision, Operator, RadialBall, ResourceError,
                   ball_enumerate, radial_tree_ball)
from .symmetry import SymmetryTransducer
