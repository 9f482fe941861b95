from .tensor import (AutodiffError, NumericalError, ShapeError, Tape, Tensor, active_tape, backward, record,
                     set_debug)
