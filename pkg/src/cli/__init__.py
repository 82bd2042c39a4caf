from .commands import dispatch, main, run
from .plot_data import PLOT_KINDS, emit_plot_data
