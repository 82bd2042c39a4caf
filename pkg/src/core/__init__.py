from .constants import PB210, LAMBDA, DecayConstants
from .measurement import Measurement, Dataset
from .chronology import AgeEstimate, Chronology, CI_CRS, R_CRS, PLUM, METHODS
from .units import slab_areal_activity
from .io import load_dataset, write_dataset, read_chronology, write_chronology, provenance_line
