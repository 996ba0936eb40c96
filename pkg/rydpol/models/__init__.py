# rydpol/models/__init__.py

# Import all models for easy access
from .quantum import HalfInt, LevelSpec, HyperfineState, LadderSpec, HyperfineBasis
from .fields import Polarization, FieldConfig, CouplingBlock
from .master import DecayRates, Hamiltonian, CollapseOperator, DissipatorSpec, SteadyState
from .dressed import DressedEntry, DressedManifold, TransitionStrengthRow, TransitionStrengthTable, MFBlockSpectrum
from .spectra import VaporConfig, DopplerSettings, Spectrogram, PeakSet, UndulationFit
