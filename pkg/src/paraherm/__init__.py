"""paraherm: pointwise numerical para-Hermitian geometry on coordinate charts.

Layers, bottom up: `jets` (truncated Taylor arithmetic), `expr` (scalar
expression language), `geometry` (charts, tensor fields, d, Lie ops),
`connections` (Levi-Civita, canonical, adapted checks), `parastructure`
(eta, K, projections, Nijenhuis, classification), `brackets` (D-, C-,
Dorfman and Courant-axiom machinery), `deformations` (B-shears and fluxes),
`models` (flat and tangent-bundle examples) and `cli` (batch runner).
"""

from .errors import ParahermError
from .geometry import Chart, Point, TensorField
from .models import build_flat, build_tm
from .parastructure import ParaHermitianStructure

__all__ = [
    "ParahermError", "Chart", "Point", "TensorField",
    "ParaHermitianStructure", "build_flat", "build_tm",
]

__version__ = "0.1.0"
