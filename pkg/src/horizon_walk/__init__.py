"""Geodesic random walks on Riemannian charts and their frame-bundle lifts."""

from .errors import (
    DomainExit,
    FitDegenerate,
    HorizonWalkError,
    InsufficientSamples,
    NumericalDegeneracy,
    OrthonormalityDrift,
    OutOfDomain,
    ParseError,
    TooFewReplicas,
    UnsupportedFunction,
    ValidationError,
)
from .frames import FramePoint, horizontal_lift_path, parallel_transport, random_frame
from .functions import TestFunction, catalog, get_function
from .increments import IncrementLaw, sample_increment, validate_law
from .manifolds import GeodesicConfig, exp_map, geodesic_distance, get_manifold
from .walker import WalkConfig, batch_run, run_base_walk, run_lifted_walk

__version__ = "0.1.0"
