"""Random field Ising chain laboratory: exact transfer-matrix quantities,
Gamma-extrema and Fisher configurations, hard-wall chains, RG decimation and
Monte Carlo experiments."""

from .disorder import DisorderLaw, FieldSource, FieldWindow, ModelParams, WalkPath, sample_field, walk_from_field

__all__ = ["DisorderLaw", "FieldSource", "FieldWindow", "ModelParams", "WalkPath", "sample_field",
           "walk_from_field"]
__version__ = "0.1.0"
