"""Exact stationary incompressible ideal-MHD flows with constant total pressure.

Flows are built in curvilinear coordinates whose k1- and k2-lines are the
integral curves of ``v - B`` and ``v + B``, transformed by the scaling and
translation symmetries of the reduced equations, and checked against both
the reduced system and the Cartesian MHD equations.
"""

from . import areamap, expr, families, flowmap, geometry, transforms, verify
from .areamap import AreaMap, circular, from_pair, from_potential, modify_shear
from .expr import differentiate, evaluate, parse, to_string
from .families import build_s1, build_s2, build_s3, build_translational
from .flowmap import Box, FlowMap, PlasmaState
from .scene import Scene, load_scene
from .transforms import (
    CurrentSheetSpec,
    bogoyavlenskij,
    current_sheet,
    current_sheet_oracle,
    translate,
)
from .verify import ResidualReport, fd_crosscheck, verify_physical, verify_reduced

__version__ = "0.1.0"
