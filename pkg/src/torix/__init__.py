"""Rational points of bounded multi-height on smooth projective toric varieties."""

from .fan import Fan, FanError, builtin_fan, parse_fan, validate_fan, primitive_collections
from .picard import (PicardData, GrowthDirection, compute_picard, ample_basis,
                     central_direction, validate_direction, direction_from_dual)
from .sections import SectionBasis, build_section_basis, monomial_basis
from .torsor import (Region, GrowthSpec, CountReport, MultiHeight, box_region, parse_region,
                     region_from_list, enumerate_points, count_sublattice, multi_height,
                     in_region, coordinate_bounds, is_integral_torsor_point,
                     is_torsor_point_via_sections, unit_orbit, embed)
from .mobius import mobius_local, mobius_value, local_density
from .constant import (nu_region, torsor_region_volume, real_density, euler_product,
                       predict, default_region, DensityReport)

__version__ = "0.1.0"
