"""Analysis of planar mass-action reaction networks."""
from .network import (Complex, Reaction, ReactionNetwork, VectorField, NetworkError,
                      NetworkParseError, parse_network, deficiency, reversibility_class,
                      vector_field, evaluate, translate)
from .equilibrium import (Equilibrium, ScaledSystem, SignedAreas, NoEquilibriumError,
                          TemplateError, signed_area, chain_equilibrium_exists,
                          three_reaction_exists, solve_equilibrium, scale_to_unit)
from .local_analysis import (JacobianData, TaylorField, FocalValues, HopfReport, jacobian,
                             taylor_expand, focal_values, hopf_classify, det_three_reactions)
from .dynamics import (Trajectory, PoincareSection, ReturnOptions, CycleReport, FixedPoint,
                       integrate, first_return, return_map, find_limit_cycles,
                       perturbation_recipe, homoclinic_probe)
from .families import FAMILIES, FamilyInstance, family_instance
from .global_analysis import (DulacResult, dulac_search, dulac_geometric, dulac_divergence,
                              reversibility_check, reversible_center_conditions,
                              rate_constants_for_center, lienard_center_check)

__all__ = [
    "Complex", "Reaction", "ReactionNetwork", "VectorField", "NetworkError", "NetworkParseError",
    "parse_network", "deficiency", "reversibility_class", "vector_field", "evaluate", "translate",
    "Equilibrium", "ScaledSystem", "SignedAreas", "NoEquilibriumError", "TemplateError",
    "signed_area", "chain_equilibrium_exists", "three_reaction_exists", "solve_equilibrium",
    "scale_to_unit",
    "JacobianData", "TaylorField", "FocalValues", "HopfReport", "jacobian", "taylor_expand",
    "focal_values", "hopf_classify", "det_three_reactions",
    "Trajectory", "PoincareSection", "ReturnOptions", "CycleReport", "FixedPoint", "integrate",
    "first_return", "return_map", "find_limit_cycles", "perturbation_recipe", "homoclinic_probe",
    "FAMILIES", "FamilyInstance", "family_instance",
    "DulacResult", "dulac_search", "dulac_geometric", "dulac_divergence", "reversibility_check",
    "reversible_center_conditions", "rate_constants_for_center", "lienard_center_check",
]

__version__ = "0.1.0"
