"""Equilibria, bifurcations and dynamics of planar and 3-D epidemic-type ODE models."""

from .equilibrium import (
    EquilibriumPoint,
    TurningPoint,
    all_equilibria,
    classify_bifurcation_shape,
    infected_equilibria,
    infected_quadratic,
    reproduction_number,
    transcritical_value,
    turning_point,
    uninfected_equilibrium,
)
from .incidence import incidence_curve, ray_intersections, shape_classify
from .models import DomainError, ModelId, ParameterError, feasible, jacobian, make_params, rhs
from .normal_form import HopfData, hopf_data, lyapunov_a, simulation_probe, transversality_d
from .odesim import (
    AttractorVerdict,
    IntegratorConfig,
    Trajectory,
    bistability_probe,
    detect_attractor,
    integrate,
    recurrence_metrics,
    simulate_and_classify,
)
from .report import TableReport, emit_diagram, emit_trajectory, reproduce
from .scan import BifurcationPoint, BranchDiagram, NumericalFailure, find_hopf, find_transcritical, sweep_branch
from .spectral import char_poly, eigenvalues, h_negative_intervals, stability

__version__ = "0.1.0"
