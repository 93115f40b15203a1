"""Incompressible miscible-liquids solver with a nonmonotone slip friction law."""
from .config import ProblemConfig, echo_config, parse_config
from .diagnostics import (EnergyRecord, StabilityReport, stability_study, step_energy_residuals,
                          trajectory_monitors)
from .estimator import SlipFlowSimulator
from .exceptions import (ConfigError, ConstraintError, FixedPointError, HypothesisError, MeshError,
                         MiscibleError, QuadratureError, SolvabilityError, SolverError)
from .forms import (FormsCache, assemble_constant_forms, assemble_convection, assemble_korteweg_load,
                    korteweg_tensor)
from .friction import (ExpDecayLaw, FrictionLaw, MollifiedLaw, PiecewiseLinearLaw, QuadraticLaw,
                       assemble_friction_load, clarke_interval, mollified_grad, sawtooth_law,
                       verify_hypotheses)
from .geometry import (GAMMA0, GAMMA1, BoundaryFrame, Mesh, boundary_frame, build_rect_mesh,
                       classify_boundary)
from .io import write_snapshot, write_timeseries
from .spaces import ConstraintSet, DiscreteSpaces, apply_constraints, build_spaces, interpolate
from .stepper import (State, StepReport, concentration_step, project_initial, project_velocity, run,
                      velocity_step)
from .verification import (couette_oracle, korteweg_identity_check, manufactured_convergence,
                           quadrature_oracle_check)

__version__ = "0.1.0"
