"""Self-scheduling of UAVs, workers and charging vehicles for spatial crowdsensing.

Each decision epoch, every online agent picks a task point, a charge point or
to hold, from what it can see within its communication radius. UAVs are first
split into task seekers and charge seekers by comparing expected benefits,
then the two resulting three-way matchings are solved as a local Nash game
with softmax proposals. A discrete-time kernel plays the decisions forward.
"""

__version__ = "0.1.0"

from .world import (  # noqa: E402
    ChargePoint,
    InvalidScenario,
    OnlineWindow,
    Position,
    TaskPoint,
    Uav,
    Vehicle,
    Worker,
    WorldSnapshot,
)
from .benefit import Role, UavRole, assign_role, assign_roles  # noqa: E402
from .nash_scheduler import Action, JointAssignment, SchedulerConfig, decide_epoch  # noqa: E402
from .coupling import coupling_strength, disk_overlap_jaccard, equilibrium_gap  # noqa: E402
from .baselines import KwtaConfig, greedy_decide, kwta_decide, raln_decide  # noqa: E402
from .scenario import PRESETS, ScenarioFile, ScenarioSpec, generate, load, preset, save  # noqa: E402
from .simkernel import MetricsLog, SimConfig, Simulation, SimulationError, run  # noqa: E402
