"""Three-link swimmer toolkit: SE(2) kinematics, local connections for
drag- and inertia-dominated fluids, joint-space field analysis, and
baseline-guided policy search."""

from ._kernels import BACKEND as KERNEL_BACKEND
from .env import BASELINE_WAVEFORM, EnvConfig, baseline_policy, evaluate_gait, rollout
from .fields import GridSpec, JointLoop, exterior_derivative_field, line_integral, surface_integral
from .models import HighReParams, LowReParams, Shape, high_re_connection, low_re_connection
from .train import BGPSConfig, evaluate_policy, train
from .ppo import PPOConfig

__version__ = "0.1.0"
