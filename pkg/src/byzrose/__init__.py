"""Byzantine-robust distributed M-estimation with VRMOL aggregation.

The main entry points are :func:`run_algorithm1` (honest centre) and
:func:`run_algorithm2` (centre may be Byzantine) over a simulated
:class:`Cluster`.
"""
__version__ = "0.1.0"

from ._kernels import BACKEND  # noqa: E402
from .attacks import AttackSpec, attack_data, attack_statistics, build_byzantine_set  # noqa: E402
from .baselines import average_estimator, one_step_average, rose_med  # noqa: E402
from .local import LocalFit, NonConvergence, SingularHessian, fit_local  # noqa: E402
from .models import DataShard, LossModel, shard_objective  # noqa: E402
from .reports import LocalReport  # noqa: E402
from .robust import QuantileGrid, coordinate_median, make_quantile_grid, trimmed_mean, vrmol_scalar  # noqa: E402
from .rose import (RoseEstimate, confidence_interval, one_step, run_algorithm1,  # noqa: E402
                   run_algorithm2, sigma_vr_matrix, vrmol_gradient, vrmol_hessian, vrmol_parameter)
from .simnet import Cluster, ClusterConfig, CommLedger, broadcast_collect, ledger_totals, scatter_data  # noqa: E402
