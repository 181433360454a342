"""Transfer-entropy decomposition into synergy- and redundancy-dominated effects."""

__version__ = "0.1.0"

from .decomp import (  # noqa: E402
    DecompResult,
    SubsetSearchPolicy,
    bias_matched_pair,
    decompose,
    dtau_scan,
    ired_hat,
    isyn_hat,
    net_effect,
)
from .discrete import (  # noqa: E402
    JointPmf,
    and_gate_pmf,
    cond_mutual_info,
    entropy,
    interaction_information,
    theorem1_curve,
)
from .dynsys import (  # noqa: E402
    CouplingTerm,
    DynSysConfig,
    NoiseSpec,
    TimeSeriesPanel,
    paper_system,
    simulate,
    theorem2_config,
)
from .knn import CmiEstimate, SampleBlock, cmi_knn, knn_radius_counts  # noqa: E402
from .te import ConditioningSet, EmbeddingSpec, embed, transfer_entropy  # noqa: E402
