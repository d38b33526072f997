"""Parameter-free channel attention built on a discrete population map,
with the compared attention modules, exact dynamics oracles, image-quality
metrics and a desk-scale undersampled-reconstruction benchmark."""

__version__ = "0.1.0"

from bioattn.attention import (
    AttentionModule,
    BioAttention,
    BioConfig,
    ECAAttention,
    GCTAttention,
    Identity,
    LCTAttention,
    SEAttention,
    SimAM,
    load_module,
    make_attention,
    param_count,
    save_module,
)
from bioattn.ecology import (
    EcologyParams,
    Trajectory,
    bifurcation_sweep,
    fixed_point,
    iterate,
    stability,
    step,
)
from bioattn.errors import (
    ConfigurationError,
    DomainError,
    ShapeError,
    TrainingDivergence,
)
from bioattn.fourier import fft2, ifft2
from bioattn.metrics import (
    MetricsReport,
    SSIMConfig,
    WilcoxonResult,
    mse,
    psnr,
    ssim,
    wilcoxon_signed_rank,
)
from bioattn.recon import (
    ExperimentConfig,
    MaskSpec,
    ReconNet,
    build_network,
    evaluate,
    make_mask,
    make_phantom,
    run_experiment,
    train,
    undersample,
)
from bioattn.tenio import load_csv, load_ten, save_csv, save_ten
from bioattn.tensor import (
    Tensor,
    conv1d_channels,
    conv2d,
    dense,
    global_avg_pool,
    grad_check,
    l2_normalize,
    sigmoid,
    spatial_moments,
)
