"""distprobe: distribution-aware adversarial testing for image classifiers.

The pipeline: embed the dataset into a latent space (external encoder
latents or builtin PCA), fit an adaptive KDE for a global density, rank
correctly-classified seeds by density times predicted fragility, then
search each seed's L-infinity ball with a two-step genetic algorithm for
misclassified inputs that stay perceptually close to the seed.
"""

from .attacks import AeSubset, GaConfig, GaResult, TraceRow, ae_filter, ga_generate, pgd_baseline
from .classifier import (
    BuiltinClassifier,
    BuiltinNet,
    ClassifierHandle,
    GradientUnsupportedError,
    Layer,
    load_builtin,
    make_net,
    save_builtin,
)
from .containers import (
    ContainerError,
    LabeledDataset,
    LatentSet,
    assemble_dataset,
    load_container,
    load_labels,
    make_latent_set,
    save_container,
    save_labels,
)
from .density import (
    KdeModel,
    PcaModel,
    kde_density,
    kde_fit,
    kde_log_density,
    kde_log_density_batch,
    kde_sample,
    load_latents,
    load_pca,
    normalize_densities,
    normalize_log_densities,
    pca_fit,
    pca_inverse,
    pca_recon_loss,
    pca_transform,
    save_pca,
    scott_bandwidth,
)
from .metrics import (
    GaussianStats,
    PerceptMetricKind,
    fid,
    gaussian_stats,
    mse,
    psnr,
    quality_score,
    quality_score_batch,
    ssim,
)
from .robustness import (
    CampaignReport,
    CaseRecord,
    LocalRobustnessEstimate,
    SeedSummary,
    build_report,
    empirical_global_robustness,
    mc_local_robustness,
    report_to_json,
    report_to_text,
    write_report,
)
from .seeds import (
    RadiusPolicy,
    RSeparation,
    SeedScore,
    allocate_budget,
    indicator_grad,
    indicator_sep,
    prediction_loss,
    prediction_loss_batch,
    predict_pool,
    r_separation,
    rank_seeds,
)
from .synth import make_synth_dataset, make_template_net
from .wire import ServerError, SubprocessClassifier, spawn_server

__version__ = "0.1.0"
