"""Training-free adversarial patch localization and removal.

Patches are localized by two signals no patch can shed: semantic
independence (low mutual information with neighboring regions) and spatial
heterogeneity (recompression residuals that disagree with the rest of the
image). The fused heat maps yield a localization mask that is refined
against region proposals and removed by blacking out.
"""

from .errors import (
    CodecError,
    DegenerateGridError,
    EmptyWindowError,
    ImageIOError,
    PadError,
    ProtocolViolationError,
    ProviderError,
)
from .image_core import (
    BinaryMask,
    GrayBuffer,
    HeatMap,
    ImageBuffer,
    box_smooth,
    load_image,
    load_mask,
    save_image,
    save_mask,
    to_grayscale,
)
from .semantic_independence import (
    JointHistogram,
    MiConfig,
    WindowGrid,
    joint_histogram,
    mi_heatmap,
    mutual_information,
    tile_grid,
)
from .spatial_heterogeneity import (
    DEFAULT_QUALITY_SWEEP,
    CdConfig,
    cd_heatmap,
    estimate_global_quality,
    recompress,
    residual_map,
)
from .fusion import (
    FusionConfig,
    StructuringElement,
    adaptive_threshold,
    binarize,
    fuse,
    fused_heatmap,
    localize,
    morph_close,
    morph_open,
    normalize_heatmap,
)
from .mask_refinement import (
    RegionProposalSet,
    RegionProviderSpec,
    connected_components,
    inpaint_black,
    ioa,
    match_masks,
    provide_regions,
    rle_decode,
    rle_encode,
)
from .attack_fixtures import (
    Fixture,
    ImageCrop,
    NoisePatch,
    PatchSpec,
    PatchTransform,
    QualityMismatch,
    compose_adversarial,
    make_fixture_set,
    read_manifest,
    synthetic_photo,
    write_manifest,
)
from .evaluation import (
    EvalRecord,
    EvalReport,
    patch_flag,
    pixel_metrics,
    recall_patch,
    run_eval,
)
from .pipeline import DefendResult, RunConfig, defend_image, export_heatmaps

__version__ = "0.1.0"
