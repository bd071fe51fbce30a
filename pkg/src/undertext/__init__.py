"""Multispectral text enhancement for palimpsest imagery.

Fits supervised and unsupervised linear projections to annotated pixel
classes, renders the projected planes as 8/16-bit grayscale and RGB
composites, and scores the results with cluster-validity indices. A batch
command line (``undertext``) and an HTTP annotation service front the same
pipeline.

The estimator classes are the main library entry point:

    >>> from undertext import CanonicalVariates
    >>> model = CanonicalVariates().fit(X, y)   # X: (pixels, bands)
    >>> scores = model.transform(X)
"""

__version__ = "0.1.0"

from .annotations import (
    DesignMatrix,
    TrainingSet,
    assemble_matrix,
    parse_annotations,
    serialize_annotations,
)
from .eigen import EigenSolution, solve_gen_eig_sym
from .errors import DataError, NumericError, UndertextError, UndertextWarning
from .estimators import CanonicalVariates, LinearDiscriminant, PrincipalComponents
from .metrics import (
    Cluster,
    IndexReport,
    centroid_distance,
    db_index,
    dunn_index,
    evaluate_image,
    scatter,
)
from .projection import (
    ProjectionModel,
    fit_cva,
    fit_lda,
    fit_pca,
    fit_pca_unsupervised,
    project_stack,
)
from .rendering import (
    CompositeRecipe,
    RenderSpec,
    ScorePlane,
    compose_rgb,
    double_threshold,
    enhance_polynomial,
    load_image,
    pseudocolor,
    rescale_full,
    rescale_percentile,
    rescale_training_range,
    save_image,
)
from .stack import BandMeta, SpectralStack, crop, load_stack, normalize_stack
from .synthetic import SyntheticPage, make_palimpsest

__all__ = [
    "BandMeta",
    "CanonicalVariates",
    "Cluster",
    "CompositeRecipe",
    "DataError",
    "DesignMatrix",
    "EigenSolution",
    "IndexReport",
    "LinearDiscriminant",
    "NumericError",
    "PrincipalComponents",
    "ProjectionModel",
    "RenderSpec",
    "ScorePlane",
    "SpectralStack",
    "SyntheticPage",
    "TrainingSet",
    "UndertextError",
    "UndertextWarning",
    "assemble_matrix",
    "centroid_distance",
    "compose_rgb",
    "crop",
    "db_index",
    "double_threshold",
    "dunn_index",
    "enhance_polynomial",
    "evaluate_image",
    "fit_cva",
    "fit_lda",
    "fit_pca",
    "fit_pca_unsupervised",
    "load_image",
    "load_stack",
    "make_palimpsest",
    "normalize_stack",
    "parse_annotations",
    "project_stack",
    "pseudocolor",
    "rescale_full",
    "rescale_percentile",
    "rescale_training_range",
    "save_image",
    "scatter",
    "serialize_annotations",
    "solve_gen_eig_sym",
]
