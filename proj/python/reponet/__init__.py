"""Python bindings for the reponet C++ core."""

from ._reponet import (
    DEFAULT_KAPPA,
    ClassifierWeights,
    ReponetError,
    check,
    checkpoint_features,
    embedding_dim,
    expected_angle,
    fixed_softmax_loss,
    gen_weights,
    geometry_report,
    load_idx,
    make_blobs,
    make_polytope,
    margin_loss,
    norm_scaled_loss,
    plain_ce,
    train,
    verify_geometry,
    weights_from_rows,
)

__all__ = [name for name in dir() if not name.startswith("_")]
