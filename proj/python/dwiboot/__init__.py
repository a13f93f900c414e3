"""dMRI data augmentation by scaled residual bootstrap.

Thin numpy-facing wrapper around the C++ core. Volumes are numpy arrays of
shape (nx, ny, nz, nc); schemes are (bvals, bvecs) array pairs with bvecs
shaped (3, n) or (n, 3).
"""

from ._dwiboot import (
    DegeneracyError,
    InputError,
    __version__,
    atom_count,
    atoms,
    augment,
    dice,
    fit,
    hcp_like_scheme,
    phantom,
    read_nifti,
    shore_matrix,
    subsample,
    write_nifti,
)

__all__ = [
    "DegeneracyError",
    "InputError",
    "__version__",
    "atom_count",
    "atoms",
    "augment",
    "dice",
    "fit",
    "hcp_like_scheme",
    "phantom",
    "read_nifti",
    "shore_matrix",
    "subsample",
    "write_nifti",
]
