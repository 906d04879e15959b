"""Harmonic smoothing of planar grid homeomorphisms."""

from ._core import (
    CertificationError,
    Error,
    FormatError,
    GridMapping,
    StepError,
    annulus_hopf,
    check_injectivity,
    cutoff_alpha,
    decode_mapping,
    difference_norm,
    dirichlet_energy,
    encode_mapping,
    fixture_names,
    harmonic_replace,
    harmonic_residual,
    hopf_differential,
    make_fixture,
    read_mapping,
    resample,
    royden_norm,
    run_acceptance,
    run_pipeline,
    write_mapping,
)


def sample(fn, origin=0j, spacing=1 / 64, cells=(64, 64), cell_mask=None):
    """Samples a vectorised complex function on a grid of nodes."""
    import numpy as np

    nx, ny = cells[0] + 1, cells[1] + 1
    j, i = np.mgrid[0:ny, 0:nx]
    z = origin + spacing * (i + 1j * j)
    return GridMapping(origin, spacing, np.asarray(fn(z), dtype=complex), cell_mask)


__all__ = [name for name in dir() if not name.startswith("_")]
