"""Negative spectra of radial Schrodinger operators on regular metric trees."""

__version__ = "0.1.0"

from .errors import *  # noqa: E402,F401,F403
from .tree import (  # noqa: E402,F401
    Envelope,
    RegularTree,
    TreeWeight,
    dimension_estimate,
    envelope_constants,
    gk_eval,
    make_geometric_tree,
    make_half_line,
    make_terminal_tree,
    multiplicity,
)
from .potentials import (  # noqa: E402,F401
    RadialPotential,
    exp_poly,
    gaussian_well,
    modified_potential,
    moment,
    square_well,
)
from .special import bessel_ik, green_dirichlet, green_robin, spectral_constants  # noqa: E402,F401
from .halfline import Channel, Numerics, PowerWeight, count_negative, solve_channel  # noqa: E402,F401
from .decomposition import (  # noqa: E402,F401
    assemble_negative_spectrum,
    build_channels,
    choose_k_max,
    compare_spectra,
)
from .direct import build_graph_matrix, direct_count, direct_negative_spectrum  # noqa: E402,F401
from .birman_schwinger import (  # noqa: E402,F401
    bargmann_bound,
    build_bs_kernels,
    channel_threshold,
    cor1_bound,
    critical_case_eigenvalue,
    hs_convergence,
    solve_weak_eigenvalue,
)
from .asymptotics import (  # noqa: E402,F401
    d2_fit,
    sandwich_check,
    supercritical_check,
    weak_sweep_fit,
    weyl_check,
)
