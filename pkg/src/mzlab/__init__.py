"""mzlab: numerical laboratory for a three-grating Mach-Zehnder atom
interferometer built on laser standing-wave Bragg diffraction."""

__version__ = "0.1.0"

from .physics import (  # noqa: F401
    LaserField,
    Species,
    VelocityDistribution,
    bragg_angle,
    de_broglie_wavelength,
    lithium6,
    lithium7,
    recoil_frequency,
    velocity_nodes,
)
from .bragg import (  # noqa: F401
    AmplitudeVector,
    GratingConfig,
    bloch_propagate,
    design_pulse,
    diffraction_scan,
    dimensionless_from_physical,
    off_bragg_probability,
    rabi_probability,
    spontaneous_emission_probability,
)
from .interferometer import (  # noqa: F401
    BeamNode,
    FringeModel,
    GratingAmplitudes,
    InterferometerGeometry,
    enumerate_beams,
    fringe_signal,
    mismatch_visibility,
    slit_scan,
    tilt_visibility,
    two_beam_visibility,
    velocity_average,
)
from .magnetic import (  # noqa: F401
    MagneticScenario,
    SublevelEnsemble,
    averaged_visibility,
    extract_velocity_spread,
    gradient_phase,
    revival_curve,
    sublevel_visibility,
    zeeman_phase,
)
from .signals import (  # noqa: F401
    CountTrace,
    FitResult,
    figure_of_merit,
    fit_fringes,
    fit_sinc,
    phase_sensitivity,
    synthesize_counts,
)
