"""Gray-code assisted phase-shifting profilometry with tripartite phase unwrapping.

The package covers the whole measurement chain: pattern generation, a
synthetic projector-camera simulator, three-step phase analysis, Gray-code
decoding, tripartite unwrapping with its regional division, the
time-overlapping frame schedule, phase-to-height calibration and an
end-to-end pipeline with a CLI (``fringeprof``).
"""

from .calibration import (
    CalibModel,
    PlaneMeasurement,
    apply_phase_height,
    fit_phase_height,
    load_model,
    measure_reference,
    save_model,
)
from .config import ConfigError, RunConfig, load_config, parse_config
from .fringe import WrappedTriple, wrap, wrapped_phase, wrapped_triple
from .graycode import OrderMap, binarize, decode_orders, decode_V, order_map
from .io import read_pgm, read_ply, read_raster, write_pgm, write_ply, write_raster
from .metrics import error_rate, plane_flatness_rms, sphere_fit, step_heights
from .patterns import (
    PatternSpec,
    build_codeword_table,
    dither_binarize,
    gen_gray_pattern,
    gen_sinusoid,
    verify_alignment,
)
from .pipeline import calibrate_simulated, reconstruct_frame, run_compare, run_stream, simulate_stream
from .sequence import Assembler, GroupAssembly, Schedule, WarmupError, assemble, make_schedule, throughput_report
from .simulator import (
    Composite,
    OpticalModel,
    Plane,
    SphereCap,
    Steps,
    gen_capture_sequence,
    render_capture,
    truth_phase_shift,
)
from .tripu import (
    RegionLabels,
    divide_regions,
    reference_wrapped,
    unwrap_traditional,
    unwrap_tripu,
    unwrap_two_frequency,
    unwrap_two_wavelength,
)

__version__ = "0.1.0"
