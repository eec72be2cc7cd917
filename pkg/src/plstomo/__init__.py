"""Projected least-squares tomography of states and channels from non-i.i.d. sources."""
from . import bounds, designs, matcore, procpipe, projection, sources, statepipe
from .bounds import freedman_tail, sample_size_process, sample_size_state_global, sample_size_state_local
from .designs import MeasurementDesign, make_design, verify_two_design
from .projection import project_to_choi, project_to_states
from .statepipe import run_state_tomography
from .procpipe import run_process_tomography

__all__ = [
    "bounds",
    "designs",
    "matcore",
    "procpipe",
    "projection",
    "sources",
    "statepipe",
    "freedman_tail",
    "sample_size_process",
    "sample_size_state_global",
    "sample_size_state_local",
    "MeasurementDesign",
    "make_design",
    "verify_two_design",
    "project_to_choi",
    "project_to_states",
    "run_state_tomography",
    "run_process_tomography",
]
