"""Study orchestration: configuration, CLI, scaling studies, diagnostics and
flat-file serialization."""

from .config import StudySpec, emit_config, parse_config  # noqa: F401
from .studies import fit_slope, run_study, stability_check, SlopeFit, StudyResult  # noqa: F401
from .io import rows_to_csv, rows_to_json, write_gnuplot  # noqa: F401
