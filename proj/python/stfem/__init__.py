"""Space-time finite elements with functional error majorants."""

from ._core import (
    StfemError,
    StudyReport,
    directive_axes,
    doerfler_mark,
    run_study,
    run_study_file,
    tensor_mesh_error,
)

__all__ = [
    "StfemError",
    "StudyReport",
    "directive_axes",
    "doerfler_mark",
    "run_study",
    "run_study_file",
    "tensor_mesh_error",
]
