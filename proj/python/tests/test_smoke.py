import math

import pytest

import stfem

SMOOTH = """
problem = smooth
dim = 1
degree = 1
cells = 2 2
adapt.mode = uniform
adapt.max_levels = 4
adapt.nested = false
"""


def test_uniform_smooth_study():
    seen = []
    r = stfem.run_study(SMOOTH, seen.append)
    assert [l["level"] for l in r.levels] == [0, 1, 2, 3]
    assert seen == r.levels
    assert r.stop_reason == "max_levels"
    errors = [l["error_h"] for l in r.levels]
    assert all(b < a for a, b in zip(errors, errors[1:]))
    assert all(l["eff_index"] >= 1.0 - 1e-10 for l in r.levels)
    assert r.csv().splitlines()[0] == (
        "level,N_h,error_h,triple_norm_error,majorant,eff_index,iterations,wall_time")


def test_config_errors_name_the_line():
    with pytest.raises(stfem.StfemError, match=r"<string>:2: unknown key"):
        stfem.run_study("problem = smooth\nnot_a_key = 1\n")


def test_marking_and_axes():
    assert stfem.doerfler_mark([4, 3, 2, 1], 0.5) == [0, 1]
    assert stfem.directive_axes([3, 4], 0.7) == 0b10
    assert stfem.directive_axes([0, 0, 0], 0.5) == 0b111


def test_tensor_mesh_error_decreases():
    coarse = stfem.tensor_mesh_error("smooth", [4, 4], 1)
    fine = stfem.tensor_mesh_error("smooth", [8, 8], 1)
    assert fine[0] < coarse[0]
    assert fine[0] <= fine[1]
    assert math.log(coarse[0] / fine[0], 2) > 0.8
