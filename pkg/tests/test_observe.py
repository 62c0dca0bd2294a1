import math

import numpy as np
import pytest

from crossing_marl.motor import StepState
from crossing_marl.observe import build_ped_observation, build_veh_observation, ped_layout, veh_layout
from crossing_marl.params import NonPolicyParams, PopulationSpec
from crossing_marl.perception import KalmanBelief
from crossing_marl.variants import ModelVariant
from crossing_marl.world import WorldState

OWN = NonPolicyParams(0.05, 0.05, 0.2, 3.0)
POP = PopulationSpec.midpoint()
BELIEF = KalmanBelief(np.array([-12.0, 7.0]), np.diag([4.0, 1.0]))
STEP = StepState(0.3, 0.5, 1.2, 0.9)


def test_layout_sizes_grow_with_constraints():
    sizes = {v: (len(ped_layout(v)), len(veh_layout(v))) for v in ModelVariant}
    assert sizes[ModelVariant.NC] < sizes[ModelVariant.VMC]
    assert sizes[ModelVariant.MC][0] == sizes[ModelVariant.NC][0] + 1
    assert sizes[ModelVariant.VC][0] == sizes[ModelVariant.NC][0] + 3
    assert sizes[ModelVariant.MC][1] == sizes[ModelVariant.NC][1] + 1


def test_layout_is_pure_function_of_variant():
    assert ped_layout("vmc").schema() == ped_layout(ModelVariant.VMC).schema()


@pytest.mark.parametrize("variant", list(ModelVariant))
def test_observations_are_unit_range(variant):
    s = WorldState(t=3.0, ped_x=40.0, ped_y=-3.0, ped_speed=1.0, veh_x=-10.0, veh_speed=8.0)
    o_p = build_ped_observation(s, BELIEF, STEP, OWN, POP, variant)
    o_v = build_veh_observation(s, BELIEF, OWN, POP, variant, target_accel=-1.0)
    for o, layout in ((o_p, ped_layout(variant)), (o_v, veh_layout(variant))):
        assert o.shape == (len(layout),)
        assert np.all((o >= 0) & (o <= 1))
    assert o_p[ped_layout(variant).names.index("ped_x")] == 1.0


def test_visual_pedestrian_sees_belief_not_truth():
    s = WorldState(veh_x=-20.0, veh_speed=8.0)
    o = build_ped_observation(s, BELIEF, None, OWN, POP, "VC")
    names = ped_layout("VC").names
    assert o[names.index("veh_x")] == pytest.approx((-12.0 + 25) / 50)
    assert o[names.index("veh_x_var")] == pytest.approx(math.log1p(4.0) / math.log1p(2500.0))


def test_unconstrained_vehicle_sees_toward_kerb_speed():
    s = WorldState(ped_speed=2.0, ped_heading=math.pi / 3)
    o = build_veh_observation(s, None, OWN, POP, "NC")
    assert o[veh_layout("NC").names.index("ped_vy")] == pytest.approx((1.0 + 3) / 6)


def test_missing_inputs_rejected():
    with pytest.raises(ValueError):
        build_ped_observation(WorldState(), None, STEP, OWN, POP, "VMC")
    with pytest.raises(ValueError):
        build_ped_observation(WorldState(), BELIEF, None, OWN, POP, "MC")
    with pytest.raises(ValueError):
        build_veh_observation(WorldState(), None, OWN, POP, "VC")
