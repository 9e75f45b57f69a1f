import json
import random
from fractions import Fraction

import pytest

from uceauction.generate import (
    generate_product_mix,
    random_multi_unit_instance,
    random_product_mix_instance,
)
from uceauction.model import (
    InstanceValidationError,
    MultiUnitValuation,
    ProductMixValuation,
    instance_to_dict,
)

F = Fraction


def test_product_mix_generation_is_byte_identical():
    a = generate_product_mix(seed=42, n=17, K=100)
    b = generate_product_mix(seed=42, n=17, K=100)
    assert json.dumps(instance_to_dict(a), sort_keys=True) == json.dumps(
        instance_to_dict(b), sort_keys=True
    )
    c = generate_product_mix(seed=43, n=17, K=100)
    assert instance_to_dict(c) != instance_to_dict(a)


def test_generated_values_are_epsilon_multiples():
    inst = generate_product_mix(seed=5, n=9, K=40, epsilon=F(1, 100))
    for v in inst.agents:
        assert (v.v_w / inst.epsilon).denominator == 1
        assert (v.v_s / inst.epsilon).denominator == 1
    assert (inst.delta / inst.epsilon).denominator == 1


def test_generated_market_can_absorb_supply():
    inst = generate_product_mix(seed=11, n=3, K=50)
    assert sum(v.gamma for v in inst.agents) >= inst.K


def test_strong_only_fraction_respected():
    inst = generate_product_mix(seed=2, n=10, K=30, strong_only_fraction=0.3)
    strong_only = sum(1 for v in inst.agents if v.v_w == 0)
    assert strong_only == 3


def test_descending_generation_starts_above_all_values():
    inst = generate_product_mix(seed=8, n=5, K=10, direction="descending")
    top = max(v.v_s for v in inst.agents)
    assert inst.p_init > top


def test_generator_rejects_bad_parameters():
    with pytest.raises(InstanceValidationError):
        generate_product_mix(seed=1, n=0, K=5)
    with pytest.raises(InstanceValidationError):
        generate_product_mix(seed=1, n=3, K=5, value_steps_max=1)


def test_random_families_validate(rng):
    for _ in range(30):
        inst = random_multi_unit_instance(rng)
        assert all(isinstance(v, MultiUnitValuation) for v in inst.agents)
        assert 1 <= inst.n <= 4 and 1 <= inst.K <= 6
    for _ in range(30):
        inst = random_product_mix_instance(rng)
        assert all(isinstance(v, ProductMixValuation) for v in inst.agents)
        assert inst.epsilon == 1


def test_random_descending_instances_open_high():
    rng = random.Random(3)
    for _ in range(10):
        inst = random_multi_unit_instance(rng, direction="descending")
        top = max(v.marginals[0] for v in inst.agents)
        assert inst.p_init == top + 1
