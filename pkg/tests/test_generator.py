import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ppm_retrain.generator import (ACCEPT, ACTIVITIES, ARCHIVE, CREATE_Q, CTYPES, REGISTER, REJECT,
                                   SCENARIOS, generate_claim_log, scenario_rules)
from ppm_retrain.labeling import parse_rule


@pytest.fixture(scope="module")
def big():
    return {noise: generate_claim_log(600, noise, seed=4) for noise in ("none", "S1", "S2", "S3")}


def test_attributes_and_ranges(big):
    for t in big["none"]:
        assert 18 <= t.attributes["Age"] <= 90
        assert t.attributes["CType"] in CTYPES and t.attributes["PClaims"] in ("Yes", "No")
        assert all(e.attributes["department"] for e in t.events)
        stamps = [e.timestamp for e in t.events]
        assert stamps == sorted(stamps)


def test_control_flow_grammar(big):
    for t in big["none"]:
        acts = t.activities
        assert acts[0] == REGISTER and acts[-1] == ARCHIVE
        assert set(acts) <= set(ACTIVITIES)
        assert (ACCEPT in acts) != (REJECT in acts)
        assert acts.count(CREATE_Q) == 1


def test_reasonable_lengths_and_rates(big):
    log_ = big["none"]
    mean_len = sum(len(t) for t in log_) / len(log_)
    assert 8 <= mean_len <= 14
    pos = sum(t.label for t in log_) / len(log_)
    assert 0.2 <= pos <= 0.6


@pytest.mark.parametrize("noise", ["S1", "S2", "S3"])
def test_labels_follow_scenario_rules(big, noise):
    true_rule, noisy_rule = (parse_rule(r) for r in SCENARIOS[noise])
    log_ = big[noise]
    for t in log_:
        assert t.label == true_rule.holds(t)
        assert t.train_label == noisy_rule.holds(t)
    # the noise actually flips some labels
    assert any(t.label != t.train_label for t in log_)


def test_noise_direction(big):
    # S1 and S3 only ever turn positives into negatives, S2 only negatives into positives
    for noise, flipped in (("S1", True), ("S3", True), ("S2", False)):
        for t in big[noise]:
            if t.label != t.train_label:
                assert t.label is flipped


def test_no_noise_means_no_training_label(big):
    assert all(t.train_label is None for t in big["none"])
    assert scenario_rules("none") == (SCENARIOS["S1"][0], None)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_deterministic_in_seed(seed):
    assert generate_claim_log(20, "S2", seed) == generate_claim_log(20, "S2", seed)


def test_bad_arguments():
    with pytest.raises(ValueError):
        generate_claim_log(0)
    with pytest.raises(ValueError):
        generate_claim_log(10, "S4")
