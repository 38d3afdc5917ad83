"""Synthetic claim-management logs with controlled label noise.

The process: Register; a medical history check (low or high risk, a high
risk sometimes followed by contacting the hospital); an insurance check;
Accept or Reject; one or two notifications, interleaved with the rest of the
questionnaire thread; Archive. The questionnaire is created right after
Register, just before the decision, or after it, then sent (with optional
reminders) and received or timed out.

Low medical risk and a low insurance check both make acceptance likely.

Each trace carries its true label and, for a noisy scenario, the label it
gets under the training-only relabeling (``train_label``).
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from datetime import datetime, timedelta
from typing import Optional

import numpy as np

from .eventlog import Event, EventLog, Trace
from .labeling import parse_rule

REGISTER = "Register"
LOW_INSURANCE = "Low Insurance Check"
LOW_MEDICAL = "Low Medical History"
HIGH_INSURANCE = "High Insurance Check"
HIGH_MEDICAL = "High Medical History"
CONTACT_HOSPITAL = "Contact Hospital"
CREATE_Q = "Create Questionnaire"
SEND_Q = "Send Questionnaire"
RECEIVE_Q = "Receive Questionnaire"
TIMEOUT_Q = "Questionnaire Timeout"
ACCEPT = "Accept Claim"
REJECT = "Reject Claim"
NOTIFY = ("Notify by Phone", "Notify by Email", "Notify by Post")
ARCHIVE = "Archive"

ACTIVITIES = (REGISTER, LOW_INSURANCE, LOW_MEDICAL, HIGH_INSURANCE, HIGH_MEDICAL,
              CONTACT_HOSPITAL, CREATE_Q, SEND_Q, RECEIVE_Q, TIMEOUT_Q, ACCEPT, REJECT,
              *NOTIFY, ARCHIVE)

CTYPES = ("Regular", "Silver", "Gold", "VIP")

DEPARTMENT = {
    REGISTER: "Front Office", LOW_INSURANCE: "Insurance", HIGH_INSURANCE: "Insurance",
    LOW_MEDICAL: "Medical", HIGH_MEDICAL: "Medical", CONTACT_HOSPITAL: "Medical",
    CREATE_Q: "Back Office", SEND_Q: "Back Office", RECEIVE_Q: "Back Office",
    TIMEOUT_Q: "Back Office", ACCEPT: "Claims", REJECT: "Claims", ARCHIVE: "Back Office",
    **{a: "Front Office" for a in NOTIFY},
}

# (true condition, training-only noisy condition)
SCENARIOS = {
    "S1": ("existence(Accept Claim)", "at(5) = Accept Claim"),
    "S2": ("Age < 60 AND CType = Gold", "Age < 60 AND (CType = Gold OR CType = Silver)"),
    "S3": ("existence(Accept Claim)",
           "existence(Accept Claim) AND NOT response(Low Medical History, Create Questionnaire)"),
}
NOISE_CHOICES = ("S1", "S2", "S3", "none")


@dataclass(frozen=True)
class ProcessParams:
    """Branch probabilities of the claim process."""
    ctype_weights: tuple = (0.2, 0.3, 0.35, 0.15)  # Regular, Silver, Gold, VIP
    p_prior_claims: float = 0.35
    # low medical risk, for claimants under/over 50; prior claims lower it
    p_low_medical_young: float = 0.65
    p_low_medical_old: float = 0.45
    prior_claims_penalty: float = 0.1
    p_low_insurance: float = 0.5
    p_contact_hospital: float = 0.5
    # acceptance by (low medical, low insurance)
    p_accept: tuple = ((0.02, 0.1), (0.6, 0.95))  # [low_med][low_ins]
    # questionnaire created right after Register, else maybe just before the decision
    p_questionnaire_first: float = 0.25
    p_questionnaire_before_decision: float = 0.2
    p_reminder: float = 0.6
    max_reminders: int = 3
    p_receive: float = 0.7
    p_second_notification: float = 0.5
    # the decision waits until the questionnaire thread has finished
    p_wait_questionnaire: float = 0.1
    mean_gap_minutes: float = 90.0


def _interleave(rng, main, thread, p_main=0.5):
    out, i, j = [], 0, 0
    while i < len(main) or j < len(thread):
        if j >= len(thread) or (i < len(main) and rng.random() < p_main):
            out.append(main[i])
            i += 1
        else:
            out.append(thread[j])
            j += 1
    return out


def _simulate(rng, params: ProcessParams):
    age = int(rng.integers(18, 91))
    w = np.asarray(params.ctype_weights, dtype=float)
    ctype = CTYPES[int(rng.choice(len(CTYPES), p=w / w.sum()))]
    pclaims = "Yes" if rng.random() < params.p_prior_claims else "No"
    p_low = params.p_low_medical_young if age < 50 else params.p_low_medical_old
    if pclaims == "Yes":
        p_low = max(0.0, p_low - params.prior_claims_penalty)
    low_med = bool(rng.random() < p_low)
    low_ins = bool(rng.random() < params.p_low_insurance)
    checks = [LOW_MEDICAL if low_med else HIGH_MEDICAL,
              LOW_INSURANCE if low_ins else HIGH_INSURANCE]
    if not low_med and rng.random() < params.p_contact_hospital:
        checks.insert(1, CONTACT_HOSPITAL)
    accept = rng.random() < params.p_accept[low_med][low_ins]
    head = [REGISTER]
    thread = [SEND_Q]
    while len(thread) <= params.max_reminders and rng.random() < params.p_reminder:
        thread.append(SEND_Q)
    thread.append(RECEIVE_Q if rng.random() < params.p_receive else TIMEOUT_Q)
    if rng.random() < params.p_questionnaire_first:
        head += [CREATE_Q] + checks
    elif rng.random() < params.p_questionnaire_before_decision:
        head += checks + [CREATE_Q]
    else:
        head += checks
        thread.insert(0, CREATE_Q)
    notes = [NOTIFY[int(rng.integers(3))]]
    if rng.random() < params.p_second_notification:
        notes.append(NOTIFY[int(rng.integers(3))])
    decision = ACCEPT if accept else REJECT
    if rng.random() < params.p_wait_questionnaire:
        acts = head + thread + [decision] + notes + [ARCHIVE]
    else:
        acts = head + [decision] + _interleave(rng, notes, thread) + [ARCHIVE]
    return acts, {"Age": age, "CType": ctype, "PClaims": pclaims}


def generate_claim_log(n_traces: int = 4800, noise: str = "none", seed: int = 0,
                       params: Optional[ProcessParams] = None) -> EventLog:
    """Simulate `n_traces` claims.

    ``label`` follows the true condition of the scenario (existence of Accept
    Claim for ``none``). With a noisy scenario ``train_label`` holds the
    relabeled outcome, which `split_dataset` applies to the training part.
    """
    if n_traces < 1:
        raise ValueError("n_traces must be positive")
    if noise not in NOISE_CHOICES:
        raise ValueError(f"noise must be one of {NOISE_CHOICES}")
    params = params or ProcessParams()
    rng = np.random.default_rng(seed)
    true_rule, noisy_rule = SCENARIOS.get(noise, (SCENARIOS["S1"][0], None))
    true_rule = parse_rule(true_rule)
    noisy_rule = parse_rule(noisy_rule) if noisy_rule else None
    start = datetime(2023, 1, 2, 8, 0)
    width = len(str(n_traces))
    traces = []
    for i in range(n_traces):
        acts, attrs = _simulate(rng, params)
        ts = start + timedelta(hours=6 * i)
        events = []
        for a in acts:
            ts = ts + timedelta(minutes=float(rng.exponential(params.mean_gap_minutes)) + 1)
            events.append(Event(a, ts.replace(microsecond=0), None, {"department": DEPARTMENT[a]}))
        t = Trace(f"claim_{i:0{width}d}", events, attrs)
        label = true_rule.holds(t)
        train_label = noisy_rule.holds(t) if noisy_rule else None
        traces.append(replace(t, label=label, train_label=train_label))
    return EventLog(traces)


def scenario_rules(noise: str) -> tuple[str, Optional[str]]:
    """Text of the (true, noisy) labeling rules of a scenario."""
    if noise == "none":
        return SCENARIOS["S1"][0], None
    return SCENARIOS[noise]
