"""Canonical world configs used by the test suite and the benchmark.

`w2_config` is the tiny two-disease fixture whose posteriors are all
hand-checkable. `w4_config` is the four-disease abdominal benchmark world:
uniform priors (real class frequencies are not published anywhere usable),
three orderable test categories, and deliberately heterogeneous test
informativeness so that *which* test a planner orders actually matters.
"""

from __future__ import annotations

from .world import ActionSpec, WorldConfig


def w2_config() -> WorldConfig:
    """Two diseases, two binary tests, uninformative initial observation."""
    return WorldConfig(
        disease_names=("A", "B"),
        priors=(0.5, 0.5),
        init_obs_alphabet=("none",),
        init_obs_table=((1.0,), (1.0,)),
        actions=(
            ActionSpec(
                name="lab",
                outcome_alphabet=("+", "-"),
                cond_table=((0.9, 0.1), (0.2, 0.8)),
            ),
            ActionSpec(
                name="img",
                outcome_alphabet=("+", "-"),
                cond_table=((0.6, 0.4), (0.5, 0.5)),
            ),
        ),
        availability_prob=1.0,
        seed=0,
    )


def w4_config(availability_prob: float = 0.9, seed: int = 0) -> WorldConfig:
    """Four abdominal conditions, three test categories, missing-test knob.

    Test design notes:
    - phys is broadly but only moderately informative;
    - img is decisive for appendicitis/diverticulitis, but gallstone
      findings pull pancreatitis cases toward cholecystitis;
    - lab is decisive for pancreatitis (lipase) and strong for appendicitis,
      while diverticulitis labs mimic appendicitis (leukocytosis).
    A planner that reads the current posterior can route around the two
    look-alike outcomes; uninformed ordering cannot.
    """
    return WorldConfig(
        disease_names=("appendicitis", "cholecystitis", "diverticulitis",
                       "pancreatitis"),
        priors=(0.25, 0.25, 0.25, 0.25),
        init_obs_alphabet=("rlq_pain", "ruq_pain", "llq_pain", "epigastric_pain"),
        init_obs_table=(
            (0.55, 0.15, 0.15, 0.15),   # appendicitis
            (0.10, 0.55, 0.10, 0.25),   # cholecystitis
            (0.15, 0.10, 0.60, 0.15),   # diverticulitis
            (0.08, 0.25, 0.10, 0.57),   # pancreatitis
        ),
        actions=(
            ActionSpec(
                name="phys",
                outcome_alphabet=("rebound_rlq", "murphy_sign", "llq_tender",
                                  "epigastric_guarding"),
                cond_table=(
                    (0.60, 0.10, 0.15, 0.15),
                    (0.10, 0.55, 0.10, 0.25),
                    (0.15, 0.10, 0.60, 0.15),
                    (0.10, 0.20, 0.10, 0.60),
                ),
            ),
            ActionSpec(
                name="img",
                outcome_alphabet=("inflamed_appendix", "gallstones", "diverticula",
                                  "pancreatic_edema", "unremarkable"),
                cond_table=(
                    (0.72, 0.04, 0.04, 0.02, 0.18),
                    (0.02, 0.75, 0.04, 0.04, 0.15),
                    (0.03, 0.04, 0.72, 0.03, 0.18),
                    (0.02, 0.30, 0.03, 0.50, 0.15),
                ),
            ),
            ActionSpec(
                name="lab",
                outcome_alphabet=("wbc_high", "bili_high", "lipase_high", "normal"),
                cond_table=(
                    (0.72, 0.06, 0.04, 0.18),
                    (0.25, 0.55, 0.05, 0.15),
                    (0.60, 0.08, 0.04, 0.28),
                    (0.05, 0.10, 0.75, 0.10),
                ),
            ),
        ),
        availability_prob=availability_prob,
        seed=seed,
    )


PRESETS = {"w2": w2_config, "w4": w4_config}
