import math
import random

import pytest

from dls_sil.errors import ConfigurationError
from dls_sil.platform import PlatformSummary
from dls_sil.sched import (
    ADAPTIVE_WEIGHTED,
    Feedback,
    TechniqueKind,
    fsc_chunk_size,
    init_state,
    next_chunk,
    record_feedback,
    seed_state,
    technique,
)
from dls_sil.workload import WorkloadStats

STATS = WorkloadStats(mu_flop=2.3e8, sigma_flop=5e7)


def homogeneous(P, h=1e-3):
    return PlatformSummary(weights=(1.0,) * P, reference_speed=1e9, h=h)


def drain(state):
    """Claim round robin until every PE reports no work"""
    sizes = []
    idle = set()
    i = 0
    while len(idle) < state.P:
        pe = i % state.P
        i += 1
        if pe in idle:
            continue
        claim = next_chunk(state, pe)
        if claim is None:
            idle.add(pe)
            continue
        sizes.append((pe,) + claim)
        record_feedback(state, Feedback(pe, claim[1], 0.1 * claim[1], 0.1 * claim[1] + 0.01))
    return sizes


def test_technique_names():
    assert [k.value for k in TechniqueKind] == [
        "STATIC", "SS", "FSC", "GSS", "FAC", "WF", "AWF-B", "AWF-C", "AWF-D", "AWF-E", "AF",
    ]
    assert technique("awf-c") == TechniqueKind.AWF_C
    with pytest.raises(ConfigurationError):
        technique("TSS")


def test_static_chunk():
    state = init_state(TechniqueKind.STATIC, 400_000, 224, STATS, homogeneous(224))

    assert next_chunk(state, 0) == (0, 1786)
    assert next_chunk(state, 0) is None
    assert next_chunk(state, 1) == (1786, 1786)


def test_static_totality():
    state = init_state(TechniqueKind.STATIC, 1000, 7, STATS, homogeneous(7))
    claims = drain(state)

    assert len(claims) == 7
    assert [size for _, _, size in claims] == [143] * 6 + [142]


def test_ss_is_one():
    state = init_state(TechniqueKind.SS, 10, 3, STATS, homogeneous(3))

    assert all(size == 1 for _, _, size in drain(state))


def test_gss_first_chunk():
    state = init_state(TechniqueKind.GSS, 400_000, 696, STATS, homogeneous(696))

    assert next_chunk(state, 0) == (0, 575)


def test_gss_sequence():
    state = init_state(TechniqueKind.GSS, 100, 4, STATS, homogeneous(4))
    sizes = [size for _, _, size in drain(state)]

    assert sizes[:6] == [25, 19, 14, 11, 8, 6]
    assert sizes == sorted(sizes, reverse=True)
    assert sum(sizes) == 100


def test_fac_first_batch():
    state = init_state(TechniqueKind.FAC, 400_000, 696, STATS, homogeneous(696))

    assert next_chunk(state, 0) == (0, 288)
    assert state.batch_remaining == 200_000 - 288


def test_fac_batch_law():
    state = init_state(TechniqueKind.FAC, 1000, 4, STATS, homogeneous(4))
    sizes = [size for _, _, size in drain(state)]

    # batches of 500, 250, 125, 63, 31, 16, 8, 4, 2, 1
    assert sizes[:4] == [125] * 4
    assert sizes[4:8] == [63, 63, 63, 61]
    assert sizes[8:12] == [32, 32, 32, 29]
    assert sum(sizes) == 1000


def test_wf_weights_and_rounding():
    summary = PlatformSummary(weights=(1.398, 0.316), reference_speed=0.857e9, h=1e-3)
    state = init_state(TechniqueKind.WF, 1152, 2, STATS, summary)

    assert state.static_weights == pytest.approx([1.6306, 0.3694], abs=2e-3)
    assert sum(state.static_weights) == pytest.approx(2.0, abs=1e-9)
    assert next_chunk(state, 0) == (0, 470)
    assert state.batch_chunk == 288
    assert next_chunk(state, 1) == (470, 106)


def test_awf_c_weights():
    state = init_state(TechniqueKind.AWF_C, 1000, 2, STATS, homogeneous(2))
    record_feedback(state, Feedback(0, 100, 1.0, 1.0))
    record_feedback(state, Feedback(1, 100, 4.0, 4.0))

    assert state.awf_weights == pytest.approx([1.6, 0.4])


def test_awf_pe_without_records_gets_mean_weight():
    state = init_state(TechniqueKind.AWF_C, 1000, 3, STATS, homogeneous(3))
    record_feedback(state, Feedback(0, 100, 1.0, 1.0))
    record_feedback(state, Feedback(1, 100, 4.0, 4.0))

    assert state.awf_weights[2] == pytest.approx(state.awf_weights[0] * 62.5 / 100)
    assert sum(state.awf_weights) == pytest.approx(3.0, abs=1e-9)


def test_awf_e_uses_total_time():
    state = init_state(TechniqueKind.AWF_E, 1000, 2, STATS, homogeneous(2))
    record_feedback(state, Feedback(0, 100, 1.0, 4.0))
    record_feedback(state, Feedback(1, 100, 1.0, 1.0))

    assert state.awf_weights == pytest.approx([0.4, 1.6])


def test_awf_b_waits_for_the_batch():
    state = init_state(TechniqueKind.AWF_B, 100, 2, STATS, homogeneous(2))
    first = next_chunk(state, 0)
    second = next_chunk(state, 1)
    assert (first, second) == ((0, 25), (25, 25))

    record_feedback(state, Feedback(0, 25, 1.0, 1.0))
    assert state.awf_weights == [1.0, 1.0]

    record_feedback(state, Feedback(1, 25, 4.0, 4.0))
    assert state.awf_weights == pytest.approx([1.6, 0.4])


def test_awf_faster_class_gets_higher_weight():
    summary = PlatformSummary(weights=(1.0,) * 4, reference_speed=1e9, h=1e-3)
    state = init_state(TechniqueKind.AWF_B, 10_000, 4, STATS, summary)
    speed = [3.0, 3.0, 1.0, 1.0]
    idle = set()
    pe = 0
    while len(idle) < 4:
        if pe not in idle:
            claim = next_chunk(state, pe)
            if claim is None:
                idle.add(pe)
            else:
                record_feedback(state, Feedback(pe, claim[1], claim[1] / speed[pe], claim[1] / speed[pe]))
        pe = (pe + 1) % 4

    assert min(state.awf_weights[:2]) > max(state.awf_weights[2:])


def test_af_single_sample():
    state = init_state(TechniqueKind.AF, 1000, 2, STATS, homogeneous(2))
    record_feedback(state, Feedback(0, 10, 5.0, 5.0))

    assert state.af_mu[0] == 0.5
    assert state.af_sigma[0] == 0.0
    assert state.af_samples == [1, 0]


def test_af_bootstrap():
    state = init_state(TechniqueKind.AF, 100, 2, STATS, homogeneous(2))

    assert all(n == 0 for n in state.af_samples)
    assert next_chunk(state, 0) == (0, 25)


def test_af_degenerate_limit():
    state = init_state(TechniqueKind.AF, 100, 2, STATS, homogeneous(2))
    record_feedback(state, Feedback(0, 10, 5.0, 5.0))
    record_feedback(state, Feedback(1, 10, 5.0, 5.0))

    assert next_chunk(state, 0) == (0, 50)


def test_fsc_closed_form():
    k = fsc_chunk_size(400_000, 224, 0.2, 0.001)
    expected = math.ceil(((math.sqrt(2) * 400_000 * 0.2) / (0.001 * 224 * math.sqrt(math.log(224)))) ** (2 / 3))

    assert k == expected
    assert fsc_chunk_size(100, 4, 1e-3, 0.0) == 25
    assert fsc_chunk_size(100, 1, 1e-3, 0.5) == 100


def test_fsc_needs_overhead():
    with pytest.raises(ConfigurationError):
        init_state(TechniqueKind.FSC, 100, 4, STATS, homogeneous(4, h=0.0))


def test_nonadaptive_feedback_is_ignored():
    state = init_state(TechniqueKind.GSS, 100, 2, STATS, homogeneous(2))
    next_chunk(state, 0)
    before = (state.scheduled, list(state.awf_weights), list(state.af_samples))
    record_feedback(state, Feedback(0, 50, 1.0, 2.0))

    assert (state.scheduled, state.awf_weights, state.af_samples) == before


def test_bad_pe_index():
    state = init_state(TechniqueKind.SS, 10, 2, STATS, homogeneous(2))

    with pytest.raises(IndexError):
        next_chunk(state, 2)


def test_init_rejects_bad_sizes():
    with pytest.raises(ConfigurationError):
        init_state(TechniqueKind.STATIC, 0, 2, STATS, homogeneous(2))
    with pytest.raises(ConfigurationError):
        init_state(TechniqueKind.SS, 10, 0, STATS, homogeneous(1))


def test_offset_start():
    state = init_state(TechniqueKind.GSS, 100, 4, STATS, homogeneous(4), scheduled=60)

    assert state.remaining == 40
    assert next_chunk(state, 0) == (60, 10)


@pytest.mark.parametrize("kind", list(TechniqueKind))
@pytest.mark.parametrize("seed", [1, 2, 3])
def test_conservation_under_random_interleaving(kind, seed):
    rng = random.Random(seed)
    P = rng.randint(1, 6)
    N = rng.randint(1, 3000)
    summary = PlatformSummary(weights=tuple(rng.uniform(0.2, 2.0) for _ in range(P)), reference_speed=1e9, h=1e-4)
    state = init_state(kind, N, P, STATS, summary)

    covered = []
    idle = set()
    while len(idle) < P:
        pe = rng.randrange(P)
        if pe in idle:
            continue
        remaining = state.remaining
        claim = next_chunk(state, pe)
        if claim is None:
            idle.add(pe)
            continue
        start, size = claim
        assert 1 <= size <= remaining
        covered.append((start, size))
        exec_time = size * rng.uniform(0.5, 2.0)
        record_feedback(state, Feedback(pe, size, exec_time, exec_time + 0.01))
        if kind in ADAPTIVE_WEIGHTED:
            assert sum(state.awf_weights) == pytest.approx(P, abs=1e-9)

    covered.sort()
    assert covered[0][0] == 0
    assert all(a + n == b for (a, n), (b, _) in zip(covered, covered[1:]))
    assert sum(size for _, size in covered) == N


def test_seed_state_replays_history():
    history = [Feedback(0, 100, 1.0, 1.0), Feedback(1, 100, 4.0, 4.0)]
    seeded = seed_state(init_state(TechniqueKind.AWF_C, 1000, 2, STATS, homogeneous(2), scheduled=200), history)
    af = seed_state(init_state(TechniqueKind.AF, 1000, 2, STATS, homogeneous(2)), history)

    assert seeded.awf_weights == pytest.approx([1.6, 0.4])
    assert af.af_mu == [0.01, 0.04]
