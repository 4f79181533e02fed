import pytest
import tempfile
import shutil
from pathlib import Path

import numpy as np

from dls_sil.errors import ConfigurationError, EmptyWorkloadError
from dls_sil.rng import stream
from dls_sil.workload import (
    APPLICATIONS,
    DistributionKind,
    DistributionSpec,
    Workload,
    application,
    generate_workload,
    load_workload,
    save_workload,
    workload_stats,
)


@pytest.fixture
def temp_dir():
    dir_path = Path(tempfile.mkdtemp())
    yield dir_path
    shutil.rmtree(dir_path)


def test_constant_workload():
    w = generate_workload(DistributionSpec(DistributionKind.CONSTANT, {"c": 2.3e8}), 3, 42)

    assert w.flops.tolist() == [2.3e8, 2.3e8, 2.3e8]
    assert w.n == 3


def test_empty_workload_has_no_stats():
    w = generate_workload(application("gamma"), 0, 7)

    assert w.n == 0
    assert not w.has_stats
    with pytest.raises(EmptyWorkloadError):
        workload_stats(w)


def test_constant_stats_are_exact():
    w = generate_workload(application("constant"), 1000, 3)
    stats = workload_stats(w)

    assert stats.mu_flop == 2.3e8
    assert stats.sigma_flop == 0.0


def test_two_point_stats():
    w = Workload(n=2, flops=np.array([1e9, 3e9]), seed=0)
    stats = workload_stats(w)

    assert stats.mu_flop == 2e9
    assert stats.sigma_flop == 1e9


def test_gamma_mean():
    w = generate_workload(application("gamma"), 400_000, 11)

    assert workload_stats(w).mu_flop == pytest.approx(2.0e8, rel=0.01)


def test_normal_mean_and_bounds():
    w = generate_workload(application("normal"), 400_000, 5)

    assert workload_stats(w).mu_flop == pytest.approx(9.5e8, rel=0.01)
    assert w.flops.min() >= 6e8
    assert w.flops.max() <= 1.3e9


@pytest.mark.parametrize("name", sorted(APPLICATIONS))
def test_draws_stay_in_bounds(name):
    spec = APPLICATIONS[name]
    w = generate_workload(spec, 20_000, 1)

    assert len(w.flops) == 20_000
    assert (w.flops > 0).all()
    if "lo" in spec.parameters:
        assert w.flops.min() >= spec.parameters["lo"]
        assert w.flops.max() <= spec.parameters["hi"]


def test_uniform_range():
    w = generate_workload(application("uniform"), 400_000, 9)

    assert w.flops.min() >= 1e3
    assert w.flops.max() <= 7e8


def test_generation_is_deterministic():
    first = generate_workload(application("exponential"), 5000, 123)
    second = generate_workload(application("exponential"), 5000, 123)

    assert np.array_equal(first.flops, second.flops)


def test_seed_changes_values_not_shape():
    first = generate_workload(application("psia"), 1000, 1)
    second = generate_workload(application("psia"), 1000, 2)

    assert not np.array_equal(first.flops, second.flops)
    assert second.n == 1000
    assert second.flops.min() >= 5.9e7
    assert second.flops.max() <= 6.6e7


def test_workload_is_read_only():
    w = generate_workload(application("psia"), 10, 1)

    with pytest.raises(ValueError):
        w.flops[0] = 1.0


@pytest.mark.parametrize("kind,parameters,field", [
    (DistributionKind.CONSTANT, {"c": 0.0}, "c"),
    (DistributionKind.CONSTANT, {}, "c"),
    (DistributionKind.UNIFORM, {"lo": 5.0, "hi": 1.0}, "lo"),
    (DistributionKind.NORMAL, {"mu": 1e9, "sigma": 1e7, "lo": 1e6, "hi": 5e8}, "hi"),
    (DistributionKind.GAMMA, {"k": -2.0, "theta": 1e8, "lo": 1.0, "hi": 1e9}, "k"),
])
def test_invalid_parameters_name_the_field(kind, parameters, field):
    with pytest.raises(ConfigurationError) as info:
        DistributionSpec(kind, parameters)

    assert info.value.field == field


def test_unknown_application():
    with pytest.raises(ConfigurationError):
        application("lu-decomposition")


def test_negative_count_is_rejected():
    with pytest.raises(ConfigurationError):
        generate_workload(application("constant"), -1, 0)


def test_streams_are_independent():
    a = stream(5, "workload").random(4)
    b = stream(5, "latency").random(4)

    assert not np.array_equal(a, b)
    assert np.array_equal(a, stream(5, "workload").random(4))


def test_save_and_load(temp_dir):
    w = generate_workload(application("gamma"), 50, 2 ** 63 + 5)
    path = temp_dir / "gamma.txt"
    save_workload(w, path)

    assert path.read_text().splitlines()[0] == f"n 50 seed {2 ** 63 + 5}"
    loaded = load_workload(path)
    assert loaded.seed == w.seed
    assert np.array_equal(loaded.flops, w.flops)


def test_load_rejects_count_mismatch(temp_dir):
    path = temp_dir / "bad.txt"
    path.write_text("n 3 seed 0\n1e9\n2e9\n")

    with pytest.raises(ConfigurationError):
        load_workload(path)
