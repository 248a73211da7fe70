import numpy as np
import pytest

from corrfuse import (
    SIM1_ROWS, SIM2_ROWS, SimSpec, ValidationError, experiment_alpha, fit_ifm, generate_dataset, make_rng,
    structured_alpha,
)
from corrfuse.datagen import sample_cfm_dataset, simulate, true_params
from corrfuse.mcmc import McmcConfig


def test_sim1_alpha():
    a = experiment_alpha("sim1")
    assert a.shape == (2, 3, 3)
    np.testing.assert_array_equal(a[0], [[3, 2, 2], [2, 3, 2], [2, 2, 3]])
    np.testing.assert_array_equal(a[0], a[1])


def test_sim2_alpha():
    a = experiment_alpha("sim2")
    np.testing.assert_array_equal(a[1], [[12, 8, 8], [8, 12, 8], [8, 8, 12]])
    np.testing.assert_array_equal(a[0], structured_alpha(3, 8, 4))


def test_rows_constants():
    np.testing.assert_array_equal(SIM1_ROWS, structured_alpha(3, 2, 1))
    np.testing.assert_array_equal(SIM2_ROWS, structured_alpha(3, 8, 4))


def test_unknown_experiment():
    with pytest.raises(ValidationError):
        experiment_alpha("sim3")


@pytest.mark.parametrize("kw", [dict(r=1.5), dict(r=0.5, examples_per_class=0), dict(r=0.5, n_test_sets=0)])
def test_spec_validation(kw):
    with pytest.raises(ValidationError):
        SimSpec(experiment_alpha("sim1"), **kw)


def test_spec_dict_round_trip():
    spec = SimSpec.experiment("sim2", 0.25, n_test_sets=3, seed=4)
    back = SimSpec.from_dict(spec.to_dict())
    assert back.to_dict() == spec.to_dict()
    assert np.array_equal(back.alpha, spec.alpha)
    with pytest.raises(ValidationError):
        SimSpec.from_dict({"r": 0.5})


def test_balanced_and_shaped():
    spec = SimSpec.experiment("sim1", 0.5, n_test_sets=4, examples_per_class=7, n_sim=20_000)
    sets = generate_dataset(spec)
    assert len(sets) == 4
    for ds in sets:
        assert ds.I == 21 and ds.K == 2 and ds.J == 3
        np.testing.assert_array_equal(ds.class_counts(), [7, 7, 7])


def test_single_example_per_class():
    sets = generate_dataset(SimSpec.experiment("sim1", 0.0, n_test_sets=1, examples_per_class=1))
    assert sets[0].I == 3


def test_deterministic():
    spec = SimSpec.experiment("sim1", 0.25, n_test_sets=2, n_sim=20_000, seed=8)
    a, b = generate_dataset(spec), generate_dataset(spec)
    for x, y in zip(a, b):
        assert np.array_equal(x.outputs, y.outputs) and np.array_equal(x.labels, y.labels)


def test_full_correlation_gives_equal_outputs():
    ds = generate_dataset(SimSpec.experiment("sim1", 1.0, n_test_sets=1))[0]
    assert np.array_equal(ds.outputs[:, 0], ds.outputs[:, 1])


def test_marginal_moments():
    params = true_params(SimSpec.experiment("sim1", 0.5, n_sim=50_000))
    n = 40_000
    ds = sample_cfm_dataset(params, n, make_rng(1))
    for j in range(3):
        a = params.alpha[0, j]
        mean, var = a / a.sum(), a * (a.sum() - a) / (a.sum() ** 2 * (a.sum() + 1))
        for k in range(2):
            x = ds.outputs[ds.labels == j + 1, k]
            np.testing.assert_array_less(np.abs(x.mean(axis=0) - mean), 4 * np.sqrt(var / n))


def test_simulate_bundles_params():
    sim = simulate(SimSpec.experiment("sim1", 0.0, n_test_sets=2))
    assert np.all(sim.params.delta == 0) and len(sim.test_sets) == 2


def test_ifm_round_trip():
    ds = sample_cfm_dataset(true_params(SimSpec.experiment("sim1", 0.0)), 20_000, make_rng(5))
    fit = fit_ifm(ds, mcmc=McmcConfig(n_chains=2, n_iter=1500, n_burnin=500, seed=1))
    rel = np.abs(fit.point.alpha / experiment_alpha("sim1") - 1)
    assert rel.max() < 0.10
