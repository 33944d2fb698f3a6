import math

import numpy as np
import pytest

minispn = pytest.importorskip("minispn")


def test_synthetic_learn_roundtrip():
    rows, schema, truth = minispn.synthetic(800, 4, 2, missing_rate=0.2, seed=3)
    assert rows.shape == (800, 6)
    assert schema == [2, 2, 2, 2, 0, 0]
    assert np.isnan(rows).any()

    model = minispn.learn(rows[:700], rows[700:], schema, method="minispn", seed=1)
    assert model.validate() == []
    assert model.schema == schema

    again = minispn.Model.from_text(model.to_text())
    lp = model.log_density(rows[700:])
    assert np.array_equal(lp, again.log_density(rows[700:]))
    assert model.mean_log_likelihood(rows[700:]) == pytest.approx(lp.mean())
    assert truth.dof > 0


def test_missing_cells_marginalize():
    _, schema, truth = minispn.synthetic(10, 3, seed=1)
    assert truth.log_density(np.full((2, 3), np.nan)).tolist() == [0.0, 0.0]
    total = sum(
        math.exp(truth.log_density(np.array([[a, b, c]], dtype=float))[0])
        for a in (0, 1) for b in (0, 1) for c in (0, 1)
    )
    assert total == pytest.approx(1.0, abs=1e-12)


def test_sample_is_seeded():
    _, _, truth = minispn.synthetic(10, 2, 1, seed=2)
    assert np.array_equal(truth.sample(20, seed=5), truth.sample(20, seed=5))


def test_errors():
    _, schema, truth = minispn.synthetic(10, 2, seed=2)
    with pytest.raises(ValueError):
        truth.log_density(np.zeros((1, 5)))
    with pytest.raises(ValueError):
        minispn.Model.from_text("garbage")
    with pytest.raises(ValueError):
        minispn.learn(np.zeros((4, 2)), np.zeros((2, 2)), schema, method="bogus")
