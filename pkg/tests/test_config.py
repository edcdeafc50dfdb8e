import json
import random

import pytest
from hypothesis import given, strategies as st

from cooldown.config import (
    ConfigError, digest, dumps, expand_sweep, loads, normalize, trainer_config, tree_from_trainer,
)


def test_empty_document_is_fully_defaulted():
    tree = loads("")
    assert tree == loads("{}") == normalize({})
    assert tree["schedule"]["kind"] == "constant_cooldown"
    assert tree["optimizer"]["weight_decay"] == 0.0
    assert set(tree) >= {"seed", "task", "schedule", "optimizer", "trainer"}


def test_weight_decay_default_follows_task():
    assert loads('{"task": {"kind": "synthetic_lm"}}')["optimizer"]["weight_decay"] == 0.1


def test_kind_specific_key_rejected():
    with pytest.raises(ConfigError) as e:
        loads('{"schedule": {"kind": "cosine", "decay_steps": 100}}')
    assert e.value.path == "schedule" and e.value.key == "decay_steps"


@pytest.mark.parametrize("doc", [
    '{"trainer": {"bogus": 1}}',
    '{"nonsense": 1}',
    '{"schedule": {"peak_lr": -1}}',
    '{"schedule": {"total_steps": "many"}}',
    '{"trainer": {"eval_every": 999999}}',
    '{"optimizer": {"beta1": 1.5}}',
    '{"task": {"kind": "synthetic_lm", "dim": 10}}',
    '{"schedule": ',
])
def test_invalid_documents(doc):
    with pytest.raises(ConfigError):
        loads(doc)


def test_dump_load_round_trip():
    tree = loads('{"seed": 7, "schedule": {"kind": "cosine", "peak_lr": 0.02}, "trainer": {"swa": {"h": 50}}}')
    assert loads(dumps(tree)) == tree
    assert tree_from_trainer(trainer_config(tree)) == {k: v for k, v in tree.items() if k != "sweep"}


@given(st.randoms(use_true_random=False))
def test_digest_stable_under_key_reordering(rnd):
    tree = loads('{"seed": 3, "trainer": {"batch_size": 4}}')

    def shuffled(x):
        if isinstance(x, dict):
            items = list(x.items())
            rnd.shuffle(items)
            return {k: shuffled(v) for k, v in items}
        return x

    again = normalize(json.loads(json.dumps(shuffled(tree))))
    assert digest(again) == digest(tree)
    assert len(digest(tree)) == 16


def test_sweep_expansion():
    tree = loads(json.dumps({"seed": 5, "sweep": {"replicates": 3, "grid": {"schedule.peak_lr": [0.01, 0.02]}}}))
    runs = expand_sweep(tree)
    ids = [r for r, _ in runs]
    assert ids == [f"g{g:03d}-r{r:02d}" for g in range(2) for r in range(3)]
    assert len({digest(t) for _, t in runs}) == 6
    seeds = [t["seed"] for _, t in runs]
    assert seeds[:3] == seeds[3:] and len(set(seeds[:3])) == 3
    assert expand_sweep(tree) == runs
