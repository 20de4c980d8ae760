"""Directional checks on the shared synthetic experiment, beyond the acceptance thresholds."""

import pytest


def test_rl_contexts_earn_more_reward_than_random_walks(experiment):
    reward = experiment["reward"]
    assert reward["rl"] > reward["random"]


def test_rule_paths_are_better_context_than_random_walks(experiment):
    reward = experiment["reward"]
    assert reward["oracle"] > reward["random"]


def test_every_strategy_is_evaluated_on_the_same_queries(experiment):
    keys = ("oracle", "sampling", "rl", "minerva", "answer_search")
    queries = [[r.query for r in experiment[k].records] for k in keys]
    assert all(q == queries[0] for q in queries)
    assert len(queries[0]) == len(experiment["store"]["test"])   # both directions of every test fact


def test_minerva_path_context_beats_answer_search(experiment):
    assert experiment["minerva"].mrr > experiment["answer_search"].mrr


def test_ranks_are_within_entity_count(experiment):
    n = experiment["store"].vocab.entity_count
    for key in ("oracle", "sampling", "rl", "minerva", "answer_search"):
        assert all(1 <= r.rank <= n for r in experiment[key].records)


@pytest.mark.xfail(strict=True, reason="random one-step contexts already earn about half the achievable reward "
                                       "on this graph, so a 2x margin is out of reach; see the README")
def test_final_training_reward_doubles_random_walk_reward(experiment):
    r = experiment["train_reward"]
    assert r["final"] >= 2 * r["random"]


def test_final_training_reward_exceeds_random_walk_reward(experiment):
    r = experiment["train_reward"]
    assert r["final"] > r["random"]
