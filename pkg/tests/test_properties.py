"""Randomized invariants, each hammered with 1000 generated cases."""

import numpy as np
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from hornmine.env import featurize, reset, step, valid_actions
from hornmine.evaluate import build_trace, predict
from hornmine.mcts import SearchParams, search
from hornmine.memory import MemoryExhaustedError, RuleMemory
from hornmine.net import PolicyValueNet, make_net_sample, numeric_gradient
from hornmine.relational import RelGraph, Sample, build_vocab
from hornmine.worldgen import LabeledSample

N_KNOWN = 5
N_INVENTED = 4

seeds = st.integers(0, 2**32 - 1)
rels = st.integers(0, N_KNOWN - 1)
bodies = st.tuples(rels, rels)
paths = st.lists(rels, min_size=1, max_size=5).map(tuple)


def fresh_memory():
    vocab = build_vocab([f"r{i}" for i in range(N_KNOWN)], n_invented=N_INVENTED)
    return vocab, RuleMemory(vocab)


def run_random_ops(data, memory, rng):
    """Drive the rule store through a random mix of its mutating operations."""
    for _ in range(data.draw(st.integers(1, 12), label="n_ops")):
        op = data.draw(
            st.sampled_from(["resolve", "episode", "rewrite", "decay", "prune", "seed"]),
            label="op",
        )
        try:
            if op == "resolve":
                memory.resolve_head(data.draw(bodies), rng)
            elif op == "seed":
                body, head = data.draw(bodies), data.draw(rels)
                if memory.heads.get(body, head) == head:
                    memory.seed_rule(body, head)
            elif op == "episode" and memory.heads:
                stored = sorted(memory.heads)
                last = data.draw(st.sampled_from(stored))
                trace = data.draw(st.lists(st.sampled_from(stored), max_size=3)) + [last]
                memory.apply_episode_end(trace, y=data.draw(rels))
            elif op == "rewrite" and memory.heads:
                body = data.draw(st.sampled_from(sorted(memory.heads)))
                memory.backtrack_rewrite(body, y=data.draw(rels))
            elif op == "decay":
                memory.decay_scores()
            elif op == "prune":
                memory.prune()
        except MemoryExhaustedError:
            return


@settings(max_examples=1000, deadline=None)
@given(st.data(), seeds)
def test_heads_and_scores_stay_paired(data, seed):
    _, memory = fresh_memory()
    run_random_ops(data, memory, np.random.default_rng(seed))
    assert set(memory.heads) == set(memory.scores)


@settings(max_examples=1000, deadline=None)
@given(st.data(), seeds)
def test_invented_id_accounting(data, seed):
    vocab, memory = fresh_memory()
    run_random_ops(data, memory, np.random.default_rng(seed))
    memory.check_invariants()
    referenced = {h for h in memory.heads.values() if vocab.is_invented(h)}
    referenced |= {r for b in memory.heads for r in b if vocab.is_invented(r)}
    assert referenced.isdisjoint(memory.free)
    assert referenced | set(memory.free) == set(range(N_KNOWN, vocab.total))


@settings(max_examples=1000, deadline=None)
@given(st.data(), seeds, rels)
def test_rewrite_purges_the_old_head(data, seed, y):
    vocab, memory = fresh_memory()
    run_random_ops(data, memory, np.random.default_rng(seed))
    invented = sorted(b for b, h in memory.heads.items() if vocab.is_invented(h))
    if not invented:
        return
    body = data.draw(st.sampled_from(invented))
    old = memory.heads[body]
    memory.backtrack_rewrite(body, y=y)
    assert old not in memory.heads.values()
    assert all(old not in b for b in memory.heads)
    assert old in memory.free
    memory.check_invariants()


@settings(max_examples=1000, deadline=None)
@given(st.lists(st.tuples(bodies, rels, st.floats(-5, 5, allow_nan=False)),
                max_size=8, unique_by=lambda t: t[0]),
       st.integers(1, 30))
def test_decay_never_flips_a_sign(entries, rounds):
    _, memory = fresh_memory()
    for body, head, score in entries:
        memory.seed_rule(body, head, score=score)
    before = dict(memory.scores)
    for _ in range(rounds):
        memory.decay_scores()
    for body, old in before.items():
        new = memory.scores[body]
        assert np.sign(new) == np.sign(old)
        if old > 0:
            assert 0 < new <= old
        elif old < 0:
            assert new <= old


@settings(max_examples=1000, deadline=None)
@given(st.lists(paths, min_size=1, max_size=4), seeds)
def test_any_play_terminates_within_the_length_budget(path_list, seed):
    state = reset(path_list)
    rng = np.random.default_rng(seed)
    moves = 0
    while not state.terminal:
        acts = valid_actions(state)
        body = acts[rng.integers(len(acts))]
        state = step(state, body, int(rng.integers(N_KNOWN)))
        moves += 1
        assert moves <= state.initial_total
    assert state.final_rel is not None


@settings(max_examples=1000, deadline=None)
@given(paths, seeds)
def test_policy_is_a_distribution_and_single_action_is_forced(path, seed):
    vocab, memory = fresh_memory()
    state = reset([path])
    if state.terminal:
        return
    net = PolicyValueNet(vocab.total, 9, hidden=8, seed=seed)
    rng = np.random.default_rng(seed)
    net.Wp += rng.normal(scale=0.3, size=net.Wp.shape)
    net.bp += rng.normal(scale=0.3, size=net.bp.shape)
    sp = featurize(state, memory)
    rho, v = net.policy_value(sp)
    assert rho.shape == (len(sp.order),)
    assert np.all(rho >= 0)
    assert rho.sum() == np.float64(1.0) if len(sp.order) == 1 else abs(rho.sum() - 1) < 1e-9
    assert -1 < v < 1
    if len(sp.order) == 1:
        assert rho[0] == 1.0


@settings(max_examples=1000, deadline=None)
@given(st.lists(paths.filter(lambda p: len(p) > 1), min_size=1, max_size=3),
       st.lists(st.tuples(bodies, rels), max_size=4, unique_by=lambda t: t[0]),
       st.integers(2, 24), rels, seeds)
def test_search_visits_add_up_to_the_budget(path_list, rules, sims, target, seed):
    vocab, memory = fresh_memory()
    for body, head in rules:
        memory.seed_rule(body, head)
    state = reset(path_list)
    params = SearchParams(sims=sims)
    res = search(state, PolicyValueNet(vocab.total, 9, hidden=8, seed=0), memory,
                 vocab, params, np.random.default_rng(seed), target=target)
    assert res.visits.sum() == sims
    assert len(res.moves) == len(res.pi) == len(res.visits)
    assert abs(res.pi.sum() - 1.0) < 1e-9
    assert list(res.moves) == sorted(res.moves)


@settings(max_examples=1000, deadline=None)
@given(seeds, st.floats(-1, 1, allow_nan=False), seeds)
def test_gradients_match_finite_differences(net_seed, z, pi_seed):
    vocab, memory = fresh_memory()
    memory.seed_rule((0, 1), 2, score=0.6)
    sp = featurize(reset([(0, 1, 2)]), memory)
    net = PolicyValueNet(vocab.total, 9, hidden=8, seed=net_seed)
    rng = np.random.default_rng(net_seed)
    net.Wp += rng.normal(scale=0.1, size=net.Wp.shape)
    net.wv += rng.normal(scale=0.1, size=net.wv.shape)
    pi_rng = np.random.default_rng(pi_seed)
    pi = pi_rng.random(len(sp.order)) + 1e-3
    s = make_net_sample(sp, pi / pi.sum(), z)
    # finite differences are meaningless on a ReLU kink; demand a margin
    _, _, cache = net.forward_sample(s)
    assume(np.abs(cache["z1"]).min() > 1e-2 and np.abs(cache["z2"]).min() > 1e-2)
    _, grads = net.loss_and_grads([s])
    coords = [
        ("W1", (int(sp.flat_input()[0][0]), 0)),
        ("Wp", (0, int(sp.action_ids()[0]))),
        ("b2", (3,)),
        ("bv", ()),
    ]
    numeric = numeric_gradient(net, s, coords)
    for name, index in coords:
        a = grads[name][index] if index else grads[name]
        n = numeric[(name, index)]
        assert abs(a - n) <= 1e-4 * max(1e-2, abs(a) + abs(n))


@settings(max_examples=1000, deadline=None)
@given(st.lists(rels, min_size=2, max_size=3), st.lists(rels, min_size=2, max_size=2),
       seeds)
def test_traces_replay_to_the_reported_prediction(chain, heads, seed):
    vocab, memory = fresh_memory()

    def seed_unless_taken(body, head):
        if memory.heads.get(body, head) == head:
            memory.seed_rule(body, head)

    seed_unless_taken((chain[0], chain[1]), heads[0])
    if len(chain) == 3:
        seed_unless_taken((heads[0], chain[2]), heads[1])
    extra = np.random.default_rng(seed)
    seed_unless_taken((int(extra.integers(N_KNOWN)), int(extra.integers(N_KNOWN))),
                      int(extra.integers(N_KNOWN)))
    names = tuple(f"n{i}" for i in range(len(chain) + 1))
    edges = tuple((i, r, i + 1) for i, r in enumerate(chain))
    item = LabeledSample(Sample(RelGraph(names, edges), (0, len(chain)), None),
                         len(chain), True)
    net = PolicyValueNet(vocab.total, 9, hidden=8, seed=0)
    out = predict(item, net, memory, vocab, policy_only=True, seed=seed)
    if out.prediction is None:
        return
    trace = build_trace(item, out, vocab)
    assert trace.replay() == out.prediction
    assert len(trace.render(vocab)) == len(trace.steps)
