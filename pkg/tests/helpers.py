"""Shared builders for tiny seeded instances and gradient checks.

The gradient-check runners construct small random setups, steer them away
from hinge/ReLU kink points (a finite difference straddling a kink is not
comparable to the one-sided analytic gradient), and hand everything to
numeric.finite_diff_check.
"""

import numpy as np

from lexembed.aa import AaModel, _aa_batch, aa_batch_loss_grads
from lexembed.corpus import Script, Token, build_corrected_script
from lexembed.embeddings import build_vocab, init_random
from lexembed.numeric import finite_diff_check
from lexembed.pretrain import (
    EsweModel,
    SsweModel,
    _sample_noisy_batch,
    error_score_instances,
    eswe_batch_loss_grads,
    script_score_instances,
    sswe_batch_loss_grads,
)

SCORE_RANGE = (1.0, 40.0)


def tiny_scripts(rng, count=3, vocab=8, max_len=12, flag_rate=0.3):
    """Random flagged scripts of at most ``max_len`` tokens."""
    words = [f"w{i}" for i in range(vocab)]
    scripts = []
    for si in range(count):
        tokens = []
        group = 0
        length = int(rng.integers(max(4, max_len - 4), max_len + 1))
        for _ in range(length):
            w = words[int(rng.integers(vocab))]
            if rng.random() < flag_rate:
                corr = words[int(rng.integers(vocab))]
                tokens.append(Token(w, is_error=True, correction=[corr],
                                    error_type="S", group=group))
                group += 1
            else:
                tokens.append(Token(w))
        scripts.append(Script(f"tiny{si}", tokens,
                              float(rng.uniform(*SCORE_RANGE)), SCORE_RANGE))
    return scripts


def eswe_gradcheck(seed, n=3, d=4, corrected=False, epsilon=1e-5, tol=1e-4):
    rng = np.random.default_rng(seed)
    scripts = tiny_scripts(rng)
    if corrected:
        scripts = scripts + [build_corrected_script(s) for s in scripts]
    vocab = build_vocab(scripts, 1)
    emb = init_random(vocab, d, 0.5, seed)
    model = EsweModel(rng.normal(0.0, 0.5, n * d), rng.normal(0.0, 0.5, 1), n)
    idx, gold = error_score_instances(scripts, vocab, n)

    def loss_fn():
        return eswe_batch_loss_grads(model, emb, idx, gold)[0]

    _, grads = eswe_batch_loss_grads(model, emb, idx, gold)
    params = {"error_filter": model.error_filter, "bias": model.bias,
              "embeddings": emb.matrix}
    analytic = {"error_filter": grads["error_filter"], "bias": grads["bias"],
                "embeddings": grads["embeddings"]}
    return finite_diff_check(loss_fn, params, analytic, epsilon=epsilon, tol=tol)


def _sswe_margins(model, emb, idx, noisy):
    # bias-free rank responses, mirroring the hinge inside the kernels
    nd = model.hidden.shape[1]
    hc = np.tanh(emb.matrix[idx].reshape(len(idx), nd) @ model.hidden.T
                 + model.hidden_bias)
    rc = hc @ model.rank_head
    b, k, n = noisy.shape
    hn = np.tanh(emb.matrix[noisy.reshape(b * k, n)].reshape(b * k, nd)
                 @ model.hidden.T + model.hidden_bias)
    rn = (hn @ model.rank_head).reshape(b, k)
    return 1.0 - rc[:, None] + rn


def sswe_gradcheck(seed, n=3, d=3, hidden=4, k=4, alpha=0.3,
                   epsilon=1e-5, tol=1e-4):
    rng = np.random.default_rng(seed)
    scripts = tiny_scripts(rng)
    vocab = build_vocab(scripts, 1)
    emb = init_random(vocab, d, 0.5, seed)
    nd = n * d
    model = SsweModel(
        hidden=rng.normal(0.0, 0.5, (hidden, nd)),
        hidden_bias=rng.normal(0.0, 0.5, hidden),
        rank_head=rng.normal(0.0, 0.5, hidden),
        rank_bias=rng.normal(0.0, 0.5, 1),
        score_head=rng.normal(0.0, 0.5, hidden),
        score_bias=rng.normal(0.0, 0.5, 1),
        alpha=alpha, k_noisy=k, n=n,
    )
    idx, gold = script_score_instances(scripts, vocab, n)
    noisy = _sample_noisy_batch(idx, len(vocab) - 2, k, rng)
    # nudge away from hinge kinks: scale the rank head until no margin sits
    # within finite-difference reach of zero
    for _ in range(50):
        margins = _sswe_margins(model, emb, idx, noisy)
        if np.abs(margins).min() > 1e-3:
            break
        model.rank_head *= 1.05

    def loss_fn():
        return sswe_batch_loss_grads(model, emb, idx, gold, noisy)[0]

    _, grads = sswe_batch_loss_grads(model, emb, idx, gold, noisy)
    params = {
        "hidden": model.hidden, "hidden_bias": model.hidden_bias,
        "rank_head": model.rank_head, "rank_bias": model.rank_bias,
        "score_head": model.score_head, "score_bias": model.score_bias,
        "embeddings": emb.matrix,
    }
    analytic = {name: grads["embeddings" if name == "embeddings" else name]
                for name in params}
    return finite_diff_check(loss_fn, params, analytic, epsilon=epsilon, tol=tol)


def _aa_min_abs_activation(model, emb, batch):
    worst = np.inf
    md = model.script_filter.shape[1]
    d = emb.dim
    m = md // d
    from lexembed.embeddings import script_token_indices

    for script, _gold in batch:
        idx = script_token_indices(script, emb.vocab)
        windows = np.lib.stride_tricks.sliding_window_view(idx, m)
        Z = emb.matrix[windows].reshape(len(windows), md) @ model.script_filter.T \
            + model.filter_bias
        worst = min(worst, float(np.abs(Z).min()))
    return worst


def aa_gradcheck(seed, m=3, h=4, d=4, l2=0.001, epsilon=1e-5, tol=1e-4):
    rng = np.random.default_rng(seed)
    scripts = tiny_scripts(rng)
    vocab = build_vocab(scripts, 1)
    emb = init_random(vocab, d, 0.5, seed)
    model = AaModel(
        script_filter=rng.normal(0.0, 0.5, (h, m * d)),
        filter_bias=rng.normal(0.0, 0.5, h),
        reg_head=rng.normal(0.0, 0.5, h),
        head_bias=rng.normal(0.0, 0.5, 1),
        m=m, h=h,
    )
    batch = [(s, s.normalized_score()) for s in scripts]
    # nudge away from ReLU kinks
    for _ in range(50):
        if _aa_min_abs_activation(model, emb, batch) > 1e-3:
            break
        model.filter_bias += 2e-3

    def loss_fn():
        return aa_batch_loss_grads(model, emb, batch, l2)[0]

    _, grads = aa_batch_loss_grads(model, emb, batch, l2)
    params = {
        "script_filter": model.script_filter, "filter_bias": model.filter_bias,
        "reg_head": model.reg_head, "head_bias": model.head_bias,
        "embeddings": emb.matrix,
    }
    analytic = {name: grads[name if name != "embeddings" else "embeddings"]
                for name in params}
    return finite_diff_check(loss_fn, params, analytic, epsilon=epsilon, tol=tol)
