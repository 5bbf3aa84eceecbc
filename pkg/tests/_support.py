"""Shared checks for the unit and acceptance suites."""

import numpy as np

from unrollcs.dictionary import compute_dictionary, generalized_coherence, max_admissible_sparsity
from unrollcs.numerics import Tape, exemption_mask
from unrollcs.problems import ProblemEnsemble, gen_measurement_matrix
from unrollcs.solvers import (
    build_model,
    exemption_count,
    oracle_threshold_run,
    step_size_interval,
    support_schedule,
    verify_error_bound,
    verify_lemma1,
)
from unrollcs.training import mse_loss


def kink_margin(model, phi, W, y) -> float:
    """Distance of a plain forward pass from every non-differentiable point."""
    B, N = y.shape[0], phi.shape[1]
    x = np.zeros((B, N))
    state = model._start(model.params, B)
    margin = np.inf
    for k in range(model.K):
        res = x @ phi.T - y
        upd = res @ W
        margin = min(margin, np.min(np.abs(res)), np.min(np.abs(upd)))
        theta, gamma, state = model._layer(k, model.params, x, res, upd, state)
        z = x - np.asarray(gamma) * upd
        theta = np.broadcast_to(np.asarray(theta), z.shape)
        keep = exemption_mask(z, exemption_count(model.support[k], N))
        margin = min(margin, np.min(np.abs(np.abs(z) - theta)[~keep], initial=np.inf))
        count = exemption_count(model.support[k], N)
        if 0 < count < N:
            mags = np.sort(np.abs(z), axis=1)[:, ::-1]
            margin = min(margin, np.min(mags[:, count - 1] - mags[:, count]))
        x = np.where(keep, z, np.sign(z) * np.maximum(np.abs(z) - theta, 0.0))
    return float(margin)


def loss_and_grads(model, phi, W, batch):
    tape = Tape()
    trace = model.forward(phi, W, batch.y, tape=tape, keep_iterates=False)
    loss = mse_loss(trace.output, batch.x)
    return float(loss.value), tape.gradients(loss, trace.extras["leaves"])


def plain_loss(model, phi, W, batch) -> float:
    out = model.forward(phi, W, batch.y, keep_iterates=False).output
    return float(np.mean(np.sum((out - batch.x) ** 2, axis=1)))


def finite_difference(model, phi, W, batch, h=1e-6) -> dict:
    grads = {}
    for name, p in model.params.items():
        g = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            orig = p[idx]
            p[idx] = orig + h
            up = plain_loss(model, phi, W, batch)
            p[idx] = orig - h
            down = plain_loss(model, phi, W, batch)
            p[idx] = orig
            g[idx] = (up - down) / (2 * h)
        grads[name] = g
    return grads


def tensor_rel_err(a, b) -> float:
    scale = max(np.linalg.norm(a), np.linalg.norm(b))
    return 0.0 if scale == 0 else float(np.linalg.norm(a - b) / scale)


def gradient_check_instances(kind: str, count: int = 20, M=4, N=8, K=3, H=4, B=3,
                             min_margin=1e-4, seed=0):
    """Random kink-avoiding (model, phi, W, batch) instances at tiny sizes."""
    rng = np.random.default_rng([seed, 99])
    out = []
    attempt = 0
    while len(out) < count:
        attempt += 1
        ens = ProblemEnsemble.generate(M, N, 2, 30.0, seed * 1000 + attempt)
        W = compute_dictionary(ens.phi).W
        batch = ens.sample(B, attempt)
        support = support_schedule(K, 30.0)
        model = build_model(kind, K, H=H, support=support, seed=attempt, input_norm="none")
        if kind == "na_alista":
            model.params = {k: v + rng.normal(0, 0.3, v.shape) for k, v in model.params.items()}
        else:
            model.params = {"theta": rng.uniform(0.02, 0.3, K), "gamma": rng.uniform(0.2, 0.6, K)}
        if kink_margin(model, ens.phi, W, batch.y) < min_margin:
            continue
        out.append((model, ens.phi, W, batch))
    return out


def lemma_instances(count=100, M=60, N=80, seed=0):
    """Noiseless problems with s <= max admissible sparsity and oracle thresholds."""
    rng = np.random.default_rng([seed, 7])
    phi = gen_measurement_matrix(M, N, seed)
    W = compute_dictionary(phi).W
    mu = generalized_coherence(W, phi)
    s_max = max_admissible_sparsity(mu)
    results = []
    for i in range(count):
        s = int(rng.integers(1, min(2, s_max) + 1))
        x_star = np.zeros((1, N))
        x_star[0, rng.choice(N, s, replace=False)] = rng.normal(0, 1, s) + np.sign(rng.normal(0, 1, s))
        y = x_star @ phi.T
        hi = step_size_interval(mu, s)[1]
        gammas = rng.uniform(0.05 * hi, 0.95 * hi, 12)
        trace = oracle_threshold_run(phi, W, y, x_star, gammas, mu)
        results.append((s, verify_lemma1(trace, x_star), verify_error_bound(trace, x_star, mu, s)))
    return mu, s_max, results
