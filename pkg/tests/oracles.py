"""Independent reference implementations used only by the tests."""

import math

import numpy as np


def event_download_time(t_arr, thr, duration, t_start, bits):
    """Advance through the hold signal one sample segment at a time."""
    n = len(t_arr)
    cycle, pos = divmod(t_start, duration)
    elapsed = 0.0
    remaining = bits
    for _ in range(100000):
        # Segment holding ``pos``: last timestamp <= pos (first sample also covers [0, t0)).
        k = 0
        for j in range(n):
            if t_arr[j] <= pos:
                k = j
        end = t_arr[k + 1] if k + 1 < n else duration
        rate = thr[k] * 1e6
        span = end - pos
        if rate > 0 and rate * span >= remaining:
            return elapsed + remaining / rate
        remaining -= rate * span
        elapsed += span
        pos = end
        if pos >= duration:
            pos = 0.0
            cycle += 1
    raise RuntimeError("oracle did not terminate")


def event_episode(t_arr, thr, duration, levels, ladder, chunk_s=2.0, t0=0.0):
    """Per-chunk (f, T, buffer) from a direct reading of the buffer equations."""
    b = 0.0
    clock = t0
    out = []
    for lv in levels:
        bits = ladder[lv] * chunk_s * 1000.0
        f = event_download_time(t_arr, thr, duration, clock, bits)
        if b >= f:
            T = 0.0
            b = b + chunk_s - f
        else:
            T = math.ceil((f - b) / 0.5) * 0.5
            b = chunk_s
        idle = max(b - 20.0, 0.0)
        b = min(b, 20.0)
        clock += f + idle
        out.append((f, T, b))
    return out


def brute_force_thresholds(pairs, window, drop):
    """Naive sweep over the sorted pairs, recomputing each window mean."""
    srt = sorted((float(s), float(x)) for s, x in pairs)
    sensor = [p[0] for p in srt]
    thr = [p[1] for p in srt]
    means = [sum(thr[i : i + window]) / window for i in range(len(thr) - window + 1)]
    out = []
    ref = means[0]
    for i in range(1, len(means)):
        if ref - means[i] >= drop - 1e-9:
            w = sorted(sensor[i : i + window])
            mid = len(w) // 2
            value = w[mid] if len(w) % 2 else 0.5 * (w[mid - 1] + w[mid])
            if not out or value > out[-1]:
                out.append(value)
            ref = means[i]
    return out


def chunk_reward(l, l_prev, T, violated, mu=2.26, l_min=300.0, penalty=5.0):
    q = math.log(l / l_min)
    qp = math.log(l_prev / l_min)
    return q - mu * T - abs(q - qp) - (penalty if violated else 0.0)


def brute_force_mpc1(buffer_s, last_level, rate_mbps, ladder, mu=2.26, penalty=5.0, chunk_s=2.0):
    """Single-chunk lookahead by explicit loop over rungs."""
    best, best_q = None, -np.inf
    for lv, l in enumerate(ladder):
        f = l * chunk_s * 1000.0 / (rate_mbps * 1e6)
        if buffer_s >= f:
            T, b = 0.0, buffer_s + chunk_s - f
        else:
            T, b = math.ceil((f - buffer_s) / 0.5) * 0.5, chunk_s
        violated = b > 20.0 or T > 20.0
        q = chunk_reward(l, ladder[last_level], T, violated, mu, ladder[0], penalty)
        if q > best_q:
            best, best_q = lv, q
    return best


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def stacked_objective(kind, batch, P, cfg, train_mode, rng_seed):
    """Objective for K parameter sets at once; every array in ``P`` has a leading K (or 1) axis.

    LSTM encoder only. Gate layout i, f, o, g; dropout masks drawn exactly as the library does.
    """
    X = np.asarray(batch.states, dtype=float)
    S, H = cfg.num_scalars, cfg.lstm_hidden
    N, W = X.shape[0], X.shape[1] - S
    inp = X[None, :, S:, None]
    for l in range(cfg.lstm_layers):
        Wx, Wh, b = P[f"lstm{l}.Wx"], P[f"lstm{l}.Wh"], P[f"lstm{l}.b"]
        xp = inp @ Wx[:, None] + b[:, None, None, :]
        K = max(xp.shape[0], Wh.shape[0])
        h = np.zeros((K, N, H))
        c = np.zeros((K, N, H))
        hs = np.empty((K, N, W, H))
        for t in range(W):
            z = xp[:, :, t] + h @ Wh
            i, f, o = _sigmoid(z[..., :H]), _sigmoid(z[..., H : 2 * H]), _sigmoid(z[..., 2 * H : 3 * H])
            c = f * c + i * np.tanh(z[..., 3 * H :])
            h = o * np.tanh(c)
            hs[:, :, t] = h
        inp = hs
    feat = inp[:, :, -1]
    h = np.concatenate([feat, np.broadcast_to(X[:, :S], feat.shape[:2] + (S,))], axis=-1)
    rng = np.random.default_rng(rng_seed) if rng_seed is not None else None
    for k in range(len(cfg.fc_sizes)):
        h = np.maximum(h @ P[f"fc{k}.W"] + P[f"fc{k}.b"][:, None, :], 0.0)
        if train_mode and cfg.dropout_rate > 0:
            keep = 1.0 - cfg.dropout_rate
            h = h * ((rng.random((N, h.shape[-1])) < keep) / keep)
    out = h @ P["head.W"] + P["head.b"][:, None, :]
    if kind == "critic":
        err = np.asarray(batch.targets)[None, :] - out[..., 0]
        return (err * err).sum(axis=1)
    z = out - out.max(axis=-1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=-1, keepdims=True))
    ent = -(np.exp(logp) * logp).sum(axis=-1)
    picked = logp[:, np.arange(N), np.asarray(batch.actions)]
    return (np.asarray(batch.advantages)[None, :] * picked).sum(axis=1) + batch.entropy_weight * ent.sum(axis=1)


def stacked_central_differences(kind, batch, params, cfg, train_mode, rng_seed, eps=1e-4):
    """Central differences for every parameter entry, one stacked evaluation per tensor."""
    base = {k: v[None] for k, v in params.items()}
    grads = {}
    for name, arr in params.items():
        n = arr.size
        pert = np.repeat(arr.reshape(1, -1), 2 * n, axis=0)
        idx = np.arange(n)
        pert[idx, idx] += eps
        pert[n + idx, idx] -= eps
        P = dict(base)
        P[name] = pert.reshape((2 * n,) + arr.shape)
        vals = stacked_objective(kind, batch, P, cfg, train_mode, rng_seed)
        grads[name] = ((vals[:n] - vals[n:]) / (2 * eps)).reshape(arr.shape)
    return grads
