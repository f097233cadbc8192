"""Latent Dirichlet allocation trained by collapsed Gibbs sampling.

The corpus is flattened into one token array (``words``) with document
offsets (``doc_ptr``); token ``i`` of document ``d`` lives at
``doc_ptr[d] + i``.  Sufficient statistics are kept as dense count tables:

    n_dk  documents x topics
    n_kw  topics x terms
    n_k   per-topic totals

Randomness comes from a single PCG64 stream seeded by ``LdaConfig.seed``.
Each sweep draws one uniform per token up front and the compiled kernel
consumes them in visiting order, so results are bit-reproducible.
"""

from __future__ import annotations

import io
import json
import math
import time
import zipfile
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np
from numba import njit

from .errors import ConfigError, DataError

_ZIP_EPOCH = (1980, 1, 1, 0, 0, 0)


@dataclass(frozen=True)
class LdaConfig:
    K: int = 10
    alpha: float | None = None  # None: 50 / K
    beta: float = 0.01
    iterations: int = 1000
    burn_in: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.K < 1:
            raise ConfigError("K must be >= 1")
        if self.alpha is not None and not self.alpha > 0:
            raise ConfigError("alpha must be > 0")
        if not self.beta > 0:
            raise ConfigError("beta must be > 0")
        if self.iterations < 1:
            raise ConfigError("iterations must be >= 1")
        if not 0 <= self.burn_in < self.iterations:
            raise ConfigError("burn_in must satisfy 0 <= burn_in < iterations")

    @property
    def resolved_alpha(self) -> float:
        return 50.0 / self.K if self.alpha is None else float(self.alpha)

    def resolved(self) -> dict:
        out = asdict(self)
        out["alpha"] = self.resolved_alpha
        return out


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed & ((1 << 64) - 1)))


def flatten(docs) -> tuple[np.ndarray, np.ndarray]:
    """Accepts Documents or plain sequences of term ids."""
    lengths, chunks = [], []
    for doc in docs:
        ids = doc.token_ids() if hasattr(doc, "token_ids") else list(doc)
        lengths.append(len(ids))
        chunks.append(np.asarray(ids, dtype=np.int64))
    doc_ptr = np.zeros(len(lengths) + 1, dtype=np.int64)
    np.cumsum(lengths, out=doc_ptr[1:])
    words = np.concatenate(chunks) if chunks else np.zeros(0, dtype=np.int64)
    return words, doc_ptr


@dataclass
class LdaState:
    words: np.ndarray
    doc_ptr: np.ndarray
    z: np.ndarray
    n_dk: np.ndarray
    n_kw: np.ndarray
    n_k: np.ndarray
    V: int

    @property
    def n_docs(self) -> int:
        return len(self.doc_ptr) - 1

    def doc_lengths(self) -> np.ndarray:
        return np.diff(self.doc_ptr)

    def assignments(self, d: int) -> np.ndarray:
        return self.z[self.doc_ptr[d] : self.doc_ptr[d + 1]]

    def check(self) -> None:
        """Rebuild every count table from ``z`` and compare."""
        K = len(self.n_k)
        doc_of = np.repeat(np.arange(self.n_docs), self.doc_lengths())
        n_dk = np.zeros_like(self.n_dk)
        n_kw = np.zeros_like(self.n_kw)
        np.add.at(n_dk, (doc_of, self.z), 1)
        np.add.at(n_kw, (self.z, self.words), 1)
        assert np.array_equal(n_dk, self.n_dk), "n_dk out of sync with z"
        assert np.array_equal(n_kw, self.n_kw), "n_kw out of sync with z"
        assert np.array_equal(n_kw.sum(axis=1), self.n_k), "n_k out of sync with n_kw"
        assert np.array_equal(self.n_dk.sum(axis=1), self.doc_lengths())
        assert self.n_k.sum() == len(self.words)
        assert self.z.min(initial=0) >= 0 and self.z.max(initial=0) < K


def init_assignments(docs, cfg: LdaConfig, n_terms: int | None = None, rng: np.random.Generator | None = None) -> LdaState:
    words, doc_ptr = flatten(docs)
    if len(words) == 0:
        raise DataError("cannot train on an empty corpus")
    V = int(words.max()) + 1 if n_terms is None else n_terms
    if words.max() >= V or words.min() < 0:
        raise DataError(f"term id out of range for vocabulary of size {V}")
    rng = rng if rng is not None else _rng(cfg.seed)
    z = rng.integers(0, cfg.K, size=len(words), dtype=np.int64)
    n_dk = np.zeros((len(doc_ptr) - 1, cfg.K), dtype=np.int64)
    n_kw = np.zeros((cfg.K, V), dtype=np.int64)
    doc_of = np.repeat(np.arange(len(doc_ptr) - 1), np.diff(doc_ptr))
    np.add.at(n_dk, (doc_of, z), 1)
    np.add.at(n_kw, (z, words), 1)
    return LdaState(words, doc_ptr, z, n_dk, n_kw, n_kw.sum(axis=1), V)


def conditional(state: LdaState, cfg: LdaConfig, d: int, i: int) -> np.ndarray:
    """p(z_di = k | rest), given counts that already exclude token (d, i)."""
    w = state.words[state.doc_ptr[d] + i]
    a, b = cfg.resolved_alpha, cfg.beta
    weights = (state.n_dk[d] + a) * (state.n_kw[:, w] + b) / (state.n_k + state.V * b)
    return weights / weights.sum()


@njit(cache=True)
def _sweep_kernel(words, doc_ptr, z, n_dk, n_kw, n_k, alpha, beta, u):
    K = n_k.shape[0]
    vbeta = n_kw.shape[1] * beta
    cum = np.empty(K)
    for d in range(doc_ptr.shape[0] - 1):
        for j in range(doc_ptr[d], doc_ptr[d + 1]):
            w = words[j]
            k = z[j]
            n_dk[d, k] -= 1
            n_kw[k, w] -= 1
            n_k[k] -= 1
            total = 0.0
            for t in range(K):
                total += (n_dk[d, t] + alpha) * (n_kw[t, w] + beta) / (n_k[t] + vbeta)
                cum[t] = total
            r = u[j] * total
            k = 0
            while k < K - 1 and cum[k] <= r:
                k += 1
            z[j] = k
            n_dk[d, k] += 1
            n_kw[k, w] += 1
            n_k[k] += 1


@njit(cache=True)
def _fold_in_kernel(words, doc_ptr, z, n_dk, phi, alpha, u):
    K = phi.shape[0]
    cum = np.empty(K)
    for d in range(doc_ptr.shape[0] - 1):
        for j in range(doc_ptr[d], doc_ptr[d + 1]):
            w = words[j]
            n_dk[d, z[j]] -= 1
            total = 0.0
            for t in range(K):
                total += (n_dk[d, t] + alpha) * phi[t, w]
                cum[t] = total
            r = u[j] * total
            k = 0
            while k < K - 1 and cum[k] <= r:
                k += 1
            z[j] = k
            n_dk[d, k] += 1


@njit(cache=True)
def _joint_loglik(n_dk, n_kw, n_k, doc_len, alpha, beta):
    K, V = n_kw.shape
    ll = 0.0
    lg_beta = math.lgamma(beta)
    lg_vbeta = math.lgamma(V * beta)
    for k in range(K):
        ll += lg_vbeta - math.lgamma(n_k[k] + V * beta)
        for w in range(V):
            if n_kw[k, w] > 0:
                ll += math.lgamma(n_kw[k, w] + beta) - lg_beta
    lg_alpha = math.lgamma(alpha)
    lg_kalpha = math.lgamma(K * alpha)
    for d in range(n_dk.shape[0]):
        ll += lg_kalpha - math.lgamma(doc_len[d] + K * alpha)
        for k in range(K):
            if n_dk[d, k] > 0:
                ll += math.lgamma(n_dk[d, k] + alpha) - lg_alpha
    return ll


def gibbs_sweep(state: LdaState, cfg: LdaConfig, rng: np.random.Generator) -> LdaState:
    """Resample every token once, ascending document then position (in place)."""
    u = rng.random(len(state.words))
    _sweep_kernel(
        state.words, state.doc_ptr, state.z, state.n_dk, state.n_kw, state.n_k,
        cfg.resolved_alpha, cfg.beta, u,
    )
    return state


def joint_log_likelihood(state: LdaState, cfg: LdaConfig) -> float:
    """ln p(words, z) with phi and theta integrated out."""
    return float(
        _joint_loglik(state.n_dk, state.n_kw, state.n_k, state.doc_lengths(), cfg.resolved_alpha, cfg.beta)
    )


@dataclass
class LdaModel:
    phi: np.ndarray
    theta: np.ndarray
    config: LdaConfig
    vocab_hash: str = ""
    terms: tuple[str, ...] = ()
    loglik: tuple[float, ...] = field(default=(), repr=False)

    @property
    def K(self) -> int:
        return self.phi.shape[0]

    @property
    def V(self) -> int:
        return self.phi.shape[1]


def _estimate(sum_dk, sum_kw, doc_len, n_samples, cfg: LdaConfig):
    a, b = cfg.resolved_alpha, cfg.beta
    K, V = sum_kw.shape
    nbar_kw = sum_kw / n_samples
    phi = (nbar_kw + b) / (nbar_kw.sum(axis=1, keepdims=True) + V * b)
    theta = (sum_dk / n_samples + a) / (doc_len[:, None] + K * a)
    return phi, theta


def model_from_state(state: LdaState, cfg: LdaConfig, vocab_hash: str = "", terms=()) -> LdaModel:
    """Point estimate from the current assignment only."""
    phi, theta = _estimate(
        state.n_dk.astype(float), state.n_kw.astype(float), state.doc_lengths(), 1, cfg
    )
    return LdaModel(phi, theta, cfg, vocab_hash, tuple(terms))


class GibbsSampler:
    """One chain: owns the RNG stream and the evolving state."""

    def __init__(self, docs, cfg: LdaConfig, n_terms: int | None = None):
        self.cfg = cfg
        self.rng = _rng(cfg.seed)
        self.state = init_assignments(docs, cfg, n_terms, self.rng)
        self.sweeps_done = 0

    def sweep(self) -> LdaState:
        gibbs_sweep(self.state, self.cfg, self.rng)
        self.sweeps_done += 1
        return self.state

    def log_likelihood(self) -> float:
        return joint_log_likelihood(self.state, self.cfg)


def train(
    docs,
    cfg: LdaConfig,
    n_terms: int | None = None,
    terms: Sequence[str] = (),
    vocab_hash: str = "",
    track_loglik: bool = True,
    check_every: int = 100,
) -> LdaModel:
    """Run ``cfg.iterations`` sweeps and average counts after burn-in.

    phi and theta are posterior means computed from the running mean of the
    count tables over sweeps ``burn_in+1 .. iterations``.  Count invariants
    are verified every ``check_every`` sweeps (0 disables).
    """
    if terms and n_terms is None:
        n_terms = len(terms)
    sampler = GibbsSampler(docs, cfg, n_terms)
    state = sampler.state
    if check_every:
        state.check()
    sum_dk = np.zeros(state.n_dk.shape)
    sum_kw = np.zeros(state.n_kw.shape)
    trace = []
    for it in range(1, cfg.iterations + 1):
        sampler.sweep()
        if check_every and it % check_every == 0:
            state.check()
        if track_loglik:
            trace.append(sampler.log_likelihood())
        if it > cfg.burn_in:
            sum_dk += state.n_dk
            sum_kw += state.n_kw
    phi, theta = _estimate(sum_dk, sum_kw, state.doc_lengths(), cfg.iterations - cfg.burn_in, cfg)
    return LdaModel(phi, theta, cfg, vocab_hash, tuple(terms), tuple(trace))


def _train_job(args):
    docs, cfg, n_terms, terms, vocab_hash = args
    return train(docs, cfg, n_terms, terms, vocab_hash)


def train_chains(docs, cfg: LdaConfig, n_chains: int, workers: int = 1, **kwargs) -> list[LdaModel]:
    """Independent chains with seeds ``seed, seed+1, ...``; never merged."""
    cfgs = [replace(cfg, seed=cfg.seed + c) for c in range(n_chains)]
    if workers <= 1 or n_chains == 1:
        return [train(docs, c, **kwargs) for c in cfgs]
    jobs = [(docs, c, kwargs.get("n_terms"), kwargs.get("terms", ()), kwargs.get("vocab_hash", "")) for c in cfgs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_train_job, jobs))


def fold_in(model: LdaModel, docs, sweeps: int = 20, seed: int | None = None) -> np.ndarray:
    """theta for unseen documents by Gibbs sampling with phi held fixed."""
    words, doc_ptr = flatten(docs)
    D, K = len(doc_ptr) - 1, model.K
    if len(words) and words.max() >= model.V:
        raise DataError("document uses a term id outside the model vocabulary")
    rng = _rng(model.config.seed if seed is None else seed)
    alpha = model.config.resolved_alpha
    z = rng.integers(0, K, size=len(words), dtype=np.int64)
    n_dk = np.zeros((D, K), dtype=np.int64)
    np.add.at(n_dk, (np.repeat(np.arange(D), np.diff(doc_ptr)), z), 1)
    phi = np.ascontiguousarray(model.phi)
    for _ in range(sweeps):
        _fold_in_kernel(words, doc_ptr, z, n_dk, phi, alpha, rng.random(len(words)))
    return (n_dk + alpha) / (np.diff(doc_ptr)[:, None] + K * alpha)


def _doc_term_pairs(docs):
    rows, cols, vals = [], [], []
    for d, doc in enumerate(docs):
        pairs = doc.counts if hasattr(doc, "counts") else sorted(Counter(doc).items())
        for w, c in pairs:
            rows.append(d)
            cols.append(w)
            vals.append(c)
    return np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64), np.asarray(vals, dtype=float)


def perplexity(model: LdaModel, docs, theta: np.ndarray | None = None, fold_in_sweeps: int = 20) -> float:
    """exp(-sum log p(w|d) / N_tokens).

    Without ``theta`` the documents are treated as held out and folded in.
    """
    docs = list(docs)
    if theta is None:
        theta = fold_in(model, docs, fold_in_sweeps)
    d_idx, w_idx, counts = _doc_term_pairs(docs)
    if counts.sum() == 0:
        raise DataError("perplexity of an empty corpus is undefined")
    p = np.einsum("ik,ki->i", theta[d_idx], model.phi[:, w_idx])
    return float(math.exp(-np.dot(counts, np.log(p)) / counts.sum()))


def dominant_topic(model: LdaModel, d: int) -> int:
    return int(np.argmax(model.theta[d]))


def dominant_topics(model: LdaModel) -> np.ndarray:
    return np.argmax(model.theta, axis=1)


def top_words(model: LdaModel, k: int, n: int = 10) -> list[tuple]:
    """Highest-phi terms of topic ``k``; ties go to the lower term id."""
    if not 0 <= k < model.K:
        raise IndexError(f"topic {k} out of range 0..{model.K - 1}")
    row = model.phi[k]
    order = np.lexsort((np.arange(len(row)), -row))[:n]
    label = (lambda i: model.terms[i]) if model.terms else int
    return [(label(i), float(row[i])) for i in order]


def split_heldout(n_docs: int, fraction: float, seed: int) -> tuple[list[int], list[int]]:
    if not 0 < fraction < 1:
        raise ConfigError("held-out fraction must lie in (0, 1)")
    if n_docs < 2:
        raise DataError("need at least two documents for a held-out split")
    perm = _rng(seed).permutation(n_docs)
    n_held = min(n_docs - 1, max(1, round(fraction * n_docs)))
    return sorted(perm[n_held:].tolist()), sorted(perm[:n_held].tolist())


def sweep_k(docs, ks: Sequence[int], cfg: LdaConfig, heldout_fraction: float = 0.1, n_terms: int | None = None) -> list[dict]:
    """Held-out perplexity for each K; picking one is left to the operator."""
    if not ks:
        raise ConfigError("ks must be nonempty")
    docs = list(docs)
    train_idx, held_idx = split_heldout(len(docs), heldout_fraction, cfg.seed)
    train_docs = [docs[i] for i in train_idx]
    held_docs = [docs[i] for i in held_idx]
    if n_terms is None:
        n_terms = int(flatten(docs)[0].max()) + 1
    rows = []
    for k in ks:
        start = time.perf_counter()
        model = train(train_docs, replace(cfg, K=k), n_terms=n_terms, track_loglik=False)
        ppl = perplexity(model, held_docs)
        rows.append({"K": k, "heldout_perplexity": ppl, "runtime_s": time.perf_counter() - start})
    return rows


def write_sweep_tsv(rows: list[dict], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("K\theldout_perplexity\truntime_s\n")
        for r in rows:
            fh.write(f"{r['K']}\t{r['heldout_perplexity']:.6f}\t{r['runtime_s']:.3f}\n")


def save_model(model: LdaModel, path) -> None:
    """Zip bundle of phi.npy, theta.npy and meta.json with fixed timestamps."""
    meta = {
        "config": asdict(model.config),
        "vocab_hash": model.vocab_hash,
        "terms": list(model.terms),
        "loglik": list(model.loglik),
    }
    with zipfile.ZipFile(path, "w") as zf:
        for name, arr in (("phi", model.phi), ("theta", model.theta)):
            buf = io.BytesIO()
            np.lib.format.write_array(buf, np.ascontiguousarray(arr), allow_pickle=False)
            info = zipfile.ZipInfo(f"{name}.npy", date_time=_ZIP_EPOCH)
            info.compress_type = zipfile.ZIP_DEFLATED
            zf.writestr(info, buf.getvalue())
        info = zipfile.ZipInfo("meta.json", date_time=_ZIP_EPOCH)
        info.compress_type = zipfile.ZIP_DEFLATED
        zf.writestr(info, json.dumps(meta, sort_keys=True))


def load_model(path) -> LdaModel:
    try:
        with zipfile.ZipFile(path) as zf:
            meta = json.loads(zf.read("meta.json"))
            phi = np.lib.format.read_array(io.BytesIO(zf.read("phi.npy")))
            theta = np.lib.format.read_array(io.BytesIO(zf.read("theta.npy")))
    except (zipfile.BadZipFile, KeyError) as exc:
        raise DataError(f"{path} is not a model file ({exc})") from exc
    return LdaModel(
        phi, theta, LdaConfig(**meta["config"]), meta["vocab_hash"], tuple(meta["terms"]), tuple(meta["loglik"])
    )


def dump_model(model: LdaModel, fh, include_theta: bool = False) -> None:
    """Human-readable TSV: config header, then one row per (topic, term)."""
    for key, value in model.config.resolved().items():
        fh.write(f"# {key}={value}\n")
    fh.write(f"# vocab_hash={model.vocab_hash}\n")
    fh.write("topic_id\tterm_id\tterm\tphi\n")
    for k in range(model.K):
        for w in range(model.V):
            term = model.terms[w] if model.terms else ""
            fh.write(f"{k}\t{w}\t{term}\t{float(model.phi[k, w])!r}\n")
    if include_theta:
        fh.write("doc_index\ttopic_id\ttheta\n")
        for d in range(model.theta.shape[0]):
            for k in range(model.K):
                fh.write(f"{d}\t{k}\t{float(model.theta[d, k])!r}\n")


def write_loglik_tsv(model: LdaModel, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("sweep\tjoint_log_likelihood\n")
        for i, ll in enumerate(model.loglik, 1):
            fh.write(f"{i}\t{ll!r}\n")
