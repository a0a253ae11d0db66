"""Pipeline CLI: each stage runs standalone on the previous stage's artifacts,
and `run` chains them all from one config file.

Stages and their artifacts:

    graph-build  triples -> vocab.json, graph.edges
    diffuse      graph.edges -> psi.bin (+ optional signatures.json)
    embed        psi.bin + vocab.json -> network.vec
    kge-train    triples + vocab.json -> entities.vec, relations.vec
    retrofit     entities.vec + network.vec -> retrofitted entities .vec + log
    relearn      retrofitted entities + triples -> relations .vec
    eval         entities/relations .vec + test triples -> eval .json
    report       two eval .json -> comparison report with significance
    run          config.json -> all of the above plus report.json

Every artifact gets a JSON sidecar (<artifact>.json) carrying the stage
config hash and the vocabulary hash; eval and report refuse to mix artifacts
whose vocabulary hashes disagree. Exit codes: 0 ok, 2 config error, 3 data
error, 4 numeric failure. Any config value can be overridden with environment
variables named MOHONE_<SECTION>_<FIELD>.
"""

from __future__ import annotations

import argparse
import contextlib
import dataclasses
import json
import logging
import os
import resource
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import diffusion, kge, netembed
from .retrofit import RetrofitProblem, build_neighbor_sets, retrofit as run_retrofit
from .evaluation import DEFAULT_RESAMPLES, evaluate, paired_significance
from .graph import (
    TripleFileError, TripleStore, Vocab,
    load_edge_list, load_triples, normalized_laplacian, project_graph,
    read_token_triples, save_edge_list,
)
from .vectors import (
    RELATION_PREFIX, config_hash, load_vectors, read_sidecar,
    save_vectors, vocab_hash, write_sidecar,
)

log = logging.getLogger("mohone")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


class ConfigError(Exception):
    pass


class DataError(Exception):
    pass


# ---------------------------------------------------------------------------
# pipeline configuration


@dataclass
class DiffusionSection:
    scale: float = 5.0
    method: str = "exact"
    degree: int = 30
    clip_epsilon: float = 1e-12


@dataclass
class NetembedSection:
    mode: str = "shnb"
    dim: int = 100
    epochs: int = 10
    pairs_per_node: int = 20
    negatives: int = 5
    learning_rate: float = 0.025
    lr_floor: float = 1e-4
    seed: int = 0
    bins: int = 50
    cap: int = 10


@dataclass
class KgeSection:
    model: str = "transe"
    dim: int = 100
    batch_size: int = 100
    epochs: int = 500
    margin: float = 1.0
    learning_rate: float = 0.01
    optimizer: str = "sgd"
    negatives: int = 1
    lr_floor: float | None = None
    seed: int = 0


@dataclass
class RetrofitSection:
    k: int = 10
    alpha: float = 1.0
    iters: int = 10
    tol: float = 1e-3


@dataclass
class EvalSection:
    hits: list = field(default_factory=lambda: [1, 3, 10])


@dataclass
class SignificanceSection:
    resamples: int = DEFAULT_RESAMPLES
    alpha: float = 0.05


@dataclass
class PipelineConfig:
    train: str
    valid: str
    test: str
    diffusion: DiffusionSection = field(default_factory=DiffusionSection)
    netembed: NetembedSection = field(default_factory=NetembedSection)
    kge: KgeSection = field(default_factory=KgeSection)
    retrofit: RetrofitSection = field(default_factory=RetrofitSection)
    eval: EvalSection = field(default_factory=EvalSection)
    significance: SignificanceSection = field(default_factory=SignificanceSection)

    def resolved(self) -> dict:
        return dataclasses.asdict(self)


_SECTIONS = {
    "diffusion": DiffusionSection,
    "netembed": NetembedSection,
    "kge": KgeSection,
    "retrofit": RetrofitSection,
    "eval": EvalSection,
    "significance": SignificanceSection,
}


def _build_section(cls, payload: dict, name: str):
    fields = {f.name for f in dataclasses.fields(cls)}
    unknown = set(payload) - fields
    if unknown:
        raise ConfigError(f"unknown keys in '{name}' section: {sorted(unknown)}")
    return cls(**payload)


def _parse_env_value(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def apply_env_overrides(payload: dict, environ=None) -> dict:
    """Fold MOHONE_<SECTION>_<FIELD> (or MOHONE_TRAIN etc.) into a raw config dict."""
    environ = os.environ if environ is None else environ
    for key, raw in environ.items():
        if not key.startswith("MOHONE_"):
            continue
        rest = key[len("MOHONE_"):].lower()
        if rest in ("train", "valid", "test"):
            payload[rest] = raw
            continue
        for section in _SECTIONS:
            if rest.startswith(section + "_"):
                payload.setdefault(section, {})[rest[len(section) + 1:]] = _parse_env_value(raw)
                break
    return payload


def load_pipeline_config(path, environ=None) -> PipelineConfig:
    try:
        with open(path, encoding="utf-8") as f:
            payload = json.load(f)
    except FileNotFoundError as e:
        raise ConfigError(f"config file not found: {path}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file {path} is not valid JSON: {e}") from e
    if not isinstance(payload, dict):
        raise ConfigError("config root must be a JSON object")
    payload = apply_env_overrides(payload, environ)
    known = {"train", "valid", "test"} | set(_SECTIONS)
    unknown = set(payload) - known
    if unknown:
        raise ConfigError(f"unknown top-level config keys: {sorted(unknown)}")
    for name in ("train", "valid", "test"):
        if name not in payload:
            raise ConfigError(f"config is missing required key '{name}'")
    sections = {}
    for name, cls in _SECTIONS.items():
        sections[name] = _build_section(cls, payload.get(name, {}), name)
    cfg = PipelineConfig(train=payload["train"], valid=payload["valid"],
                         test=payload["test"], **sections)
    _validate_config(cfg)
    return cfg


def _validate_config(cfg: PipelineConfig) -> None:
    try:
        diffusion.HeatKernelConfig(scale=cfg.diffusion.scale, method=cfg.diffusion.method,
                                   chebyshev_degree=cfg.diffusion.degree,
                                   clip_epsilon=cfg.diffusion.clip_epsilon)
        netembed.TrainConfig(dim=cfg.netembed.dim, epochs=cfg.netembed.epochs,
                             pairs_per_node_per_epoch=cfg.netembed.pairs_per_node,
                             negatives=cfg.netembed.negatives,
                             learning_rate=cfg.netembed.learning_rate,
                             lr_floor=cfg.netembed.lr_floor, rng_seed=cfg.netembed.seed)
        kge.KgeTrainConfig(dim=cfg.kge.dim, batch_size=cfg.kge.batch_size,
                           epochs=cfg.kge.epochs, margin=cfg.kge.margin,
                           learning_rate=cfg.kge.learning_rate, optimizer=cfg.kge.optimizer,
                           negatives_per_positive=cfg.kge.negatives, rng_seed=cfg.kge.seed)
    except ValueError as e:
        raise ConfigError(str(e)) from e
    if cfg.kge.model not in kge.MODELS:
        raise ConfigError(f"unknown kge model {cfg.kge.model!r}")
    if cfg.netembed.mode not in ("shnb", "structural"):
        raise ConfigError(f"netembed mode must be 'shnb' or 'structural', got {cfg.netembed.mode!r}")
    if cfg.retrofit.k < 1 or cfg.retrofit.iters < 1 or cfg.retrofit.alpha <= 0:
        raise ConfigError("retrofit requires k >= 1, iters >= 1, alpha > 0")
    if not cfg.eval.hits or any(k < 1 for k in cfg.eval.hits):
        raise ConfigError("eval.hits must be a nonempty list of positive ints")


# ---------------------------------------------------------------------------
# small helpers


def _require_file(path, producer: str | None = None) -> Path:
    p = Path(path)
    if not p.is_file():
        hint = f"; run `mohone {producer}` first" if producer else ""
        raise DataError(f"missing artifact {p}{hint}")
    return p


@contextlib.contextmanager
def _stage(name: str):
    t0 = time.perf_counter()
    try:
        yield
    except Exception as e:
        log.error("[%s] failed: %s", name, e)
        raise
    dt = time.perf_counter() - t0
    peak_mb = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss / 1024.0
    log.info("[%s] done in %.2fs peak_rss=%.1fMB", name, dt, peak_mb)


class _PartialWrites:
    """Write artifacts to <path>.partial and promote them only on success."""

    def __init__(self):
        self._pending: list[tuple[Path, Path]] = []

    def path(self, final) -> Path:
        final = Path(final)
        partial = Path(str(final) + ".partial")
        self._pending.append((partial, final))
        return partial

    def commit(self) -> None:
        for partial, final in self._pending:
            os.replace(partial, final)
        self._pending.clear()


@contextlib.contextmanager
def _dir_lock(out_dir: Path):
    out_dir.mkdir(parents=True, exist_ok=True)
    lock = out_dir / ".mohone.lock"
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise ConfigError(f"output directory {out_dir} is locked by another run "
                          f"(remove {lock} if that run is dead)")
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield
    finally:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(lock)


def _load_vocab(path) -> tuple[Vocab, Vocab]:
    p = _require_file(path, producer="graph-build")
    with open(p, encoding="utf-8") as f:
        payload = json.load(f)
    return Vocab(payload["entities"]), Vocab(payload["relations"])


def _store_with_vocab(triple_path, vocab_path) -> TripleStore:
    rows = read_token_triples(_require_file(triple_path))
    ev, rv = _load_vocab(vocab_path)
    triples = []
    for i, (h, r, t) in enumerate(rows):
        hid, rid, tid = ev.get(h), rv.get(r), ev.get(t)
        if min(hid, rid, tid) < 0:
            raise DataError(f"{triple_path}: triple {i} uses tokens absent from {vocab_path}")
        triples.append((hid, rid, tid))
    return TripleStore(triples=triples, entity_vocab=ev, relation_vocab=rv)


def _write_json(path, payload) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")


def _maybe_sidecar(artifact_path) -> dict:
    try:
        return read_sidecar(artifact_path)
    except FileNotFoundError:
        return {}


# ---------------------------------------------------------------------------
# stages


def stage_graph_build(train_path, out_dir) -> dict:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    store = load_triples(_require_file(train_path))
    graph = project_graph(store)
    vh = vocab_hash(store.entity_vocab.tokens, store.relation_vocab.tokens)
    ch = config_hash({"stage": "graph-build", "train": str(train_path)})
    writes = _PartialWrites()
    vocab_file = out_dir / "vocab.json"
    edges_file = out_dir / "graph.edges"
    _write_json(writes.path(vocab_file), {
        "entities": store.entity_vocab.tokens,
        "relations": store.relation_vocab.tokens,
        "vocab_hash": vh,
        "config_hash": ch,
    })
    save_edge_list(writes.path(edges_file), graph)
    writes.commit()
    write_sidecar(edges_file, {"config_hash": ch, "vocab_hash": vh,
                               "n": graph.n, "m": len(graph.edge_list())})
    return {"vocab": str(vocab_file), "graph": str(edges_file),
            "vocab_hash": vh, "n": graph.n}


def stage_diffuse(graph_path, out_path, scale, method, degree, clip_epsilon=1e-12,
                  signatures_out=None, bins=diffusion.DEFAULT_SIGNATURE_BINS) -> dict:
    graph = load_edge_list(_require_file(graph_path, producer="graph-build"))
    lap = normalized_laplacian(graph)
    cfg = diffusion.HeatKernelConfig(scale=scale, method=method,
                                     chebyshev_degree=degree, clip_epsilon=clip_epsilon)
    psi = diffusion.heat_matrix(lap, cfg)
    ch = config_hash({"stage": "diffuse", "scale": scale, "method": method,
                      "degree": degree, "clip_epsilon": clip_epsilon})
    writes = _PartialWrites()
    diffusion.save_psi(writes.path(out_path), psi)
    if signatures_out is not None:
        sigs = diffusion.all_heat_signatures(psi, bins=bins)
        diffusion.save_signatures(writes.path(signatures_out), sigs)
    writes.commit()
    write_sidecar(out_path, {"config_hash": ch, "n": psi.n, "scale": scale,
                             "method": method, "raw_symmetric": psi.raw_symmetric})
    if signatures_out is not None:
        write_sidecar(signatures_out, {"config_hash": ch, "bins": bins})
    return {"psi": str(out_path), "n": psi.n}


def stage_embed(psi_path, vocab_path, out_path, mode, dim, epochs, pairs_per_node,
                negatives, learning_rate, lr_floor, seed, cap, bins) -> dict:
    psi = diffusion.load_psi(_require_file(psi_path, producer="diffuse"))
    ev, rv = _load_vocab(vocab_path)
    if len(ev) != psi.n:
        raise DataError(f"vocabulary has {len(ev)} entities but heat matrix has {psi.n} nodes")
    if mode == "shnb":
        sampler = netembed.build_shnb_sampler(psi)
    elif mode == "structural":
        sigs = diffusion.all_heat_signatures(psi, bins=bins)
        sampler = netembed.build_structural_sampler(sigs, cap=cap)
    else:
        raise ConfigError(f"embed mode must be 'shnb' or 'structural', got {mode!r}")
    cfg = netembed.TrainConfig(dim=dim, epochs=epochs, pairs_per_node_per_epoch=pairs_per_node,
                               negatives=negatives, learning_rate=learning_rate,
                               lr_floor=lr_floor, rng_seed=seed)
    emb = netembed.train_embeddings(sampler, cfg)
    vh = vocab_hash(ev.tokens, rv.tokens)
    ch = config_hash({"stage": "embed", "mode": mode, "dim": dim, "epochs": epochs,
                      "pairs_per_node": pairs_per_node, "negatives": negatives,
                      "learning_rate": learning_rate, "lr_floor": lr_floor,
                      "seed": seed, "cap": cap, "bins": bins})
    writes = _PartialWrites()
    save_vectors(writes.path(out_path), ev.tokens, emb.matrix)
    writes.commit()
    write_sidecar(out_path, {"kind": "network", "mode": mode, "dim": dim,
                             "config_hash": ch, "vocab_hash": vh})
    return {"network": str(out_path)}


def _kge_config(section: KgeSection) -> kge.KgeTrainConfig:
    return kge.KgeTrainConfig(dim=section.dim, batch_size=section.batch_size,
                              epochs=section.epochs, margin=section.margin,
                              learning_rate=section.learning_rate,
                              optimizer=section.optimizer,
                              negatives_per_positive=section.negatives,
                              lr_floor=section.lr_floor,
                              rng_seed=section.seed)


def _save_kge(out_entities, out_relations, store: TripleStore, emb: kge.KGEmbedding,
              section_dict: dict, stage_name: str) -> None:
    vh = vocab_hash(store.entity_vocab.tokens, store.relation_vocab.tokens)
    ch = config_hash({"stage": stage_name, **section_dict})
    writes = _PartialWrites()
    save_vectors(writes.path(out_entities), store.entity_vocab.tokens, emb.Q)
    rel_tokens = [RELATION_PREFIX + tok for tok in store.relation_vocab.tokens]
    save_vectors(writes.path(out_relations), rel_tokens, emb.W)
    writes.commit()
    meta = {"model": emb.model, "dim": section_dict["dim"], "config": section_dict,
            "config_hash": ch, "vocab_hash": vh}
    write_sidecar(out_entities, meta)
    write_sidecar(out_relations, meta)


def stage_kge_train(train_path, vocab_path, out_entities, out_relations,
                    section: KgeSection) -> dict:
    store = _store_with_vocab(train_path, vocab_path)
    emb = kge.train_kge(store, _kge_config(section), model=section.model)
    _save_kge(out_entities, out_relations, store, emb,
              dataclasses.asdict(section), "kge-train")
    return {"entities": str(out_entities), "relations": str(out_relations),
            "final_loss": emb.loss_history[-1] if emb.loss_history else None}


def stage_retrofit(base_path, network_path, out_path, log_path,
                   k, alpha, iters, tol, method="gauss-seidel") -> dict:
    base_tokens, q_hat = load_vectors(_require_file(base_path, producer="kge-train"))
    net_tokens, f_matrix = load_vectors(_require_file(network_path, producer="embed"))
    if base_tokens != net_tokens:
        raise DataError("entity tokens of base and network embeddings disagree; "
                        "were they built from the same vocabulary?")
    # sidecars are optional here so externally produced .vec files (same text
    # format, e.g. Node2Vec output) can be dropped in; token equality above is
    # the hard alignment check
    base_meta = _maybe_sidecar(base_path)
    net_meta = _maybe_sidecar(network_path)
    if base_meta and net_meta and base_meta.get("vocab_hash") != net_meta.get("vocab_hash"):
        raise DataError("vocabulary hash mismatch between base and network embeddings")
    sets = build_neighbor_sets(f_matrix, k)
    problem = RetrofitProblem(Q_hat=q_hat, neighbor_sets=sets,
                              alpha=np.full(q_hat.shape[0], alpha),
                              max_iters=iters, tol=tol)
    result = run_retrofit(problem, method=method)
    ch = config_hash({"stage": "retrofit", "k": k, "alpha": alpha,
                      "iters": iters, "tol": tol, "method": method})
    writes = _PartialWrites()
    save_vectors(writes.path(out_path), base_tokens, result.Q)
    _write_json(writes.path(log_path), result.history)
    writes.commit()
    write_sidecar(out_path, {**base_meta, "config_hash": ch, "retrofitted": True})
    return {"entities": str(out_path), "iterations": result.iterations,
            "history": result.history}


def stage_relearn(entities_path, train_path, vocab_path, out_relations,
                  section: KgeSection) -> dict:
    tokens, frozen_q = load_vectors(_require_file(entities_path, producer="retrofit"))
    store = _store_with_vocab(train_path, vocab_path)
    if tokens != store.entity_vocab.tokens:
        raise DataError("entity tokens of the embedding file do not match the vocabulary")
    emb = kge.relearn_relations(store, frozen_q, section.model, _kge_config(section))
    vh = vocab_hash(store.entity_vocab.tokens, store.relation_vocab.tokens)
    section_dict = dataclasses.asdict(section)
    ch = config_hash({"stage": "relearn", **section_dict})
    writes = _PartialWrites()
    rel_tokens = [RELATION_PREFIX + tok for tok in store.relation_vocab.tokens]
    save_vectors(writes.path(out_relations), rel_tokens, emb.W)
    writes.commit()
    write_sidecar(out_relations, {"model": emb.model, "dim": section.dim,
                                  "config": section_dict, "config_hash": ch,
                                  "vocab_hash": vh})
    return {"relations": str(out_relations)}


def _load_kge_artifacts(entities_path, relations_path) -> tuple[kge.KGEmbedding, Vocab, Vocab, dict]:
    e_tokens, Q = load_vectors(_require_file(entities_path, producer="kge-train"))
    r_tokens, W = load_vectors(_require_file(relations_path, producer="kge-train"))
    e_meta = read_sidecar(entities_path)
    r_meta = read_sidecar(relations_path)
    if e_meta.get("vocab_hash") != r_meta.get("vocab_hash"):
        raise DataError("vocabulary hash mismatch between entity and relation artifacts")
    model = r_meta.get("model")
    if model not in kge.MODELS:
        raise DataError(f"relation sidecar does not name a known model (got {model!r})")
    bare = [tok[len(RELATION_PREFIX):] if tok.startswith(RELATION_PREFIX) else tok
            for tok in r_tokens]
    emb = kge.KGEmbedding(model=model, Q=Q, W=W)
    return emb, Vocab(e_tokens), Vocab(bare), r_meta


def stage_eval(entities_path, relations_path, test_path, filter_paths,
               out_json, hits=(1, 3, 10)) -> dict:
    emb, ev, rv, meta = _load_kge_artifacts(entities_path, relations_path)
    test_rows = read_token_triples(_require_file(test_path))
    test_ids = [(ev.get(h), rv.get(r), ev.get(t)) for h, r, t in test_rows]
    filter_ids = []
    for fp in filter_paths:
        for h, r, t in read_token_triples(_require_file(fp)):
            hid, rid, tid = ev.get(h), rv.get(r), ev.get(t)
            if min(hid, rid, tid) >= 0:
                filter_ids.append((hid, rid, tid))
    result = evaluate(kge.make_scorer(emb), test_ids, filter_ids, len(ev), hits_ks=hits)
    payload = {
        "model": emb.model,
        "dataset": str(test_path),
        "mrr": result.mrr,
        "hits": {str(k): v for k, v in result.hits_at_k.items()},
        "skipped": result.skipped,
        "n_queries": result.n_queries,
        "config_hash": meta.get("config_hash"),
        "vocab_hash": meta.get("vocab_hash"),
        "per_query_reciprocal_ranks": result.per_query_reciprocal_ranks.tolist(),
        "per_query_ranks": result.per_query_ranks.tolist(),
    }
    writes = _PartialWrites()
    _write_json(writes.path(out_json), payload)
    writes.commit()
    return payload


def write_ranks_csv(path, payload: dict) -> None:
    import csv
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["query", "rank", "reciprocal_rank"])
        for i, (rank, rr) in enumerate(zip(payload["per_query_ranks"],
                                           payload["per_query_reciprocal_ranks"])):
            writer.writerow([i, rank, rr])


def stage_report(baseline_json, infused_json, out_json,
                 resamples=DEFAULT_RESAMPLES, alpha=0.05) -> dict:
    with open(_require_file(baseline_json, producer="eval"), encoding="utf-8") as f:
        baseline = json.load(f)
    with open(_require_file(infused_json, producer="eval"), encoding="utf-8") as f:
        infused = json.load(f)
    if baseline.get("vocab_hash") != infused.get("vocab_hash"):
        raise DataError("cannot compare eval artifacts with mismatched vocabulary hashes")
    rr_a = np.asarray(infused["per_query_reciprocal_ranks"])
    rr_b = np.asarray(baseline["per_query_reciprocal_ranks"])
    if rr_a.size != rr_b.size:
        raise DataError("eval artifacts rank different query counts; same test set?")
    p, significant = paired_significance(rr_a, rr_b, resamples=resamples, alpha=alpha)
    payload = {
        "baseline": baseline,
        "infused": infused,
        "improvement": {
            "mrr_delta": infused["mrr"] - baseline["mrr"],
            "hits_delta": {k: infused["hits"][k] - baseline["hits"].get(k, 0.0)
                           for k in infused["hits"]},
        },
        "significance": {"p_value": p, "significant": significant,
                         "resamples": resamples, "alpha": alpha,
                         "test": "paired sign-flip randomization on reciprocal ranks"},
    }
    writes = _PartialWrites()
    _write_json(writes.path(out_json), payload)
    writes.commit()
    return payload


def run_pipeline(cfg: PipelineConfig, out_dir) -> dict:
    """Run every stage on disk artifacts under out_dir and write report.json.

    Stages exchange data exclusively through their persisted artifacts, so the
    report is bit-identical to what the standalone subcommands produce.
    """
    out = Path(out_dir)
    with _dir_lock(out):
        _write_json(out / "resolved_config.json", cfg.resolved())
        with _stage("graph-build"):
            stage_graph_build(cfg.train, out)
        with _stage("diffuse"):
            stage_diffuse(out / "graph.edges", out / "psi.bin",
                          scale=cfg.diffusion.scale, method=cfg.diffusion.method,
                          degree=cfg.diffusion.degree, clip_epsilon=cfg.diffusion.clip_epsilon)
        with _stage("embed"):
            stage_embed(out / "psi.bin", out / "vocab.json", out / "network.vec",
                        mode=cfg.netembed.mode, dim=cfg.netembed.dim,
                        epochs=cfg.netembed.epochs, pairs_per_node=cfg.netembed.pairs_per_node,
                        negatives=cfg.netembed.negatives, learning_rate=cfg.netembed.learning_rate,
                        lr_floor=cfg.netembed.lr_floor, seed=cfg.netembed.seed,
                        cap=cfg.netembed.cap, bins=cfg.netembed.bins)
        with _stage("kge-train"):
            stage_kge_train(cfg.train, out / "vocab.json",
                            out / "entities_base.vec", out / "relations_base.vec", cfg.kge)
        with _stage("retrofit"):
            stage_retrofit(out / "entities_base.vec", out / "network.vec",
                           out / "entities_infused.vec", out / "retrofit_log.json",
                           k=cfg.retrofit.k, alpha=cfg.retrofit.alpha,
                           iters=cfg.retrofit.iters, tol=cfg.retrofit.tol)
        with _stage("relearn"):
            stage_relearn(out / "entities_infused.vec", cfg.train, out / "vocab.json",
                          out / "relations_infused.vec", cfg.kge)
        filters = [cfg.train, cfg.valid, cfg.test]
        with _stage("eval-baseline"):
            stage_eval(out / "entities_base.vec", out / "relations_base.vec",
                       cfg.test, filters, out / "eval_baseline.json", hits=tuple(cfg.eval.hits))
        with _stage("eval-infused"):
            stage_eval(out / "entities_infused.vec", out / "relations_infused.vec",
                       cfg.test, filters, out / "eval_infused.json", hits=tuple(cfg.eval.hits))
        with _stage("report"):
            report = stage_report(out / "eval_baseline.json", out / "eval_infused.json",
                                  out / "report.json",
                                  resamples=cfg.significance.resamples,
                                  alpha=cfg.significance.alpha)
        report["config_hash"] = config_hash(cfg.resolved())
        _write_json(out / "report.json", report)
    return report


# ---------------------------------------------------------------------------
# argument parsing


def _add_graph_build(sub):
    p = sub.add_parser("graph-build", help="build vocab and undirected entity graph from triples")
    p.add_argument("--train", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=lambda a: stage_graph_build(a.train, a.out_dir))


def _add_diffuse(sub):
    p = sub.add_parser("diffuse", help="compute the heat matrix at a scale")
    p.add_argument("--graph", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--scale", type=float, default=5.0)
    p.add_argument("--method", choices=("exact", "chebyshev"), default="exact")
    p.add_argument("--degree", type=int, default=30)
    p.add_argument("--clip-epsilon", type=float, default=1e-12)
    p.add_argument("--signatures-out", default=None)
    p.add_argument("--bins", type=int, default=diffusion.DEFAULT_SIGNATURE_BINS)
    p.set_defaults(func=lambda a: stage_diffuse(
        a.graph, a.out, scale=a.scale, method=a.method, degree=a.degree,
        clip_epsilon=a.clip_epsilon, signatures_out=a.signatures_out, bins=a.bins))


def _add_embed(sub):
    p = sub.add_parser("embed", help="train network embeddings from a heat matrix")
    p.add_argument("--psi", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mode", choices=("shnb", "structural"), default="shnb")
    p.add_argument("--dim", type=int, default=100)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--pairs-per-node", type=int, default=20)
    p.add_argument("--negatives", type=int, default=5)
    p.add_argument("--learning-rate", type=float, default=0.025)
    p.add_argument("--lr-floor", type=float, default=1e-4)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--cap", type=int, default=10)
    p.add_argument("--bins", type=int, default=diffusion.DEFAULT_SIGNATURE_BINS)
    p.set_defaults(func=lambda a: stage_embed(
        a.psi, a.vocab, a.out, mode=a.mode, dim=a.dim, epochs=a.epochs,
        pairs_per_node=a.pairs_per_node, negatives=a.negatives,
        learning_rate=a.learning_rate, lr_floor=a.lr_floor, seed=a.seed,
        cap=a.cap, bins=a.bins))


def _kge_section_from_args(a) -> KgeSection:
    return KgeSection(model=a.model, dim=a.dim, batch_size=a.batch_size,
                      epochs=a.epochs, margin=a.margin, learning_rate=a.learning_rate,
                      optimizer=a.optimizer, negatives=a.negatives,
                      lr_floor=a.lr_floor, seed=a.seed)


def _add_kge_flags(p, require_seed=True):
    p.add_argument("--model", choices=kge.MODELS, default="transe")
    p.add_argument("--dim", type=int, default=100)
    p.add_argument("--batch-size", type=int, default=100)
    p.add_argument("--epochs", type=int, default=500)
    p.add_argument("--margin", type=float, default=1.0)
    p.add_argument("--learning-rate", type=float, default=0.01)
    p.add_argument("--lr-floor", type=float, default=None,
                   help="linear decay floor; omit for a constant rate")
    p.add_argument("--optimizer", choices=("sgd", "adagrad"), default="sgd")
    p.add_argument("--negatives", type=int, default=1)
    p.add_argument("--seed", type=int, required=require_seed, default=None if require_seed else 0)


def _add_kge_train(sub):
    p = sub.add_parser("kge-train", help="train a base KG embedding model")
    p.add_argument("--train", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--out-entities", required=True)
    p.add_argument("--out-relations", required=True)
    _add_kge_flags(p)
    p.set_defaults(func=lambda a: stage_kge_train(
        a.train, a.vocab, a.out_entities, a.out_relations, _kge_section_from_args(a)))


def _add_retrofit(sub):
    p = sub.add_parser("retrofit", help="pull base entity embeddings toward network neighbors")
    p.add_argument("--base", required=True)
    p.add_argument("--network", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--log", default=None)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--iters", type=int, default=10)
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--method", choices=("gauss-seidel", "jacobi"), default="gauss-seidel",
                   help="jacobi updates all rows from the previous sweep (parallel-friendly, "
                        "outside the determinism contract)")
    p.set_defaults(func=lambda a: stage_retrofit(
        a.base, a.network, a.out, a.log or (a.out + ".log.json"),
        k=a.k, alpha=a.alpha, iters=a.iters, tol=a.tol, method=a.method))


def _add_relearn(sub):
    p = sub.add_parser("relearn", help="re-train relation embeddings with entities frozen")
    p.add_argument("--entities", required=True)
    p.add_argument("--train", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--out-relations", required=True)
    _add_kge_flags(p)
    p.set_defaults(func=lambda a: stage_relearn(
        a.entities, a.train, a.vocab, a.out_relations, _kge_section_from_args(a)))


def _add_eval(sub):
    p = sub.add_parser("eval", help="filtered link-prediction evaluation")
    p.add_argument("--entities", required=True)
    p.add_argument("--relations", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--filter", nargs="+", required=True,
                   help="triple files whose triples are filtered out of rankings")
    p.add_argument("--out", required=True)
    p.add_argument("--hits", type=int, nargs="+", default=[1, 3, 10])
    p.add_argument("--ranks-csv", default=None)
    def run(a):
        payload = stage_eval(a.entities, a.relations, a.test, a.filter, a.out,
                             hits=tuple(a.hits))
        if a.ranks_csv:
            write_ranks_csv(a.ranks_csv, payload)
        return payload
    p.set_defaults(func=run)


def _add_report(sub):
    p = sub.add_parser("report", help="compare two eval artifacts with significance")
    p.add_argument("--baseline", required=True)
    p.add_argument("--infused", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--resamples", type=int, default=DEFAULT_RESAMPLES)
    p.add_argument("--alpha", type=float, default=0.05)
    p.set_defaults(func=lambda a: stage_report(
        a.baseline, a.infused, a.out, resamples=a.resamples, alpha=a.alpha))


def _add_run(sub):
    p = sub.add_parser("run", help="run the whole pipeline from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", required=True)
    def run(a):
        cfg = load_pipeline_config(a.config)
        report = run_pipeline(cfg, a.out_dir)
        log.info("baseline MRR=%.4f infused MRR=%.4f p=%.4g",
                 report["baseline"]["mrr"], report["infused"]["mrr"],
                 report["significance"]["p_value"])
        return report
    p.set_defaults(func=run)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mohone",
        description="heat-kernel network embeddings, KG embedding retrofitting, "
                    "and filtered link-prediction evaluation")
    parser.add_argument("-q", "--quiet", action="store_true", help="suppress progress logging")
    sub = parser.add_subparsers(dest="command", required=True)
    for add in (_add_graph_build, _add_diffuse, _add_embed, _add_kge_train,
                _add_retrofit, _add_relearn, _add_eval, _add_report, _add_run):
        add(sub)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(message)s", stream=sys.stderr)
    try:
        args.func(args)
    except ConfigError as e:
        log.error("config error: %s", e)
        return EXIT_CONFIG
    except (DataError, TripleFileError, FileNotFoundError) as e:
        log.error("data error: %s", e)
        return EXIT_DATA
    except (diffusion.NumericError, np.linalg.LinAlgError, FloatingPointError) as e:
        log.error("numeric failure: %s", e)
        return EXIT_NUMERIC
    except ValueError as e:
        log.error("config error: %s", e)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
