from __future__ import annotations

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gmas_harness.embeddings import DeterministicEmbedder, cosine, tokenize
from gmas_harness.errors import ConfigurationError
from gmas_harness.knowledge import (ContextBundle, SourceTag, build_graph,
                                    index_documents, load_corpus_dir, load_graph,
                                    retrieve_graph, retrieve_rag, split_into_chunks)
from oracles import plain_cosine


# ── chunking ─────────────────────────────────────────────────────────────────

def test_small_doc_is_one_chunk():
    assert split_into_chunks("ten chars!", 100) == ["ten chars!"]


def test_greedy_line_packing_250_chars_into_3_chunks():
    # 5 lines of 49 chars + newline each: greedy packing at chunk_size 100
    # fits two lines per chunk (49 + 1 + 49 = 99), so 2 + 2 + 1 lines.
    lines = [c * 49 for c in "abcde"]
    text = "\n".join(lines)
    chunks = split_into_chunks(text, 100)
    assert chunks == ["\n".join(lines[0:2]), "\n".join(lines[2:4]), lines[4]]
    assert all(len(c) <= 100 for c in chunks)


def test_oversized_line_hard_split():
    chunks = split_into_chunks("x" * 250, 100)
    assert chunks == ["x" * 100, "x" * 100, "x" * 50]


def test_index_documents_requires_nonempty_corpus(embedder):
    with pytest.raises(ConfigurationError):
        index_documents([], embedder)


def test_index_documents_skips_empty_doc(embedder, caplog):
    store = index_documents([("a", "", SourceTag.SPECS),
                             ("b", "content line", SourceTag.SPECS)], embedder)
    assert {c.doc_id for c in store.chunks} == {"b"}


def test_chunks_are_embedded_and_keyed(embedder):
    text = "\n".join(f"line {i} about prb allocation" for i in range(12))
    store = index_documents([("doc", text, SourceTag.STANDARDS)], embedder,
                            chunk_size=60)
    keys = [(c.doc_id, c.chunk_index) for c in store.chunks]
    assert len(set(keys)) == len(keys)
    assert all(not c.embedding.is_zero() for c in store.chunks)


# ── rag retrieval ────────────────────────────────────────────────────────────

def _store(embedder, texts):
    corpus = [(f"d{i}", text, SourceTag.SPECS) for i, text in enumerate(texts)]
    return index_documents(corpus, embedder, chunk_size=400)


def test_exact_chunk_query_ranks_first_with_score_one(embedder):
    store = _store(embedder, ["allocate prb to slices",
                              "handover hysteresis margin",
                              "energy saving sleep cycles"])
    bundle = retrieve_rag(store, "allocate prb to slices", top_k=2, embedder=embedder)
    assert bundle.items[0][0] == "allocate prb to slices"
    assert bundle.items[0][1] == pytest.approx(1.0, abs=1e-9)


def test_fewer_chunks_than_top_k_returns_all(embedder):
    store = _store(embedder, ["one", "two", "three"])
    bundle = retrieve_rag(store, "two", top_k=5, embedder=embedder)
    assert len(bundle.items) == 3


def test_rag_ranking_matches_brute_force_on_crafted_store(embedder):
    texts = ["allocate prb budget", "slice admission control",
             "prb capacity per cell", "latency kpi threshold",
             "allocate spectrum fairly"]
    store = _store(embedder, texts)
    query = "allocate prb"
    bundle = retrieve_rag(store, query, top_k=5, embedder=embedder)

    qvec = embedder.embed(query).tolist()
    expected = sorted(
        ((plain_cosine(qvec, c.embedding.tolist()), c.doc_id, c.chunk_index, c.text)
         for c in store.chunks),
        key=lambda t: (-t[0], t[1], t[2]))
    assert [item[0] for item in bundle.items] == [t[3] for t in expected]
    for item, exp in zip(bundle.items, expected):
        assert item[1] == pytest.approx(exp[0], abs=1e-12)


def test_rag_scores_non_increasing_and_capped(embedder):
    store = _store(embedder, [f"text number {i} prb" for i in range(8)])
    bundle = retrieve_rag(store, "prb text", top_k=4, embedder=embedder)
    scores = [s for _, s, _ in bundle.items]
    assert scores == sorted(scores, reverse=True)
    assert len(bundle.items) <= 4


def test_rag_monotone_in_top_k(embedder):
    store = _store(embedder, [f"chunk {i} slice prb cell" for i in range(9)])
    previous: list[str] = []
    for k in range(1, 10):
        bundle = retrieve_rag(store, "slice prb", top_k=k, embedder=embedder)
        provs = [p for _, _, p in bundle.items]
        assert provs[:len(previous)] == previous
        previous = provs


def test_bundle_centroid_is_normalized_mean(embedder):
    store = _store(embedder, ["alpha beta", "gamma delta"])
    bundle = retrieve_rag(store, "alpha", top_k=2, embedder=embedder)
    vectors = [c.embedding for c in store.chunks]
    by_text = {c.text: c.embedding for c in store.chunks}
    picked = [by_text[item[0]] for item in bundle.items]
    mean = [sum(v.tolist()[i] for v in picked) / len(picked)
            for i in range(embedder.dim)]
    norm = math.sqrt(sum(x * x for x in mean))
    expected = [x / norm for x in mean]
    assert bundle.bundle_embedding.tolist() == pytest.approx(expected, abs=1e-12)


def test_corpus_dir_loader(tmp_path, embedder):
    (tmp_path / "a.txt").write_text("alpha text", encoding="utf-8")
    (tmp_path / "manifest.json").write_text('{"a.txt": "papers"}', encoding="utf-8")
    corpus = load_corpus_dir(tmp_path)
    assert corpus == [("a.txt", "alpha text", SourceTag.PAPERS)]
    with pytest.raises(ConfigurationError):
        load_corpus_dir(tmp_path / "missing")


# ── graph retrieval ──────────────────────────────────────────────────────────

def _toy_graph(embedder):
    nodes = [
        ("n1", "prb allocation", "grant physical resource blocks to slices"),
        ("n2", "network slice", "logical network with its own guarantees"),
        ("n3", "cell capacity", "upper bound on grants per cell"),
        ("n4", "admission control", "gates slices against remaining capacity"),
        ("n5", "latency budget", "delay target per slice"),
        ("n6", "energy saving", "sleep cycles for low traffic"),
    ]
    edges = [("n1", "n3", "bounded_by"), ("n2", "n1", "consumes"),
             ("n2", "n4", "gated_by"), ("n5", "n2", "constrains")]
    return build_graph(nodes, edges, embedder)


def test_exact_label_query_is_keyword_seed(embedder):
    graph = _toy_graph(embedder)
    bundle = retrieve_graph(graph, "cell capacity", top_k=6, hop_expand=0,
                            embedder=embedder)
    assert any(prov == "graph:n3" for _, _, prov in bundle.items)


def test_hop_expand_zero_result_is_subset_of_seeds(embedder):
    graph = _toy_graph(embedder)
    query = "slice guarantees"
    bundle = retrieve_graph(graph, query, top_k=3, hop_expand=0, embedder=embedder)

    query_tokens = set(tokenize(query))
    qvec = embedder.embed(query)
    scores = {nid: cosine(qvec, node.embedding) for nid, node in graph.nodes.items()}
    keyword = {nid for nid, node in graph.nodes.items()
               if query_tokens & set(tokenize(node.label))}
    top_emb = sorted(graph.nodes, key=lambda n: (-scores[n], n))[:3]
    seeds = keyword | set(top_emb)
    returned = {prov.split(":")[1] for _, _, prov in bundle.items}
    assert returned <= seeds


def _oracle_graph_ranking(graph, query, top_k, hop_expand, embedder):
    """Brute-force re-derivation of the documented ranking rule."""
    query_tokens = set(tokenize(query))
    qvec = embedder.embed(query).tolist()
    scores = {nid: plain_cosine(qvec, node.embedding.tolist())
              for nid, node in graph.nodes.items()}
    keyword = {nid for nid, node in graph.nodes.items()
               if query_tokens & set(tokenize(node.label))}
    top_emb = sorted(graph.nodes, key=lambda n: (-scores[n], n))[:top_k]
    seeds = keyword | set(top_emb)
    candidates = {nid: (scores[nid], 0) for nid in seeds}
    if hop_expand:
        for seed in seeds:
            for nb in graph.neighbors(seed):
                inherited = 0.5 * scores[seed]
                if nb in candidates:
                    score, channel = candidates[nb]
                    if inherited > score:
                        candidates[nb] = (inherited, channel)
                else:
                    candidates[nb] = (inherited, 1)
    ranked = sorted(candidates.items(), key=lambda kv: (-kv[1][0], kv[1][1], kv[0]))
    return [(nid, score) for nid, (score, _) in ranked[:top_k]]


def test_graph_ranking_matches_brute_force_oracle(embedder):
    graph = _toy_graph(embedder)
    for query in ["prb allocation per cell", "slice latency", "admission", "zzz"]:
        for top_k in (1, 2, 3, 6):
            for hop in (0, 1):
                bundle = retrieve_graph(graph, query, top_k, hop, embedder=embedder)
                got = [(prov.split(":")[1], score) for _, score, prov in bundle.items]
                expected = _oracle_graph_ranking(graph, query, top_k, hop, embedder)
                assert [g[0] for g in got] == [e[0] for e in expected], \
                    (query, top_k, hop)
                for (_, gs), (_, es) in zip(got, expected):
                    assert gs == pytest.approx(es, abs=1e-12)


def test_neighbors_inherit_half_parent_score(embedder):
    graph = _toy_graph(embedder)
    query = "prb allocation"  # exact label of n1; neighbor n3 via bounded_by
    bundle = retrieve_graph(graph, query, top_k=6, hop_expand=1, embedder=embedder)
    scores = {prov.split(":")[1]: score for _, score, prov in bundle.items}
    qvec = embedder.embed(query)
    n1_score = cosine(qvec, graph.nodes["n1"].embedding)
    own_n3 = cosine(qvec, graph.nodes["n3"].embedding)
    # n3 is also an embedding seed here only if it makes top_k; as a neighbor
    # its inherited score would be half of n1's. Whichever channel won, the
    # recorded score must be one of the two.
    assert scores["n3"] == pytest.approx(max(own_n3, 0.5 * n1_score), abs=1e-12) or \
        scores["n3"] == pytest.approx(own_n3, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_graph_retrieval_monotone_in_top_k(data):
    embedder = DeterministicEmbedder(32)
    words = ["prb", "slice", "cell", "latency", "energy", "handover", "admit",
             "budget", "load", "sleep"]
    n = data.draw(st.integers(min_value=2, max_value=8))
    nodes = []
    for i in range(n):
        label_words = data.draw(st.lists(st.sampled_from(words), min_size=1,
                                         max_size=3))
        nodes.append((f"n{i}", " ".join(label_words) + f" x{i}", f"text {i}"))
    edge_count = data.draw(st.integers(min_value=0, max_value=min(6, n * (n - 1) // 2)))
    edges = []
    for _ in range(edge_count):
        a = data.draw(st.integers(min_value=0, max_value=n - 1))
        b = data.draw(st.integers(min_value=0, max_value=n - 1))
        if a != b:
            edges.append((f"n{a}", f"n{b}", "rel"))
    graph = build_graph(nodes, edges, embedder)
    query = " ".join(data.draw(st.lists(st.sampled_from(words), min_size=1,
                                        max_size=4)))
    previous: list[str] = []
    for k in range(1, n + 2):
        bundle = retrieve_graph(graph, query, k, 1, embedder=embedder)
        provs = [p for _, _, p in bundle.items]
        assert set(previous) <= set(provs)
        previous = provs


def test_graph_loader_and_edge_validation(tmp_path, embedder):
    path = tmp_path / "graph.json"
    path.write_text('{"nodes": [{"id": "a", "label": "alpha", "text": "t"}],'
                    ' "edges": [{"src": "a", "dst": "missing", "relation": "r"}]}')
    with pytest.raises(ConfigurationError):
        load_graph(path, embedder)
    path.write_text('{"nodes": [{"id": "a", "label": "alpha", "text": "t"},'
                    ' {"id": "b", "label": "beta", "text": "u"}],'
                    ' "edges": [{"src": "a", "dst": "b", "relation": "r"}]}')
    graph = load_graph(path, embedder)
    assert graph.neighbors("a") == ["b"]


def test_bundle_rejects_increasing_scores(embedder):
    with pytest.raises(ValueError):
        ContextBundle(items=(("a", 0.1, "p"), ("b", 0.5, "q")), agent_role="x",
                      bundle_embedding=embedder.embed("a"))
