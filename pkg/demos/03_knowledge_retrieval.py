"""Knowledge layer: document retrieval (RAG) and graph retrieval (GraphRAG).

The sample corpus and graph live in sample_data/. Planner-style queries
hit the graph (keyword + embedding seeds with one-hop expansion);
Coder-style queries hit the chunked document store.
"""

from pathlib import Path

from gmas_harness import DeterministicEmbedder, index_documents, load_graph, retrieve_graph, retrieve_rag
from gmas_harness.knowledge import load_corpus_dir

SAMPLE = Path(__file__).parent.parent / "sample_data"

embedder = DeterministicEmbedder(dim=384)

corpus = load_corpus_dir(SAMPLE / "corpus")
store = index_documents(corpus, embedder, chunk_size=400)
print(f"indexed {len(store.chunks)} chunks from {len(corpus)} documents")

query = "how many prb can a slice receive before the cell is exhausted"
bundle = retrieve_rag(store, query, top_k=3, embedder=embedder)
print(f"\nRAG results for: {query!r}")
for text, score, prov in bundle.items:
    print(f"  [{score:+.3f}] {prov}: {text[:70]}...")

graph = load_graph(SAMPLE / "graph.json", embedder)
print(f"\ngraph: {len(graph.nodes)} nodes, {len(graph.edges)} edges")

bundle = retrieve_graph(graph, "slice admission capacity", top_k=4, hop_expand=1,
                        embedder=embedder)
print("GraphRAG results (one-hop expansion on):")
for text, score, prov in bundle.items:
    print(f"  [{score:+.3f}] {prov}: {text[:70]}")

print("\nbundle centroid norm (context fingerprint for conflict metrics):",
      round(bundle.bundle_embedding.norm, 6))
