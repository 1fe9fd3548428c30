// Builds a tiny index in memory and ranks it against one query with each
// distance the library offers.

#include <cstdio>
#include <sstream>

#include "lcrwmd/lcrwmd.hpp"

using namespace lcrwmd;

int main() {
  std::istringstream vectors(
      "8 2\n"
      "obama 1.0 0.2\n"
      "president 0.9 0.3\n"
      "speaks 0.1 1.0\n"
      "greets 0.2 0.9\n"
      "media 0.5 -0.8\n"
      "press 0.6 -0.7\n"
      "illinois 1.2 -0.1\n"
      "chicago 1.1 0.0\n");
  const LoadedEmbeddings emb = parse_embeddings_text(vectors);

  const std::vector<RawDocument> corpus{
      {"a", "Obama speaks to the media in Illinois.", std::nullopt},
      {"b", "The President greets the press in Chicago.", std::nullopt},
      {"c", "The press speaks.", std::nullopt},
      {"d", "Chicago, Illinois.", std::nullopt},
  };
  const StopWords stop{"the", "to", "in"};
  const Index index = build_index(corpus, emb, stop);
  std::printf("%zu documents, %zu words kept of %zu\n", index.size(), index.vocab.size(),
              emb.vocab.size());

  const std::vector<RawDocument> query{{"q", "President speaks in Chicago", std::nullopt}};
  const HistogramSet q = ingest_queries(index, query, stop).histograms;

  for (Method m : {Method::wcd, Method::rwmd, Method::lc_rwmd, Method::wmd, Method::wmd_pruned}) {
    QueryPlan plan;
    plan.method = m;
    plan.k = 3;
    const QueryResult r = run_query(index, q, plan);
    std::printf("%-10s", std::string(method_name(m)).c_str());
    for (const Neighbor& nb : r.top[0])
      std::printf("  %s:%.4f", index.doc_ids[nb.id].c_str(), nb.distance);
    if (m == Method::wmd_pruned) std::printf("  (%zu exact solves)", r.exact_solves[0]);
    std::printf("\n");
  }
}
