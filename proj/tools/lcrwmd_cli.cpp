// Command-line driver: build an index, run queries, benchmark, and evaluate
// retrieval quality. Every output is JSON-lines.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lcrwmd/lcrwmd.hpp"

namespace {

using namespace lcrwmd;
using json = nlohmann::ordered_json;

class Output {
 public:
  explicit Output(const std::string& path) {
    if (path.empty() || path == "-") return;
    file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
    if (!*file_) throw Error(path + ": cannot open for writing");
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }
  void line(const json& j) { stream() << j.dump() << '\n'; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

EmbeddingFormat parse_format(const std::string& s) {
  if (s == "text") return EmbeddingFormat::text;
  if (s == "binary") return EmbeddingFormat::binary;
  throw InvalidArgument("unknown embedding format " + s);
}

struct QuerySource {
  HistogramSet histograms;
  std::vector<std::optional<DocId>> sources;
  std::vector<std::string> names;
};

QuerySource resolve_queries(const Index& idx, const std::string& queries_path,
                            const std::string& stopwords_path, std::size_t sample,
                            std::uint64_t seed) {
  QuerySource q;
  if (!queries_path.empty()) {
    const auto docs = load_corpus(queries_path);
    const StopWords stop = stopwords_path.empty() ? StopWords{} : load_stopwords(stopwords_path);
    IngestResult r = ingest_queries(idx, docs, stop, EmptyDocuments::skip);
    for (std::size_t s : r.skipped)
      std::cerr << "warning: query " << docs[s].id << " has no indexed words; skipped\n";
    q.histograms = std::move(r.histograms);
    for (std::size_t src : r.kept) {
      q.names.push_back(docs[src].id);
      q.sources.emplace_back(std::nullopt);
    }
    return q;
  }
  const auto rows = synthetic::sample_rows(idx.size(), sample, seed);
  q.histograms = select_rows(idx.docs, rows);
  for (DocId r : rows) {
    q.sources.emplace_back(r);
    q.names.push_back(idx.doc_ids.empty() ? std::to_string(r) : idx.doc_ids[r]);
  }
  return q;
}

std::size_t resolve_k(std::optional<std::size_t> k, std::optional<double> k_pct, std::size_t n) {
  if (k && k_pct) throw InvalidArgument("--k and --k-pct are mutually exclusive");
  if (k_pct) return k_from_percent(*k_pct, n);
  return k.value_or(10);
}

std::vector<Method> parse_methods(const std::vector<std::string>& names) {
  std::vector<Method> out;
  for (const auto& n : names) out.push_back(parse_method(n));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Word mover's distance relaxations: indexing, querying and evaluation"};
  app.require_subcommand(1);

  // index
  auto* cmd_index = app.add_subcommand("index", "Build a resident index from a corpus");
  std::string emb_path, emb_format = "text", corpus_path, stop_path, labels_path, index_path;
  bool skip_empty = false;
  cmd_index->add_option("--embeddings", emb_path, "word2vec embeddings")->required();
  cmd_index->add_option("--format", emb_format, "embedding format")->check(CLI::IsMember({"text", "binary"}));
  cmd_index->add_option("--corpus", corpus_path, "one document per line, or JSON-lines")->required();
  cmd_index->add_option("--stopwords", stop_path, "stop-word list");
  cmd_index->add_option("--labels", labels_path, "one label per corpus line");
  cmd_index->add_option("--index", index_path, "output index file")->required();
  cmd_index->add_flag("--skip-empty", skip_empty, "skip documents with no usable words instead of failing");

  // query
  auto* cmd_query = app.add_subcommand("query", "Top-k retrieval against an index");
  std::string method_name_arg = "lc-rwmd", queries_path, full_matrix_path, out_path;
  std::optional<std::size_t> k_abs;
  std::optional<double> k_pct;
  std::size_t batch = kDefaultBatch, partitions = 1, sample = 10;
  std::uint64_t seed = 1;
  bool exclude_self = false;
  const auto methods = CLI::IsMember({"wcd", "rwmd", "lc-rwmd", "wmd", "wmd-pruned"});
  cmd_query->add_option("--index", index_path)->required();
  cmd_query->add_option("--method", method_name_arg)->check(methods);
  cmd_query->add_option("--k", k_abs)->check(CLI::PositiveNumber);
  cmd_query->add_option("--k-pct", k_pct, "k as a percentage of the resident set")->check(CLI::PositiveNumber);
  cmd_query->add_option("--batch", batch)->check(CLI::PositiveNumber);
  cmd_query->add_option("--partitions", partitions)->check(CLI::PositiveNumber);
  cmd_query->add_option("--queries", queries_path, "query corpus; default samples the index");
  cmd_query->add_option("--stopwords", stop_path);
  cmd_query->add_option("--sample", sample, "number of resident rows to sample as queries");
  cmd_query->add_option("--seed", seed);
  cmd_query->add_flag("--exclude-self", exclude_self);
  cmd_query->add_option("--full-matrix", full_matrix_path, "stream every distance row here");
  cmd_query->add_option("--out", out_path);

  // bench
  auto* cmd_bench = app.add_subcommand("bench", "Timing sweeps on synthetic indices");
  std::string sweep = "h";
  std::vector<std::size_t> values;
  std::vector<std::string> method_names{"lc-rwmd", "rwmd"};
  SweepConfig sc;
  cmd_bench->add_option("--sweep", sweep)->check(CLI::IsMember({"h", "n", "P"}));
  cmd_bench->add_option("--values", values, "sweep points (default h: 8 16 32 64)");
  cmd_bench->add_option("--methods", method_names)->check(methods);
  cmd_bench->add_option("--n", sc.n);
  cmd_bench->add_option("--words-per-doc", sc.h, "histogram size when not sweeping h");
  cmd_bench->add_option("--m", sc.m);
  cmd_bench->add_option("--vocab", sc.vocab);
  cmd_bench->add_option("--sample", sc.queries, "queries sampled from the resident set");
  cmd_bench->add_option("--partitions", sc.partitions)->check(CLI::PositiveNumber);
  cmd_bench->add_option("--k", sc.options.k)->check(CLI::PositiveNumber);
  cmd_bench->add_option("--min-time-ms", sc.options.min_time_ms);
  cmd_bench->add_option("--seed", sc.seed);
  cmd_bench->add_option("--out", out_path);

  // overlap
  auto* cmd_overlap = app.add_subcommand("overlap", "Top-k overlap between two methods");
  std::string reference_name = "wmd";
  OverlapConfig oc;
  cmd_overlap->add_option("--index", index_path)->required();
  cmd_overlap->add_option("--method", method_name_arg)->check(methods);
  cmd_overlap->add_option("--reference", reference_name)->check(methods);
  cmd_overlap->add_option("--k-pct", oc.k_pcts, "k grid as percentages of n");
  cmd_overlap->add_option("--ref-pct", oc.reference_pcts, "reference list sizes as percentages");
  cmd_overlap->add_option("--k", oc.absolute_k, "absolute k grid (overrides --k-pct)");
  cmd_overlap->add_option("--sample", sample);
  cmd_overlap->add_option("--seed", seed);
  cmd_overlap->add_option("--partitions", oc.partitions)->check(CLI::PositiveNumber);
  cmd_overlap->add_option("--batch", oc.batch)->check(CLI::PositiveNumber);
  cmd_overlap->add_option("--out", out_path);

  // precision
  auto* cmd_precision = app.add_subcommand("precision", "k-NN label precision");
  PrecisionConfig pc;
  std::vector<std::size_t> thresholds;
  cmd_precision->add_option("--index", index_path)->required();
  cmd_precision->add_option("--method", method_name_arg)->check(methods);
  cmd_precision->add_option("--k", pc.ks);
  cmd_precision->add_option("--buckets", thresholds, "ascending label-frequency thresholds");
  cmd_precision->add_option("--sample", sample);
  cmd_precision->add_option("--seed", seed);
  cmd_precision->add_option("--partitions", pc.partitions)->check(CLI::PositiveNumber);
  cmd_precision->add_option("--out", out_path);

  // synth
  auto* cmd_synth = app.add_subcommand("synth", "Write a synthetic clustered corpus and embeddings");
  std::string out_dir = ".";
  synthetic::ClusterConfig cc;
  cmd_synth->add_option("--out-dir", out_dir);
  cmd_synth->add_option("--docs", cc.docs);
  cmd_synth->add_option("--clusters", cc.clusters)->check(CLI::PositiveNumber);
  cmd_synth->add_option("--vocab", cc.vocab)->check(CLI::PositiveNumber);
  cmd_synth->add_option("--dim", cc.dim)->check(CLI::PositiveNumber);
  cmd_synth->add_option("--h-min", cc.h_min)->check(CLI::PositiveNumber);
  cmd_synth->add_option("--h-max", cc.h_max)->check(CLI::PositiveNumber);
  cmd_synth->add_option("--format", emb_format)->check(CLI::IsMember({"text", "binary"}));
  cmd_synth->add_option("--seed", seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*cmd_index) {
      const auto emb = load_embeddings(emb_path, parse_format(emb_format));
      const auto corpus = load_corpus(corpus_path);
      const StopWords stop = stop_path.empty() ? StopWords{} : load_stopwords(stop_path);
      const auto labels = labels_path.empty() ? std::vector<std::string>{} : load_lines(labels_path);
      BuildReport rep;
      const Index idx = build_index(corpus, emb, stop, labels,
                                    skip_empty ? EmptyDocuments::skip : EmptyDocuments::reject, &rep);
      for (std::size_t s : rep.skipped)
        std::cerr << "warning: document " << corpus[s].id << " is empty after filtering; skipped\n";
      save_index(index_path, idx);
      json j{{"index", index_path}, {"n", idx.size()}, {"v", rep.full_vocab}, {"v_e", idx.vocab.size()},
             {"m", idx.embeddings.dim()}, {"h_mean", idx.docs.mean_row_size()},
             {"skipped", rep.skipped.size()}, {"labels", idx.has_labels()}};
      std::cout << j.dump() << '\n';
      return 0;
    }

    if (*cmd_query) {
      const Index idx = load_index(index_path);
      QueryPlan plan;
      plan.method = parse_method(method_name_arg);
      plan.k = resolve_k(k_abs, k_pct, idx.size());
      plan.batch = batch;
      plan.partitions = partitions;
      plan.exclude_self = exclude_self;
      const QuerySource q = resolve_queries(idx, queries_path, stop_path, sample, seed);
      std::unique_ptr<Output> full;
      RowSink sink;
      if (!full_matrix_path.empty()) {
        full = std::make_unique<Output>(full_matrix_path);
        sink = [&](std::size_t j, std::span<const float> row) {
          full->line({{"query", j}, {"distances", std::vector<float>(row.begin(), row.end())}});
        };
      }
      const QueryResult res = run_query(idx, q.histograms, plan, q.sources, sink);
      Output out(out_path);
      const bool wmd_family = plan.method == Method::wmd || plan.method == Method::wmd_pruned;
      for (std::size_t j = 0; j < res.top.size(); ++j) {
        json rec;
        rec["query"] = j;
        rec["id"] = q.names[j];
        rec["source"] = q.sources[j] ? json(*q.sources[j]) : json(nullptr);
        rec["method"] = method_name(plan.method);
        rec["k"] = plan.k;
        json nbs = json::array();
        for (const auto& nb : res.top[j]) {
          json e{{"id", nb.id}, {"distance", nb.distance}};
          if (!idx.doc_ids.empty()) e["doc"] = idx.doc_ids[nb.id];
          nbs.push_back(std::move(e));
        }
        rec["neighbors"] = std::move(nbs);
        if (wmd_family)
          rec["exact_solves"] = plan.method == Method::wmd ? idx.size() : res.exact_solves[j];
        out.line(rec);
      }
      return 0;
    }

    if (*cmd_bench) {
      sc.axis = sweep == "h" ? SweepAxis::h : sweep == "n" ? SweepAxis::n : SweepAxis::partitions;
      if (!values.empty()) sc.values = values;
      else if (sc.axis == SweepAxis::n) sc.values = {1250, 2500, 5000, 10000};
      else if (sc.axis == SweepAxis::partitions) sc.values = {1, 2, 4, 8};
      sc.methods = parse_methods(method_names);
      const SweepReport rep = run_sweep(sc);
      Output out(out_path);
      for (const auto& r : rep.records) out.line(r.to_json());
      json slopes = json::object();
      for (const auto& [m, s] : rep.slopes) slopes[m] = s;
      out.line({{"summary", true}, {"sweep", sweep}, {"slopes", slopes}});
      return 0;
    }

    if (*cmd_overlap) {
      const Index idx = load_index(index_path);
      oc.method = parse_method(method_name_arg);
      oc.reference = parse_method(reference_name);
      const auto rows = synthetic::sample_rows(idx.size(), sample, seed);
      Output out(out_path);
      for (const auto& p : evaluate_overlap(idx, rows, oc).points) out.line(p.to_json());
      return 0;
    }

    if (*cmd_precision) {
      const Index idx = load_index(index_path);
      pc.method = parse_method(method_name_arg);
      if (!thresholds.empty()) pc.buckets = buckets_from_thresholds(thresholds);
      const auto rows = synthetic::sample_rows(idx.size(), sample, seed);
      Output out(out_path);
      for (const auto& p : evaluate_precision(idx, rows, pc).points) out.line(p.to_json());
      return 0;
    }

    if (*cmd_synth) {
      const auto fmt = parse_format(emb_format);
      const auto corpus = synthetic::clustered_corpus(cc, seed);
      std::filesystem::create_directories(out_dir);
      const auto dir = std::filesystem::path(out_dir);
      const auto emb_file = dir / (fmt == EmbeddingFormat::text ? "embeddings.txt" : "embeddings.bin");
      save_embeddings(emb_file.string(), corpus.embeddings.vocab, corpus.embeddings.embeddings, fmt);
      std::ofstream docs(dir / "corpus.jsonl"), labels(dir / "labels.txt");
      for (const auto& d : corpus.docs) {
        docs << json{{"id", d.id}, {"text", d.text}, {"label", *d.label}}.dump() << '\n';
        labels << *d.label << '\n';
      }
      std::cout << json{{"embeddings", emb_file.string()},
                        {"corpus", (dir / "corpus.jsonl").string()},
                        {"labels", (dir / "labels.txt").string()},
                        {"docs", corpus.docs.size()}}
                       .dump()
                << '\n';
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
