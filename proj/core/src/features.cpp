#include "provbind/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "provbind/binary_io.hpp"
#include "provbind/error.hpp"
#include "provbind/random.hpp"

namespace provbind {

using nlohmann::json;

SemanticVocab::SemanticVocab(Word2VecConfig config, std::vector<std::string> tokens, std::vector<float> table)
    : config_(config), tokens_(std::move(tokens)), table_(std::move(table)) {
  if (config_.dim == 0) throw ConfigError("semantic dimension must be >= 1");
  if (table_.size() != tokens_.size() * config_.dim) throw FormatError("vocabulary table size mismatch");
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], i).second) throw FormatError("duplicate vocabulary token " + tokens_[i]);
  }
}

std::span<const float> SemanticVocab::lookup(std::string_view token) const {
  const auto it = index_.find(token);
  if (it == index_.end()) return {};
  return std::span<const float>(table_).subspan(it->second * config_.dim, config_.dim);
}

// ---------------------------------------------------------------------------
// Skip-gram with negative sampling

namespace {

float sigmoid(float x) {
  if (x > 30.f) return 1.f;
  if (x < -30.f) return 0.f;
  return 1.f / (1.f + std::exp(-x));
}

}  // namespace

SemanticVocab train_semantic_vocab(std::span<const TokenSequence> corpus, const Word2VecConfig& config) {
  if (config.dim == 0) throw ConfigError("semantic dimension must be >= 1");
  std::map<std::string, std::uint64_t> counts;
  std::uint64_t total_tokens = 0;
  for (const auto& sentence : corpus) {
    for (const auto& tok : sentence) {
      ++counts[tok];
      ++total_tokens;
    }
  }
  if (total_tokens == 0) throw ConfigError("cannot train semantic vocabulary on an empty corpus");

  // Frequency-descending, ties by token, so indices do not depend on hashing.
  std::vector<std::pair<std::string, std::uint64_t>> entries(counts.begin(), counts.end());
  std::stable_sort(entries.begin(), entries.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> tokens;
  std::map<std::string, std::size_t, std::less<>> index;
  for (const auto& [tok, c] : entries) {
    index.emplace(tok, tokens.size());
    tokens.push_back(tok);
  }

  const std::size_t dim = config.dim;
  const std::size_t vocab_size = tokens.size();
  Rng rng(config.seed);

  std::vector<float> syn0(vocab_size * dim);
  std::vector<float> syn1(vocab_size * dim, 0.f);
  for (auto& w : syn0) w = static_cast<float>((rng.uniform() - 0.5) / static_cast<double>(dim));

  // Unigram^0.75 noise distribution as a cumulative table.
  std::vector<double> cumulative(vocab_size);
  double acc = 0.0;
  for (std::size_t i = 0; i < vocab_size; ++i) {
    acc += std::pow(static_cast<double>(entries[i].second), 0.75);
    cumulative[i] = acc;
  }
  const auto draw_negative = [&]() -> std::size_t {
    const double u = rng.uniform() * acc;
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    return std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()), vocab_size - 1);
  };

  std::vector<std::vector<std::size_t>> encoded;
  encoded.reserve(corpus.size());
  for (const auto& sentence : corpus) {
    std::vector<std::size_t> ids;
    ids.reserve(sentence.size());
    for (const auto& tok : sentence) ids.push_back(index.find(tok)->second);
    encoded.push_back(std::move(ids));
  }

  const double total_steps = static_cast<double>(total_tokens * std::max<std::size_t>(config.epochs, 1));
  double processed = 0.0;
  std::vector<float> grad(dim);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (const auto& ids : encoded) {
      for (std::size_t pos = 0; pos < ids.size(); ++pos) {
        const double alpha_d = config.learning_rate * std::max(1e-4, 1.0 - processed / total_steps);
        const auto alpha = static_cast<float>(alpha_d);
        processed += 1.0;
        const std::size_t shrink = config.window > 0 ? rng.below(config.window) : 0;
        const std::size_t span = config.window - shrink;
        const std::size_t lo = pos >= span ? pos - span : 0;
        const std::size_t hi = std::min(ids.size() - 1, pos + span);
        for (std::size_t c = lo; c <= hi; ++c) {
          if (c == pos) continue;
          // The context word's input vector predicts the centre word.
          float* in = &syn0[ids[c] * dim];
          std::fill(grad.begin(), grad.end(), 0.f);
          for (std::size_t d = 0; d <= config.negatives; ++d) {
            std::size_t target;
            float label;
            if (d == 0) {
              target = ids[pos];
              label = 1.f;
            } else {
              target = draw_negative();
              if (target == ids[pos]) continue;
              label = 0.f;
            }
            float* out = &syn1[target * dim];
            float dot = 0.f;
            for (std::size_t k = 0; k < dim; ++k) dot += in[k] * out[k];
            const float g = (label - sigmoid(dot)) * alpha;
            for (std::size_t k = 0; k < dim; ++k) grad[k] += g * out[k];
            for (std::size_t k = 0; k < dim; ++k) out[k] += g * in[k];
          }
          for (std::size_t k = 0; k < dim; ++k) in[k] += grad[k];
        }
      }
    }
  }
  return SemanticVocab(config, std::move(tokens), std::move(syn0));
}

void write_vocab(const SemanticVocab& vocab, const OperationVocab& ops, const std::filesystem::path& prefix) {
  if (prefix.has_parent_path()) std::filesystem::create_directories(prefix.parent_path());
  const auto& c = vocab.config();
  json h;
  h["dim"] = c.dim;
  h["seed"] = c.seed;
  h["window"] = c.window;
  h["negatives"] = c.negatives;
  h["epochs"] = c.epochs;
  h["learning_rate"] = c.learning_rate;
  h["tokens"] = vocab.tokens();
  h["operations"] = ops.operations();
  h["dtype"] = "float32-le";
  std::ofstream header(prefix.string() + ".json");
  header << h.dump(2) << '\n';
  std::ofstream blob(prefix.string() + ".bin", std::ios::binary);
  binary::write_blob<float>(blob, vocab.table());
  if (!header || !blob) throw IoError("failed writing vocabulary " + prefix.string());
}

LoadedVocab read_vocab(const std::filesystem::path& prefix) {
  const auto header_path = prefix.string() + ".json";
  std::ifstream header(header_path);
  if (!header) throw MissingArtifactError("vocabulary", header_path);
  std::ifstream blob(prefix.string() + ".bin", std::ios::binary);
  if (!blob) throw MissingArtifactError("vocabulary matrix", prefix.string() + ".bin");
  try {
    const auto h = json::parse(header);
    Word2VecConfig c;
    c.dim = h.at("dim").get<std::size_t>();
    c.seed = h.at("seed").get<std::uint64_t>();
    c.window = h.at("window").get<std::size_t>();
    c.negatives = h.at("negatives").get<std::size_t>();
    c.epochs = h.at("epochs").get<std::size_t>();
    c.learning_rate = h.at("learning_rate").get<double>();
    auto tokens = h.at("tokens").get<std::vector<std::string>>();
    auto table = binary::read_blob<float>(blob, tokens.size() * c.dim);
    return {SemanticVocab(c, std::move(tokens), std::move(table)),
            OperationVocab(h.at("operations").get<std::vector<std::string>>())};
  } catch (const json::exception& ex) {
    throw FormatError("corrupt vocabulary header " + header_path + ": " + ex.what());
  }
}

// ---------------------------------------------------------------------------
// Encodings

TokenSequence build_node_summary(const Entity& node, const ProvenanceGraph& graph) {
  TokenSequence out{node.identity.text()};
  for (const auto i : graph.incident_edges(node.uuid)) out.push_back(graph.edges()[i].operation);
  return out;
}

std::vector<TokenSequence> build_corpus(std::span<const ProvenanceGraph> graphs) {
  std::vector<TokenSequence> corpus;
  for (const auto& g : graphs)
    for (const auto& [uuid, node] : g.nodes()) corpus.push_back(build_node_summary(node, g));
  return corpus;
}

Vec semantic_encode(const Entity& node, const ProvenanceGraph& graph, const SemanticVocab& vocab) {
  Vec out(vocab.dim(), 0.0);
  const auto summary = build_node_summary(node, graph);
  for (const auto& tok : summary) {
    const auto row = vocab.lookup(tok);
    for (std::size_t k = 0; k < row.size(); ++k) out[k] += static_cast<double>(row[k]);
  }
  const auto n = static_cast<double>(summary.size());
  for (auto& x : out) x /= n;
  return out;
}

Vec normalize_counts(std::span<const double> counts) {
  Vec out(counts.begin(), counts.end());
  const double norm = l2_norm(counts);
  if (norm == 0.0) return out;
  for (auto& x : out) x /= norm;
  return out;
}

Vec action_frequency_encode(const Entity& node, const ProvenanceGraph& graph, const OperationVocab& ops) {
  Vec counts(ops.size(), 0.0);
  for (const auto i : graph.incident_edges(node.uuid)) {
    const auto& e = graph.edges()[i];
    if (const auto k = ops.index_of(e.operation)) counts[*k] += static_cast<double>(e.weight);
  }
  return normalize_counts(counts);
}

std::vector<std::int64_t> incident_timestamps(const Entity& node, const ProvenanceGraph& graph) {
  std::vector<std::int64_t> ts;
  for (const auto i : graph.incident_edges(node.uuid)) {
    const auto& e = graph.edges()[i];
    ts.push_back(e.first_ts);
    if (e.weight > 1) ts.push_back(e.last_ts);
  }
  return ts;
}

Vec temporal_encode_timestamps(std::vector<std::int64_t> ts) {
  Vec out(kTemporalDim, 0.0);
  if (ts.size() < 2) return out;
  std::sort(ts.begin(), ts.end());
  double lo = 0.0;
  double hi = 0.0;
  double sum = 0.0;
  for (std::size_t k = 0; k + 1 < ts.size(); ++k) {
    const auto idle = static_cast<double>(ts[k + 1] - ts[k]);
    if (k == 0 || idle < lo) lo = idle;
    if (k == 0 || idle > hi) hi = idle;
    sum += idle;
  }
  const double mean = sum / static_cast<double>(ts.size() - 1);
  const double stats[kTemporalDim] = {lo, hi, mean};
  const double smin = *std::min_element(std::begin(stats), std::end(stats));
  const double smax = *std::max_element(std::begin(stats), std::end(stats));
  if (smax == smin) return out;
  for (std::size_t k = 0; k < kTemporalDim; ++k) out[k] = std::clamp((stats[k] - smin) / (smax - smin), 0.0, 1.0);
  return out;
}

Vec temporal_encode(const Entity& node, const ProvenanceGraph& graph) {
  return temporal_encode_timestamps(incident_timestamps(node, graph));
}

NodeFeatures initial_features(const Entity& node, const ProvenanceGraph& graph, const SemanticVocab& vocab,
                              const OperationVocab& ops) {
  NodeFeatures f;
  f.x_sem = semantic_encode(node, graph, vocab);
  f.x_act = action_frequency_encode(node, graph, ops);
  f.x_tmp = temporal_encode(node, graph);
  f.h0.reserve(f.x_sem.size() + f.x_act.size() + f.x_tmp.size());
  f.h0.insert(f.h0.end(), f.x_sem.begin(), f.x_sem.end());
  f.h0.insert(f.h0.end(), f.x_act.begin(), f.x_act.end());
  f.h0.insert(f.h0.end(), f.x_tmp.begin(), f.x_tmp.end());
  return f;
}

std::map<std::string, Vec> graph_features(const ProvenanceGraph& graph, const SemanticVocab& vocab,
                                          const OperationVocab& ops) {
  std::map<std::string, Vec> out;
  for (const auto& [uuid, node] : graph.nodes()) out.emplace(uuid, initial_features(node, graph, vocab, ops).h0);
  return out;
}

void export_features_csv(const ProvenanceGraph& graph, const std::map<std::string, Vec>& features,
                         const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  const std::size_t dim = features.empty() ? 0 : features.begin()->second.size();
  out << "uuid,identity";
  for (std::size_t k = 0; k < dim; ++k) out << ",h" << k;
  out << '\n';
  for (const auto& [uuid, h] : features) {
    const auto* node = graph.find(uuid);
    out << uuid << ',' << (node ? node->identity.text() : std::string());
    for (const double x : h) out << ',' << fmt::format("{:.17g}", x);
    out << '\n';
  }
}

}  // namespace provbind
