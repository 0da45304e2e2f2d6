#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "provbind/ingest.hpp"
#include "provbind/linalg.hpp"

namespace provbind {

/// Skip-gram with negative sampling hyperparameters.
struct Word2VecConfig {
  std::size_t dim = 32;
  std::size_t window = 5;
  std::size_t negatives = 5;
  std::size_t epochs = 5;
  double learning_rate = 0.025;
  std::uint64_t seed = 1;

  friend bool operator==(const Word2VecConfig&, const Word2VecConfig&) = default;
};

using TokenSequence = std::vector<std::string>;

/// Token -> vector table. Vectors are stored in single precision, the same
/// precision as the on-disk format, so a saved and reloaded vocabulary is
/// bitwise identical to the trained one.
class SemanticVocab {
 public:
  SemanticVocab() = default;
  SemanticVocab(Word2VecConfig config, std::vector<std::string> tokens, std::vector<float> table);

  const Word2VecConfig& config() const noexcept { return config_; }
  std::size_t dim() const noexcept { return config_.dim; }
  std::size_t size() const noexcept { return tokens_.size(); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  const std::vector<float>& table() const noexcept { return table_; }

  /// Row for token, or an empty span when the token is out of vocabulary.
  std::span<const float> lookup(std::string_view token) const;

  friend bool operator==(const SemanticVocab&, const SemanticVocab&) = default;

 private:
  Word2VecConfig config_;
  std::vector<std::string> tokens_;
  std::map<std::string, std::size_t, std::less<>> index_;
  std::vector<float> table_;
};

/// Trains skip-gram word vectors. Single-threaded and deterministic for a
/// fixed seed. ConfigError on an empty corpus or dim == 0.
SemanticVocab train_semantic_vocab(std::span<const TokenSequence> corpus, const Word2VecConfig& config);

/// Writes <prefix>.json (header, tokens, operation vocabulary) and <prefix>.bin.
void write_vocab(const SemanticVocab& vocab, const OperationVocab& ops, const std::filesystem::path& prefix);
struct LoadedVocab {
  SemanticVocab vocab;
  OperationVocab ops;
};
LoadedVocab read_vocab(const std::filesystem::path& prefix);

/// [identity] ++ operation tokens of the incident edges ordered by first_ts.
TokenSequence build_node_summary(const Entity& node, const ProvenanceGraph& graph);

/// Summaries of every node of every graph, graphs in the given order and
/// nodes in uuid order.
std::vector<TokenSequence> build_corpus(std::span<const ProvenanceGraph> graphs);

/// Mean of the summary token vectors; OOV tokens count as zero vectors.
Vec semantic_encode(const Entity& node, const ProvenanceGraph& graph, const SemanticVocab& vocab);

/// Per-operation sums of incident edge weights, l2-normalised. Zero counts
/// give the zero vector.
Vec action_frequency_encode(const Entity& node, const ProvenanceGraph& graph, const OperationVocab& ops);

/// Min-max normalised [min, max, mean] of the idle periods between the
/// node's incident event timestamps. Degenerate statistics give zeros.
Vec temporal_encode(const Entity& node, const ProvenanceGraph& graph);

/// Event timestamps used by temporal_encode: each incident aggregate
/// contributes first_ts, plus last_ts when it absorbed more than one event.
std::vector<std::int64_t> incident_timestamps(const Entity& node, const ProvenanceGraph& graph);

/// Temporal encoding of an explicit timestamp list (need not be sorted).
Vec temporal_encode_timestamps(std::vector<std::int64_t> timestamps);

/// Action encoding of a raw count vector.
Vec normalize_counts(std::span<const double> counts);

struct NodeFeatures {
  Vec x_sem;
  Vec x_act;
  Vec x_tmp;
  Vec h0;
};

inline constexpr std::size_t kTemporalDim = 3;

inline std::size_t feature_dim(const SemanticVocab& vocab, const OperationVocab& ops) {
  return vocab.dim() + ops.size() + kTemporalDim;
}

NodeFeatures initial_features(const Entity& node, const ProvenanceGraph& graph, const SemanticVocab& vocab,
                              const OperationVocab& ops);

/// h0 for every node of graph, keyed by uuid.
std::map<std::string, Vec> graph_features(const ProvenanceGraph& graph, const SemanticVocab& vocab,
                                          const OperationVocab& ops);

/// CSV dump (uuid, identity, h0 components) for debugging.
void export_features_csv(const ProvenanceGraph& graph, const std::map<std::string, Vec>& features,
                         const std::filesystem::path& path);

}  // namespace provbind
