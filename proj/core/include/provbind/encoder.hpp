#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "provbind/features.hpp"
#include "provbind/ingest.hpp"
#include "provbind/linalg.hpp"
#include "provbind/random.hpp"

namespace provbind {

enum class Activation { relu, tanh, identity };
enum class Aggregation { mean, sum };

std::string_view to_string(Activation a) noexcept;
std::string_view to_string(Aggregation a) noexcept;
Activation parse_activation(std::string_view text);
Aggregation parse_aggregation(std::string_view text);

/// Weights of an L-layer message-passing encoder. weights[l] maps layer l
/// (dims[l]) to layer l+1 (dims[l+1]) and has shape dims[l+1] x dims[l].
struct EncoderParams {
  std::vector<std::size_t> dims;
  std::vector<Eigen::MatrixXd> weights;
  Activation activation = Activation::relu;
  Aggregation aggregation = Aggregation::mean;
  std::uint64_t seed = 0;

  std::size_t num_layers() const noexcept { return weights.size(); }
  std::size_t input_dim() const noexcept { return dims.front(); }
  std::size_t output_dim() const noexcept { return dims.back(); }

  /// Throws ConfigError when the dimension chain or weights are inconsistent.
  void validate() const;
};

/// Weights drawn uniformly from [-1/sqrt(fan_in), 1/sqrt(fan_in)].
EncoderParams init_params(std::vector<std::size_t> dims, Activation activation, Aggregation aggregation,
                          std::uint64_t seed);

/// Node ordering plus the undirected neighbourhood N(i) u {i} of each node,
/// sorted by node index so aggregation does not depend on edge order.
class MessageGraph {
 public:
  MessageGraph() = default;
  explicit MessageGraph(const ProvenanceGraph& graph);
  /// Explicit adjacency over node indices 0..n-1; pairs are undirected.
  MessageGraph(std::vector<std::string> uuids, const std::vector<std::pair<std::size_t, std::size_t>>& links);

  std::size_t size() const noexcept { return uuids_.size(); }
  const std::vector<std::string>& uuids() const noexcept { return uuids_; }
  const std::vector<std::size_t>& neighborhood(std::size_t i) const { return hood_[i]; }
  std::optional<std::size_t> index_of(std::string_view uuid) const;

 private:
  std::vector<std::string> uuids_;
  std::vector<std::vector<std::size_t>> hood_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

/// Per-layer intermediate values kept for back-propagation.
struct ForwardCache {
  std::vector<Eigen::MatrixXd> hidden;      // hidden[0] = H0, hidden[L] = Z
  std::vector<Eigen::MatrixXd> aggregated;  // AGG(h) fed into layer l
  std::vector<Eigen::MatrixXd> preact;      // W * AGG(h) before activation
};

ForwardCache forward_pass(const MessageGraph& graph, const Eigen::MatrixXd& h0, const EncoderParams& params);

/// Stack per-node feature vectors into a matrix in graph node order.
Eigen::MatrixXd stack_features(const MessageGraph& graph, const std::map<std::string, Vec>& features,
                               std::size_t dim);

/// z for every node. ConfigError when feature and encoder dimensions differ.
std::map<std::string, Vec> forward(const ProvenanceGraph& graph, const std::map<std::string, Vec>& h0,
                                   const EncoderParams& params);

/// Features followed by forward().
std::map<std::string, Vec> embed_graph(const ProvenanceGraph& graph, const SemanticVocab& vocab,
                                       const OperationVocab& ops, const EncoderParams& params);

struct ContrastivePair {
  std::string anchor;
  std::string positive;
  std::vector<std::string> negatives;
};

struct ContrastiveBatch {
  std::vector<ContrastivePair> pairs;
  double temperature = 0.1;

  bool empty() const noexcept { return pairs.empty(); }
};

/// InfoNCE over cosine similarities scaled by 1/temperature. A zero-norm
/// embedding has cosine 0 with everything.
double infonce_loss(const std::map<std::string, Vec>& embeddings, const ContrastiveBatch& batch);

/// Index-based batch used internally by training.
struct IndexedPair {
  std::size_t anchor;
  std::size_t positive;
  std::vector<std::size_t> negatives;
};

/// Loss of the batch over embedding rows of z; when grad_z is non-null it
/// receives dLoss/dZ (same shape as z).
double infonce_loss(const Eigen::MatrixXd& z, const std::vector<IndexedPair>& pairs, double temperature,
                    Eigen::MatrixXd* grad_z = nullptr);

struct LossAndGradient {
  double loss = 0.0;
  std::vector<Eigen::MatrixXd> weight_grads;  // same shapes as params.weights
};

LossAndGradient loss_and_gradient(const MessageGraph& graph, const Eigen::MatrixXd& h0,
                                  const EncoderParams& params, const std::vector<IndexedPair>& pairs,
                                  double temperature);

/// One batch: anchors come from identities with at least two members, each
/// paired with a uniformly drawn same-identity peer; the batch is topped up
/// to batch_size with other nodes. Every member whose identity differs from
/// the anchor is one of its negatives. Empty (with a warning) when no
/// identity has two members.
ContrastiveBatch sample_contrastive_batch(const std::vector<std::string>& nodes,
                                          const std::vector<IdentityLabel>& identities, std::size_t batch_size,
                                          double temperature, Rng& rng);

struct TrainConfig {
  std::size_t epochs = 100;
  double learning_rate = 1e-5;
  std::size_t batch_size = 128;
  double temperature = 0.1;
  std::uint64_t seed = 7;
  std::size_t output_dim = 32;
  std::size_t num_layers = 2;
  Activation activation = Activation::relu;
  Aggregation aggregation = Aggregation::mean;
};

struct TrainResult {
  EncoderParams params;
  double initial_loss = 0.0;
  std::vector<double> loss_trace;  // evaluation loss after each epoch
};

/// A graph with precomputed features, the unit of training data.
struct TrainingGraph {
  const ProvenanceGraph* graph;
  std::map<std::string, Vec> features;
};

/// Plain SGD on the InfoNCE loss with full-graph forward passes. The loss
/// trace is measured on a fixed evaluation set of batches drawn once from
/// the seed, so it reflects only parameter changes. TrainingError on a
/// non-finite loss.
TrainResult train_encoder(const std::vector<TrainingGraph>& graphs, const TrainConfig& config);

/// Writes <prefix>.json and <prefix>.bin (float32, row-major, layer order).
void write_encoder(const EncoderParams& params, const std::filesystem::path& prefix);
EncoderParams read_encoder(const std::filesystem::path& prefix);
void write_loss_trace(const std::vector<double>& trace, const std::filesystem::path& path);

}  // namespace provbind
