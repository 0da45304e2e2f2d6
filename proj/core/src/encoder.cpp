#include "provbind/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "provbind/binary_io.hpp"
#include "provbind/error.hpp"

namespace provbind {

using Eigen::MatrixXd;
using nlohmann::json;

std::string_view to_string(Activation a) noexcept {
  switch (a) {
    case Activation::relu:
      return "relu";
    case Activation::tanh:
      return "tanh";
    case Activation::identity:
      return "identity";
  }
  return "relu";
}

std::string_view to_string(Aggregation a) noexcept { return a == Aggregation::mean ? "mean" : "sum"; }

Activation parse_activation(std::string_view text) {
  if (text == "relu") return Activation::relu;
  if (text == "tanh") return Activation::tanh;
  if (text == "identity") return Activation::identity;
  throw ConfigError("unknown activation '" + std::string(text) + "'");
}

Aggregation parse_aggregation(std::string_view text) {
  if (text == "mean") return Aggregation::mean;
  if (text == "sum") return Aggregation::sum;
  throw ConfigError("unknown aggregation '" + std::string(text) + "'");
}

void EncoderParams::validate() const {
  if (weights.empty()) throw ConfigError("encoder needs at least one layer");
  if (dims.size() != weights.size() + 1) throw ConfigError("encoder dimension chain does not match layer count");
  for (std::size_t l = 0; l < weights.size(); ++l) {
    const auto& w = weights[l];
    if (static_cast<std::size_t>(w.rows()) != dims[l + 1] || static_cast<std::size_t>(w.cols()) != dims[l])
      throw ConfigError(fmt::format("encoder layer {} has shape {}x{}, expected {}x{}", l, w.rows(), w.cols(),
                                    dims[l + 1], dims[l]));
    if (!w.allFinite()) throw ConfigError(fmt::format("encoder layer {} has non-finite weights", l));
  }
}

EncoderParams init_params(std::vector<std::size_t> dims, Activation activation, Aggregation aggregation,
                          std::uint64_t seed) {
  if (dims.size() < 2) throw ConfigError("encoder needs at least one layer");
  for (const auto d : dims)
    if (d == 0) throw ConfigError("encoder dimensions must be positive");
  EncoderParams p;
  p.dims = std::move(dims);
  p.activation = activation;
  p.aggregation = aggregation;
  p.seed = seed;
  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < p.dims.size(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(p.dims[l]));
    MatrixXd w(p.dims[l + 1], p.dims[l]);
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = rng.uniform(-bound, bound);
    p.weights.push_back(std::move(w));
  }
  return p;
}

// ---------------------------------------------------------------------------
// Message graph

MessageGraph::MessageGraph(const ProvenanceGraph& graph) {
  uuids_.reserve(graph.nodes().size());
  for (const auto& [uuid, node] : graph.nodes()) {
    index_.emplace(uuid, uuids_.size());
    uuids_.push_back(uuid);
  }
  std::vector<std::set<std::size_t>> sets(uuids_.size());
  for (std::size_t i = 0; i < uuids_.size(); ++i) sets[i].insert(i);
  for (const auto& e : graph.edges()) {
    const auto a = index_.find(e.src)->second;
    const auto b = index_.find(e.dst)->second;
    sets[a].insert(b);
    sets[b].insert(a);
  }
  hood_.reserve(sets.size());
  for (auto& s : sets) hood_.emplace_back(s.begin(), s.end());
}

MessageGraph::MessageGraph(std::vector<std::string> uuids,
                           const std::vector<std::pair<std::size_t, std::size_t>>& links)
    : uuids_(std::move(uuids)) {
  std::vector<std::set<std::size_t>> sets(uuids_.size());
  for (std::size_t i = 0; i < uuids_.size(); ++i) {
    index_.emplace(uuids_[i], i);
    sets[i].insert(i);
  }
  for (const auto& [a, b] : links) {
    if (a >= uuids_.size() || b >= uuids_.size()) throw ConfigError("link endpoint out of range");
    sets[a].insert(b);
    sets[b].insert(a);
  }
  for (auto& s : sets) hood_.emplace_back(s.begin(), s.end());
}

std::optional<std::size_t> MessageGraph::index_of(std::string_view uuid) const {
  const auto it = index_.find(uuid);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

// ---------------------------------------------------------------------------
// Forward / backward

namespace {

double agg_weight(Aggregation agg, std::size_t hood_size) {
  return agg == Aggregation::mean ? 1.0 / static_cast<double>(hood_size) : 1.0;
}

MatrixXd aggregate(const MessageGraph& g, const MatrixXd& h, Aggregation agg) {
  MatrixXd out = MatrixXd::Zero(h.rows(), h.cols());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto& hood = g.neighborhood(i);
    for (const auto j : hood) out.row(static_cast<Eigen::Index>(i)) += h.row(static_cast<Eigen::Index>(j));
    out.row(static_cast<Eigen::Index>(i)) *= agg_weight(agg, hood.size());
  }
  return out;
}

/// Transpose of aggregate(): scatter each row's gradient back to its hood.
MatrixXd aggregate_transpose(const MessageGraph& g, const MatrixXd& grad, Aggregation agg) {
  MatrixXd out = MatrixXd::Zero(grad.rows(), grad.cols());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto& hood = g.neighborhood(i);
    const double w = agg_weight(agg, hood.size());
    for (const auto j : hood) out.row(static_cast<Eigen::Index>(j)) += w * grad.row(static_cast<Eigen::Index>(i));
  }
  return out;
}

MatrixXd activate(const MatrixXd& x, Activation a) {
  switch (a) {
    case Activation::relu:
      return x.cwiseMax(0.0);
    case Activation::tanh:
      return x.array().tanh().matrix();
    case Activation::identity:
      return x;
  }
  return x;
}

MatrixXd activation_grad(const MatrixXd& preact, const MatrixXd& out, Activation a) {
  switch (a) {
    case Activation::relu:
      return (preact.array() > 0.0).cast<double>().matrix();
    case Activation::tanh:
      return (1.0 - out.array().square()).matrix();
    case Activation::identity:
      return MatrixXd::Ones(preact.rows(), preact.cols());
  }
  return MatrixXd::Ones(preact.rows(), preact.cols());
}

}  // namespace

ForwardCache forward_pass(const MessageGraph& graph, const MatrixXd& h0, const EncoderParams& params) {
  params.validate();
  if (static_cast<std::size_t>(h0.cols()) != params.input_dim())
    throw ConfigError(fmt::format("feature dimension {} does not match encoder input dimension {}", h0.cols(),
                                  params.input_dim()));
  if (static_cast<std::size_t>(h0.rows()) != graph.size()) throw ConfigError("feature rows do not match graph size");
  ForwardCache cache;
  cache.hidden.push_back(h0);
  for (std::size_t l = 0; l < params.num_layers(); ++l) {
    cache.aggregated.push_back(aggregate(graph, cache.hidden.back(), params.aggregation));
    cache.preact.push_back(cache.aggregated.back() * params.weights[l].transpose());
    cache.hidden.push_back(activate(cache.preact.back(), params.activation));
  }
  return cache;
}

MatrixXd stack_features(const MessageGraph& graph, const std::map<std::string, Vec>& features, std::size_t dim) {
  MatrixXd h(static_cast<Eigen::Index>(graph.size()), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < graph.size(); ++i) {
    const auto it = features.find(graph.uuids()[i]);
    if (it == features.end()) throw ConfigError("missing features for node " + graph.uuids()[i]);
    if (it->second.size() != dim)
      throw ConfigError(fmt::format("feature dimension {} does not match encoder input dimension {}",
                                    it->second.size(), dim));
    for (std::size_t k = 0; k < dim; ++k) h(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = it->second[k];
  }
  return h;
}

std::map<std::string, Vec> forward(const ProvenanceGraph& graph, const std::map<std::string, Vec>& h0,
                                   const EncoderParams& params) {
  params.validate();
  const MessageGraph mg(graph);
  std::map<std::string, Vec> out;
  if (mg.size() == 0) return out;
  const auto cache = forward_pass(mg, stack_features(mg, h0, params.input_dim()), params);
  const auto& z = cache.hidden.back();
  for (std::size_t i = 0; i < mg.size(); ++i) {
    Vec row(static_cast<std::size_t>(z.cols()));
    for (Eigen::Index k = 0; k < z.cols(); ++k) row[static_cast<std::size_t>(k)] = z(static_cast<Eigen::Index>(i), k);
    out.emplace(mg.uuids()[i], std::move(row));
  }
  return out;
}

std::map<std::string, Vec> embed_graph(const ProvenanceGraph& graph, const SemanticVocab& vocab,
                                       const OperationVocab& ops, const EncoderParams& params) {
  if (feature_dim(vocab, ops) != params.input_dim())
    throw ConfigError(fmt::format("feature dimension {} (d_s={} + ops={} + 3) does not match encoder input "
                                  "dimension {}",
                                  feature_dim(vocab, ops), vocab.dim(), ops.size(), params.input_dim()));
  return forward(graph, graph_features(graph, vocab, ops), params);
}

// ---------------------------------------------------------------------------
// InfoNCE

namespace {

struct CosineTerms {
  double cos = 0.0;
  double norm_a = 0.0;
  double norm_b = 0.0;
};

CosineTerms cosine_terms(const MatrixXd& z, std::size_t a, std::size_t b) {
  const auto ra = z.row(static_cast<Eigen::Index>(a));
  const auto rb = z.row(static_cast<Eigen::Index>(b));
  CosineTerms t;
  t.norm_a = ra.norm();
  t.norm_b = rb.norm();
  if (t.norm_a == 0.0 || t.norm_b == 0.0) return t;
  t.cos = ra.dot(rb) / (t.norm_a * t.norm_b);
  return t;
}

}  // namespace

double infonce_loss(const MatrixXd& z, const std::vector<IndexedPair>& pairs, double temperature,
                    MatrixXd* grad_z) {
  if (!(temperature > 0.0)) throw ConfigError("temperature must be positive");
  if (grad_z) *grad_z = MatrixXd::Zero(z.rows(), z.cols());
  double loss = 0.0;
  std::vector<std::size_t> others;
  std::vector<double> phi;
  std::vector<CosineTerms> terms;
  for (const auto& pair : pairs) {
    others.clear();
    others.push_back(pair.positive);
    others.insert(others.end(), pair.negatives.begin(), pair.negatives.end());
    phi.resize(others.size());
    terms.resize(others.size());
    for (std::size_t j = 0; j < others.size(); ++j) {
      terms[j] = cosine_terms(z, pair.anchor, others[j]);
      phi[j] = terms[j].cos / temperature;
    }
    const double peak = *std::max_element(phi.begin(), phi.end());
    double denom = 0.0;
    for (const double p : phi) denom += std::exp(p - peak);
    const double log_denom = peak + std::log(denom);
    loss += log_denom - phi[0];

    if (!grad_z) continue;
    const auto ia = static_cast<Eigen::Index>(pair.anchor);
    for (std::size_t j = 0; j < others.size(); ++j) {
      const auto& t = terms[j];
      if (t.norm_a == 0.0 || t.norm_b == 0.0) continue;
      const double weight = (std::exp(phi[j] - log_denom) - (j == 0 ? 1.0 : 0.0)) / temperature;
      const auto ib = static_cast<Eigen::Index>(others[j]);
      const Eigen::RowVectorXd za = z.row(ia);
      const Eigen::RowVectorXd zb = z.row(ib);
      // d cos(a,b) / da = b / (|a||b|) - cos * a / |a|^2
      grad_z->row(ia) += weight * (zb / (t.norm_a * t.norm_b) - t.cos * za / (t.norm_a * t.norm_a));
      grad_z->row(ib) += weight * (za / (t.norm_a * t.norm_b) - t.cos * zb / (t.norm_b * t.norm_b));
    }
  }
  return loss;
}

double infonce_loss(const std::map<std::string, Vec>& embeddings, const ContrastiveBatch& batch) {
  std::vector<std::string> uuids;
  std::map<std::string, std::size_t> index;
  const auto intern = [&](const std::string& u) {
    auto [it, inserted] = index.try_emplace(u, uuids.size());
    if (inserted) uuids.push_back(u);
    return it->second;
  };
  std::vector<IndexedPair> pairs;
  for (const auto& p : batch.pairs) {
    IndexedPair ip{intern(p.anchor), intern(p.positive), {}};
    for (const auto& n : p.negatives) ip.negatives.push_back(intern(n));
    pairs.push_back(std::move(ip));
  }
  if (uuids.empty()) return 0.0;
  const auto dim = embeddings.at(uuids.front()).size();
  MatrixXd z(static_cast<Eigen::Index>(uuids.size()), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < uuids.size(); ++i) {
    const auto it = embeddings.find(uuids[i]);
    if (it == embeddings.end()) throw ConfigError("batch references unknown node " + uuids[i]);
    for (std::size_t k = 0; k < dim; ++k) z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = it->second[k];
  }
  return infonce_loss(z, pairs, batch.temperature);
}

LossAndGradient loss_and_gradient(const MessageGraph& graph, const MatrixXd& h0, const EncoderParams& params,
                                  const std::vector<IndexedPair>& pairs, double temperature) {
  const auto cache = forward_pass(graph, h0, params);
  MatrixXd grad;
  LossAndGradient out;
  out.loss = infonce_loss(cache.hidden.back(), pairs, temperature, &grad);
  out.weight_grads.resize(params.num_layers());
  for (std::size_t l = params.num_layers(); l-- > 0;) {
    const MatrixXd dpre =
        grad.cwiseProduct(activation_grad(cache.preact[l], cache.hidden[l + 1], params.activation));
    out.weight_grads[l] = dpre.transpose() * cache.aggregated[l];
    if (l > 0) grad = aggregate_transpose(graph, dpre * params.weights[l], params.aggregation);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Batch sampling

namespace {

struct IdentityGroups {
  std::map<IdentityLabel, std::vector<std::size_t>> members;
  std::vector<std::size_t> eligible;  // nodes whose identity has >= 2 members
};

IdentityGroups group_identities(const std::vector<IdentityLabel>& identities) {
  IdentityGroups g;
  for (std::size_t i = 0; i < identities.size(); ++i) g.members[identities[i]].push_back(i);
  for (std::size_t i = 0; i < identities.size(); ++i)
    if (g.members[identities[i]].size() >= 2) g.eligible.push_back(i);
  return g;
}

std::size_t anchors_per_batch(std::size_t batch_size) { return std::max<std::size_t>(1, batch_size / 2); }

/// Builds the pairs for one chunk of anchors; positives are drawn from peers
/// and the batch is topped up with random other nodes.
std::vector<IndexedPair> make_batch(std::span<const std::size_t> anchors, const IdentityGroups& groups,
                                    const std::vector<IdentityLabel>& identities, std::size_t batch_size,
                                    Rng& rng) {
  std::vector<std::size_t> members;
  std::vector<char> in_batch(identities.size(), 0);
  const auto add = [&](std::size_t i) {
    if (!in_batch[i]) {
      in_batch[i] = 1;
      members.push_back(i);
    }
  };
  std::vector<IndexedPair> pairs;
  for (const auto a : anchors) {
    const auto& peers = groups.members.at(identities[a]);
    std::size_t p;
    do {
      p = peers[rng.below(peers.size())];
    } while (p == a);
    add(a);
    add(p);
    pairs.push_back(IndexedPair{a, p, {}});
  }
  if (members.size() < batch_size) {
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < identities.size(); ++i)
      if (!in_batch[i]) pool.push_back(i);
    rng.shuffle(pool.begin(), pool.end());
    for (std::size_t k = 0; k < pool.size() && members.size() < batch_size; ++k) add(pool[k]);
  }
  for (auto& pair : pairs) {
    for (const auto m : members)
      if (identities[m] != identities[pair.anchor]) pair.negatives.push_back(m);
  }
  return pairs;
}

std::vector<std::vector<IndexedPair>> epoch_batches(const IdentityGroups& groups,
                                                    const std::vector<IdentityLabel>& identities,
                                                    std::size_t batch_size, Rng& rng) {
  auto order = groups.eligible;
  rng.shuffle(order.begin(), order.end());
  const auto chunk = anchors_per_batch(batch_size);
  std::vector<std::vector<IndexedPair>> batches;
  for (std::size_t start = 0; start < order.size(); start += chunk) {
    const auto len = std::min(chunk, order.size() - start);
    batches.push_back(make_batch(std::span(order).subspan(start, len), groups, identities, batch_size, rng));
  }
  return batches;
}

}  // namespace

ContrastiveBatch sample_contrastive_batch(const std::vector<std::string>& nodes,
                                          const std::vector<IdentityLabel>& identities, std::size_t batch_size,
                                          double temperature, Rng& rng) {
  if (batch_size < 2) throw ConfigError("batch size must be at least 2");
  if (nodes.size() != identities.size()) throw ConfigError("node and identity lists differ in length");
  ContrastiveBatch batch;
  batch.temperature = temperature;
  const auto groups = group_identities(identities);
  if (groups.eligible.empty()) {
    spdlog::warn("no identity has two or more members; contrastive batch is empty");
    return batch;
  }
  auto order = groups.eligible;
  rng.shuffle(order.begin(), order.end());
  const auto len = std::min(anchors_per_batch(batch_size), order.size());
  for (const auto& ip : make_batch(std::span(order).first(len), groups, identities, batch_size, rng)) {
    ContrastivePair pair{nodes[ip.anchor], nodes[ip.positive], {}};
    for (const auto n : ip.negatives) pair.negatives.push_back(nodes[n]);
    batch.pairs.push_back(std::move(pair));
  }
  return batch;
}

// ---------------------------------------------------------------------------
// Training

namespace {

struct PreparedGraph {
  MessageGraph mg;
  MatrixXd h0;
  std::vector<IdentityLabel> identities;
  IdentityGroups groups;
  std::vector<std::vector<IndexedPair>> eval_batches;
};

double evaluate(const std::vector<PreparedGraph>& prepared, const EncoderParams& params, double temperature) {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& pg : prepared) {
    if (pg.eval_batches.empty()) continue;
    const auto z = forward_pass(pg.mg, pg.h0, params).hidden.back();
    for (const auto& b : pg.eval_batches) {
      total += infonce_loss(z, b, temperature);
      ++count;
    }
  }
  return count == 0 ? 0.0 : total / static_cast<double>(count);
}

}  // namespace

TrainResult train_encoder(const std::vector<TrainingGraph>& graphs, const TrainConfig& config) {
  if (graphs.empty()) throw ConfigError("no training graphs");
  if (config.num_layers == 0 || config.output_dim == 0) throw ConfigError("encoder needs positive depth and width");
  if (config.batch_size < 2) throw ConfigError("batch size must be at least 2");
  if (!(config.temperature > 0.0)) throw ConfigError("temperature must be positive");
  if (!(config.learning_rate >= 0.0)) throw ConfigError("learning rate must be non-negative");

  std::size_t input_dim = 0;
  for (const auto& tg : graphs) {
    if (!tg.features.empty()) {
      input_dim = tg.features.begin()->second.size();
      break;
    }
  }
  if (input_dim == 0) throw ConfigError("training graphs contain no node features");

  std::vector<std::size_t> dims{input_dim};
  for (std::size_t l = 0; l < config.num_layers; ++l) dims.push_back(config.output_dim);

  TrainResult result;
  result.params = init_params(dims, config.activation, config.aggregation, config.seed);
  Rng rng(config.seed ^ 0x9e3779b97f4a7c15ULL);

  std::vector<PreparedGraph> prepared;
  for (const auto& tg : graphs) {
    PreparedGraph pg;
    pg.mg = MessageGraph(*tg.graph);
    pg.h0 = stack_features(pg.mg, tg.features, input_dim);
    for (const auto& uuid : pg.mg.uuids()) pg.identities.push_back(tg.graph->find(uuid)->identity);
    pg.groups = group_identities(pg.identities);
    pg.eval_batches = epoch_batches(pg.groups, pg.identities, config.batch_size, rng);
    prepared.push_back(std::move(pg));
  }
  const bool any_pairs = std::any_of(prepared.begin(), prepared.end(),
                                     [](const PreparedGraph& pg) { return !pg.groups.eligible.empty(); });
  if (!any_pairs) spdlog::warn("no identity has two or more members; training steps are skipped");

  result.initial_loss = evaluate(prepared, result.params, config.temperature);
  if (!std::isfinite(result.initial_loss)) throw TrainingError("initial loss is not finite");

  auto& params = result.params;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (const auto& pg : prepared) {
      if (pg.groups.eligible.empty()) continue;
      for (const auto& batch : epoch_batches(pg.groups, pg.identities, config.batch_size, rng)) {
        const auto lg = loss_and_gradient(pg.mg, pg.h0, params, batch, config.temperature);
        if (!std::isfinite(lg.loss))
          throw TrainingError(fmt::format("non-finite loss at epoch {} (batch of {} pairs)", epoch, batch.size()));
        for (std::size_t l = 0; l < params.num_layers(); ++l)
          params.weights[l] -= config.learning_rate * lg.weight_grads[l];
      }
    }
    const double loss = evaluate(prepared, params, config.temperature);
    if (!std::isfinite(loss)) throw TrainingError(fmt::format("non-finite evaluation loss after epoch {}", epoch));
    result.loss_trace.push_back(loss);
    spdlog::debug("epoch {} loss {:.6f}", epoch, loss);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Serialization

void write_encoder(const EncoderParams& params, const std::filesystem::path& prefix) {
  params.validate();
  if (prefix.has_parent_path()) std::filesystem::create_directories(prefix.parent_path());
  json h;
  h["dims"] = params.dims;
  h["activation"] = std::string(to_string(params.activation));
  h["aggregation"] = std::string(to_string(params.aggregation));
  h["seed"] = params.seed;
  h["layers"] = params.num_layers();
  h["dtype"] = "float32-le";
  h["layout"] = "row-major";
  std::ofstream header(prefix.string() + ".json");
  header << h.dump(2) << '\n';
  std::ofstream blob(prefix.string() + ".bin", std::ios::binary);
  for (const auto& w : params.weights) {
    std::vector<float> flat;
    flat.reserve(static_cast<std::size_t>(w.size()));
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) flat.push_back(static_cast<float>(w(r, c)));
    binary::write_blob<float>(blob, flat);
  }
  if (!header || !blob) throw IoError("failed writing encoder " + prefix.string());
}

EncoderParams read_encoder(const std::filesystem::path& prefix) {
  const auto header_path = prefix.string() + ".json";
  std::ifstream header(header_path);
  if (!header) throw MissingArtifactError("encoder", header_path);
  std::ifstream blob(prefix.string() + ".bin", std::ios::binary);
  if (!blob) throw MissingArtifactError("encoder weights", prefix.string() + ".bin");
  EncoderParams p;
  try {
    const auto h = json::parse(header);
    p.dims = h.at("dims").get<std::vector<std::size_t>>();
    p.activation = parse_activation(h.at("activation").get<std::string>());
    p.aggregation = parse_aggregation(h.at("aggregation").get<std::string>());
    p.seed = h.at("seed").get<std::uint64_t>();
  } catch (const json::exception& ex) {
    throw FormatError("corrupt encoder header " + header_path + ": " + ex.what());
  }
  if (p.dims.size() < 2) throw FormatError("encoder header has fewer than two dimensions");
  for (std::size_t l = 0; l + 1 < p.dims.size(); ++l) {
    const auto flat = binary::read_blob<float>(blob, p.dims[l + 1] * p.dims[l]);
    MatrixXd w(p.dims[l + 1], p.dims[l]);
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = static_cast<double>(flat[k++]);
    p.weights.push_back(std::move(w));
  }
  p.validate();
  return p;
}

void write_loss_trace(const std::vector<double>& trace, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "epoch,loss\n";
  for (std::size_t i = 0; i < trace.size(); ++i) out << (i + 1) << ',' << fmt::format("{:.17g}", trace[i]) << '\n';
}

}  // namespace provbind
