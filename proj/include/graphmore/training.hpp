#pragma once

// Losses, optimiser, the full model, and the training loop.
//
// Per epoch: run every expert, encode the cached topology subgraphs, gate,
// score task pairs and distortion pairs through aligned cross-space
// distances, and take one Adam step on  task loss + lambda * distortion.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "graphmore/config.hpp"
#include "graphmore/diffcore.hpp"
#include "graphmore/experts.hpp"
#include "graphmore/gating.hpp"
#include "graphmore/graph.hpp"
#include "graphmore/metrics.hpp"
#include "graphmore/mixture.hpp"
#include "graphmore/report.hpp"
#include "graphmore/split.hpp"
#include "graphmore/synthetic.hpp"

namespace graphmore {

class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// --- losses ----------------------------------------------------------------

/// mean |d2 / g^2 - 1| over the given pairs. Every hop count must be a
/// finite positive distance.
inline Var distortion_loss(const Var& d2, std::span<const double> hops) {
  if (hops.size() != d2.rows()) throw UsageError("distortion_loss: pair count mismatch");
  if (hops.empty()) throw UsageError("distortion_loss: no pairs");
  Matrix inv(hops.size(), 1);
  for (std::size_t p = 0; p < hops.size(); ++p) {
    if (!(hops[p] > 0.0) || !std::isfinite(hops[p]))
      throw UsageError("distortion_loss: pair with zero or unreachable graph distance");
    inv.data[p] = 1.0 / (hops[p] * hops[p]);
  }
  Var ratio = ad::mul(d2, d2.tape()->constant(std::move(inv)));
  return ad::mean_all(ad::abs(ad::add_const(ratio, -1.0)));
}

inline constexpr double kProbabilityFloor = 1e-12;

/// Mean binary cross-entropy of probabilities against 0/1 labels.
inline Var binary_cross_entropy(const Var& prob, std::span<const int> labels) {
  if (labels.size() != prob.rows()) throw UsageError("binary_cross_entropy: label count mismatch");
  Tape& t = *prob.tape();
  Var p = ad::clamp_max(ad::clamp_min(prob, kProbabilityFloor), 1.0 - kProbabilityFloor);
  Matrix pos(labels.size(), 1), neg(labels.size(), 1);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    pos.data[i] = labels[i] == 1 ? 1.0 : 0.0;
    neg.data[i] = 1.0 - pos.data[i];
  }
  Var ll = ad::add(ad::mul(t.constant(std::move(pos)), ad::log(p)),
                   ad::mul(t.constant(std::move(neg)), ad::log(ad::add_const(ad::neg(p), 1.0))));
  return ad::neg(ad::mean_all(ll));
}

/// Binary cross-entropy of Fermi-Dirac scores: positives labelled 1, negatives 0.
inline Var link_prediction_loss(const Var& d2_pos, const Var& d2_neg, const FermiDirac& fd) {
  if (d2_pos.rows() == 0 || d2_neg.rows() == 0) throw UsageError("link_prediction_loss: empty pair set");
  Var p = ad::clamp_max(ad::clamp_min(mixture::edge_probability(d2_pos, fd), kProbabilityFloor), 1.0 - kProbabilityFloor);
  Var q = ad::clamp_max(ad::clamp_min(mixture::edge_probability(d2_neg, fd), kProbabilityFloor), 1.0 - kProbabilityFloor);
  Var ll = ad::add(ad::sum_all(ad::log(p)), ad::sum_all(ad::log(ad::add_const(ad::neg(q), 1.0))));
  return ad::scale(ll, -1.0 / static_cast<double>(d2_pos.rows() + d2_neg.rows()));
}

/// Mean cross-entropy of row-wise softmax(logits) at the given rows.
inline Var node_classification_loss(const Var& logits, std::span<const int> labels, std::span<const std::size_t> rows) {
  if (rows.empty()) throw UsageError("node_classification_loss: no training nodes");
  const std::size_t classes = logits.cols();
  Matrix onehot(rows.size(), classes, 0.0);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const int y = labels[rows[i]];
    if (y < 0 || static_cast<std::size_t>(y) >= classes)
      throw UsageError("node_classification_loss: missing or out-of-range label on node " + std::to_string(rows[i]));
    onehot(i, static_cast<std::size_t>(y)) = 1.0;
  }
  Var probs = ad::gather_rows(ad::softmax_rows(logits), {rows.begin(), rows.end()});
  Var p_true = ad::dot_rows(probs, logits.tape()->constant(std::move(onehot)));
  return ad::neg(ad::mean_all(ad::log(ad::clamp_min(p_true, kProbabilityFloor))));
}

/// task + lambda * distortion.
inline Var total_loss(const Var& task, const Var& distortion, double lambda) {
  return ad::add(task, ad::scale(distortion, lambda));
}

// --- optimiser -------------------------------------------------------------

/// Adam with bias correction and decoupled weight decay on weight matrices.
/// Box constraints on parameters are re-applied after each step.
class Adam {
 public:
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void step(const std::vector<Parameter*>& params, const GradientMap& grads, double lr, double weight_decay) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
    for (Parameter* p : params) {
      if (!p->trainable) continue;
      auto it = grads.find(p->name);
      Slot& s = slots_.try_emplace(p->name, Slot{Matrix(p->value.rows, p->value.cols), Matrix(p->value.rows, p->value.cols)})
                    .first->second;
      if (it != grads.end()) {
        if (!it->second.same_shape(p->value)) throw UsageError("Adam: gradient shape mismatch for " + p->name);
        bool finite = true;
        for (double g : it->second.data) finite = finite && std::isfinite(g);
        if (!finite) {
          ++skipped_;
          log().warn("Adam: non-finite gradient for {}, step skipped", p->name);
          continue;
        }
        for (std::size_t k = 0; k < p->value.size(); ++k) {
          const double g = it->second.data[k];
          s.m.data[k] = beta1 * s.m.data[k] + (1.0 - beta1) * g;
          s.v.data[k] = beta2 * s.v.data[k] + (1.0 - beta2) * g * g;
        }
      }
      for (std::size_t k = 0; k < p->value.size(); ++k) {
        double& x = p->value.data[k];
        const double mhat = s.m.data[k] / c1;
        const double vhat = s.v.data[k] / c2;
        x -= lr * mhat / (std::sqrt(vhat) + eps);
        if (p->kind == ParamKind::weight) x -= lr * weight_decay * x;
        x = std::clamp(x, p->lower, p->upper);
      }
    }
  }

  std::size_t steps() const { return t_; }
  std::size_t skipped() const { return skipped_; }

  /// First/second moment accumulators for a parameter, if it has been stepped.
  std::optional<std::pair<Matrix, Matrix>> moments(const std::string& name) const {
    auto it = slots_.find(name);
    if (it == slots_.end()) return std::nullopt;
    return std::make_pair(it->second.m, it->second.v);
  }

 private:
  struct Slot {
    Matrix m, v;
  };
  std::map<std::string, Slot> slots_;
  std::size_t t_ = 0;
  std::size_t skipped_ = 0;
};

// --- distortion pair sampling ----------------------------------------------

struct PairBatch {
  std::vector<std::size_t> first, second;
  std::vector<double> hops;
  std::size_t size() const { return first.size(); }
};

/// Pairs for the distortion loss. When N^2 fits the budget every ordered
/// pair in a common component is used; otherwise pairs are landmark sources
/// (BFS cached once) times uniform targets in the same component.
class DistortionPairSampler {
 public:
  DistortionPairSampler() = default;

  DistortionPairSampler(const Graph& g, std::size_t budget, std::size_t landmarks, std::uint64_t seed)
      : budget_(budget) {
    const std::size_t n = g.n_nodes();
    std::size_t n_comp = 0;
    comp_ = connected_components(g, &n_comp);
    members_.assign(n_comp, {});
    for (NodeId v = 0; v < n; ++v) members_[comp_[v]].push_back(v);
    std::vector<NodeId> eligible;
    for (NodeId v = 0; v < n; ++v)
      if (members_[comp_[v]].size() >= 2) eligible.push_back(v);
    full_ = n * n <= budget;
    if (full_) {
      for (NodeId s : eligible) {
        const auto d = bfs_from(g, s);
        for (NodeId t = 0; t < n; ++t) {
          if (t == s || d[t] == kUnreachable) continue;
          all_.first.push_back(s);
          all_.second.push_back(t);
          all_.hops.push_back(d[t]);
        }
      }
      return;
    }
    std::mt19937_64 rng(seed);
    if (landmarks < eligible.size()) {
      std::shuffle(eligible.begin(), eligible.end(), rng);
      eligible.resize(landmarks);
      std::sort(eligible.begin(), eligible.end());
    }
    landmarks_ = eligible;
    for (NodeId s : landmarks_) rows_.push_back(bfs_from(g, s));
  }

  bool full_mode() const { return full_; }
  bool empty() const { return full_ ? all_.size() == 0 : landmarks_.empty(); }
  const std::vector<NodeId>& landmarks() const { return landmarks_; }

  PairBatch sample(std::mt19937_64& rng) const {
    if (full_ || landmarks_.empty()) return all_;
    PairBatch b;
    b.first.reserve(budget_);
    b.second.reserve(budget_);
    b.hops.reserve(budget_);
    std::uniform_int_distribution<std::size_t> pick_landmark(0, landmarks_.size() - 1);
    for (std::size_t p = 0; p < budget_; ++p) {
      const std::size_t li = pick_landmark(rng);
      const NodeId s = landmarks_[li];
      const auto& m = members_[comp_[s]];
      std::uniform_int_distribution<std::size_t> pick(0, m.size() - 2);
      std::size_t j = pick(rng);
      if (m[j] >= s) ++j;
      b.first.push_back(s);
      b.second.push_back(m[j]);
      b.hops.push_back(rows_[li][m[j]]);
    }
    return b;
  }

 private:
  std::size_t budget_ = 0;
  bool full_ = false;
  std::vector<std::size_t> comp_;
  std::vector<std::vector<NodeId>> members_;
  std::vector<NodeId> landmarks_;
  std::vector<std::vector<std::uint32_t>> rows_;
  PairBatch all_;
};

// --- model -----------------------------------------------------------------

struct ModelForward {
  std::vector<Var> outputs;
  std::vector<Var> kappas;
  Var weights;
};

/// Expert bank + topology gating + (for node classification) a two-layer
/// mean-aggregation head over the log-mapped mixed embedding.
class MixtureModel {
 public:
  MixtureModel() = default;

  MixtureModel(const TrainConfig& cfg, std::size_t d_in, std::size_t d_out, std::size_t n_classes)
      : d_in_(d_in), d_out_(d_out), n_classes_(n_classes) {
    experts_ = ExpertBank::create(cfg.init_curvatures, d_in, cfg.d_h, d_out, cfg.seed);
    gating_ = GatingNetwork(cfg.radii.size(), cfg.d_t, cfg.n_experts(), cfg.seed + 1000);
    if (n_classes > 0) {
      std::mt19937_64 rng(cfg.seed + 2000);
      head_.push_back(make_linear("head/layer_1", cfg.n_experts() * d_out, cfg.d_h, rng));
      head_.push_back(make_linear("head/layer_2", cfg.d_h, n_classes, rng));
    }
  }

  ExpertBank& experts() { return experts_; }
  const ExpertBank& experts() const { return experts_; }
  GatingNetwork& gating() { return gating_; }
  std::size_t d_in() const { return d_in_; }
  std::size_t d_out() const { return d_out_; }
  std::size_t n_classes() const { return n_classes_; }

  ModelForward forward(Tape& t, const Matrix& x, const RowSets& neighborhoods, const TopologyBatch& topology) {
    ModelForward f;
    Var xv = t.constant(x);
    for (auto& e : experts_) {
      f.kappas.push_back(e.kappa_var(t));
      f.outputs.push_back(e.forward(t, xv, neighborhoods, f.kappas.back()));
    }
    f.weights = gating_.forward(t, topology);
    return f;
  }

  /// Class logits from the mixed embedding, N x C.
  Var classify(Tape& t, const ModelForward& f, const RowSets& neighborhoods) {
    if (head_.empty()) throw UsageError("classify: model has no classification head");
    auto segments = mixture::mix_embeddings(f.outputs, f.kappas, f.weights);
    std::vector<Var> tangent;
    for (std::size_t k = 0; k < segments.size(); ++k) tangent.push_back(manifold::tape::log0(segments[k], f.kappas[k]));
    Var h = ad::concat_cols(tangent);
    h = ad::relu(head_[0].apply(t, ad::mean_rows(h, neighborhoods)));
    return head_[1].apply(t, ad::mean_rows(h, neighborhoods));
  }

  std::vector<Parameter*> parameters() {
    auto out = experts_.parameters();
    for (auto* p : gating_.parameters()) out.push_back(p);
    for (auto& l : head_) {
      out.push_back(&l.weight);
      out.push_back(&l.bias);
    }
    return out;
  }

  std::map<std::string, Matrix> snapshot_parameters() {
    std::map<std::string, Matrix> out;
    for (auto* p : parameters()) out[p->name] = p->value;
    return out;
  }

  void restore_parameters(const std::map<std::string, Matrix>& values) {
    for (auto* p : parameters()) {
      auto it = values.find(p->name);
      if (it == values.end()) throw CheckpointError("missing parameter " + p->name);
      if (!it->second.same_shape(p->value)) throw CheckpointError("shape mismatch for parameter " + p->name);
      p->value = it->second;
    }
  }

 private:
  std::size_t d_in_ = 0, d_out_ = 0, n_classes_ = 0;
  ExpertBank experts_;
  GatingNetwork gating_;
  std::vector<LinearLayer> head_;
};

// --- checkpoint ------------------------------------------------------------

inline constexpr const char* kCheckpointFormat = "graphmore-checkpoint";
inline constexpr int kCheckpointVersion = 1;

inline nlohmann::json checkpoint_json(MixtureModel& model, const TrainConfig& cfg, std::size_t n_nodes) {
  nlohmann::json j;
  j["format"] = kCheckpointFormat;
  j["version"] = kCheckpointVersion;
  j["config"] = config_json(cfg);
  j["n_nodes"] = n_nodes;
  j["d_in"] = model.d_in();
  j["d_out"] = model.d_out();
  j["n_classes"] = model.n_classes();
  nlohmann::json params = nlohmann::json::object();
  for (auto* p : model.parameters())
    params[p->name] = {{"shape", {p->value.rows, p->value.cols}}, {"values", p->value.data}};
  j["params"] = params;
  return j;
}

struct LoadedCheckpoint {
  TrainConfig config;
  std::size_t n_nodes = 0;
  MixtureModel model;
};

inline LoadedCheckpoint checkpoint_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != kCheckpointFormat) throw CheckpointError("not a graphmore checkpoint");
    if (j.at("version").get<int>() != kCheckpointVersion)
      throw CheckpointError("checkpoint version " + std::to_string(j.at("version").get<int>()) + " is not supported");
    LoadedCheckpoint c;
    c.config = config_from_json(j.at("config"));
    c.n_nodes = j.at("n_nodes").get<std::size_t>();
    c.model = MixtureModel(c.config, j.at("d_in").get<std::size_t>(), j.at("d_out").get<std::size_t>(),
                           j.at("n_classes").get<std::size_t>());
    std::map<std::string, Matrix> values;
    for (const auto& [name, entry] : j.at("params").items()) {
      const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
      if (shape.size() != 2) throw CheckpointError("bad shape for " + name);
      values[name] = Matrix(shape[0], shape[1], entry.at("values").get<std::vector<double>>());
    }
    c.model.restore_parameters(values);
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
  } catch (const UsageError& e) {
    throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("checkpoint config: ") + e.what());
  }
}

inline void save_checkpoint(MixtureModel& model, const TrainConfig& cfg, std::size_t n_nodes,
                            const std::filesystem::path& path) {
  write_text(path, checkpoint_json(model, cfg, n_nodes).dump() + "\n");
}

inline LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_text(path);
  } catch (const ReportError& e) {
    throw CheckpointError(e.what());
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
  return checkpoint_from_json(j);
}

// --- data preparation ------------------------------------------------------

struct NodeSplit {
  std::vector<std::size_t> train, valid, test;
};

/// Shuffles labelled nodes and cuts them by ratio (valid/test rounded, train the rest).
inline NodeSplit split_nodes(const std::vector<int>& labels, std::array<double, 3> ratios, std::uint64_t seed) {
  std::vector<std::size_t> labelled;
  for (std::size_t v = 0; v < labels.size(); ++v)
    if (labels[v] >= 0) labelled.push_back(v);
  std::mt19937_64 rng(seed);
  std::shuffle(labelled.begin(), labelled.end(), rng);
  const auto m = static_cast<double>(labelled.size());
  const auto n_valid = static_cast<std::size_t>(std::llround(ratios[1] * m));
  const auto n_test = std::min(labelled.size() - n_valid, static_cast<std::size_t>(std::llround(ratios[2] * m)));
  NodeSplit s;
  s.valid.assign(labelled.begin(), labelled.begin() + n_valid);
  s.test.assign(labelled.begin() + n_valid, labelled.begin() + n_valid + n_test);
  s.train.assign(labelled.begin() + n_valid + n_test, labelled.end());
  return s;
}

/// Everything derived once from the input graph before the epoch loop.
struct PreparedData {
  const Graph* graph = nullptr;  // evaluation graph (all edges)
  Graph message;                 // graph used for message passing, sampling and distortion
  Matrix features;
  RowSets neighborhoods;
  TopologyBatch topology;
  DistortionPairSampler pairs;
  EdgeSplit edges;  // link prediction
  NodeSplit nodes;  // node classification
  std::size_t n_classes = 0;
};

inline constexpr std::size_t kDefaultFeatureDim = 32;

inline PreparedData prepare_data(const Graph& g, const TrainConfig& cfg) {
  if (g.n_nodes() == 0) throw UsageError("train: empty graph");
  PreparedData d;
  d.graph = &g;
  if (cfg.task == Task::link_prediction) {
    d.edges = split_edges(g, cfg.split, cfg.seed);
    if (d.edges.valid_pos.empty() || d.edges.test_pos.empty())
      throw UsageError("train: graph too small for a validation and test edge split");
    d.message = g.with_edges(d.edges.train_pos);
  } else {
    if (!g.labels()) throw UsageError("train: node classification requires labels");
    d.nodes = split_nodes(*g.labels(), cfg.split, cfg.seed);
    if (d.nodes.train.empty()) throw UsageError("train: no labelled training nodes");
    int maxc = -1;
    for (int y : *g.labels()) maxc = std::max(maxc, y);
    d.n_classes = static_cast<std::size_t>(maxc + 1);
    d.message = g;
  }
  d.features = g.features() ? *g.features() : structural_random_features(g, kDefaultFeatureDim, cfg.seed);
  if (cfg.d_in && cfg.d_in != d.features.cols)
    throw ConfigError("dims.d_in = " + std::to_string(cfg.d_in) + " but features have " +
                      std::to_string(d.features.cols) + " columns");
  d.neighborhoods = closed_neighborhoods(d.message);
  d.topology = TopologyBatch::sample(d.message, cfg.radii);
  d.pairs = DistortionPairSampler(d.message, cfg.pair_budget, cfg.landmarks, cfg.seed + 17);
  return d;
}

// --- evaluation ------------------------------------------------------------

/// Forward values without gradients.
inline mixture::EmbeddingSnapshot embed(MixtureModel& model, const PreparedData& data, double tau) {
  Tape t;
  auto f = model.forward(t, data.features, data.neighborhoods, data.topology);
  mixture::EmbeddingSnapshot s;
  for (std::size_t k = 0; k < f.outputs.size(); ++k) {
    s.outputs.push_back(f.outputs[k].value());
    s.spaces.push_back({f.kappas[k].item()});
  }
  s.weights = f.weights.value();
  s.tau = tau;
  return s;
}

inline std::vector<int> predict_classes(MixtureModel& model, const PreparedData& data) {
  Tape t;
  auto f = model.forward(t, data.features, data.neighborhoods, data.topology);
  const Matrix& logits = model.classify(t, f, data.neighborhoods).value();
  std::vector<int> pred(logits.rows);
  for (std::size_t r = 0; r < logits.rows; ++r) {
    auto row = logits.row_span(r);
    pred[r] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return pred;
}

/// Ranking scores of positive then negative pairs, with labels. The score is
/// the decoder logit (r - d^2) / t: it orders pairs exactly as the edge
/// probability does but does not saturate to 0 for distant pairs.
inline std::pair<std::vector<double>, std::vector<int>> score_links(const mixture::EmbeddingSnapshot& s,
                                                                    const std::vector<Edge>& pos,
                                                                    const std::vector<Edge>& neg, const FermiDirac& fd) {
  std::vector<double> scores;
  std::vector<int> labels;
  auto logit = [&](NodeId u, NodeId v) { return (fd.r - s.distance_sq(u, v)) / fd.t; };
  for (auto [u, v] : pos) {
    scores.push_back(logit(u, v));
    labels.push_back(1);
  }
  for (auto [u, v] : neg) {
    scores.push_back(logit(u, v));
    labels.push_back(0);
  }
  return {scores, labels};
}

inline double validation_metric(MixtureModel& model, const PreparedData& data, const TrainConfig& cfg) {
  if (cfg.task == Task::link_prediction) {
    const auto s = embed(model, data, cfg.tau);
    auto [scores, labels] = score_links(s, data.edges.valid_pos, data.edges.valid_neg, cfg.decoder);
    return auc(scores, labels);
  }
  const auto pred = predict_classes(model, data);
  const auto& y = *data.graph->labels();
  const auto& rows = data.nodes.valid.empty() ? data.nodes.train : data.nodes.valid;
  std::vector<int> p, l;
  for (auto v : rows) {
    p.push_back(pred[v]);
    l.push_back(y[v]);
  }
  return f1_scores(p, l).weighted;
}

/// Distortion pairs use the full-pair exact mode up to this many nodes.
inline constexpr std::size_t kExactDistortionMaxNodes = 2000;

inline PairMode default_pair_mode(std::size_t n_nodes) {
  return n_nodes <= kExactDistortionMaxNodes ? PairMode::full : PairMode::sampled;
}

/// Test-split metrics and average distortion against the training graph.
inline EvalReport evaluate_model(MixtureModel& model, const PreparedData& data, const TrainConfig& cfg, PairMode mode) {
  const Graph& g = *data.graph;
  EvalReport r;
  r.task = to_string(cfg.task);
  r.n_nodes = g.n_nodes();
  r.n_edges = g.n_edges();
  r.seed = cfg.seed;
  r.config = config_json(cfg);
  const auto s = embed(model, data, cfg.tau);
  if (cfg.task == Task::link_prediction) {
    auto [scores, labels] = score_links(s, data.edges.test_pos, data.edges.test_neg, cfg.decoder);
    r.auc = auc(scores, labels);
    r.ap = average_precision(scores, labels);
  } else {
    const auto pred = predict_classes(model, data);
    const auto& y = *g.labels();
    const auto& rows = data.nodes.test.empty() ? data.nodes.train : data.nodes.test;
    std::vector<int> p, l;
    for (auto v : rows) {
      p.push_back(pred[v]);
      l.push_back(y[v]);
    }
    const auto f = f1_scores(p, l);
    r.weighted_f1 = f.weighted;
    r.macro_f1 = f.macro;
    r.micro_f1 = f.micro;
  }
  PairDistanceFn fn = [&s](std::span<const std::size_t> a, std::span<const std::size_t> b) {
    std::vector<double> out(a.size());
    for (std::size_t p = 0; p < a.size(); ++p) out[p] = s.distance_sq(a[p], b[p]);
    return out;
  };
  const std::size_t threads = cfg.deterministic ? 1 : std::max<std::size_t>(1, cfg.threads);
  // Distances are scored against the graph the model trained on; for link
  // prediction that excludes held-out edges.
  const auto dist = average_distortion(data.message, fn, mode, cfg.pair_budget, cfg.seed + 31, threads);
  if (dist.disconnected) log().info("distortion: graph is disconnected, components weighted by size");
  if (mode == PairMode::sampled) log().info("distortion: sampled {} pairs", dist.pairs);
  r.avg_distortion = dist.mean;
  r.per_node_distortion = dist.per_node;
  return r;
}

// --- training loop ---------------------------------------------------------

struct StepLosses {
  double task = 0.0;
  double distortion = 0.0;
  double total = 0.0;
};

/// Builds the full objective for one step on `t`. Returns {task, distortion, total} nodes.
struct Objective {
  Var task, distortion, total;
};

inline Objective build_objective(Tape& t, MixtureModel& model, const PreparedData& data, const TrainConfig& cfg,
                                 const PairBatch& pairs, const std::vector<Edge>& pos, const std::vector<Edge>& neg) {
  auto f = model.forward(t, data.features, data.neighborhoods, data.topology);
  Objective o;
  if (cfg.task == Task::link_prediction) {
    std::vector<std::size_t> pu, pv, nu, nv;
    for (auto [u, v] : pos) {
      pu.push_back(u);
      pv.push_back(v);
    }
    for (auto [u, v] : neg) {
      nu.push_back(u);
      nv.push_back(v);
    }
    Var d2p = mixture::pairwise_distance_sq(f.outputs, f.kappas, mixture::align_weights(f.weights, pu, pv, cfg.tau), pu, pv);
    Var d2n = mixture::pairwise_distance_sq(f.outputs, f.kappas, mixture::align_weights(f.weights, nu, nv, cfg.tau), nu, nv);
    o.task = link_prediction_loss(d2p, d2n, cfg.decoder);
  } else {
    Var logits = model.classify(t, f, data.neighborhoods);
    o.task = node_classification_loss(logits, *data.graph->labels(), data.nodes.train);
  }
  if (pairs.size() > 0) {
    Var aligned = mixture::align_weights(f.weights, pairs.first, pairs.second, cfg.tau);
    Var d2 = mixture::pairwise_distance_sq(f.outputs, f.kappas, aligned, pairs.first, pairs.second);
    o.distortion = distortion_loss(d2, pairs.hops);
  } else {
    o.distortion = t.constant(0.0);
  }
  o.total = total_loss(o.task, o.distortion, cfg.lambda);
  return o;
}

struct TrainResult {
  MixtureModel model;
  std::vector<EpochLog> log;
  EvalReport report;
  std::size_t best_epoch = 0;
  std::size_t skipped_gradients = 0;
};

/// Early stopping never triggers before this epoch.
inline constexpr std::size_t kMinEpochs = 200;

struct TrainHooks {
  std::function<void(const EpochLog&)> on_epoch;
};

/// Runs the training loop. Topology subgraphs are sampled once up front;
/// characterisations and gating weights are recomputed every epoch. The
/// best-validation parameters are restored at the end. Throws
/// DivergenceError (with the partial result attached) on a non-finite loss.
class Trainer {
 public:
  Trainer(const Graph& g, TrainConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    data_ = prepare_data(g, cfg_);
    model_ = MixtureModel(cfg_, data_.features.cols, cfg_.resolved_d_out(g.n_nodes()), data_.n_classes);
    rng_.seed(cfg_.seed + 7);
  }

  const TrainConfig& config() const { return cfg_; }
  const PreparedData& data() const { return data_; }
  MixtureModel& model() { return model_; }
  const std::vector<EpochLog>& history() const { return log_; }
  std::size_t best_epoch() const { return best_epoch_; }
  std::size_t skipped_gradients() const { return adam_.skipped(); }

  /// One optimisation step; returns the losses evaluated before the update.
  StepLosses step() {
    PairBatch pairs = data_.pairs.sample(rng_);
    std::vector<Edge> neg;
    if (cfg_.task == Task::link_prediction) {
      std::set<std::uint64_t> exclude;
      neg = sample_non_edges(*data_.graph, data_.edges.train_pos.size(), rng_, exclude);
    }
    Tape t;
    Objective o = build_objective(t, model_, data_, cfg_, pairs, data_.edges.train_pos, neg);
    StepLosses l{o.task.item(), o.distortion.item(), o.total.item()};
    if (!std::isfinite(l.total)) return l;
    auto params = model_.parameters();
    GradientMap grads = t.backward(o.total);
    adam_.step(params, grads, cfg_.lr, cfg_.weight_decay);
    return l;
  }

  void run(const TrainHooks& hooks = {}) {
    double best = -INFINITY;
    std::size_t since_best = 0;
    auto best_params = model_.snapshot_parameters();
    for (std::size_t epoch = 1; epoch <= cfg_.epochs; ++epoch) {
      const auto last_good = model_.snapshot_parameters();
      StepLosses l = step();
      if (!std::isfinite(l.total)) {
        model_.restore_parameters(log_.empty() ? last_good : best_params);
        throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch));
      }
      const double metric = validation_metric(model_, data_, cfg_);
      EpochLog row{epoch, l.task, l.distortion, metric};
      log_.push_back(row);
      if (hooks.on_epoch) hooks.on_epoch(row);
      if (metric > best) {
        best = metric;
        best_epoch_ = epoch;
        best_params = model_.snapshot_parameters();
        since_best = 0;
      } else if (metric == best) {
        // ties keep the later, longer-trained parameters but do not reset patience
        best_epoch_ = epoch;
        best_params = model_.snapshot_parameters();
        ++since_best;
      } else {
        ++since_best;
      }
      if (since_best >= cfg_.patience && epoch >= kMinEpochs) {
        log().info("early stop at epoch {} (best {} at epoch {})", epoch, best, best_epoch_);
        break;
      }
    }
    model_.restore_parameters(best_params);
  }

  EvalReport evaluate(PairMode mode) {
    EvalReport r = evaluate_model(model_, data_, cfg_, mode);
    r.curves = log_;
    return r;
  }

 private:
  TrainConfig cfg_;
  PreparedData data_;
  MixtureModel model_;
  Adam adam_;
  std::mt19937_64 rng_;
  std::vector<EpochLog> log_;
  std::size_t best_epoch_ = 0;
};

}  // namespace graphmore
