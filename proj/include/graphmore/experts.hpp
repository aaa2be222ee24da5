#pragma once

// Riemannian GNN experts. Each expert lives in its own kappa-stereographic
// space and runs two message-passing layers:
//
//   h0      = exp0(X W_in + b_in)
//   h(l+1)  = exp0( act( mean_{v in N(u) + u} log0(h_v(l)) W(l) + b(l) ) )
//
// with act = ReLU on layer 1 and identity on layer 2. All weights and biases
// are Euclidean arrays in the origin tangent space; only kappa is special.

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "graphmore/diffcore.hpp"
#include "graphmore/graph.hpp"
#include "graphmore/manifold.hpp"

namespace graphmore {

/// Aggregation sets N(u) + {u} for every node, in ascending id order.
inline RowSets closed_neighborhoods(const Graph& g) {
  RowSets sets;
  sets.offsets.reserve(g.n_nodes() + 1);
  std::vector<std::size_t> members;
  for (NodeId u = 0; u < g.n_nodes(); ++u) {
    members.assign(g.neighbors(u).begin(), g.neighbors(u).end());
    members.insert(std::upper_bound(members.begin(), members.end(), u), u);
    sets.push(members);
  }
  return sets;
}

/// Glorot-uniform matrix in +-sqrt(6 / (fan_in + fan_out)).
inline Matrix glorot_uniform(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> u(-a, a);
  Matrix w(fan_in, fan_out);
  for (auto& v : w.data) v = u(rng);
  return w;
}

/// Admissible curvature range for a trainable kappa initialised at kappa0:
/// within 0.5 of kappa0 and never crossing zero.
inline std::pair<double, double> curvature_bounds(double kappa0) {
  constexpr double half_width = 0.5;
  constexpr double min_magnitude = 1e-3;
  if (kappa0 < 0.0) return {kappa0 - half_width, std::min(kappa0 + half_width, -min_magnitude)};
  if (kappa0 > 0.0) return {std::max(kappa0 - half_width, min_magnitude), kappa0 + half_width};
  return {0.0, 0.0};
}

struct LinearLayer {
  Parameter weight;
  Parameter bias;

  Var apply(Tape& t, const Var& x) { return ad::add_row(ad::matmul(x, t.param(weight)), t.param(bias)); }
};

inline LinearLayer make_linear(const std::string& prefix, std::size_t in, std::size_t out, std::mt19937_64& rng) {
  return {Parameter{prefix + "/W", glorot_uniform(in, out, rng), ParamKind::weight},
          Parameter{prefix + "/b", Matrix(1, out, 0.0), ParamKind::bias}};
}

class RiemannianExpert {
 public:
  static constexpr std::size_t kLayers = 2;

  RiemannianExpert(std::string name, double kappa0, std::size_t d_in, std::size_t d_h, std::size_t d_out,
                   std::mt19937_64& rng)
      : name_(std::move(name)), kappa0_(kappa0) {
    const auto [lo, hi] = curvature_bounds(kappa0);
    kappa_ = Parameter{name_ + "/kappa", Matrix::scalar(kappa0), ParamKind::curvature, kappa0 != 0.0, lo, hi};
    input_ = make_linear(name_ + "/input", d_in, d_h, rng);
    layers_.push_back(make_linear(name_ + "/layer_1", d_h, d_h, rng));
    layers_.push_back(make_linear(name_ + "/layer_2", d_h, d_out, rng));
  }

  const std::string& name() const { return name_; }
  double initial_kappa() const { return kappa0_; }
  double kappa() const { return kappa_.value.item(); }
  ManifoldSpace space() const { return {kappa()}; }
  std::size_t d_out() const { return layers_.back().weight.value.cols; }

  Var kappa_var(Tape& t) { return t.param(kappa_); }

  /// h0 = exp0(X W_in + b_in), projected to the domain.
  Var project_features(Tape& t, const Var& x, const Var& kappa) {
    return manifold::tape::exp0(input_.apply(t, x), kappa);
  }

  /// Per-node output points, N x d_out.
  Var forward(Tape& t, const Var& x, const RowSets& neighborhoods) {
    return forward(t, x, neighborhoods, kappa_var(t));
  }

  /// As above with the curvature node supplied by the caller.
  Var forward(Tape& t, const Var& x, const RowSets& neighborhoods, const Var& kappa) {
    Var h = project_features(t, x, kappa);
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      Var agg = ad::mean_rows(manifold::tape::log0(h, kappa), neighborhoods);
      Var pre = layers_[l].apply(t, agg);
      if (l + 1 < layers_.size()) pre = ad::relu(pre);
      h = manifold::tape::exp0(pre, kappa);
    }
    return h;
  }

  std::vector<Parameter*> parameters() {
    std::vector<Parameter*> out{&kappa_, &input_.weight, &input_.bias};
    for (auto& l : layers_) {
      out.push_back(&l.weight);
      out.push_back(&l.bias);
    }
    return out;
  }

  LinearLayer& input_layer() { return input_; }
  LinearLayer& layer(std::size_t l) { return layers_.at(l); }
  Parameter& kappa_param() { return kappa_; }

 private:
  std::string name_;
  double kappa0_;
  Parameter kappa_;
  LinearLayer input_;
  std::vector<LinearLayer> layers_;
};

class ExpertBank {
 public:
  ExpertBank() = default;

  /// One expert per initial curvature; expert k draws its weights from a
  /// generator seeded with seed + k.
  static ExpertBank create(const std::vector<double>& init_curvatures, std::size_t d_in, std::size_t d_h,
                           std::size_t d_out, std::uint64_t seed) {
    if (init_curvatures.empty()) throw UsageError("init_expert_bank: need at least one expert");
    if (d_in == 0 || d_h == 0 || d_out == 0) throw UsageError("init_expert_bank: dimensions must be positive");
    ExpertBank bank;
    for (std::size_t k = 0; k < init_curvatures.size(); ++k) {
      if (!std::isfinite(init_curvatures[k])) throw UsageError("init_expert_bank: curvature must be finite");
      std::mt19937_64 rng(seed + k);
      bank.experts_.emplace_back("expert_" + std::to_string(k), init_curvatures[k], d_in, d_h, d_out, rng);
    }
    return bank;
  }

  std::size_t size() const { return experts_.size(); }
  RiemannianExpert& operator[](std::size_t k) { return experts_[k]; }
  const RiemannianExpert& operator[](std::size_t k) const { return experts_[k]; }
  auto begin() { return experts_.begin(); }
  auto end() { return experts_.end(); }
  auto begin() const { return experts_.begin(); }
  auto end() const { return experts_.end(); }

  std::vector<Parameter*> parameters() {
    std::vector<Parameter*> out;
    for (auto& e : experts_)
      for (auto* p : e.parameters()) out.push_back(p);
    return out;
  }

 private:
  std::vector<RiemannianExpert> experts_;
};

}  // namespace graphmore
