#pragma once

// Fusion of expert outputs, pairwise weight alignment, cross-space distance
// and the Fermi-Dirac edge decoder.

#include <cmath>
#include <span>
#include <vector>

#include "graphmore/diffcore.hpp"
#include "graphmore/manifold.hpp"

namespace graphmore {

struct FermiDirac {
  double r = 2.0;
  double t = 1.0;
};

namespace mixture {

// --- value level -----------------------------------------------------------

/// softmax((w_u * w_v) / tau), elementwise product.
inline std::vector<double> align_weights(std::span<const double> wu, std::span<const double> wv, double tau = 1.0) {
  if (wu.size() != wv.size()) throw UsageError("align_weights: length mismatch");
  if (!(tau > 0.0)) throw UsageError("align_weights: temperature must be positive");
  std::vector<double> out(wu.size());
  double mx = -INFINITY;
  for (std::size_t k = 0; k < out.size(); ++k) mx = std::max(mx, out[k] = wu[k] * wv[k] / tau);
  double z = 0.0;
  for (auto& v : out) z += (v = std::exp(v - mx));
  for (auto& v : out) v /= z;
  return out;
}

/// sum_k aligned[k] * per_expert_sq[k].
inline double combine_distances(std::span<const double> aligned, std::span<const double> per_expert_sq) {
  double s = 0.0;
  for (std::size_t k = 0; k < aligned.size(); ++k) s += aligned[k] * per_expert_sq[k];
  return s;
}

inline double edge_probability(double d2, const FermiDirac& fd) {
  if (!(fd.t > 0.0)) throw UsageError("edge_probability: temperature must be positive");
  const double x = (d2 - fd.r) / fd.t;
  if (x > 0.0) {
    const double e = std::exp(-x);
    return e / (1.0 + e);
  }
  return 1.0 / (std::exp(x) + 1.0);
}

/// Evaluated expert outputs and gating weights for value-level queries.
struct EmbeddingSnapshot {
  std::vector<Matrix> outputs;       // K matrices, N x d_out
  std::vector<ManifoldSpace> spaces;  // K spaces
  Matrix weights;                     // N x K
  double tau = 1.0;

  std::size_t n_nodes() const { return weights.rows; }
  std::size_t n_experts() const { return outputs.size(); }

  double distance_sq(std::size_t u, std::size_t v) const {
    const auto aligned = align_weights(weights.row_span(u), weights.row_span(v), tau);
    double s = 0.0;
    for (std::size_t k = 0; k < outputs.size(); ++k) {
      const double d = manifold::dist(outputs[k].row_span(u), outputs[k].row_span(v), spaces[k]);
      s += aligned[k] * d * d;
    }
    return s;
  }
};

// --- tape level ------------------------------------------------------------

/// Segment k of every node: W[:,k] (x)_k Z_k.
inline std::vector<Var> mix_embeddings(const std::vector<Var>& outputs, const std::vector<Var>& kappas,
                                       const Var& weights) {
  if (outputs.size() != kappas.size() || outputs.size() != weights.cols())
    throw UsageError("mix_embeddings: expert count mismatch");
  std::vector<Var> segments;
  for (std::size_t k = 0; k < outputs.size(); ++k)
    segments.push_back(manifold::tape::kappa_scale(ad::select_col(weights, k), outputs[k], kappas[k]));
  return segments;
}

/// Aligned weights for each pair, P x K.
inline Var align_weights(const Var& weights, std::span<const std::size_t> first, std::span<const std::size_t> second,
                         double tau = 1.0) {
  if (!(tau > 0.0)) throw UsageError("align_weights: temperature must be positive");
  Var wu = ad::gather_rows(weights, {first.begin(), first.end()});
  Var wv = ad::gather_rows(weights, {second.begin(), second.end()});
  Var prod = ad::mul(wu, wv);
  return ad::softmax_rows(tau == 1.0 ? prod : ad::scale(prod, 1.0 / tau));
}

/// sum_k aligned[:,k] * d_k^2(Z_k[first], Z_k[second]), P x 1.
inline Var pairwise_distance_sq(const std::vector<Var>& outputs, const std::vector<Var>& kappas, const Var& aligned,
                                std::span<const std::size_t> first, std::span<const std::size_t> second) {
  if (outputs.size() != aligned.cols()) throw UsageError("pairwise_distance_sq: expert count mismatch");
  Var total;
  for (std::size_t k = 0; k < outputs.size(); ++k) {
    Var term = ad::mul(ad::select_col(aligned, k), manifold::tape::dist_sq_pairs(outputs[k], first, second, kappas[k]));
    total = total.valid() ? ad::add(total, term) : term;
  }
  return total;
}

/// 1 / (exp((d2 - r) / t) + 1).
inline Var edge_probability(const Var& d2, const FermiDirac& fd) {
  if (!(fd.t > 0.0)) throw UsageError("edge_probability: temperature must be positive");
  return ad::sigmoid(ad::scale(ad::add_const(d2, -fd.r), -1.0 / fd.t));
}

}  // namespace mixture
}  // namespace graphmore
