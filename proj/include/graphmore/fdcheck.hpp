#pragma once

// Central-difference gradient oracle for tape-built scalar functions.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "graphmore/diffcore.hpp"

namespace graphmore {

class FiniteDifferenceFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FdReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

/// Builds a scalar expression on a fresh tape. Must read parameters through
/// Tape::param so perturbations made by the checker are observed.
using ScalarBuilder = std::function<Var(Tape&)>;

/// Compares tape adjoints against central differences over every entry of
/// every listed parameter. Error per coordinate is
/// |analytic - numeric| / max(1, |analytic|).
inline FdReport finite_difference_check(const ScalarBuilder& build, const std::vector<Parameter*>& params,
                                        double h = 1e-5) {
  if (!(h > 0.0)) throw UsageError("finite_difference_check: step must be positive");
  GradientMap grads;
  {
    Tape tape;
    Var root = build(tape);
    grads = tape.backward(root);
  }
  auto eval = [&build]() {
    Tape tape;
    return build(tape).item();
  };
  FdReport report;
  for (Parameter* p : params) {
    if (!p->trainable) continue;
    auto it = grads.find(p->name);
    for (std::size_t k = 0; k < p->value.size(); ++k) {
      const double saved = p->value.data[k];
      p->value.data[k] = saved + h;
      const double up = eval();
      p->value.data[k] = saved - h;
      const double down = eval();
      p->value.data[k] = saved;
      if (!std::isfinite(up) || !std::isfinite(down))
        throw FiniteDifferenceFailure("finite_difference_check: non-finite value perturbing " + p->name + "[" +
                                      std::to_string(k) + "]");
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = it == grads.end() ? 0.0 : it->second.data[k];
      const double err = std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic));
      if (err > report.max_rel_error || report.worst_param.empty()) {
        if (err >= report.max_rel_error) {
          report.max_rel_error = err;
          report.worst_param = p->name;
          report.worst_index = k;
          report.analytic = analytic;
          report.numeric = numeric;
        }
      }
    }
  }
  return report;
}

}  // namespace graphmore
