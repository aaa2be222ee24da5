#pragma once

// Evaluation report and its on-disk files:
//   report.json              metrics, sizes, seed, config
//   curves.csv               per-epoch training curves
//   per_node_distortion.csv  node_id,distortion

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "graphmore/diffcore.hpp"

namespace graphmore {

class ReportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EpochLog {
  std::size_t epoch = 0;
  double task_loss = 0.0;
  double distortion_loss = 0.0;
  double val_metric = 0.0;
};

inline std::string format_real(double v) {
  std::ostringstream os;
  os << std::setprecision(12) << v;
  return os.str();
}

inline std::string curves_csv(const std::vector<EpochLog>& rows) {
  std::ostringstream os;
  os << "epoch,task_loss,distortion_loss,val_metric\n";
  for (const auto& r : rows)
    os << r.epoch << ',' << format_real(r.task_loss) << ',' << format_real(r.distortion_loss) << ','
       << format_real(r.val_metric) << '\n';
  return os.str();
}

struct EvalReport {
  std::string task;
  std::optional<double> auc, ap, weighted_f1, macro_f1, micro_f1;
  double avg_distortion = 0.0;
  std::size_t n_nodes = 0;
  std::size_t n_edges = 0;
  std::uint64_t seed = 0;
  nlohmann::json config = nlohmann::json::object();
  std::vector<double> per_node_distortion;
  std::vector<EpochLog> curves;

  nlohmann::json to_json() const {
    auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
    nlohmann::json j;
    j["task"] = task;
    j["auc"] = opt(auc);
    j["ap"] = opt(ap);
    j["weighted_f1"] = opt(weighted_f1);
    j["macro_f1"] = opt(macro_f1);
    j["micro_f1"] = opt(micro_f1);
    j["avg_distortion"] = avg_distortion;
    j["n_nodes"] = n_nodes;
    j["n_edges"] = n_edges;
    j["seed"] = seed;
    j["config"] = config;
    return j;
  }

  static EvalReport from_json(const nlohmann::json& j) {
    auto opt = [&](const char* k) -> std::optional<double> {
      if (!j.contains(k) || j.at(k).is_null()) return std::nullopt;
      return j.at(k).get<double>();
    };
    try {
      EvalReport r;
      r.task = j.at("task").get<std::string>();
      r.auc = opt("auc");
      r.ap = opt("ap");
      r.weighted_f1 = opt("weighted_f1");
      r.macro_f1 = opt("macro_f1");
      r.micro_f1 = opt("micro_f1");
      r.avg_distortion = j.at("avg_distortion").get<double>();
      r.n_nodes = j.at("n_nodes").get<std::size_t>();
      r.n_edges = j.at("n_edges").get<std::size_t>();
      r.seed = j.at("seed").get<std::uint64_t>();
      r.config = j.at("config");
      return r;
    } catch (const nlohmann::json::exception& e) {
      throw ReportError(std::string("malformed report: ") + e.what());
    }
  }

  bool same_metrics(const EvalReport& o) const { return to_json() == o.to_json(); }
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ReportError("cannot write " + path.string());
  out << text;
  if (!out) throw ReportError("write failed: " + path.string());
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ReportError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void emit_report(const EvalReport& report, const std::filesystem::path& run_dir) {
  std::error_code ec;
  std::filesystem::create_directories(run_dir, ec);
  if (ec) throw ReportError("cannot create " + run_dir.string() + ": " + ec.message());
  write_text(run_dir / "report.json", report.to_json().dump(2) + "\n");
  write_text(run_dir / "curves.csv", curves_csv(report.curves));
  std::ostringstream pn;
  pn << "node_id,distortion\n";
  for (std::size_t v = 0; v < report.per_node_distortion.size(); ++v)
    pn << v << ',' << format_real(report.per_node_distortion[v]) << '\n';
  write_text(run_dir / "per_node_distortion.csv", pn.str());
}

inline EvalReport read_report(const std::filesystem::path& path) {
  try {
    return EvalReport::from_json(nlohmann::json::parse(read_text(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw ReportError(path.string() + ": " + e.what());
  }
}

}  // namespace graphmore
