#include <gtest/gtest.h>

#include "graphmore/report.hpp"
#include "support/oracles.hpp"

using namespace graphmore;

TEST(Curves, EmptyIsHeaderOnly) { EXPECT_EQ(curves_csv({}), "epoch,task_loss,distortion_loss,val_metric\n"); }

TEST(Report, SchemaKeys) {
  EvalReport r;
  r.task = "lp";
  r.auc = 0.9;
  auto j = r.to_json();
  for (const char* k : {"task", "auc", "ap", "weighted_f1", "macro_f1", "micro_f1", "avg_distortion", "n_nodes",
                        "n_edges", "seed", "config"})
    EXPECT_TRUE(j.contains(k)) << k;
  EXPECT_TRUE(j["ap"].is_null());
}

TEST(Report, ReEmitIsByteIdentical) {
  EvalReport r;
  r.task = "nc";
  r.weighted_f1 = 0.7;
  r.macro_f1 = 0.6;
  r.micro_f1 = 0.75;
  r.avg_distortion = 0.123456789;
  r.n_nodes = 3;
  r.per_node_distortion = {0.1, 0.2, 0.3};
  r.curves = {{1, 0.5, 0.25, 0.6}, {2, 0.4, 0.2, 0.7}};
  auto a = oracle::temp_dir("report_a"), b = oracle::temp_dir("report_b");
  emit_report(r, a);
  auto back = read_report(a / "report.json");
  back.per_node_distortion = r.per_node_distortion;
  back.curves = r.curves;
  emit_report(back, b);
  for (const char* f : {"report.json", "curves.csv", "per_node_distortion.csv"})
    EXPECT_EQ(oracle::read_file(a / f), oracle::read_file(b / f)) << f;
}

TEST(Report, MalformedThrows) {
  auto d = oracle::temp_dir("report_bad");
  oracle::write_file(d / "report.json", "{\"task\": \"lp\"}");
  EXPECT_THROW(read_report(d / "report.json"), ReportError);
}
