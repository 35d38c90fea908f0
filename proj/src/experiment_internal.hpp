#pragma once

// Shared plumbing for the experiment runners: CSV formatting that matches the
// run-record writer, seed aggregation on CSV-rounded values (so the summary
// equals what anyone recomputes from the per-run files), directory handling
// and the worker fan-out.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "momentlab/experiments.hpp"
#include "momentlab/rectangular.hpp"
#include "momentlab/types.hpp"

namespace momentlab::detail {

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

// the value a reader of the CSV will see; aggregate these, not the raw doubles
inline double csv_value(double v) { return std::strtod(fmt(v).c_str(), nullptr); }

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
  std::size_t n = 0;
};

inline MeanStd aggregate(const std::vector<double>& raw) {
  MeanStd out;
  out.n = raw.size();
  if (raw.empty()) return out;
  double sum = 0.0;
  for (const double v : raw) sum += csv_value(v);
  out.mean = sum / double(out.n);
  if (out.n > 1) {
    double ss = 0.0;
    for (const double v : raw) {
      const double d = csv_value(v) - out.mean;
      ss += d * d;
    }
    out.std = std::sqrt(ss / double(out.n - 1));
  }
  return out;
}

struct ScalarRow {
  std::string metric;
  std::string item;
  double mean = 0.0;
  double std = 0.0;
  std::size_t n = 0;
};

inline ScalarRow scalar(const std::string& metric, const std::string& item,
                        const std::vector<double>& raw) {
  const MeanStd ms = aggregate(raw);
  return {metric, item, ms.mean, ms.std, ms.n};
}

inline ScalarRow scalar(const std::string& metric, const std::string& item, double value) {
  return {metric, item, csv_value(value), 0.0, 1};
}

void write_summary(const std::string& out_dir, const std::vector<ScalarRow>& rows);

std::ofstream open_csv(const std::string& path, const std::string& header);

inline std::string runs_dir(const ExperimentConfig& cfg) {
  const auto dir = std::filesystem::path(cfg.out_dir) / "runs";
  std::filesystem::create_directories(dir);
  return dir.string();
}

// Rectangular geometry from config keys: `geometry` picks the base preset and
// dim/a/b/mu1/mu2 override individual fields when nonempty.
RectangularParams rect_params_from(const ResolvedConfig& values);
std::vector<KeySpec> rect_geometry_keys(const char* geometry_default);

// Runs the tasks on `jobs` workers; rethrows the first failure. Tasks write
// to disjoint slots/files, so the schedule cannot change any output.
void run_parallel(Index jobs, const std::vector<std::function<void()>>& tasks);

// one training arm's curves: [seed][checkpoint], shared step grid
struct CurveData {
  std::vector<std::vector<double>> acc;
  std::vector<std::vector<double>> loss;
};

// curves.csv: arm,step,accuracy_mean,accuracy_std,loss_mean,loss_std,n_seeds
void write_curves(const std::string& out_dir, const std::vector<Index>& steps,
                  const std::vector<std::pair<std::string, CurveData>>& arms);

nlohmann::json run_rect_boundaries(const ExperimentConfig& cfg);
nlohmann::json run_rect_alignment(const ExperimentConfig& cfg);
nlohmann::json run_rect_clone_collapse(const ExperimentConfig& cfg);
nlohmann::json run_truncated_gf(const ExperimentConfig& cfg);
nlohmann::json run_correction_controls(const ExperimentConfig& cfg);
nlohmann::json run_finite_sample(const ExperimentConfig& cfg);
nlohmann::json run_mlp_clone_collapse(const ExperimentConfig& cfg);
nlohmann::json run_cifar10c_mixtures(const ExperimentConfig& cfg);

}  // namespace momentlab::detail
