#pragma once

// Named experiments. Each one reproduces a complete study: it trains or
// integrates whatever the study needs across a seed list, writes one CSV per
// run plus a seed-aggregated summary.csv, and records the resolved
// configuration, its hash and the library version in manifest.json. Reruns
// with the same config and seeds reproduce every CSV byte for byte; wall
// clock times live only in the manifest.

#include <map>
#include <string>
#include <vector>

#include "momentlab/experiment_config.hpp"
#include "momentlab/types.hpp"

namespace momentlab {

inline constexpr const char* kMomentlabVersion = "0.1.0";

// Fixed registry: rect-boundaries, rect-alignment, rect-clone-collapse,
// truncated-gf, correction-controls, finite-sample, mlp-clone-collapse,
// cifar10c-mixtures.
const std::vector<std::string>& experiment_ids();
bool is_experiment_id(const std::string& id);

// Keys one experiment accepts, with defaults and one-line help.
const std::vector<KeySpec>& experiment_keys(const std::string& id);

struct ExperimentConfig {
  std::string id;
  ResolvedConfig values;
  std::string out_dir;
  Index jobs = 1;
};

// Loads the key=value file (optional: empty path keeps the defaults), applies
// command line overrides on top, and validates everything against the
// experiment's key list.
ExperimentConfig make_experiment_config(
    const std::string& id, const std::string& config_path, const std::string& out_dir,
    Index jobs = 1, const std::map<std::string, std::string>& overrides = {});

void run_experiment(const ExperimentConfig& cfg);

// Curve comparison over seeds: two arms agree at a checkpoint while
// |mean_a - mean_b| <= 3 * sqrt((sd_a^2 + sd_b^2)/2). Input is one accuracy
// series per seed, all on the same checkpoint grid. Returns the first
// checkpoint index that breaks the band, or -1 when the curves never part.
Index divergence_checkpoint(const std::vector<std::vector<double>>& arm_a,
                            const std::vector<std::vector<double>>& arm_b);

}  // namespace momentlab
