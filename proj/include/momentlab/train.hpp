#pragma once

// SGD training at two scales: the analytic single unit y = sigma(w.x/sqrt(D))
// under square loss with one fresh sample per step (or reshuffled epochs over
// a fixed sample), and a two-layer softmax network at image size. Both emit
// the same checkpointed run record, so the experiment harness treats them
// uniformly.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "momentlab/activation.hpp"
#include "momentlab/classifiers.hpp"
#include "momentlab/dataset.hpp"
#include "momentlab/types.hpp"

namespace momentlab {

struct PerceptronConfig {
  Index dim = 10;
  Activation activation = Activation::tanh_sigmoid;
  double eta = 0.05;
  Index steps = 100000;
  uint64_t seed = 0;
  double divergence_norm = 1e8;
  Index checkpoints_per_decade = 50;
};

// direction to track the angle against, by name in the record
struct NamedReference {
  std::string name;
  VecXd w;
};

struct RunCheckpoint {
  Index step;
  double accuracy, loss;
  std::vector<double> thetas;  // one per reference, in reference order
};

struct RunRecord {
  nlohmann::json config;  // snapshot, includes the seed
  std::string train_dataset_id, eval_dataset_id;
  std::vector<std::string> reference_names;
  std::vector<RunCheckpoint> series;
  double wall_seconds = 0.0;  // sidecar only, never in the CSV
};

// columns: step,train_dataset_id,eval_dataset_id,accuracy,loss,theta_<name>...
// plus a config sidecar at <path>.json
void save_run_record(const std::string& csv_path, const RunRecord& record);

// online sample source: fills x and the +-1 label
using DrawFn = std::function<void(VecXd& x, int& y)>;

struct PerceptronResult {
  RunRecord record;
  VecXd w;
  LinearClassifier classifier;  // final weights, zero bias
};

// One fresh sample per step: w <- w - eta * d/dw (sigma(w.x/sqrt(D)) - y)^2.
// Initial weights are i.i.d. standard normal. Throws DivergenceError when
// |w| crosses the guard.
PerceptronResult train_perceptron_online(const PerceptronConfig& cfg, const DrawFn& draw,
                                         const LabeledDataset& eval_data,
                                         const std::vector<NamedReference>& references,
                                         const std::string& train_id, const std::string& eval_id);

struct FinitePerceptronResult {
  RunRecord record;
  VecXd w;
  double early_stop_accuracy;  // best eval accuracy over checkpoints
  Index early_stop_step;
};

// Same update rule cycling over a fixed sample in reshuffled epochs; the
// early-stopping accuracy is the checkpoint maximum of the eval metric.
FinitePerceptronResult train_perceptron_finite(const PerceptronConfig& cfg,
                                               const LabeledDataset& train_data,
                                               const LabeledDataset& eval_data,
                                               const std::vector<NamedReference>& references,
                                               const std::string& train_id,
                                               const std::string& eval_id);

struct TwoLayerConfig {
  Index input_dim = 1024;
  Index hidden = 512;
  int classes = 10;
  double eta = 0.005;
  double weight_decay = 5e-4;
  Index batch = 64;
  Index epochs = 40;
  uint64_t seed = 0;
  double input_scale = 1.0 / 255.0;  // applied to inputs once, up front
  Index checkpoints_per_decade = 50;
};

struct TwoLayerResult {
  RunRecord record;
  MatXf w1, w2;  // final parameters, hidden x in and classes x hidden
  VecXf b1, b2;
};

// Minibatch SGD on softmax cross-entropy, single thread, float32; incomplete
// trailing batches are dropped. Labels must lie in [0, classes). Runs sharing
// a seed start from identical weights. Deterministic to the bit for fixed
// (config, data).
TwoLayerResult train_two_layer(const TwoLayerConfig& cfg, const LabeledDataset& train_data,
                               const LabeledDataset& eval_data, const std::string& train_id,
                               const std::string& eval_id);

}  // namespace momentlab
