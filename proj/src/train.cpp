#include "momentlab/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <stdexcept>

#include "momentlab/gradient_flow.hpp"
#include "momentlab/random.hpp"

namespace momentlab {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

void check_perceptron_config(const PerceptronConfig& cfg) {
  if (cfg.dim < 1) throw std::invalid_argument("perceptron: dim must be positive");
  // eta 0 is legal: a frozen-weight run is the natural null control
  if (cfg.eta < 0.0 || !std::isfinite(cfg.eta))
    throw std::invalid_argument("perceptron: eta must be finite and nonnegative");
  if (cfg.steps < 1) throw std::invalid_argument("perceptron: steps must be positive");
}

nlohmann::json perceptron_config_json(const PerceptronConfig& cfg, const char* mode) {
  nlohmann::json j;
  j["model"] = "perceptron";
  j["mode"] = mode;
  j["dim"] = cfg.dim;
  j["activation"] = to_string(cfg.activation);
  j["eta"] = cfg.eta;
  j["steps"] = cfg.steps;
  j["seed"] = cfg.seed;
  j["divergence_norm"] = cfg.divergence_norm;
  j["checkpoints_per_decade"] = cfg.checkpoints_per_decade;
  return j;
}

RunCheckpoint perceptron_checkpoint(Index step, const VecXd& w, Activation act,
                                    const LabeledDataset& eval_data,
                                    const std::vector<NamedReference>& references) {
  const Evaluation e = evaluate(LinearClassifier{w, 0.0}, eval_data, act);
  RunCheckpoint cp{step, e.accuracy, e.square_loss, {}};
  cp.thetas.reserve(references.size());
  for (const auto& r : references) cp.thetas.push_back(alignment(w, r.w));
  return cp;
}

// shared SGD core; the two entry points differ only in where samples come from
PerceptronResult run_perceptron(const PerceptronConfig& cfg, const DrawFn& draw,
                                const LabeledDataset& eval_data,
                                const std::vector<NamedReference>& references,
                                const std::string& train_id, const std::string& eval_id,
                                const char* mode) {
  check_perceptron_config(cfg);
  check_dataset(eval_data, "train_perceptron");
  if (eval_data.dim() != cfg.dim)
    throw std::invalid_argument("train_perceptron: eval dimension mismatch");
  for (const auto& r : references)
    if (r.w.size() != cfg.dim)
      throw std::invalid_argument("train_perceptron: reference dimension mismatch");

  const auto start = Clock::now();
  const double rd = std::sqrt(double(cfg.dim));

  Rng init_rng(mix_seed(cfg.seed, 0x696e6974ull));
  VecXd w(cfg.dim);
  for (Index i = 0; i < cfg.dim; ++i) w[i] = init_rng.normal();

  RunRecord rec;
  rec.config = perceptron_config_json(cfg, mode);
  rec.train_dataset_id = train_id;
  rec.eval_dataset_id = eval_id;
  for (const auto& r : references) rec.reference_names.push_back(r.name);

  const std::set<Index> cps = checkpoint_schedule(cfg.steps, cfg.checkpoints_per_decade);
  rec.series.push_back(perceptron_checkpoint(0, w, cfg.activation, eval_data, references));

  VecXd x(cfg.dim);
  int y = 0;
  for (Index step = 1; step <= cfg.steps; ++step) {
    draw(x, y);
    const double lambda = w.dot(x) / rd;
    const double s = activation_value(cfg.activation, lambda);
    const double ds = activation_derivative(cfg.activation, lambda);
    w -= (cfg.eta * 2.0 * (s - double(y)) * ds / rd) * x;

    const double norm = w.norm();
    if (!(norm < cfg.divergence_norm)) throw DivergenceError(step, norm);
    if (cps.count(step))
      rec.series.push_back(perceptron_checkpoint(step, w, cfg.activation, eval_data, references));
  }

  rec.wall_seconds = seconds_since(start);
  PerceptronResult out{std::move(rec), w, LinearClassifier{w, 0.0}};
  return out;
}

}  // namespace

PerceptronResult train_perceptron_online(const PerceptronConfig& cfg, const DrawFn& draw,
                                         const LabeledDataset& eval_data,
                                         const std::vector<NamedReference>& references,
                                         const std::string& train_id, const std::string& eval_id) {
  if (!draw) throw std::invalid_argument("train_perceptron_online: empty sampler");
  return run_perceptron(cfg, draw, eval_data, references, train_id, eval_id, "online");
}

FinitePerceptronResult train_perceptron_finite(const PerceptronConfig& cfg,
                                               const LabeledDataset& train_data,
                                               const LabeledDataset& eval_data,
                                               const std::vector<NamedReference>& references,
                                               const std::string& train_id,
                                               const std::string& eval_id) {
  check_dataset(train_data, "train_perceptron_finite");
  if (train_data.dim() != cfg.dim)
    throw std::invalid_argument("train_perceptron_finite: train dimension mismatch");

  // reshuffled epochs over the fixed sample, surfaced as a draw stream
  const Index n = train_data.size();
  Rng shuffle_rng(mix_seed(cfg.seed, 0x73687566ull));
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  Index cursor = n;  // forces a shuffle on the first draw
  const auto draw = [&](VecXd& x, int& y) {
    if (cursor == n) {
      shuffle_indices(order, shuffle_rng);
      cursor = 0;
    }
    const Index r = order[static_cast<std::size_t>(cursor++)];
    x = train_data.inputs.row(r).transpose();
    y = train_data.labels[r];
  };

  PerceptronResult base =
      run_perceptron(cfg, draw, eval_data, references, train_id, eval_id, "finite");

  FinitePerceptronResult out{std::move(base.record), std::move(base.w), 0.0, 0};
  for (const auto& cp : out.record.series)
    if (cp.accuracy > out.early_stop_accuracy) {
      out.early_stop_accuracy = cp.accuracy;
      out.early_stop_step = cp.step;
    }
  return out;
}

namespace {

void check_two_layer_config(const TwoLayerConfig& cfg) {
  if (cfg.input_dim < 1 || cfg.hidden < 1)
    throw std::invalid_argument("two_layer: layer sizes must be positive");
  if (cfg.classes < 2) throw std::invalid_argument("two_layer: need at least two classes");
  if (!(cfg.eta > 0.0)) throw std::invalid_argument("two_layer: eta must be positive");
  if (cfg.weight_decay < 0.0) throw std::invalid_argument("two_layer: negative weight decay");
  if (cfg.batch < 1 || cfg.epochs < 1)
    throw std::invalid_argument("two_layer: batch and epochs must be positive");
}

void check_labels(const LabeledDataset& d, int classes, const char* who) {
  if (d.labels.minCoeff() < 0 || d.labels.maxCoeff() >= classes)
    throw std::invalid_argument(std::string(who) + ": labels outside [0, classes)");
}

nlohmann::json two_layer_config_json(const TwoLayerConfig& cfg) {
  nlohmann::json j;
  j["model"] = "two_layer";
  j["input_dim"] = cfg.input_dim;
  j["hidden"] = cfg.hidden;
  j["classes"] = cfg.classes;
  j["activation"] = "relu";
  j["loss"] = "softmax_cross_entropy";
  j["eta"] = cfg.eta;
  j["weight_decay"] = cfg.weight_decay;
  j["batch"] = cfg.batch;
  j["epochs"] = cfg.epochs;
  j["seed"] = cfg.seed;
  j["input_scale"] = cfg.input_scale;
  j["init"] = "uniform_fan_in";  // U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases
  j["checkpoints_per_decade"] = cfg.checkpoints_per_decade;
  return j;
}

struct TwoLayerNet {
  MatXf w1, w2;
  VecXf b1, b2;
};

void init_two_layer(TwoLayerNet& net, const TwoLayerConfig& cfg) {
  Rng rng(mix_seed(cfg.seed, 0x696e6974ull));
  const auto fill = [&rng](float s, auto& m) {
    for (Index i = 0; i < m.rows(); ++i)
      for (Index j = 0; j < m.cols(); ++j) m(i, j) = float(rng.uniform(-s, s));
  };
  net.w1.resize(cfg.hidden, cfg.input_dim);
  net.b1.resize(cfg.hidden);
  net.w2.resize(cfg.classes, cfg.hidden);
  net.b2.resize(cfg.classes);
  const float s1 = 1.0f / std::sqrt(float(cfg.input_dim));
  const float s2 = 1.0f / std::sqrt(float(cfg.hidden));
  fill(s1, net.w1);
  fill(s1, net.b1);
  fill(s2, net.w2);
  fill(s2, net.b2);
}

// row-wise softmax cross-entropy; returns mean loss, fills probabilities
double softmax_loss(const MatXf& logits, const Eigen::VectorXi& labels, MatXf& probs) {
  probs = logits;
  double loss = 0.0;
  for (Index r = 0; r < logits.rows(); ++r) {
    const float m = probs.row(r).maxCoeff();
    probs.row(r) = (probs.row(r).array() - m).exp();
    const float z = probs.row(r).sum();
    probs.row(r) /= z;
    loss -= std::log(double(probs(r, labels[r])));
  }
  return loss / double(logits.rows());
}

Index argmax_row(const MatXf& m, Index r) {
  Index best = 0;
  for (Index c = 1; c < m.cols(); ++c)
    if (m(r, c) > m(r, best)) best = c;
  return best;
}

RunCheckpoint two_layer_checkpoint(Index step, const TwoLayerNet& net, const MatXf& eval_x,
                                   const Eigen::VectorXi& eval_y) {
  MatXf h = (eval_x * net.w1.transpose()).rowwise() + net.b1.transpose();
  h = h.cwiseMax(0.0f);
  const MatXf logits = (h * net.w2.transpose()).rowwise() + net.b2.transpose();

  Index correct = 0;
  double loss = 0.0;
  for (Index r = 0; r < logits.rows(); ++r) {
    correct += argmax_row(logits, r) == eval_y[r];
    const float m = logits.row(r).maxCoeff();
    const double z = double((logits.row(r).array() - m).exp().sum());
    loss += std::log(z) - double(logits(r, eval_y[r]) - m);
  }
  return {step, double(correct) / double(logits.rows()), loss / double(logits.rows()), {}};
}

}  // namespace

TwoLayerResult train_two_layer(const TwoLayerConfig& cfg, const LabeledDataset& train_data,
                               const LabeledDataset& eval_data, const std::string& train_id,
                               const std::string& eval_id) {
  check_two_layer_config(cfg);
  check_dataset(train_data, "train_two_layer");
  check_dataset(eval_data, "train_two_layer");
  if (train_data.dim() != cfg.input_dim || eval_data.dim() != cfg.input_dim)
    throw std::invalid_argument("train_two_layer: input dimension mismatch");
  check_labels(train_data, cfg.classes, "train_two_layer (train)");
  check_labels(eval_data, cfg.classes, "train_two_layer (eval)");
  const Index n = train_data.size();
  if (n < cfg.batch)
    throw std::invalid_argument("train_two_layer: fewer samples than one batch");

  const auto start = Clock::now();
  const MatXf train_x = (train_data.inputs * cfg.input_scale).cast<float>();
  const MatXf eval_x = (eval_data.inputs * cfg.input_scale).cast<float>();

  TwoLayerNet net;
  init_two_layer(net, cfg);

  RunRecord rec;
  rec.config = two_layer_config_json(cfg);
  rec.train_dataset_id = train_id;
  rec.eval_dataset_id = eval_id;

  const Index batches_per_epoch = n / cfg.batch;  // trailing partial batch dropped
  const Index total_steps = batches_per_epoch * cfg.epochs;
  if (total_steps < 1) throw std::invalid_argument("train_two_layer: no full batch to run");
  const std::set<Index> cps = checkpoint_schedule(total_steps, cfg.checkpoints_per_decade);
  rec.series.push_back(two_layer_checkpoint(0, net, eval_x, eval_data.labels));

  Rng shuffle_rng(mix_seed(cfg.seed, 0x73687566ull));
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});

  const float lr = float(cfg.eta);
  const float wd = float(cfg.weight_decay);
  MatXf xb(cfg.batch, cfg.input_dim), probs;
  Eigen::VectorXi yb(cfg.batch);
  Index step = 0;
  for (Index epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_indices(order, shuffle_rng);
    for (Index b = 0; b < batches_per_epoch; ++b) {
      for (Index r = 0; r < cfg.batch; ++r) {
        const Index src = order[static_cast<std::size_t>(b * cfg.batch + r)];
        xb.row(r) = train_x.row(src);
        yb[r] = train_data.labels[src];
      }

      MatXf h_pre = (xb * net.w1.transpose()).rowwise() + net.b1.transpose();
      const MatXf h = h_pre.cwiseMax(0.0f);
      const MatXf logits = (h * net.w2.transpose()).rowwise() + net.b2.transpose();
      const double batch_loss = softmax_loss(logits, yb, probs);
      if (!std::isfinite(batch_loss))
        throw DivergenceError(step + 1, double(net.w1.norm()) + double(net.w2.norm()));

      // dL/dlogits, then standard backprop; weight decay on weights only
      MatXf g = probs;
      for (Index r = 0; r < cfg.batch; ++r) g(r, yb[r]) -= 1.0f;
      g /= float(cfg.batch);

      const MatXf gw2 = g.transpose() * h;
      const VecXf gb2 = g.colwise().sum().transpose();
      MatXf gh = g * net.w2;
      gh.array() *= (h_pre.array() > 0.0f).cast<float>();
      const MatXf gw1 = gh.transpose() * xb;
      const VecXf gb1 = gh.colwise().sum().transpose();

      net.w2 -= lr * (gw2 + wd * net.w2);
      net.b2 -= lr * gb2;
      net.w1 -= lr * (gw1 + wd * net.w1);
      net.b1 -= lr * gb1;

      ++step;
      if (cps.count(step))
        rec.series.push_back(two_layer_checkpoint(step, net, eval_x, eval_data.labels));
    }
  }

  rec.wall_seconds = seconds_since(start);
  return {std::move(rec), std::move(net.w1), std::move(net.w2), std::move(net.b1),
          std::move(net.b2)};
}

void save_run_record(const std::string& csv_path, const RunRecord& record) {
  std::ofstream out(csv_path, std::ios::trunc);
  if (!out) throw std::runtime_error("save_run_record: cannot open '" + csv_path + "'");

  out << "step,train_dataset_id,eval_dataset_id,accuracy,loss";
  for (const auto& name : record.reference_names) out << ",theta_" << name;
  out << "\n";
  for (const auto& cp : record.series) {
    out << cp.step << ',' << record.train_dataset_id << ',' << record.eval_dataset_id << ','
        << fmt(cp.accuracy) << ',' << fmt(cp.loss);
    for (double th : cp.thetas) out << ',' << fmt(th);
    out << "\n";
  }
  if (!out) throw std::runtime_error("save_run_record: write to '" + csv_path + "' failed");

  nlohmann::json side;
  side["config"] = record.config;
  side["train_dataset_id"] = record.train_dataset_id;
  side["eval_dataset_id"] = record.eval_dataset_id;
  side["reference_names"] = record.reference_names;
  side["rows"] = record.series.size();
  side["wall_seconds"] = record.wall_seconds;
  std::ofstream sidecar(csv_path + ".json", std::ios::trunc);
  if (!sidecar) throw std::runtime_error("save_run_record: cannot open sidecar");
  sidecar << side.dump(2) << "\n";
}

}  // namespace momentlab
