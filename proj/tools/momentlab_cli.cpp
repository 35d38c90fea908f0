#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "momentlab/cifar.hpp"
#include "momentlab/classifiers.hpp"
#include "momentlab/clone.hpp"
#include "momentlab/container.hpp"
#include "momentlab/experiments.hpp"
#include "momentlab/gradient_flow.hpp"
#include "momentlab/rectangular.hpp"
#include "momentlab/train.hpp"

namespace {

using namespace momentlab;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open output file: " + path);
  return out;
}

std::string basename_of(const std::string& path) {
  const auto slash = path.find_last_of('/');
  return slash == std::string::npos ? path : path.substr(slash + 1);
}

// Shared geometry flags for the rectangular dataset commands. --overlap picks
// the preset where the classes overlap; explicit values override either base.
struct GeometryOpts {
  bool overlap = false;
  int64_t dim = 0;
  double a = 0, b = 0, mu1 = 0, mu2 = 0;
  CLI::Option *dim_o = nullptr, *a_o = nullptr, *b_o = nullptr, *mu1_o = nullptr,
              *mu2_o = nullptr;

  void attach(CLI::App* cmd) {
    cmd->add_flag("--overlap", overlap,
                  "start from the overlapping-classes preset (b=0.9, mu2=0.95)");
    dim_o = cmd->add_option("--dim", dim, "data dimension (default 10)");
    a_o = cmd->add_option("--a", a, "half-width of the long uniform coordinate (default 2)");
    b_o = cmd->add_option("--b", b, "half-width of the short uniform coordinate");
    mu1_o = cmd->add_option("--mu1", mu1, "class mean along coordinate 0 (default 0.5)");
    mu2_o = cmd->add_option("--mu2", mu2, "class mean along coordinate 1");
  }

  RectangularParams resolve() const {
    RectangularParams p = overlap ? RectangularParams::overlap() : RectangularParams{};
    if (dim_o->count()) p.dim = dim;
    if (a_o->count()) p.a = a;
    if (b_o->count()) p.b = b;
    if (mu1_o->count()) p.mu1 = mu1;
    if (mu2_o->count()) p.mu2 = mu2;
    return p;
  }

  nlohmann::json meta(const RectangularParams& p) const {
    return {{"dim", p.dim}, {"a", p.a}, {"b", p.b}, {"mu1", p.mu1}, {"mu2", p.mu2}};
  }
};

void write_directions_csv(std::ostream& out, const RectangularAnalytic& an,
                          const std::vector<std::pair<std::string, LinearClassifier>>& rules) {
  const VecXd oracle = an.oracle_direction();
  out << "classifier,analytic_accuracy,theta_oracle,bias";
  for (Index i = 0; i < an.params().dim; ++i) out << ",w" << i;
  out << "\n";
  for (const auto& [name, c] : rules) {
    out << name << ',' << num(an.accuracy(c.w, c.bias)) << ',' << num(alignment(c.w, oracle))
        << ',' << num(c.bias);
    for (Index i = 0; i < c.w.size(); ++i) out << ',' << num(c.w[i]);
    out << "\n";
  }
}

int run(int argc, char** argv) {
  CLI::App app{"momentlab: moment/cumulant laboratory for linear classifiers"};
  app.require_subcommand(1);
  int rc = 0;

  // ---- data ----------------------------------------------------------
  auto* data = app.add_subcommand("data", "dataset generation and loading");
  data->require_subcommand(1);

  struct {
    GeometryOpts geo;
    int64_t n = 1000;
    uint64_t seed = 1;
    std::string out;
  } sr;
  auto* sample_rect = data->add_subcommand("sample-rect", "draw a rectangular two-class dataset");
  sr.geo.attach(sample_rect);
  sample_rect->add_option("--n", sr.n, "samples per class")->capture_default_str();
  sample_rect->add_option("--seed", sr.seed, "sampling seed")->capture_default_str();
  sample_rect->add_option("--out", sr.out, "output dataset container")->required();
  sample_rect->callback([&] {
    const RectangularParams p = sr.geo.resolve();
    const LabeledDataset ds = sample_rectangular(p, sr.n, sr.seed);
    nlohmann::json meta = sr.geo.meta(p);
    meta["source"] = "sample-rect";
    meta["n_per_class"] = sr.n;
    meta["seed"] = sr.seed;
    save_dataset(sr.out, ds, meta);
    std::cout << "wrote " << sr.out << " (" << ds.size() << " rows, dim " << ds.dim() << ")\n";
  });

  struct {
    std::vector<std::string> files;
    bool grayscale = false;
    bool coarse = false;
    std::string out;
  } lc;
  auto* load_cifar = data->add_subcommand("load-cifar", "convert CIFAR-10 binary batches");
  load_cifar->add_option("files", lc.files, "CIFAR-10 .bin batch files")->required();
  load_cifar->add_flag("--grayscale", lc.grayscale, "average channels to 1024 luma values");
  load_cifar->add_flag("--coarse", lc.coarse,
                       "relabel to the two animal/vehicle superclasses (CIFAR10c)");
  load_cifar->add_option("--out", lc.out, "output dataset container")->required();
  load_cifar->callback([&] {
    LabeledDataset ds = load_cifar_binary(lc.files, lc.grayscale);
    if (lc.coarse)
      ds = coarse_grain_labels(ds, {kCifar10cMapping.begin(), kCifar10cMapping.end()});
    nlohmann::json meta = {{"source", "load-cifar"},
                           {"grayscale", lc.grayscale},
                           {"coarse", lc.coarse},
                           {"files", lc.files.size()}};
    save_dataset(lc.out, ds, meta);
    std::cout << "wrote " << lc.out << " (" << ds.size() << " rows, dim " << ds.dim() << ")\n";
  });

  // ---- clone ---------------------------------------------------------
  auto* clone = app.add_subcommand("clone", "Gaussian-mixture clones of a dataset");
  clone->require_subcommand(1);

  struct {
    std::string data, mode = "full", out;
    double clip_lo = 0, clip_hi = 0;
    CLI::Option *lo_o = nullptr, *hi_o = nullptr;
  } cf;
  auto* clone_fit = clone->add_subcommand("fit", "fit a per-class Gaussian mixture");
  clone_fit->add_option("--data", cf.data, "dataset container to fit")->required();
  clone_fit->add_option("--mode", cf.mode, "iso or full covariance")->capture_default_str();
  cf.lo_o = clone_fit->add_option("--clip-lo", cf.clip_lo, "clamp sampled coordinates below");
  cf.hi_o = clone_fit->add_option("--clip-hi", cf.clip_hi, "clamp sampled coordinates above");
  cf.lo_o->needs(cf.hi_o);
  cf.hi_o->needs(cf.lo_o);
  clone_fit->add_option("--out", cf.out, "output clone file")->required();
  clone_fit->callback([&] {
    const LoadedDataset loaded = load_dataset(cf.data);
    CloneModel model = fit_clone(loaded.data, clone_mode_from_string(cf.mode));
    if (cf.lo_o->count()) {
      model.clip = true;
      model.clip_lo = cf.clip_lo;
      model.clip_hi = cf.clip_hi;
    }
    save_clone(cf.out, model);
    std::cout << "wrote " << cf.out << " (" << model.components.size() << " components, dim "
              << model.dim << ", " << to_string(model.mode) << ")\n";
  });

  struct {
    std::string clone, out;
    int64_t n = 1000;
    uint64_t seed = 1;
  } cs;
  auto* clone_sample = clone->add_subcommand("sample", "draw a dataset from a fitted clone");
  clone_sample->add_option("--clone", cs.clone, "clone file from 'clone fit'")->required();
  clone_sample->add_option("--n", cs.n, "samples per component")->capture_default_str();
  clone_sample->add_option("--seed", cs.seed, "sampling seed")->capture_default_str();
  clone_sample->add_option("--out", cs.out, "output dataset container")->required();
  clone_sample->callback([&] {
    const CloneModel model = load_clone(cs.clone);
    const LabeledDataset ds = sample_clone(model, cs.n, cs.seed);
    nlohmann::json meta = {{"source", "clone-sample"},
                           {"clone", basename_of(cs.clone)},
                           {"n_per_component", cs.n},
                           {"seed", cs.seed}};
    save_dataset(cs.out, ds, meta);
    std::cout << "wrote " << cs.out << " (" << ds.size() << " rows, dim " << ds.dim() << ")\n";
  });

  struct {
    std::string clone;
    int64_t n = 100000;
    uint64_t seed = 1;
  } cv;
  auto* clone_validate =
      clone->add_subcommand("validate", "check that clone samples reproduce the fitted moments");
  clone_validate->add_option("--clone", cv.clone, "clone file to validate")->required();
  clone_validate->add_option("--n", cv.n, "validation samples per component")
      ->capture_default_str();
  clone_validate->add_option("--seed", cv.seed, "sampling seed")->capture_default_str();
  clone_validate->callback([&] {
    const CloneModel model = load_clone(cv.clone);
    const CloneValidation rep = validate_clone(model, cv.n, cv.seed);
    std::cout << "max_mean_err," << num(rep.max_mean_err) << "\n"
              << "max_cov_err," << num(rep.max_cov_err) << "\n"
              << "band_violation_fraction," << num(rep.band_violation_fraction) << "\n"
              << "n_per_component," << rep.n_per_component << "\n"
              << "validation," << (rep.mean_ok && rep.cov_ok ? "pass" : "fail") << "\n";
    if (!(rep.mean_ok && rep.cov_ok)) rc = 3;
  });

  // ---- analytic ------------------------------------------------------
  auto* analytic = app.add_subcommand("analytic", "closed-form classifiers");
  analytic->require_subcommand(1);

  struct {
    GeometryOpts geo;
    int64_t n = 100000;
    uint64_t seed = 1;
    double c3 = 0.05;
    std::string stat = "within_cumulant";
    std::string out;
  } as;
  auto* solve = analytic->add_subcommand(
      "solve", "naive / discriminant / corrected / oracle directions on rectangular data");
  as.geo.attach(solve);
  solve->add_option("--n", as.n, "fit samples per class")->capture_default_str();
  solve->add_option("--seed", as.seed, "fit sample seed")->capture_default_str();
  solve->add_option("--c3", as.c3, "correction scale")->capture_default_str();
  solve->add_option("--stat", as.stat,
                    "fourth-order tensor: within_cumulant, within_moment, full_cumulant, "
                    "full_moment")
      ->capture_default_str();
  solve->add_option("--out", as.out, "write the CSV here instead of stdout");
  solve->callback([&] {
    const RectangularParams p = as.geo.resolve();
    const RectangularAnalytic an(p);
    const LabeledDataset ds = sample_rectangular(p, as.n, as.seed);
    const ClassStats stats = estimate_class_stats(ds);
    const LinearClassifier lda = linear_discriminant(stats);
    const std::vector<std::pair<std::string, LinearClassifier>> rules = {
        {"naive", naive_classifier(stats)},
        {"lda", lda},
        {"correction",
         correction_classifier(ds, stats, lda, fourth_order_stat_from_string(as.stat), as.c3)
             .classifier},
        {"oracle", oracle_classifier(p.dim)},
    };
    if (as.out.empty()) {
      write_directions_csv(std::cout, an, rules);
    } else {
      auto out = open_out(as.out);
      write_directions_csv(out, an, rules);
      std::cout << "wrote " << as.out << "\n";
    }
  });

  // ---- gflow ---------------------------------------------------------
  auto* gflow = app.add_subcommand("gflow", "truncated gradient-flow integration");
  gflow->require_subcommand(1);

  struct {
    GeometryOpts geo;
    int order = 1;
    bool empirical = false;
    int64_t n = 20000;
    uint64_t seed = 1;
    std::string kind = "fixed";
    double c1 = 1.0, c2 = 1.0, c3 = 0.02;
    double eta = 0.01;
    int64_t steps = 20000;
    int64_t cpd = 50;
    std::string out;
  } gf;
  auto* gfrun = gflow->add_subcommand("run", "integrate the order-K truncated flow");
  gf.geo.attach(gfrun);
  gfrun->add_option("--order", gf.order, "truncation order K")
      ->check(CLI::Range(0, 3))
      ->capture_default_str();
  gfrun->add_flag("--empirical", gf.empirical,
                  "freeze a finite sample instead of using analytic expectations");
  gfrun->add_option("--n", gf.n, "frozen-sample size per class (empirical mode)")
      ->capture_default_str();
  gfrun->add_option("--seed", gf.seed, "frozen-sample seed")->capture_default_str();
  gfrun->add_option("--kind", gf.kind,
                    "cubic term at K=3: 'fixed' constants or the 'faithful' activation "
                    "coefficients")
      ->check(CLI::IsMember({"fixed", "faithful"}))
      ->capture_default_str();
  gfrun->add_option("--c1", gf.c1, "fixed-cubic constant on the mean term")
      ->capture_default_str();
  gfrun->add_option("--c2", gf.c2, "fixed-cubic constant on the covariance term")
      ->capture_default_str();
  gfrun->add_option("--c3", gf.c3, "fixed-cubic constant on the cumulant term")
      ->capture_default_str();
  gfrun->add_option("--eta", gf.eta, "integration step size")->capture_default_str();
  gfrun->add_option("--steps", gf.steps, "integration steps")->capture_default_str();
  gfrun->add_option("--cpd", gf.cpd, "checkpoints per decade")->capture_default_str();
  gfrun->add_option("--out", gf.out, "trajectory CSV path")->required();
  gfrun->callback([&] {
    const RectangularParams p = gf.geo.resolve();
    const RectangularAnalytic an(p);

    LabeledDataset frozen;
    std::unique_ptr<GFSource> src;
    if (gf.empirical) {
      frozen = sample_rectangular(p, gf.n, gf.seed);
      src = std::make_unique<FrozenSampleSource>(frozen);
    } else {
      src = std::make_unique<AnalyticRectangularSource>(p);
    }

    GFConfig gc;
    gc.order = gf.order;
    gc.kind = (gf.order == 3 && gf.kind == "fixed") ? FlowKind::fixed_cubic
                                                    : FlowKind::activation_truncation;
    gc.constants = FlowConstants{gf.c1, gf.c2, gf.c3};
    gc.eta = gf.eta;
    gc.steps = gf.steps;
    gc.checkpoints_per_decade = gf.cpd;

    GFReferences refs;
    refs.naive = an.naive_direction();
    refs.lda = an.lda_direction();
    refs.oracle = an.oracle_direction();
    const auto exp = ActivationExpansion::of(Activation::tanh_sigmoid, 3);
    std::string corr_note = "steady_state";
    try {
      refs.corrected = steady_state(3, *src, exp, gc.constants).classifier.w;
    } catch (const std::runtime_error&) {
      // no cubic fixed point for this geometry; fall back so the column stays defined
      refs.corrected = refs.lda;
      corr_note = "lda_fallback";
    }

    const EvalFn eval_fn = [&](const VecXd& w) { return Evaluation{an.accuracy(w), 0.0}; };
    try {
      const GFResult res = integrate_gf(*src, gc, refs, eval_fn);
      auto out = open_out(gf.out);
      out << "step,t,K,norm_w,theta_naive,theta_lda,theta_corr,theta_oracle,accuracy,loss\n";
      for (const auto& r : res.rows)
        out << r.step << ',' << num(r.t) << ',' << gc.order << ',' << num(r.norm_w)
            << ',' << num(r.theta_naive)
            << ',' << num(r.theta_lda) << ',' << num(r.theta_corr) << ','
            << num(r.theta_oracle) << ',' << num(r.accuracy) << ',' << num(r.loss) << "\n";
      const auto& last = res.rows.back();
      std::cout << "corrected_ref," << corr_note << "\n"
                << "final_theta_naive," << num(last.theta_naive) << "\n"
                << "final_theta_lda," << num(last.theta_lda) << "\n"
                << "final_theta_corr," << num(last.theta_corr) << "\n"
                << "final_theta_oracle," << num(last.theta_oracle) << "\n"
                << "final_accuracy," << num(last.accuracy) << "\n"
                << "wrote " << gf.out << "\n";
    } catch (const DivergenceError& e) {
      std::cout << "corrected_ref," << corr_note << "\n"
                << "divergence_step," << e.step << "\n";
    }
  });

  // ---- train ---------------------------------------------------------
  auto* train = app.add_subcommand("train", "SGD training");
  train->require_subcommand(1);

  struct {
    GeometryOpts geo;
    std::string train_path, eval_path, out;
    bool online = false;
    bool refs = false;
    double eta = 0.01;
    int64_t steps = 200000;
    uint64_t seed = 1;
    int64_t cpd = 50;
    int64_t eval_n = 2000;
  } tp;
  auto* perceptron = train->add_subcommand(
      "perceptron", "square-loss perceptron; finite dataset by default, --online streams");
  tp.geo.attach(perceptron);
  perceptron->add_option("--train", tp.train_path, "training dataset container (finite mode)");
  perceptron->add_option("--eval", tp.eval_path, "evaluation dataset container");
  perceptron->add_flag("--online", tp.online,
                       "stream fresh rectangular samples instead of cycling a file");
  perceptron->add_flag("--refs", tp.refs, "record alignment to reference directions");
  perceptron->add_option("--eta", tp.eta, "learning rate")->capture_default_str();
  perceptron->add_option("--steps", tp.steps, "SGD steps")->capture_default_str();
  perceptron->add_option("--seed", tp.seed, "stream/shuffle/init seed")->capture_default_str();
  perceptron->add_option("--cpd", tp.cpd, "checkpoints per decade")->capture_default_str();
  perceptron->add_option("--eval-n", tp.eval_n,
                         "held-out samples per class when --eval is not given (online mode)")
      ->capture_default_str();
  perceptron->add_option("--out", tp.out, "run-record CSV path")->required();
  perceptron->callback([&] {
    PerceptronConfig cfg;
    cfg.eta = tp.eta;
    cfg.steps = tp.steps;
    cfg.seed = tp.seed;
    cfg.checkpoints_per_decade = tp.cpd;

    if (tp.online) {
      const RectangularParams p = tp.geo.resolve();
      const RectangularAnalytic an(p);
      cfg.dim = p.dim;
      std::vector<NamedReference> references;
      if (tp.refs)
        references = {{"naive", an.naive_direction()},
                      {"lda", an.lda_direction()},
                      {"oracle", an.oracle_direction()}};
      LabeledDataset eval_data;
      std::string eval_id;
      if (tp.eval_path.empty()) {
        eval_data = sample_rectangular(p, tp.eval_n, tp.seed + 999);
        eval_id = "rect-holdout";
      } else {
        eval_data = load_dataset(tp.eval_path).data;
        eval_id = basename_of(tp.eval_path);
      }
      RectangularStream stream(p, tp.seed);
      const DrawFn draw = [&stream](VecXd& x, int& y) { stream.next(x, y); };
      const PerceptronResult res =
          train_perceptron_online(cfg, draw, eval_data, references, "rect-stream", eval_id);
      save_run_record(tp.out, res.record);
      const Evaluation ev = evaluate(res.classifier, eval_data);
      std::cout << "final_accuracy," << num(ev.accuracy) << "\n"
                << "final_loss," << num(ev.square_loss) << "\n"
                << "wrote " << tp.out << "\n";
      return;
    }

    if (tp.train_path.empty() || tp.eval_path.empty())
      throw std::runtime_error("train perceptron: finite mode needs --train and --eval");
    const LabeledDataset train_data = load_dataset(tp.train_path).data;
    const LabeledDataset eval_data = load_dataset(tp.eval_path).data;
    cfg.dim = train_data.dim();
    std::vector<NamedReference> references;
    if (tp.refs) {
      const ClassStats stats = estimate_class_stats(train_data);
      references = {{"naive", naive_classifier(stats).w}, {"lda", linear_discriminant(stats).w}};
    }
    const FinitePerceptronResult res =
        train_perceptron_finite(cfg, train_data, eval_data, references,
                                basename_of(tp.train_path), basename_of(tp.eval_path));
    save_run_record(tp.out, res.record);
    std::cout << "early_stop_accuracy," << num(res.early_stop_accuracy) << "\n"
              << "early_stop_step," << res.early_stop_step << "\n"
              << "wrote " << tp.out << "\n";
  });

  struct {
    std::string train_path, eval_path, out;
    int64_t hidden = 512;
    int classes = 0;
    double eta = 0.005, weight_decay = 5e-4, input_scale = 1.0 / 255.0;
    int64_t batch = 64, epochs = 20, cpd = 12;
    uint64_t seed = 1;
  } tm;
  auto* mlp = train->add_subcommand("mlp", "two-layer softmax network on image data");
  mlp->add_option("--train", tm.train_path, "training dataset container")->required();
  mlp->add_option("--eval", tm.eval_path, "evaluation dataset container")->required();
  mlp->add_option("--hidden", tm.hidden, "hidden width")->capture_default_str();
  mlp->add_option("--classes", tm.classes, "class count (default: max label + 1)");
  mlp->add_option("--eta", tm.eta, "learning rate")->capture_default_str();
  mlp->add_option("--weight-decay", tm.weight_decay, "L2 penalty")->capture_default_str();
  mlp->add_option("--input-scale", tm.input_scale, "input prescale")->capture_default_str();
  mlp->add_option("--batch", tm.batch, "minibatch size")->capture_default_str();
  mlp->add_option("--epochs", tm.epochs, "training epochs")->capture_default_str();
  mlp->add_option("--cpd", tm.cpd, "checkpoints per decade")->capture_default_str();
  mlp->add_option("--seed", tm.seed, "init/shuffle seed")->capture_default_str();
  mlp->add_option("--out", tm.out, "run-record CSV path")->required();
  mlp->callback([&] {
    const LabeledDataset train_data = load_dataset(tm.train_path).data;
    const LabeledDataset eval_data = load_dataset(tm.eval_path).data;
    TwoLayerConfig cfg;
    cfg.input_dim = train_data.dim();
    cfg.hidden = tm.hidden;
    cfg.classes = tm.classes > 0 ? tm.classes : train_data.labels.maxCoeff() + 1;
    cfg.eta = tm.eta;
    cfg.weight_decay = tm.weight_decay;
    cfg.input_scale = tm.input_scale;
    cfg.batch = tm.batch;
    cfg.epochs = tm.epochs;
    cfg.checkpoints_per_decade = tm.cpd;
    cfg.seed = tm.seed;
    const TwoLayerResult res = train_two_layer(cfg, train_data, eval_data,
                                               basename_of(tm.train_path),
                                               basename_of(tm.eval_path));
    save_run_record(tm.out, res.record);
    std::cout << "final_accuracy," << num(res.record.series.back().accuracy) << "\n"
              << "wrote " << tm.out << "\n";
  });

  // ---- experiment ----------------------------------------------------
  auto* experiment = app.add_subcommand("experiment", "named figure-scale experiments");
  experiment->require_subcommand(1);

  struct {
    std::string id, config, out;
    uint64_t seed = 0;
    int64_t jobs = 1;
    std::vector<std::string> sets;
    CLI::Option* seed_o = nullptr;
  } ex;
  std::string id_help = "experiment id:";
  for (const auto& id : experiment_ids()) id_help += " " + id;
  auto* exrun = experiment->add_subcommand("run", "run one experiment end to end");
  exrun->add_option("id", ex.id, id_help)->required();
  exrun->add_option("--config", ex.config, "key=value config file");
  exrun->add_option("--out", ex.out, "output directory")->required();
  ex.seed_o = exrun->add_option("--seed", ex.seed, "replace the seed list with this one seed");
  exrun->add_option("--jobs", ex.jobs, "worker threads")->capture_default_str();
  exrun->add_option("--set", ex.sets, "extra key=value overrides (repeatable)");
  exrun->callback([&] {
    std::map<std::string, std::string> overrides;
    for (const auto& kv : ex.sets)
      for (const auto& [k, v] : parse_key_values(kv)) overrides[k] = v;
    if (ex.seed_o->count()) overrides["seeds"] = std::to_string(ex.seed);
    run_experiment(make_experiment_config(ex.id, ex.config, ex.out, ex.jobs, overrides));
    std::cout << "wrote " << ex.out << "/summary.csv\n";
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
    std::cerr << "error: " << e.what() << "\n";
    return e.get_exit_code();
  }
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
