// Command-line front end: every pipeline stage (loss evaluation, gradient
// checking, data generation, training, prediction, evaluation, the balance
// sweep) as one subcommand each, file-mediated so stages compose in scripts.
//
// Exit codes: 0 success, 1 verification failure, 2 usage/input error,
// 3 numerical abort.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "edgelab/errors.hpp"
#include "edgelab/gradcheck.hpp"
#include "edgelab/grid.hpp"
#include "edgelab/loss.hpp"
#include "edgelab/metrics.hpp"
#include "edgelab/net.hpp"
#include "edgelab/parallel.hpp"
#include "edgelab/pgm.hpp"
#include "edgelab/synth.hpp"
#include "edgelab/version.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

fs::path resolve_out(const std::string& out_flag, const char* cmd) {
  if (!out_flag.empty()) return fs::path(out_flag);
  if (const char* root = std::getenv("EDGELAB_OUT_ROOT"); root && *root) {
    return fs::path(root) / cmd;
  }
  return fs::path("runs") / cmd;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw edgelab::IoFailure("cannot create " + dir.string());
}

// Every subcommand drops a manifest.json in its output directory recording
// the resolved configuration. The manifest includes the wall-clock duration,
// so reproducibility comparisons hash the output tree *excluding* this file.
class RunManifest {
 public:
  explicit RunManifest(const char* subcommand)
      : start_(std::chrono::steady_clock::now()) {
    j_["subcommand"] = subcommand;
    j_["version"] = edgelab::kVersion;
    j_["config"] = ordered_json::object();
    j_["inputs"] = ordered_json::object();
    j_["outputs"] = ordered_json::object();
  }

  ordered_json& config() { return j_["config"]; }
  ordered_json& inputs() { return j_["inputs"]; }
  ordered_json& outputs() { return j_["outputs"]; }
  ordered_json& extra() { return j_; }

  void write(const fs::path& dir) {
    ensure_dir(dir);
    const auto elapsed = std::chrono::duration<double>(
        std::chrono::steady_clock::now() - start_);
    j_["duration_seconds"] = elapsed.count();
    const fs::path path = dir / "manifest.json";
    // gen-data already stores the dataset description there; keep its keys
    // and nest the run record beside them.
    ordered_json full = ordered_json::object();
    if (fs::exists(path)) {
      std::ifstream in(path, std::ios::binary);
      try {
        in >> full;
      } catch (const ordered_json::exception&) {
        full = ordered_json::object();
      }
      if (!full.is_object()) full = ordered_json::object();
    }
    full["run"] = j_;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw edgelab::IoFailure("cannot write " + path.string());
    out << full.dump(2) << "\n";
    if (!out) throw edgelab::IoFailure("write failed: " + path.string());
  }

 private:
  ordered_json j_;
  std::chrono::steady_clock::time_point start_;
};

std::pair<int, int> parse_size(const std::string& text) {
  const auto x = text.find('x');
  try {
    if (x == std::string::npos) {
      const int n = std::stoi(text);
      return {n, n};
    }
    return {std::stoi(text.substr(0, x)), std::stoi(text.substr(x + 1))};
  } catch (const std::exception&) {
    throw edgelab::InvalidSpec("bad size '" + text + "' (expected N or HxW)");
  }
}

edgelab::loss::GradMode grad_mode_from_string(const std::string& name) {
  if (name == "detached") return edgelab::loss::GradMode::DetachedWeights;
  if (name == "full") return edgelab::loss::GradMode::FullGradient;
  throw edgelab::InvalidConfig("unknown grad mode '" + name +
                               "' (expected detached|full)");
}

edgelab::loss::Normalization norm_from_string(const std::string& name) {
  if (name == "sum") return edgelab::loss::Normalization::PixelSum;
  if (name == "mean") return edgelab::loss::Normalization::PerPixelMean;
  throw edgelab::InvalidConfig("unknown normalization '" + name +
                               "' (expected sum|mean)");
}

// ---------------------------------------------------------------- loss ----

struct LossArgs {
  std::string pred, gt, loss = "swbce", grad_mode = "detached", norm = "sum";
  std::string grad_out, out;
  double b = 1.0, lambda = 1.1, lambda_pred = 1.1, clamp_eps = 1e-7;
};

int run_loss(const LossArgs& a) {
  RunManifest manifest("loss");

  edgelab::loss::LossConfig cfg;
  cfg.balance_b = a.b;
  cfg.lambda_label = a.lambda;
  cfg.lambda_pred = a.lambda_pred;
  cfg.clamp_eps = a.clamp_eps;
  cfg.grad_mode = grad_mode_from_string(a.grad_mode);
  cfg.normalization = norm_from_string(a.norm);
  cfg.validate();

  const edgelab::SoftMap pred = edgelab::io::read_soft(a.pred);
  const edgelab::BinaryMap gt = edgelab::io::read_binary(a.gt);

  edgelab::loss::LossResult res;
  if (a.loss == "wbce") {
    res = edgelab::loss::label_loss(pred, gt, cfg);
  } else if (a.loss == "swbce") {
    res = edgelab::loss::swbce_loss(pred, gt, cfg);
  } else if (a.loss == "pred") {
    res = edgelab::loss::pred_loss(pred, gt, cfg);
  } else {
    throw edgelab::InvalidConfig("unknown loss '" + a.loss +
                                 "' (expected wbce|swbce|pred)");
  }

  std::printf("%.17g\n", res.value);

  manifest.config() = {{"pred", a.pred},
                       {"gt", a.gt},
                       {"loss", a.loss},
                       {"b", a.b},
                       {"lambda", a.lambda},
                       {"lambda_pred", a.lambda_pred},
                       {"clamp_eps", a.clamp_eps},
                       {"grad_mode", a.grad_mode},
                       {"norm", a.norm}};
  manifest.extra()["value"] = res.value;

  const fs::path out_dir = resolve_out(a.out, "loss");
  if (!a.grad_out.empty()) {
    // Gradients are signed; rescale affinely onto [0,1] and record the
    // transform so the original values are recoverable.
    double lo = res.gradient.data[0], hi = res.gradient.data[0];
    for (double v : res.gradient.data) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    const double scale = hi > lo ? 1.0 / (hi - lo) : 0.0;
    edgelab::SoftMap scaled(res.gradient.height, res.gradient.width, 0.5);
    if (hi > lo) {
      for (int64_t i = 0; i < scaled.size(); ++i) {
        scaled.data[i] = (res.gradient.data[i] - lo) * scale;
      }
    }
    ensure_dir(out_dir);
    edgelab::io::write_soft(scaled, out_dir / a.grad_out, 65535);
    manifest.outputs()["gradient_map"] = (out_dir / a.grad_out).string();
    manifest.outputs()["gradient_rescale"] = {
        {"min", lo}, {"max", hi},
        {"encoding", "pixel = (grad - min) / (max - min)"}};
  }
  manifest.write(out_dir);
  return 0;
}

// ----------------------------------------------------------- gradcheck ----

struct GradcheckArgs {
  uint64_t seed = 42;
  int trials = 20, size = 8;
  double tol = 1e-4, step = 1e-5;
  std::string out;
};

int run_gradcheck(const GradcheckArgs& a) {
  RunManifest manifest("gradcheck");
  const auto report = edgelab::loss::run_gradient_checks(a.seed, a.trials,
                                                         a.size, a.tol, a.step);
  std::fputs(edgelab::loss::format_gradcheck_table(report).c_str(), stdout);

  manifest.config() = {{"seed", a.seed},
                       {"trials", a.trials},
                       {"size", a.size},
                       {"tol", a.tol},
                       {"step", a.step}};
  auto cases = ordered_json::array();
  for (const auto& c : report.cases) {
    cases.push_back({{"case", c.name},
                     {"max_rel_err", c.max_rel_err},
                     {"pass", c.pass}});
  }
  manifest.extra()["cases"] = cases;
  manifest.extra()["all_pass"] = report.all_pass;
  manifest.write(resolve_out(a.out, "gradcheck"));
  return report.all_pass ? 0 : 1;
}

// ------------------------------------------------------------ gen-data ----

struct GenDataArgs {
  uint64_t seed = 42;
  std::string out, size = "64", texture = "checker";
  int n_train = 20, n_test = 7, shapes = 3, threads = 0;
  double noise = 0.05, texture_contrast = 0.12;
};

int run_gen_data(const GenDataArgs& a) {
  RunManifest manifest("gen-data");
  const auto [h, w] = parse_size(a.size);

  edgelab::synth::SceneSpec spec;
  spec.seed = a.seed;
  spec.height = h;
  spec.width = w;
  spec.shape_count = a.shapes;
  spec.noise_sigma = a.noise;
  spec.texture = edgelab::synth::texture_from_string(a.texture);
  spec.texture_contrast = a.texture_contrast;

  const fs::path out_dir = resolve_out(a.out, "gen-data");
  edgelab::synth::generate_split(spec, a.n_train, a.n_test, out_dir,
                                 a.threads);

  manifest.config() = {{"seed", a.seed},
                       {"size", a.size},
                       {"n_train", a.n_train},
                       {"n_test", a.n_test},
                       {"shapes", a.shapes},
                       {"noise", a.noise},
                       {"texture", a.texture},
                       {"texture_contrast", a.texture_contrast},
                       {"threads", a.threads}};
  manifest.outputs()["dataset"] = out_dir.string();
  manifest.write(out_dir);
  std::printf("wrote %d train + %d test pairs under %s\n", a.n_train, a.n_test,
              out_dir.string().c_str());
  return 0;
}

// --------------------------------------------------------------- train ----

struct TrainArgs {
  std::string data, loss = "swbce", grad_mode = "detached", out, crop;
  int epochs = 50, batch = 8, threads = 0;
  double lr = 1e-4, wd = 1e-8, b = 1.0, lambda = 1.1, lambda_pred = 1.1;
  uint64_t seed = 42;
};

edgelab::net::TrainConfig train_config(const TrainArgs& a) {
  edgelab::net::TrainConfig cfg;
  cfg.learning_rate = a.lr;
  cfg.weight_decay = a.wd;
  cfg.epochs = a.epochs;
  cfg.batch_size = a.batch;
  if (!a.crop.empty()) {
    const auto [ch, cw] = parse_size(a.crop);
    cfg.crop_h = ch;
    cfg.crop_w = cw;
  }
  cfg.seed = a.seed;
  cfg.loss_kind = edgelab::net::loss_kind_from_string(a.loss);
  cfg.loss.balance_b = a.b;
  cfg.loss.lambda_label = a.lambda;
  cfg.loss.lambda_pred = a.lambda_pred;
  cfg.loss.grad_mode = grad_mode_from_string(a.grad_mode);
  cfg.threads = a.threads;
  cfg.validate();
  return cfg;
}

int run_train(const TrainArgs& a) {
  RunManifest manifest("train");
  const edgelab::net::TrainConfig cfg = train_config(a);

  auto data = edgelab::net::load_split(a.data, "train");
  edgelab::net::Trainer trainer(std::move(data), cfg);
  for (int e = 0; e < cfg.epochs; ++e) {
    trainer.run_epochs(1);
    std::printf("epoch %d/%d mean_loss %.6g\n", e + 1, cfg.epochs,
                trainer.history().back());
    std::fflush(stdout);
  }

  const fs::path out_dir = resolve_out(a.out, "train");
  ensure_dir(out_dir);
  trainer.checkpoint().save(out_dir / "checkpoint.bin");
  edgelab::net::write_history_csv(trainer.history(),
                                  out_dir / "history.csv");

  manifest.config() = {{"data", a.data},
                       {"loss", a.loss},
                       {"epochs", a.epochs},
                       {"lr", a.lr},
                       {"wd", a.wd},
                       {"batch", a.batch},
                       {"crop", a.crop},
                       {"seed", a.seed},
                       {"b", a.b},
                       {"lambda", a.lambda},
                       {"lambda_pred", a.lambda_pred},
                       {"grad_mode", a.grad_mode},
                       {"threads", a.threads}};
  manifest.outputs()["checkpoint"] = (out_dir / "checkpoint.bin").string();
  manifest.outputs()["history"] = (out_dir / "history.csv").string();
  manifest.write(out_dir);
  return 0;
}

// ------------------------------------------------------------- predict ----

struct PredictArgs {
  std::string ckpt, images, out;
  int threads = 0;
};

int run_predict(const PredictArgs& a) {
  RunManifest manifest("predict");
  const auto ckpt = edgelab::net::Checkpoint::load(a.ckpt);
  edgelab::net::TinyNet net;
  net.params = ckpt.params;

  const fs::path out_dir = resolve_out(a.out, "predict");
  const auto stems = edgelab::net::predict_dir(net, a.images, out_dir,
                                               a.threads);

  manifest.config() = {{"ckpt", a.ckpt},
                       {"images", a.images},
                       {"threads", a.threads}};
  manifest.outputs()["predictions"] = out_dir.string();
  manifest.outputs()["count"] = stems.size();
  manifest.write(out_dir);
  std::printf("wrote %zu predictions under %s\n", stems.size(),
              out_dir.string().c_str());
  return 0;
}

// ---------------------------------------------------------------- eval ----

struct EvalArgs {
  std::string pred_dir, gt_dir, matching = "optimal", out;
  double tol_px = 1.0, tol_ratio = 0.0;
  bool ratio_set = false;
  int threads = 0;
};

int run_eval(const EvalArgs& a) {
  RunManifest manifest("eval");
  edgelab::metrics::EvalConfig cfg;
  if (a.ratio_set) {
    cfg.tolerance_mode = edgelab::metrics::ToleranceMode::DiagonalRatio;
    cfg.tolerance_value = a.tol_ratio;
  } else {
    cfg.tolerance_mode = edgelab::metrics::ToleranceMode::Pixels;
    cfg.tolerance_value = a.tol_px;
  }
  cfg.matching = edgelab::metrics::matching_from_string(a.matching);
  cfg.validate();

  const auto report =
      edgelab::metrics::evaluate_dataset(a.pred_dir, a.gt_dir, cfg, a.threads);

  const fs::path out_dir = resolve_out(a.out, "eval");
  ensure_dir(out_dir);
  edgelab::metrics::write_report_json(report, cfg, out_dir / "report.json");
  edgelab::metrics::write_pr_csv(report, cfg, out_dir / "pr_curve.csv");
  std::printf("ods %.6f ois %.6f ap %.6f\n", report.ods, report.ois,
              report.ap);

  manifest.config() = {
      {"pred_dir", a.pred_dir},
      {"gt_dir", a.gt_dir},
      {"tolerance_mode", a.ratio_set ? "diagonal_ratio" : "pixels"},
      {"tolerance_value", a.ratio_set ? a.tol_ratio : a.tol_px},
      {"matching", a.matching},
      {"threads", a.threads}};
  manifest.outputs()["report"] = (out_dir / "report.json").string();
  manifest.outputs()["pr_curve"] = (out_dir / "pr_curve.csv").string();
  manifest.write(out_dir);
  return 0;
}

// --------------------------------------------------------------- sweep ----

struct SweepArgs {
  std::string data, b_values = "0.25,0.5,0.75,0.9,1,1.1,1.25,1.5,2", out;
  int epochs = 50, batch = 8, threads = 0;
  double lr = 1e-4, wd = 1e-8;
  uint64_t seed = 42;
};

int run_sweep(const SweepArgs& a) {
  RunManifest manifest("sweep");

  std::vector<std::pair<std::string, double>> grid;
  std::string token;
  std::stringstream ss(a.b_values);
  while (std::getline(ss, token, ',')) {
    if (token.empty()) continue;
    try {
      grid.emplace_back(token, std::stod(token));
    } catch (const std::exception&) {
      throw edgelab::InvalidConfig("bad value '" + token + "' in --b-values");
    }
  }
  if (grid.empty()) throw edgelab::InvalidConfig("--b-values is empty");

  const fs::path out_dir = resolve_out(a.out, "sweep");
  ensure_dir(out_dir);
  const fs::path csv_path = out_dir / "sweep.csv";
  std::ofstream csv(csv_path, std::ios::binary | std::ios::trunc);
  if (!csv) throw edgelab::IoFailure("cannot write " + csv_path.string());
  csv << "b,ods,ois,ap\n" << std::flush;

  auto train_data = edgelab::net::load_split(a.data, "train");

  edgelab::metrics::EvalConfig ecfg;  // strict 1-px tolerance defaults
  char line[160];
  for (const auto& [name, b] : grid) {
    edgelab::net::TrainConfig cfg;
    cfg.learning_rate = a.lr;
    cfg.weight_decay = a.wd;
    cfg.epochs = a.epochs;
    cfg.batch_size = a.batch;
    cfg.seed = a.seed;  // identical init and batch order across b values
    cfg.loss_kind = edgelab::net::LossKind::SWBCE;
    cfg.loss.balance_b = b;
    cfg.threads = a.threads;
    cfg.validate();

    edgelab::net::Trainer trainer(train_data, cfg);
    trainer.run_epochs(cfg.epochs);

    const fs::path b_dir = out_dir / ("b_" + name);
    const fs::path pred_dir = b_dir / "preds";
    edgelab::net::predict_dir(trainer.net(),
                              fs::path(a.data) / "test" / "images", pred_dir,
                              a.threads);
    const auto report = edgelab::metrics::evaluate_dataset(
        pred_dir, fs::path(a.data) / "test" / "edges", ecfg, a.threads);
    edgelab::metrics::write_report_json(report, ecfg, b_dir / "report.json");

    std::snprintf(line, sizeof(line), "%s,%.6f,%.6f,%.6f\n", name.c_str(),
                  report.ods, report.ois, report.ap);
    csv << line << std::flush;  // partial results survive an abort
    std::printf("b=%s ods %.6f ois %.6f ap %.6f\n", name.c_str(), report.ods,
                report.ois, report.ap);
    std::fflush(stdout);
  }

  manifest.config() = {{"data", a.data},
                       {"b_values", a.b_values},
                       {"epochs", a.epochs},
                       {"lr", a.lr},
                       {"wd", a.wd},
                       {"batch", a.batch},
                       {"seed", a.seed},
                       {"threads", a.threads}};
  manifest.outputs()["csv"] = csv_path.string();
  manifest.write(out_dir);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Loss laboratory and strict edge-detection evaluation toolkit"};
  app.require_subcommand(1);

  LossArgs loss_args;
  auto* loss_cmd = app.add_subcommand(
      "loss", "Evaluate a loss on a prediction / ground-truth pair");
  loss_cmd->add_option("--pred", loss_args.pred, "Prediction PGM")->required();
  loss_cmd->add_option("--gt", loss_args.gt, "Ground-truth PGM")->required();
  loss_cmd->add_option("--loss", loss_args.loss, "wbce|swbce|pred");
  loss_cmd->add_option("--b", loss_args.b, "Balance between the two terms");
  loss_cmd->add_option("--lambda", loss_args.lambda, "Non-edge label weight");
  loss_cmd->add_option("--lambda-pred", loss_args.lambda_pred,
                       "Non-edge prediction weight");
  loss_cmd->add_option("--clamp-eps", loss_args.clamp_eps,
                       "Log-argument clamp");
  loss_cmd->add_option("--grad-mode", loss_args.grad_mode, "detached|full");
  loss_cmd->add_option("--norm", loss_args.norm, "sum|mean");
  loss_cmd->add_option("--grad-out", loss_args.grad_out,
                       "Write the rescaled gradient map (filename)");
  loss_cmd->add_option("--out", loss_args.out, "Output directory");

  GradcheckArgs gc_args;
  auto* gc_cmd = app.add_subcommand(
      "gradcheck", "Finite-difference check of every loss/gradient mode");
  gc_cmd->add_option("--seed", gc_args.seed, "Base seed");
  gc_cmd->add_option("--trials", gc_args.trials, "Instances per case");
  gc_cmd->add_option("--size", gc_args.size, "Instance side length");
  gc_cmd->add_option("--tol", gc_args.tol, "Max relative error");
  gc_cmd->add_option("--step", gc_args.step, "Central difference step");
  gc_cmd->add_option("--out", gc_args.out, "Output directory");

  GenDataArgs gd_args;
  auto* gd_cmd =
      app.add_subcommand("gen-data", "Generate a synthetic edge dataset");
  gd_cmd->add_option("--seed", gd_args.seed, "Base seed");
  gd_cmd->add_option("--out", gd_args.out, "Output directory");
  gd_cmd->add_option("--n-train", gd_args.n_train, "Training samples");
  gd_cmd->add_option("--n-test", gd_args.n_test, "Test samples");
  gd_cmd->add_option("--size", gd_args.size, "Image size, N or HxW");
  gd_cmd->add_option("--noise", gd_args.noise, "Gaussian noise sigma");
  gd_cmd->add_option("--texture", gd_args.texture, "none|stripes|checker");
  gd_cmd->add_option("--texture-contrast", gd_args.texture_contrast,
                     "Texture amplitude");
  gd_cmd->add_option("--shapes", gd_args.shapes, "Shapes per image");
  gd_cmd->add_option("--threads", gd_args.threads, "Worker cap (0 = cores)");

  TrainArgs tr_args;
  auto* tr_cmd = app.add_subcommand("train", "Train the toy edge detector");
  tr_cmd->add_option("--data", tr_args.data, "Dataset directory")->required();
  tr_cmd->add_option("--loss", tr_args.loss, "wbce|swbce");
  tr_cmd->add_option("--epochs", tr_args.epochs, "Epochs");
  tr_cmd->add_option("--lr", tr_args.lr, "Learning rate");
  tr_cmd->add_option("--wd", tr_args.wd, "Weight decay");
  tr_cmd->add_option("--batch", tr_args.batch, "Batch size");
  tr_cmd->add_option("--crop", tr_args.crop, "Crop size, N or HxW");
  tr_cmd->add_option("--seed", tr_args.seed, "Seed");
  tr_cmd->add_option("--b", tr_args.b, "Balance between the loss terms");
  tr_cmd->add_option("--lambda", tr_args.lambda, "Non-edge label weight");
  tr_cmd->add_option("--lambda-pred", tr_args.lambda_pred,
                     "Non-edge prediction weight");
  tr_cmd->add_option("--grad-mode", tr_args.grad_mode, "detached|full");
  tr_cmd->add_option("--threads", tr_args.threads, "Worker cap (0 = cores)");
  tr_cmd->add_option("--out", tr_args.out, "Output directory");

  PredictArgs pr_args;
  auto* pr_cmd =
      app.add_subcommand("predict", "Run a checkpoint over a directory");
  pr_cmd->add_option("--ckpt", pr_args.ckpt, "Checkpoint file")->required();
  pr_cmd->add_option("--images", pr_args.images, "Input directory")
      ->required();
  pr_cmd->add_option("--out", pr_args.out, "Output directory");
  pr_cmd->add_option("--threads", pr_args.threads, "Worker cap (0 = cores)");

  EvalArgs ev_args;
  auto* ev_cmd = app.add_subcommand(
      "eval", "Score predictions against ground truth (ODS/OIS/AP)");
  ev_cmd->add_option("--pred-dir", ev_args.pred_dir, "Predictions")
      ->required();
  ev_cmd->add_option("--gt-dir", ev_args.gt_dir, "Ground truth")->required();
  auto* tol_px = ev_cmd->add_option("--tol-px", ev_args.tol_px,
                                    "Match tolerance in pixels");
  auto* tol_ratio = ev_cmd->add_option(
      "--tol-ratio", ev_args.tol_ratio,
      "Match tolerance as a fraction of the image diagonal");
  tol_px->excludes(tol_ratio);
  tol_ratio->excludes(tol_px);
  ev_cmd->add_option("--matching", ev_args.matching, "optimal|greedy");
  ev_cmd->add_option("--threads", ev_args.threads, "Worker cap (0 = cores)");
  ev_cmd->add_option("--out", ev_args.out, "Output directory");

  SweepArgs sw_args;
  auto* sw_cmd = app.add_subcommand(
      "sweep", "Train and score one model per balance value");
  sw_cmd->add_option("--data", sw_args.data, "Dataset directory")->required();
  sw_cmd->add_option("--b-values", sw_args.b_values, "Comma-separated grid");
  sw_cmd->add_option("--epochs", sw_args.epochs, "Epochs per model");
  sw_cmd->add_option("--lr", sw_args.lr, "Learning rate");
  sw_cmd->add_option("--wd", sw_args.wd, "Weight decay");
  sw_cmd->add_option("--batch", sw_args.batch, "Batch size");
  sw_cmd->add_option("--seed", sw_args.seed, "Seed shared by every model");
  sw_cmd->add_option("--threads", sw_args.threads, "Worker cap (0 = cores)");
  sw_cmd->add_option("--out", sw_args.out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    ev_args.ratio_set = tol_ratio->count() > 0;
    if (app.got_subcommand(loss_cmd)) return run_loss(loss_args);
    if (app.got_subcommand(gc_cmd)) return run_gradcheck(gc_args);
    if (app.got_subcommand(gd_cmd)) return run_gen_data(gd_args);
    if (app.got_subcommand(tr_cmd)) return run_train(tr_args);
    if (app.got_subcommand(pr_cmd)) return run_predict(pr_args);
    if (app.got_subcommand(ev_cmd)) return run_eval(ev_args);
    if (app.got_subcommand(sw_cmd)) return run_sweep(sw_args);
  } catch (const edgelab::NonFiniteLoss& e) {
    std::fprintf(stderr, "numerical abort: %s\n", e.what());
    return 3;
  } catch (const edgelab::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
