// probtsf: generate synthetic datasets, train the dual mean/sigma forecaster,
// evaluate calibration and produce forecasts.
//
//   probtsf generate|train|evaluate|forecast [--config FILE] [options]
//
// Exit status: 0 success, 2 invalid configuration or arguments, 1 runtime
// failure (unreadable/malformed files, divergence, ...).

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "probtsf/probtsf.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace probtsf;

namespace {

constexpr const char* kToolVersion = "1.0.0";

void write_json(const fs::path& p, const json& j) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + p.string() + "'");
  out << j.dump(2) << "\n";
}

json manifest(const std::string& command, json config) {
  return json{{"tool", "probtsf"}, {"version", kToolVersion}, {"command", command}, {"config", std::move(config)}};
}

// ----------------------------------------------------------------------------
struct GenerateArgs {
  std::string kind = "sines";
  std::size_t n = 2000;
  std::size_t len = 192;
  std::uint64_t seed = 0;
  std::string output;
  double noise_std = 1.0;
  double omega1 = kTwoPi / 24.0;
  double omega2_mean = kTwoPi / 12.0;
  double lambda_mean = 5.0;
  double dt_int = 0.05;
  std::string vdp_form = "standard";
  double increment_std = 1.0;
};

void add_generate(CLI::App& app, GenerateArgs& a) {
  app.add_option("--kind", a.kind, "Dataset kind")->check(CLI::IsMember({"sines", "vdp", "brownian"}));
  app.add_option("--n", a.n, "Number of trajectories")->check(CLI::PositiveNumber);
  app.add_option("--len", a.len, "Points per trajectory")->check(CLI::PositiveNumber);
  app.add_option("--seed", a.seed, "Generator seed");
  app.add_option("--output", a.output, "Dataset CSV to write")->required();
  app.add_option("--noise-std", a.noise_std, "Observation noise std (sines, vdp)")->check(CLI::NonNegativeNumber);
  app.add_option("--omega1", a.omega1, "Base angular frequency (sines, vdp)")->check(CLI::PositiveNumber);
  app.add_option("--omega2-mean", a.omega2_mean, "Mean of the second frequency (sines)")->check(CLI::PositiveNumber);
  app.add_option("--lambda-mean", a.lambda_mean, "Mean damping coefficient (vdp)")->check(CLI::PositiveNumber);
  app.add_option("--dt-int", a.dt_int, "RK4 step, must divide 1 (vdp)")->check(CLI::PositiveNumber);
  app.add_option("--vdp-form", a.vdp_form, "Oscillator sign convention")->check(CLI::IsMember({"standard", "literal"}));
  app.add_option("--increment-std", a.increment_std, "Random-walk increment std (brownian)")->check(CLI::PositiveNumber);
}

int run_generate(const GenerateArgs& a) {
  TrajectorySet set;
  json cfg{{"kind", a.kind}, {"n", a.n}, {"len", a.len}, {"seed", a.seed}};
  if (a.kind == "sines") {
    SinesConfig c;
    c.noise_std = a.noise_std;
    c.omega1 = a.omega1;
    c.omega2_mean = a.omega2_mean;
    set = gen_sines(a.n, a.len, a.seed, c);
    cfg["sines"] = {{"omega1", c.omega1}, {"omega2_mean", c.omega2_mean}, {"amplitudes", {c.amplitude1, c.amplitude2}},
                    {"noise_std", c.noise_std}};
  } else if (a.kind == "vdp") {
    VdpConfig c;
    c.noise_std = a.noise_std;
    c.omega1 = a.omega1;
    c.lambda_mean = a.lambda_mean;
    c.dt_int = a.dt_int;
    c.form = vdp_form_from_string(a.vdp_form);
    validate(c);
    set = gen_vdp(a.n, a.len, a.seed, c);
    cfg["vdp"] = {{"omega1", c.omega1}, {"lambda_mean", c.lambda_mean}, {"y0", c.y0}, {"v0", c.v0},
                  {"dt_int", c.dt_int}, {"noise_std", c.noise_std}, {"form", to_string(c.form)}};
  } else {
    BrownianConfig c;
    c.increment_std = a.increment_std;
    set = gen_brownian(a.n, a.len, a.seed, c);
    cfg["brownian"] = {{"x0_low", c.x0_low}, {"x0_high", c.x0_high}, {"increment_std", c.increment_std}};
  }
  const fs::path out(a.output);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_csv_dataset(out.string(), set);
  fs::path man = out;
  man.replace_extension(".manifest.json");
  json m = manifest("generate", cfg);
  m["generator"] = a.kind;
  m["output"] = out.filename().string();
  write_json(man, m);
  std::cerr << "wrote " << out.string() << " (" << set.size() << " series x " << set.length() << " steps)\n";
  return 0;
}

// ----------------------------------------------------------------------------
struct SplitArgs {
  std::size_t lookback = 96;
  std::size_t horizon = 96;
  double train_fraction = 0.8;
  std::uint64_t split_seed = 0;
};

void add_split(CLI::App& app, SplitArgs& s) {
  app.add_option("--lookback", s.lookback, "Lookback length P")->check(CLI::PositiveNumber);
  app.add_option("--horizon", s.horizon, "Forecast horizon T")->check(CLI::PositiveNumber);
  app.add_option("--train-fraction", s.train_fraction, "Fraction of series used for training")
      ->check(CLI::Range(0.0, 1.0));
  app.add_option("--split-seed", s.split_seed, "Seed of the train/test shuffle");
}

json split_json(const SplitArgs& s) {
  return json{{"lookback", s.lookback}, {"horizon", s.horizon}, {"train_fraction", s.train_fraction},
              {"split_seed", s.split_seed}};
}

struct TrainArgs {
  std::string data;
  std::string out_dir;
  SplitArgs split;
  TrainConfig cfg;
  std::string variance_arch = "fully_connected";
  bool quiet = false;
};

void add_train(CLI::App& app, TrainArgs& a) {
  app.add_option("--data", a.data, "Dataset CSV")->required();
  app.add_option("--out-dir", a.out_dir, "Output directory")->required();
  add_split(app, a.split);
  TrainConfig& c = a.cfg;
  app.add_option("--batch-size", c.batch_size, "Minibatch size")->check(CLI::PositiveNumber);
  app.add_option("--learning-rate", c.adam.learning_rate, "Adam learning rate")->check(CLI::PositiveNumber);
  app.add_option("--beta1", c.adam.beta1, "Adam beta1")->check(CLI::Range(0.0, 0.999999));
  app.add_option("--beta2", c.adam.beta2, "Adam beta2")->check(CLI::Range(0.0, 0.999999));
  app.add_option("--epsilon", c.adam.epsilon, "Adam epsilon")->check(CLI::PositiveNumber);
  app.add_option("--pretrain-epochs", c.pretrain_epochs, "Point-wise pretraining epochs");
  app.add_option("--joint-epochs", c.joint_epochs, "Joint NLL epochs");
  app.add_option("--seed", c.seed, "Initialization and shuffling seed");
  app.add_option("--clip-norm", c.clip_norm, "Global gradient-norm clip (0 disables)")->check(CLI::NonNegativeNumber);
  app.add_option("--latent-dim", c.latent_dim, "Latent channels of the mean SSM")->check(CLI::PositiveNumber);
  app.add_option("--hidden", c.hidden, "Hidden width of the sigma network")->check(CLI::PositiveNumber);
  app.add_option("--variance-arch", a.variance_arch, "Sigma head architecture")
      ->check(CLI::IsMember({"fully_connected", "ssm_backed"}));
  app.add_option("--sigma-latent-dim", c.sigma_latent_dim, "Latent channels of an ssm_backed sigma head")
      ->check(CLI::PositiveNumber);
  app.add_option("--normalize", c.normalize, "Per-window standardization");
  app.add_flag("--quiet", a.quiet, "No per-epoch progress");
}

std::pair<WindowedDataset, WindowedDataset> load_windows(const std::string& path, const SplitArgs& s) {
  if (!fs::exists(path)) throw std::runtime_error("dataset '" + path + "' does not exist");
  const TrajectorySet set = read_csv_dataset(path);
  if (set.length() < s.lookback + s.horizon) {
    throw DataError("dataset '" + path + "' has " + std::to_string(set.length()) +
                    " rows, fewer than lookback + horizon = " + std::to_string(s.lookback + s.horizon));
  }
  return window(set, s.lookback, s.horizon, s.train_fraction, s.split_seed);
}

int run_train(TrainArgs& a) {
  a.cfg.variance_arch = variance_arch_from_string(a.variance_arch);
  a.cfg.validate();
  auto [train_set, test_set] = load_windows(a.data, a.split);
  if (train_set.empty()) throw ValidationError("train: the split leaves no training series");

  const fs::path dir(a.out_dir);
  fs::create_directories(dir);
  Checkpoint ck;
  ck.config = a.cfg;
  ck.metadata = {{"split", split_json(a.split)}, {"data", fs::path(a.data).filename().string()},
                 {"n_train", train_set.size()}, {"n_test", test_set.size()}};

  TrainResult res;
  try {
    res = train(train_set, a.cfg, [&](const EpochSummary& e) {
      if (!a.quiet) {
        std::cerr << to_string(e.phase) << " epoch " << e.epoch + 1 << ": loss " << e.mean_loss << " ("
                  << e.seconds << " s)\n";
      }
    });
  } catch (const TrainingDiverged& e) {
    ck.model = e.last_good();
    ck.metadata["diverged"] = e.what();
    save_checkpoint((dir / "checkpoint.last_good.json").string(), ck);
    throw;
  }
  ck.model = res.model;
  save_checkpoint((dir / "checkpoint.json").string(), ck);

  std::ostringstream hist;
  hist << "phase,epoch,step,loss,pointwise_loss\n";
  for (const HistoryEntry& h : res.history.steps) {
    hist << to_string(h.phase) << ',' << h.epoch + 1 << ',' << h.step << ',' << detail::format_real(h.loss) << ','
         << detail::format_real(h.pointwise_loss) << '\n';
  }
  detail::write_text(dir / "history.csv", hist.str());
  std::ostringstream tim;
  tim << "phase,epoch,mean_loss,seconds\n";
  for (const EpochSummary& e : res.history.epochs) {
    tim << to_string(e.phase) << ',' << e.epoch + 1 << ',' << detail::format_real(e.mean_loss) << ',' << e.seconds
        << '\n';
  }
  detail::write_text(dir / "timings.csv", tim.str());

  json m = manifest("train", detail::train_config_json(a.cfg));
  m["data"] = a.data;
  m["split"] = split_json(a.split);
  m["n_train"] = train_set.size();
  m["n_test"] = test_set.size();
  m["outputs"] = {"checkpoint.json", "history.csv", "timings.csv"};
  write_json(dir / "manifest.json", m);
  std::cerr << "wrote " << (dir / "checkpoint.json").string() << "\n";
  return 0;
}

// ----------------------------------------------------------------------------
struct EvaluateArgs {
  std::string data;
  std::string checkpoint;
  std::string oracle;
  std::string out_dir;
  std::string split = "test";
  SplitArgs split_args;
  std::string kl_estimator = "moment";
  bool no_svg = false;
  std::size_t samples = 3;
};

void add_evaluate(CLI::App& app, EvaluateArgs& a) {
  app.add_option("--data", a.data, "Dataset CSV")->required();
  auto* ck = app.add_option("--checkpoint", a.checkpoint, "Trained checkpoint");
  auto* orc = app.add_option("--oracle", a.oracle, "Use an analytic forecaster instead of a checkpoint")
                  ->check(CLI::IsMember({"brownian"}));
  ck->excludes(orc);
  app.add_option("--out-dir", a.out_dir, "Output directory")->required();
  app.add_option("--split", a.split, "Which series to evaluate")->check(CLI::IsMember({"test", "train", "all"}));
  add_split(app, a.split_args);
  app.add_option("--kl-estimator", a.kl_estimator, "KL estimator")->check(CLI::IsMember({"moment", "binned"}));
  app.add_flag("--no-svg", a.no_svg, "Skip SVG figures (CSV files are always written)");
  app.add_option("--samples", a.samples, "Example trajectories to plot");
}

int run_evaluate(CLI::App& app, EvaluateArgs& a) {
  if (a.checkpoint.empty() == a.oracle.empty()) {
    throw ValidationError("evaluate: give exactly one of --checkpoint or --oracle");
  }
  std::optional<Checkpoint> ck;
  SplitArgs split = a.split_args;
  if (!a.checkpoint.empty()) {
    ck = load_checkpoint(a.checkpoint);
    // Recover the training split unless overridden on the command line or config.
    const json& meta = ck->metadata;
    if (meta.contains("split")) {
      const json& s = meta.at("split");
      if (app.get_option("--train-fraction")->count() == 0) split.train_fraction = s.at("train_fraction").get<double>();
      if (app.get_option("--split-seed")->count() == 0) split.split_seed = s.at("split_seed").get<std::uint64_t>();
    }
    const bool p_given = app.get_option("--lookback")->count() > 0;
    const bool t_given = app.get_option("--horizon")->count() > 0;
    if ((p_given && split.lookback != ck->model.lookback()) || (t_given && split.horizon != ck->model.horizon())) {
      throw DataError("evaluate: requested lookback/horizon do not match the checkpoint (P=" +
                      std::to_string(ck->model.lookback()) + ", T=" + std::to_string(ck->model.horizon()) + ")");
    }
    split.lookback = ck->model.lookback();
    split.horizon = ck->model.horizon();
  }

  auto [train_set, test_set] = load_windows(a.data, split);
  WindowedDataset eval;
  if (a.split == "train") {
    eval = std::move(train_set);
  } else if (a.split == "test") {
    eval = std::move(test_set);
  } else {
    auto all = window(read_csv_dataset(a.data), split.lookback, split.horizon, 1.0, split.split_seed);
    eval = std::move(all.first);
  }
  if (eval.size() < 2) {
    throw ValidationError("evaluate: the '" + a.split + "' split has " + std::to_string(eval.size()) +
                          " series; at least 2 are needed");
  }

  const KlEstimator est = kl_estimator_from_string(a.kl_estimator);
  Forecasts f;
  CalibrationReport report;
  if (ck) {
    f = predict(ck->model, eval.lookbacks);
    report = build_report(ck->model, eval, est);
  } else {
    f = brownian_oracle_forecasts(eval);
    ReportOptions o;
    o.estimator = est;
    report = build_report(f, eval, o);
  }

  const fs::path dir(a.out_dir);
  ReportWriteOptions wo;
  wo.svg = !a.no_svg;
  wo.samples = a.samples;
  write_report_files(dir, report, f, eval, wo);

  json m = manifest("evaluate", {{"data", a.data},
                                 {"checkpoint", a.checkpoint.empty() ? json(nullptr) : json(a.checkpoint)},
                                 {"oracle", a.oracle.empty() ? json(nullptr) : json(a.oracle)},
                                 {"split", a.split},
                                 {"split_args", split_json(split)},
                                 {"kl_estimator", a.kl_estimator},
                                 {"svg", !a.no_svg}});
  if (ck) m["train_config"] = detail::train_config_json(ck->config);
  write_json(dir / "manifest.json", m);
  std::cerr << "pooled KL " << report.pooled_kl << ", pooled Var[z] " << report.pooled_variance << ", coverage "
            << report.coverage[0].fraction << "/" << report.coverage[1].fraction << "/" << report.coverage[2].fraction
            << " (n=" << report.n_test << ")\n";
  return 0;
}

// ----------------------------------------------------------------------------
struct ForecastArgs {
  std::string data;
  std::string checkpoint;
  std::string output;
};

void add_forecast(CLI::App& app, ForecastArgs& a) {
  app.add_option("--data", a.data, "Dataset CSV; the last P rows of every series are the lookback")->required();
  app.add_option("--checkpoint", a.checkpoint, "Trained checkpoint")->required();
  app.add_option("--output", a.output, "Forecast CSV to write")->required();
}

int run_forecast(const ForecastArgs& a) {
  const Checkpoint ck = load_checkpoint(a.checkpoint);
  if (!fs::exists(a.data)) throw std::runtime_error("dataset '" + a.data + "' does not exist");
  const TrajectorySet set = read_csv_dataset(a.data);
  const std::size_t P = ck.model.lookback();
  if (set.length() < P) {
    throw DataError("forecast: dataset has " + std::to_string(set.length()) + " rows, model lookback is " +
                    std::to_string(P));
  }
  std::ostringstream out;
  out << "id,step,mu,sigma\n";
  for (const Trajectory& tr : set.trajectories) {
    const std::span<const double> lb(tr.values.data() + tr.values.size() - P, P);
    const ForecastDistribution fd = predict(ck.model.mean, ck.model.sigma, lb);
    for (std::size_t t = 0; t < fd.mu.size(); ++t) {
      out << tr.id << ',' << t + 1 << ',' << detail::format_real(fd.mu[t]) << ',' << detail::format_real(fd.sigma[t])
          << '\n';
    }
  }
  const fs::path p(a.output);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  detail::write_text(p, out.str());
  fs::path man = p;
  man.replace_extension(".manifest.json");
  write_json(man, manifest("forecast", {{"data", a.data}, {"checkpoint", a.checkpoint}}));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Probabilistic time-series forecasting with a state-space mean and a positive sigma network"};
  app.set_version_flag("--version", kToolVersion);
  app.set_config("--config", "", "Config file: key = value lines under [generate]/[train]/[evaluate]/[forecast]");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.fallthrough();
  app.require_subcommand(1);

  GenerateArgs gen;
  TrainArgs tr;
  EvaluateArgs ev;
  ForecastArgs fc;
  auto* gen_cmd = app.add_subcommand("generate", "Write a synthetic dataset CSV");
  auto* tr_cmd = app.add_subcommand("train", "Train the mean and sigma networks");
  auto* ev_cmd = app.add_subcommand("evaluate", "Calibration report on held-out series");
  auto* fc_cmd = app.add_subcommand("forecast", "Forecast from the end of every series");
  add_generate(*gen_cmd, gen);
  add_train(*tr_cmd, tr);
  add_evaluate(*ev_cmd, ev);
  add_forecast(*fc_cmd, fc);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (gen_cmd->parsed()) return run_generate(gen);
    if (tr_cmd->parsed()) return run_train(tr);
    if (ev_cmd->parsed()) return run_evaluate(*ev_cmd, ev);
    if (fc_cmd->parsed()) return run_forecast(fc);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
