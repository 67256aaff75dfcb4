// Acceptance run. Prints one PASS/FAIL line per criterion and exits non-zero
// if any criterion fails. INFO lines are diagnostics and are not counted.
//
// Usage: acceptance [output-dir]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "probtsf/probtsf.hpp"
#include "support.hpp"

using namespace probtsf;
namespace fs = std::filesystem;

namespace {

// Tolerances.
constexpr std::size_t kSeries = 2500;
constexpr std::size_t kP = 96;
constexpr std::size_t kT = 96;
constexpr double kTrainFraction = 0.8;
constexpr double kSyntheticKlMax = 5e-2;
constexpr double kVarLo = 0.7;
constexpr double kVarHi = 1.3;
constexpr double kOracleKlMax = 1e-3;
constexpr double kOracleVarTol = 0.02;
constexpr std::size_t kOracleMinResiduals = 100000;
constexpr std::size_t kOraclePaths = 40000;
constexpr double kFailureVarHi = 1.5;
constexpr double kFailureVarLo = 0.5;
constexpr double kFailureKlMin = 0.1;
constexpr double kArchKlRatioMax = 10.0;
constexpr std::size_t kGradConfigs = 120;
constexpr double kGradSecondsMax = 60.0;
constexpr double kClosedFormTol = 1e-12;
constexpr double kDrawsKlMax = 1e-3;
constexpr double kCoverageTol = 0.01;
constexpr std::size_t kElectricityColumns = 321;

int failures = 0;

void verdict(int id, const std::string& name, bool pass, const std::string& detail) {
  if (!pass) ++failures;
  std::cout << (pass ? "PASS" : "FAIL") << "  [" << id << "] " << name << ": " << detail << std::endl;
}

void info(const std::string& name, const std::string& detail) {
  std::cout << "INFO  " << name << ": " << detail << std::endl;
}

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

std::string g(double x) { return fmt("%.3g", x); }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Run {
  CalibrationReport report;
  double seconds = 0.0;
};

Run train_and_evaluate(const TrajectorySet& set, const TrainConfig& cfg, const fs::path& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto [tr, te] = window(set, kP, kT, kTrainFraction, 0);
  const TrainResult res = train(tr, cfg);
  Run r{build_report(res.model, te), 0.0};
  r.seconds = seconds_since(t0);
  write_report_files(out, r.report, predict(res.model, te.lookbacks), te);
  return r;
}

std::pair<double, double> var_range(const CalibrationReport& r) {
  const auto [lo, hi] = std::minmax_element(r.variance_per_tau.begin(), r.variance_per_tau.end());
  return {*lo, *hi};
}

std::string summary(const Run& r) {
  const auto [lo, hi] = var_range(r.report);
  return "KL=" + g(r.report.pooled_kl) + " var_tau in [" + fmt("%.3f", lo) + ", " + fmt("%.3f", hi) +
         "] (" + fmt("%.0f", r.seconds) + " s)";
}

bool calibrated(const Run& r) {
  const auto [lo, hi] = var_range(r.report);
  return r.report.pooled_kl <= kSyntheticKlMax && lo >= kVarLo && hi <= kVarHi;
}

double long_double_gain(double a, double dt) {
  const long double z = static_cast<long double>(dt) * a;
  return static_cast<double>(std::expm1(z) / static_cast<long double>(a));
}

void discretization_oracle() {
  double worst = 0.0;
  // Scalar and diagonal cases across rates, including |dt a| below the
  // series threshold where the gain is dt (1 + z/2 + z^2/6 + ...).
  const std::vector<double> dts{1e-3, 0.1, 0.5, 1.0, 2.0};
  const std::vector<double> as{-1e-12, -3e-9, -1e-6, -0.01, -0.5, -1.0, -7.5, -40.0};
  for (double dt : dts) {
    for (double a : as) {
      const Discretized d = discretize(std::vector<double>{a}, std::vector<double>{1.0}, dt);
      worst = std::max(worst, std::abs(d.a_bar[0] - std::exp(dt * a)));
      worst = std::max(worst, std::abs(d.b_bar[0] - long_double_gain(a, dt)));
    }
    std::vector<double> b(as.size());
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = 0.5 + static_cast<double>(i);
    const Discretized d = discretize(as, b, dt);
    for (std::size_t i = 0; i < as.size(); ++i) {
      worst = std::max(worst, std::abs(d.a_bar[i] - std::exp(dt * as[i])));
      worst = std::max(worst, std::abs(d.b_bar[i] - long_double_gain(as[i], dt) * b[i]));
    }
  }
  const double z = -2e-9;
  const Discretized s = discretize(std::vector<double>{z}, std::vector<double>{1.0}, 1.0);
  worst = std::max(worst, std::abs(s.b_bar[0] - (1.0 + z / 2.0 + z * z / 6.0)));
  verdict(7, "discretization closed forms", worst <= kClosedFormTol, "max abs error " + g(worst));
}

void metric_oracles() {
  const double cf = std::max(
      {std::abs(kl_to_standard_normal(std::vector<double>{-1.0, 1.0})),
       std::abs(kl_to_standard_normal(std::vector<double>{0.0, 2.0}) - 0.5),
       std::abs(kl_to_standard_normal(std::vector<double>{-2.0, 2.0}) - 0.5 * (3.0 - std::log(4.0))),
       std::abs(kl_to_standard_normal(std::vector<double>{-0.5, 0.5}) - 0.5 * (0.25 - 1.0 - std::log(0.25)))});

  Pcg64 rng(2024, 0);
  std::normal_distribution<double> n01(0.0, 1.0);
  std::vector<double> draws(100000);
  for (double& x : draws) x = n01(rng);
  const double kl = kl_to_standard_normal(draws);

  // x = mu + sigma * eps with known (mu, sigma).
  const std::size_t n = 1000, T = 100;
  Forecasts f{Matrix(n, T), Matrix(n, T)};
  Matrix x(n, T);
  std::normal_distribution<double> loc(0.0, 5.0);
  std::uniform_real_distribution<double> scale(0.1, 10.0);
  for (std::size_t k = 0; k < n * T; ++k) {
    f.mu.data()[k] = loc(rng);
    f.sigma.data()[k] = scale(rng);
    x.data()[k] = f.mu.data()[k] + f.sigma.data()[k] * n01(rng);
  }
  const double expect[] = {0.683, 0.954, 0.997};
  double cov[3];
  bool cov_ok = true;
  for (int k = 1; k <= 3; ++k) {
    cov[k - 1] = coverage(f, x, k).fraction;
    cov_ok = cov_ok && std::abs(cov[k - 1] - expect[k - 1]) <= kCoverageTol;
  }
  verdict(8, "metric oracles", cf <= kClosedFormTol && kl < kDrawsKlMax && cov_ok,
          "closed-form error " + g(cf) + ", KL(1e5 normal draws)=" + g(kl) + ", coverage " +
              fmt("%.4f", cov[0]) + "/" + fmt("%.4f", cov[1]) + "/" + fmt("%.4f", cov[2]));
}

void loss_identity() {
  double worst = 0.0;
  for (std::uint64_t k = 0; k < 200; ++k) {
    Pcg64 rng(99, k);
    const std::size_t r = testing::uniform_int(rng, 1, 20), c = testing::uniform_int(rng, 1, 20);
    Matrix mu(r, c), x(r, c);
    mu.data() = testing::normal_vector(r * c, rng);
    x.data() = testing::normal_vector(r * c, rng, 1.0, 4.0);
    const double a = nll_loss(mu, Matrix(r, c, 1.0), x), b = pretrain_loss(mu, x) / 2.0;
    worst = std::max(worst, std::abs(a - b) / std::abs(b));
  }
  const double tol = 4 * std::numeric_limits<double>::epsilon();
  verdict(9, "NLL with unit sigma equals half the point-wise loss", worst <= tol,
          "max relative gap " + g(worst) + " (tol " + g(tol) + ")");
}

void gradient_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  const testing::GradSuite s = testing::run_gradient_suite(kGradConfigs, 4242);
  const double secs = seconds_since(t0);
  verdict(6, "analytic vs finite-difference gradients", s.worst() < testing::kGradTol && secs < kGradSecondsMax,
          std::to_string(s.configs) + " configs, worst relative error mean " + g(s.worst_mean) + " sigma " +
              g(s.worst_sigma) + " pretrain " + g(s.worst_pretrain) + " nll " + g(s.worst_nll) + " (" +
              fmt("%.1f", secs) + " s)");
}

void brownian_oracle_check(const fs::path& out) {
  // Residuals within one path are correlated, so the spread of the pooled
  // variance is set by the path count: about 1.005 / sqrt(paths).
  const TrajectorySet set = gen_brownian(kOraclePaths, kP + kT, 5);
  const WindowedDataset d = window(set, kP, kT, 0.0, 0).second;
  const Forecasts f = brownian_oracle_forecasts(d);
  const CalibrationReport r = build_report(f, d);
  write_report_files(out / "brownian_oracle", r, f, d);
  const std::size_t n = r.z.data().size();
  verdict(3, "Brownian oracle calibration",
          n >= kOracleMinResiduals && r.pooled_kl <= kOracleKlMax &&
              std::abs(r.pooled_variance - 1.0) <= kOracleVarTol,
          std::to_string(n) + " residuals, KL=" + g(r.pooled_kl) + " variance=" + fmt("%.4f", r.pooled_variance));
}

void electricity_schema(const fs::path& out) {
  // A 321-column CSV in the benchmark layout: a time column, then one
  // column per client with daily and weekly cycles at different scales.
  const std::size_t rows = 400;
  const fs::path dir = out / "electricity";
  fs::create_directories(dir);
  const fs::path csv = dir / "electricity_synthetic.csv";
  {
    Pcg64 rng(321, 0);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::uniform_real_distribution<double> level(50.0, 5000.0), phase(0.0, kTwoPi);
    std::vector<double> lv(kElectricityColumns), ph(kElectricityColumns);
    for (std::size_t c = 0; c < kElectricityColumns; ++c) {
      lv[c] = level(rng);
      ph[c] = phase(rng);
    }
    std::ofstream f(csv);
    f << "date";
    for (std::size_t c = 0; c < kElectricityColumns; ++c) f << ",MT_" << (c + 1);
    f << "\n";
    for (std::size_t t = 0; t < rows; ++t) {
      f << t;
      for (std::size_t c = 0; c < kElectricityColumns; ++c) {
        const double daily = std::sin(kTwoPi * t / 24.0 + ph[c]);
        const double weekly = 0.3 * std::sin(kTwoPi * t / 168.0 + ph[c]);
        f << "," << detail::format_real(lv[c] * (1.0 + 0.2 * daily + weekly + 0.02 * noise(rng)));
      }
      f << "\n";
    }
  }

  std::string problem;
  try {
    const TrajectorySet set = read_csv_dataset(csv.string());
    if (set.size() != kElectricityColumns || set.length() != rows) problem = "unexpected shape";

    std::ostringstream again;
    format_csv_dataset(again, set);
    std::istringstream in(again.str());
    const TrajectorySet back = parse_csv_dataset(in, "round-trip");
    if (!(back.time == set.time)) problem = "time column changed on round trip";
    for (std::size_t i = 0; i < set.size(); ++i) {
      if (back.trajectories[i].values != set.trajectories[i].values) problem = "values changed on round trip";
    }

    const auto [tr, te] = window(set, kP, kT, kTrainFraction, 0);
    TrainConfig cfg;
    cfg.pretrain_epochs = 3;
    cfg.joint_epochs = 2;
    const TrainResult res = train(tr, cfg);
    const Forecasts f = predict(res.model, te.lookbacks);
    const CalibrationReport r = build_report(res.model, te);
    write_report_files(dir, r, f, te);

    std::ifstream rj(dir / "report.json");
    const nlohmann::json j = nlohmann::json::parse(rj);
    if (j["n_test"] != te.size() || j["variance_per_tau"].size() != kT || !j["mae"].is_number() ||
        !j["pooled"]["kl"].is_number())
      problem = "report.json malformed";
    for (const char* name : {"variance_per_tau.csv", "kl_per_tau.csv", "coverage.csv", "histograms.csv",
                             "sample_forecasts.csv", "histograms.svg"}) {
      if (!fs::exists(dir / name) || fs::file_size(dir / name) == 0) problem = std::string("missing ") + name;
    }
    if (problem.empty()) {
      verdict(10, "electricity-schema CSV end to end", true,
              std::to_string(set.size()) + " columns, " + std::to_string(te.size()) + " test windows, MAE " +
                  g(r.mae) + ", KL=" + g(r.pooled_kl));
      return;
    }
  } catch (const std::exception& e) {
    problem = e.what();
  }
  verdict(10, "electricity-schema CSV end to end", false, problem);
}

void write_comparison(const fs::path& out, const std::vector<std::pair<std::string, const Run*>>& rows) {
  std::ofstream f(out / "variance_arch_comparison.csv");
  f << "dataset,variance_arch,pooled_kl,pooled_kl_binned,pooled_variance,min_var_tau,max_var_tau,coverage_k1,"
       "coverage_k2,coverage_k3,mae,seconds\n";
  for (const auto& [label, r] : rows) {
    const auto [lo, hi] = var_range(r->report);
    f << label << "," << detail::format_real(r->report.pooled_kl) << ","
      << detail::format_real(r->report.pooled_kl_binned) << "," << detail::format_real(r->report.pooled_variance)
      << "," << detail::format_real(lo) << "," << detail::format_real(hi);
    for (const Coverage& c : r->report.coverage) f << "," << detail::format_real(c.fraction);
    f << "," << detail::format_real(r->report.mae) << "," << detail::format_real(r->seconds) << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path out = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance_out");
  fs::create_directories(out);
  std::cout << "output directory: " << fs::absolute(out).string() << std::endl;

  try {
    discretization_oracle();
    metric_oracles();
    loss_identity();
    gradient_suite();
    brownian_oracle_check(out);
    electricity_schema(out);

    const TrajectorySet sines = gen_sines(kSeries, kP + kT, 1);
    const TrajectorySet vdp = gen_vdp(kSeries, kP + kT, 2);
    const TrajectorySet brownian = gen_brownian(kSeries, kP + kT, 3);

    const TrainConfig defaults;
    TrainConfig ssm = defaults;
    ssm.variance_arch = VarianceArch::ssm_backed;

    const Run sines_mlp = train_and_evaluate(sines, defaults, out / "sines");
    verdict(1, "sines calibration", calibrated(sines_mlp), summary(sines_mlp));

    const Run vdp_mlp = train_and_evaluate(vdp, defaults, out / "vdp");
    verdict(2, "Van der Pol calibration", calibrated(vdp_mlp), summary(vdp_mlp));

    const Run bm = train_and_evaluate(brownian, defaults, out / "brownian");
    {
      const auto [lo, hi] = var_range(bm.report);
      const bool off = hi > kFailureVarHi || lo < kFailureVarLo;
      verdict(4, "Brownian failure reproduced", off && bm.report.pooled_kl >= kFailureKlMin, summary(bm));
    }

    const Run sines_ssm = train_and_evaluate(sines, ssm, out / "sines_ssm_sigma");
    const Run vdp_ssm = train_and_evaluate(vdp, ssm, out / "vdp_ssm_sigma");
    write_comparison(out, {{"sines,fully_connected", &sines_mlp},
                           {"sines,ssm_backed", &sines_ssm},
                           {"vdp,fully_connected", &vdp_mlp},
                           {"vdp,ssm_backed", &vdp_ssm}});
    {
      const auto ratio = [](const Run& a, const Run& b) {
        const double x = std::max(a.report.pooled_kl, b.report.pooled_kl);
        const double y = std::min(a.report.pooled_kl, b.report.pooled_kl);
        return y > 0.0 ? x / y : std::numeric_limits<double>::infinity();
      };
      const double rs = ratio(sines_ssm, sines_mlp), rv = ratio(vdp_ssm, vdp_mlp);
      verdict(5, "ssm-backed sigma KL within 10x of the MLP",
              rs <= kArchKlRatioMax && rv <= kArchKlRatioMax &&
                  fs::exists(out / "variance_arch_comparison.csv"),
              "sines " + g(sines_ssm.report.pooled_kl) + " vs " + g(sines_mlp.report.pooled_kl) + " (x" + g(rs) +
                  "), vdp " + g(vdp_ssm.report.pooled_kl) + " vs " + g(vdp_mlp.report.pooled_kl) + " (x" + g(rv) +
                  ")");
    }

    // Longer schedules, for comparison with the default-schedule results.
    TrainConfig wide = defaults;
    wide.hidden = 128;
    wide.joint_epochs = 100;
    info("sines, hidden 128, 100 joint epochs", summary(train_and_evaluate(sines, wide, out / "sines_long")));
    info("Brownian, hidden 128, 100 joint epochs", summary(train_and_evaluate(brownian, wide, out / "brownian_long")));
    TrainConfig ssm_long = ssm;
    ssm_long.joint_epochs = 100;
    info("sines, ssm-backed sigma, 100 joint epochs",
         summary(train_and_evaluate(sines, ssm_long, out / "sines_ssm_sigma_long")));
  } catch (const std::exception& e) {
    std::cout << "FAIL  acceptance run aborted: " << e.what() << std::endl;
    return 1;
  }

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
