#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "probtsf/calibration.hpp"
#include "probtsf/csv.hpp"
#include "probtsf/datagen.hpp"
#include "probtsf/forecast.hpp"
#include "probtsf/svg.hpp"

namespace probtsf {

// Evaluation output files written into one directory:
//
//   report.json           summary metrics and per-tau arrays
//   variance_per_tau.csv  tau,mean,variance
//   kl_per_tau.csv        tau,kl
//   coverage.csv          tau,k1,k2,k3          (T data rows)
//   histograms.csv        bin_lo,bin_hi,bin_center,normal_density,<panel densities...>
//   sample_forecasts.csv  sample,id,step,observed,mu,sigma (mu/sigma empty in the lookback)
//   *.svg                 figure panels (optional)

inline nlohmann::json report_to_json(const CalibrationReport& r) {
  using nlohmann::json;
  json cov = json::array();
  for (const Coverage& c : r.coverage) {
    cov.push_back({{"k", c.k},
                   {"fraction", c.fraction},
                   {"expected", standard_normal_mass(-c.k, c.k)}});
  }
  json hists = json::array();
  for (const HistogramPanel& p : r.histograms) {
    hists.push_back({{"label", p.label},
                     {"tau", p.tau},
                     {"lo", p.hist.lo},
                     {"hi", p.hist.hi},
                     {"width", p.hist.width},
                     {"counts", p.hist.counts},
                     {"underflow", p.hist.underflow},
                     {"overflow", p.hist.overflow}});
  }
  // JSON has no infinity; a degenerate KL is reported as null.
  const auto finite_or_null = [](double x) { return std::isfinite(x) ? json(x) : json(nullptr); };
  json kl_tau = json::array();
  for (double k : r.kl_per_tau) kl_tau.push_back(finite_or_null(k));
  return json{{"n_test", r.n_test},
              {"horizon", r.horizon},
              {"kl_estimator", to_string(r.estimator)},
              {"pooled",
               {{"mean", r.pooled_mean},
                {"variance", r.pooled_variance},
                {"kl", finite_or_null(r.pooled_kl)},
                {"kl_moment", finite_or_null(r.pooled_kl_moment)},
                {"kl_binned", finite_or_null(r.pooled_kl_binned)}}},
              {"variance_per_tau", r.variance_per_tau},
              {"mean_per_tau", r.mean_per_tau},
              {"kl_per_tau", kl_tau},
              {"coverage", cov},
              {"mae", r.mae},
              {"mae_deterministic", r.mae_deterministic ? json(*r.mae_deterministic) : json(nullptr)},
              {"histograms", hists}};
}

struct ReportWriteOptions {
  bool svg = true;
  std::size_t samples = 3;
  std::string title;
};

namespace detail {

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + p.string() + "'");
  out << text;
  if (!out) throw std::runtime_error("error while writing '" + p.string() + "'");
}

inline double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

inline std::vector<double> iota_from(std::size_t n, double start) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = start + static_cast<double>(i);
  return v;
}

}  // namespace detail

inline void write_report_files(const std::filesystem::path& dir, const CalibrationReport& r,
                               const Forecasts& f, const WindowedDataset& test,
                               const ReportWriteOptions& opts = {}) {
  namespace fs = std::filesystem;
  using detail::format_real;
  fs::create_directories(dir);
  detail::write_text(dir / "report.json", report_to_json(r).dump(2) + "\n");

  const std::size_t T = r.horizon;
  {
    std::ostringstream v, k, c;
    v << "tau,mean,variance\n";
    k << "tau,kl\n";
    c << "tau,k1,k2,k3\n";
    for (std::size_t t = 0; t < T; ++t) {
      v << t + 1 << ',' << format_real(r.mean_per_tau[t]) << ',' << format_real(r.variance_per_tau[t]) << '\n';
      k << t + 1 << ',' << format_real(r.kl_per_tau[t]) << '\n';
      c << t + 1;
      for (const Coverage& cv : r.coverage) c << ',' << format_real(cv.per_tau[t]);
      c << '\n';
    }
    detail::write_text(dir / "variance_per_tau.csv", v.str());
    detail::write_text(dir / "kl_per_tau.csv", k.str());
    detail::write_text(dir / "coverage.csv", c.str());
  }
  {
    std::ostringstream h;
    h << "bin_lo,bin_hi,bin_center,normal_density";
    for (const HistogramPanel& p : r.histograms) {
      h << ',' << (p.tau == 0 ? std::string("pooled") : "tau_" + std::to_string(p.tau));
    }
    h << '\n';
    const Histogram& ref = r.histograms.front().hist;
    for (std::size_t i = 0; i < ref.counts.size(); ++i) {
      const double lo = ref.bin_lo(i), hi = lo + ref.width;
      h << format_real(lo) << ',' << format_real(hi) << ',' << format_real(ref.bin_center(i)) << ','
        << format_real(standard_normal_mass(lo, hi) / ref.width);
      for (const HistogramPanel& p : r.histograms) h << ',' << format_real(p.hist.density(i));
      h << '\n';
    }
    detail::write_text(dir / "histograms.csv", h.str());
  }
  const std::size_t n_samples = std::min(opts.samples, test.size());
  {
    std::ostringstream s;
    s << "sample,id,step,observed,mu,sigma\n";
    for (std::size_t n = 0; n < n_samples; ++n) {
      for (std::size_t t = 0; t < test.lookback; ++t) {
        s << n << ',' << test.ids[n] << ',' << t + 1 << ',' << format_real(test.lookbacks(n, t)) << ",,\n";
      }
      for (std::size_t t = 0; t < T; ++t) {
        s << n << ',' << test.ids[n] << ',' << test.lookback + t + 1 << ',' << format_real(test.futures(n, t))
          << ',' << format_real(f.mu(n, t)) << ',' << format_real(f.sigma(n, t)) << '\n';
      }
    }
    detail::write_text(dir / "sample_forecasts.csv", s.str());
  }
  if (!opts.svg) return;

  const std::string prefix = opts.title.empty() ? std::string() : opts.title + ": ";
  {
    svg::Figure fig(std::max<std::size_t>(1, n_samples), 360, 240);
    for (std::size_t n = 0; n < n_samples; ++n) {
      auto& p = fig.add(prefix + "trajectory " + std::to_string(test.ids[n]), "step", "x");
      const std::vector<double> past_t = detail::iota_from(test.lookback, 1.0);
      const std::vector<double> fut_t = detail::iota_from(T, static_cast<double>(test.lookback) + 1.0);
      std::vector<double> past(test.lookbacks.row(n).begin(), test.lookbacks.row(n).end());
      std::vector<double> fut(test.futures.row(n).begin(), test.futures.row(n).end());
      std::vector<double> mu(f.mu.row(n).begin(), f.mu.row(n).end()), lo(T), hi(T);
      for (std::size_t t = 0; t < T; ++t) {
        lo[t] = mu[t] - f.sigma(n, t);
        hi[t] = mu[t] + f.sigma(n, t);
      }
      p.band(fut_t, lo, hi, "#1f77b4", "mu +/- sigma");
      p.line(past_t, past, "#333333");
      p.line(fut_t, fut, "#000000", true, "observed");
      p.line(fut_t, mu, "#1f77b4", false, "forecast");
    }
    detail::write_text(dir / "sample_forecasts.svg", fig.str());
  }
  {
    svg::Figure fig(r.histograms.size(), 260, 220);
    for (const HistogramPanel& hp : r.histograms) {
      const std::string name = hp.tau == 0 ? "all tau" : "tau = " + std::to_string(hp.tau);
      auto& p = fig.add(prefix + name, "z", "density");
      std::vector<double> xc, dens, pdf;
      for (std::size_t i = 0; i < hp.hist.counts.size(); ++i) {
        xc.push_back(hp.hist.bin_center(i));
        dens.push_back(hp.hist.density(i));
      }
      std::vector<double> xs;
      for (int i = 0; i <= 200; ++i) {
        xs.push_back(hp.hist.lo + (hp.hist.hi - hp.hist.lo) * i / 200.0);
        pdf.push_back(detail::normal_pdf(xs.back()));
      }
      p.bars(xc, dens, hp.hist.width, "#1f77b4");
      p.line(xs, pdf, "#ff7f0e", false, "N(0,1)");
    }
    detail::write_text(dir / "histograms.svg", fig.str());
  }
  {
    svg::Figure fig(2, 360, 240);
    const std::vector<double> taus = detail::iota_from(T, 1.0);
    auto& pv = fig.add(prefix + "variance of z", "tau", "Var[z]");
    pv.line(taus, r.variance_per_tau, "#1f77b4");
    pv.hline(1.0, "#ff7f0e");
    auto& pk = fig.add(prefix + "KL(z || N(0,1))", "tau", "KL");
    pk.line(taus, r.kl_per_tau, "#1f77b4");
    pk.hline(0.0, "#ff7f0e");
    detail::write_text(dir / "variance_kl.svg", fig.str());
  }
  {
    svg::Figure fig(2, 360, 240);
    auto& pm = fig.add(prefix + "mean absolute error", "model", "MAE");
    std::vector<double> xs{1.0}, hs{r.mae};
    if (r.mae_deterministic) {
      xs = {1.0, 2.0};
      hs = {*r.mae_deterministic, r.mae};
      pm.bars({1.0}, {*r.mae_deterministic}, 0.6, "#7f7f7f", "1: deterministic");
      pm.bars({2.0}, {r.mae}, 0.6, "#1f77b4", "2: probabilistic");
    } else {
      pm.bars(xs, hs, 0.6, "#1f77b4", "probabilistic");
    }
    auto& pc = fig.add(prefix + "coverage", "tau", "fraction within k sigma");
    const std::vector<double> taus = detail::iota_from(T, 1.0);
    const char* colors[] = {"#1f77b4", "#2ca02c", "#d62728"};
    for (std::size_t i = 0; i < r.coverage.size(); ++i) {
      const Coverage& c = r.coverage[i];
      const std::string lab = std::to_string(static_cast<int>(c.k)) + " sigma";
      pc.line(taus, c.per_tau, colors[i % 3], false, lab);
      pc.line(taus, std::vector<double>(T, standard_normal_mass(-c.k, c.k)), colors[i % 3], true);
    }
    pc.set_ylim(0.0, 1.02);
    detail::write_text(dir / "coverage.svg", fig.str());
  }
}

}  // namespace probtsf
