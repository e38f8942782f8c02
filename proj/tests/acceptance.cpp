// Acceptance run: executes the full suite twice (one worker, then eight),
// re-derives every criterion from the reported statistics and prints one
// pass/fail line per criterion. Exit status 0 only when all eleven pass.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "towerlab/experiment.hpp"

namespace fs = std::filesystem;
using towerlab::AcceptanceRun;
using towerlab::ExperimentConfig;
using towerlab::ExperimentResult;

namespace {

// Tolerances, pinned.
constexpr double kReturnSlope = -2.0, kReturnSlopeTol = 0.2, kReturnSeconds = 120.0;
constexpr double kMeetingSlope = -2.0, kMeetingSlopeTol = 0.3, kMeetingSeconds = 300.0;
constexpr double kSpearmanMax = 0.2;
constexpr double kR2Min = 0.98, kExactSigma = 3.0;
constexpr double kMcRelativeMax = 0.2;
constexpr double kPlateauMax = 0.02, kSensitivityMax = 0.05, kVarianceGapMax = 0.10;
constexpr double kKsMax = 0.03, kCltSeconds = 900.0;
constexpr double kBoundSlack = 1e-9, kVarianceFraction = 0.01;
constexpr double kTvMax = 0.01, kKernelErrorMax = 1e-12;
constexpr double kThetaRelMax = 0.01;

struct Line {
  int id;
  bool passed;
  std::string text;
};

const ExperimentResult& find(const AcceptanceRun& run, const std::string& name) {
  for (const auto& [n, r] : run.results) {
    if (n == name) return r;
  }
  throw std::runtime_error("missing suite entry " + name);
}

const ExperimentConfig& config_of(const std::vector<towerlab::AcceptanceEntry>& suite, const std::string& name) {
  for (const auto& e : suite) {
    if (e.name == name) return e.config;
  }
  throw std::runtime_error("missing suite config " + name);
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"towerlab acceptance"};
  std::uint64_t seed = 1;
  std::string out = (fs::temp_directory_path() / "towerlab_acceptance").string();
  bool keep = false;
  app.add_option("--seed", seed, "Master seed");
  app.add_option("--out", out, "Scratch directory for both output trees");
  app.add_flag("--keep", keep, "Keep the output trees");
  CLI11_PARSE(app, argc, argv);

  const fs::path dir_a = fs::path(out) / "workers1";
  const fs::path dir_b = fs::path(out) / "workers8";
  fs::remove_all(out);

  std::vector<Line> lines;
  try {
    const auto suite = towerlab::acceptance_suite(seed);
    const AcceptanceRun a = towerlab::run_all_acceptance(seed, dir_a.string(), 1);
    const AcceptanceRun b = towerlab::run_all_acceptance(seed, dir_b.string(), 8);

    {
      const auto& r = find(a, "return_tail");
      const auto& c = config_of(suite, "return_tail");
      const double slope = r.metric("fit.slope");
      const double secs = a.seconds.at("return_tail");
      const bool setup = c.maps.alpha == 0.5 && r.metric("returns") == 1e7 && r.metric("fit.n_min") == 16 &&
                         r.metric("fit.n_max") == 1024;
      lines.push_back({1, setup && std::abs(slope - kReturnSlope) <= kReturnSlopeTol && secs <= kReturnSeconds,
                       "return-time tail slope " + fmt(slope) + " (target -2 +- 0.2), alpha 0.5, 1e7 returns, " +
                           fmt(secs) + " s single-threaded (limit 120 s)"});
    }
    {
      const auto& r = find(a, "meeting_tail_power");
      const auto& c = config_of(suite, "meeting_tail_power");
      const double slope = r.metric("fit.slope");
      const double secs = a.seconds.at("meeting_tail_power");
      const bool setup = c.tower.model == "power" && c.tower.beta == 3.0 && r.metric("runs") == 1e6 &&
                         r.metric("fit.n_min") == 8 && r.metric("fit.n_max") == 512;
      lines.push_back({2, setup && std::abs(slope - kMeetingSlope) <= kMeetingSlopeTol && secs <= kMeetingSeconds,
                       "meeting-time tail slope " + fmt(slope) + " (target -2 +- 0.3), 1e6 coupled runs, " +
                           fmt(secs) + " s (limit 300 s)"});
    }
    {
      const auto& r = find(a, "meeting_tail_power");
      const auto& c = config_of(suite, "meeting_tail_power");
      const double rho = r.metric("ratio.spearman");
      const bool window = c.fit.min == 8 && c.fit.max <= c.chain.cap / 4;
      lines.push_back({3, window && rho <= kSpearmanMax,
                       "comparator ratio Spearman " + fmt(rho) + " over [8, " + std::to_string(c.fit.max) +
                           "] (max 0.2, no upward trend)"});
    }
    {
      const auto& r = find(a, "meeting_tail_geometric");
      const auto& c = config_of(suite, "meeting_tail_geometric");
      const double r2 = r.metric("exp_fit.r2");
      const double z = r.metric("exact.max_z");
      const bool setup = c.tower.model == "geometric" && c.chain.exact_n == 12;
      lines.push_back({4, setup && r2 > kR2Min && z <= kExactSigma,
                       "geometric roof: log-survival R^2 " + fmt(r2) + " (min 0.98), exact oracle max z " + fmt(z) +
                           " for n <= 12 (max 3)"});
    }
    {
      const auto& r = find(a, "approx_decay");
      const auto& c = config_of(suite, "approx_decay");
      const double cal = r.metric("m4.estimate") / r.metric("m4.comparator");
      bool ok = c.tower.beta == 3.0 && c.decay.r == 2.0 && c.observable.mode == "geometric";
      std::string detail = "C = " + fmt(cal) + " at m = 4;";
      for (int m : {4, 8, 16, 32}) {
        const std::string p = "m" + std::to_string(m) + ".";
        const double est = r.metric(p + "estimate");
        const double rel = r.metric(p + "mc_error") / est;
        ok = ok && rel < kMcRelativeMax;
        if (m != 4) {
          const double bound = cal * r.metric(p + "comparator");
          ok = ok && est <= bound;
          detail += " m=" + std::to_string(m) + " " + fmt(est) + " <= " + fmt(bound) + ";";
        }
        detail += " mc " + fmt(rel);
        detail += m == 32 ? "" : ";";
      }
      lines.push_back({5, ok, "approximation decay " + detail + " (mc max 0.2)"});
    }
    {
      const auto& r = find(a, "covariance_decay");
      const auto& c = config_of(suite, "covariance_decay");
      const double plateau = r.metric("plateau.increment");
      const double c50 = r.metric("c2.K50"), c200 = r.metric("c2.K200");
      const double sens = std::abs(c50 - c200) / c200;
      const double gap = std::abs(r.metric("var_scaled.full") - c200) / c200;
      const bool setup = c.tower.beta == 2.5 && c.clt.length == 10000;
      lines.push_back({6, setup && plateau < kPlateauMax && sens < kSensitivityMax && gap < kVarianceGapMax,
                       "covariance plateau " + fmt(plateau) + " (max 0.02), cutoff sensitivity " + fmt(sens) +
                           " (max 0.05), Var(S_n)/n gap " + fmt(gap) + " at n = 1e4 (max 0.10)"});
    }
    {
      const auto& r = find(b, "clt_lsv");
      const auto& c = config_of(suite, "clt_lsv");
      const double ks = r.metric("ks_distance");
      const double secs = b.seconds.at("clt_lsv");
      const bool setup = c.tower.model == "lsv" && c.tower.lsv_alpha == 0.4 && c.clt.length == 10000 &&
                         c.clt.replicates == 5000;
      lines.push_back({7, setup && ks < kKsMax && secs <= kCltSeconds,
                       "CLT on the LSV tower: KS " + fmt(ks) + " (max 0.03), 5000 replicates of n = 1e4, " +
                           fmt(secs) + " s with 8 workers (limit 900 s)"});
    }
    {
      const auto& r = find(a, "coboundary");
      const double sup = r.metric("max_abs_sum");
      const double bound = 2.0 * r.metric("chi.sup") + kBoundSlack;
      const double c2 = std::abs(r.metric("c2"));
      const double vlimit = kVarianceFraction * r.metric("variance");
      const bool setup = r.metric("length") == 1e6;
      lines.push_back({8, setup && sup <= bound && c2 < vlimit,
                       "coboundary: sup |S_n| " + fmt(sup) + " <= " + fmt(bound) + " over n <= 1e6, |c2| " + fmt(c2) +
                           " < " + fmt(vlimit)});
    }
    {
      const auto& r = find(a, "stationarity");
      const double tv = r.metric("tv_distance");
      const double kerr = r.metric("kernel_error");
      const bool setup = r.metric("states") <= 100 && r.metric("steps") == 1e7;
      lines.push_back({9, setup && tv < kTvMax && kerr < kKernelErrorMax,
                       "stationarity: TV " + fmt(tv) + " (max 0.01) over 1e7 steps on " +
                           fmt(r.metric("states")) + " states, kernel error " + fmt(kerr) + " (max 1e-12)"});
    }
    {
      const auto& r = find(a, "stationarity");
      const double rel = std::abs(r.metric("theta_plus_over_u") - r.metric("inverse_mean_roof")) /
                         r.metric("inverse_mean_roof");
      lines.push_back({10, r.metric("steps") == 1e7 && rel <= kThetaRelMax,
                       "base-return frequency: theta/u " + fmt(r.metric("theta_plus_over_u")) + " vs 1/E[h] " +
                           fmt(r.metric("inverse_mean_roof")) + ", relative error " + fmt(rel) + " (max 0.01)"});
    }
    {
      std::string diff;
      const bool same = towerlab::trees_identical(dir_a.string(), dir_b.string(), &diff);
      bool flags = a.results.size() == b.results.size();
      for (std::size_t i = 0; flags && i < a.results.size(); ++i) {
        flags = a.results[i].second.report == b.results[i].second.report;
      }
      lines.push_back({11, same && flags,
                       same ? "determinism: two runs (1 and 8 workers) produce byte-identical trees"
                            : "determinism: trees differ at " + diff});
    }
  } catch (const std::exception& e) {
    std::cerr << "acceptance run aborted: " << e.what() << "\n";
    return 1;
  }

  bool all = true;
  for (const auto& l : lines) {
    std::printf("criterion %d: %s %s\n", l.id, l.passed ? "PASS" : "FAIL", l.text.c_str());
    all = all && l.passed;
  }
  std::printf("acceptance: %s (%zu criteria)\n", all ? "PASS" : "FAIL", lines.size());
  if (!keep) fs::remove_all(out);
  return all && lines.size() == 11 ? 0 : 2;
}
