#include "towerlab/experiment.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <sstream>

#include "towerlab/chain.hpp"
#include "towerlab/format.hpp"
#include "towerlab/maps.hpp"
#include "towerlab/parallel.hpp"
#include "towerlab/stats.hpp"

namespace towerlab {

namespace fs = std::filesystem;

bool ExperimentResult::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

int ExperimentResult::exit_code() const { return passed() ? 0 : 2; }

const Check* ExperimentResult::find_check(const std::string& name) const {
  for (const auto& c : checks) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

double ExperimentResult::metric(const std::string& key) const {
  for (const auto& [k, v] : report) {
    if (k == key) return parse_double(v);
  }
  throw std::out_of_range("no report entry '" + key + "'");
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 failed");
  }
  std::ostringstream out;
  for (unsigned int i = 0; i < length; ++i) {
    out << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return out.str();
}

namespace {

std::string num(double v) { return format_double(v); }
std::string num(std::uint64_t v) { return std::to_string(v); }

// Accumulates the output files of one run in memory; everything is written at
// the end together with the manifest.
class Outputs {
 public:
  Outputs(const ExperimentConfig& config, std::string header)
      : config_(config), header_(std::move(header)) {}

  std::ostringstream& csv(const std::string& name, const std::string& what) {
    auto& s = files_[name];
    s << "# " << header_ << "\n# " << what << "\n";
    order_.push_back(name);
    return s;
  }

  void report(const std::string& key, const std::string& value) { result.report.emplace_back(key, value); }
  void report(const std::string& key, double value) { report(key, num(value)); }
  void report_count(const std::string& key, std::uint64_t value) { report(key, num(value)); }

  void check(const std::string& name, bool passed, double value, double threshold,
             std::string detail) {
    result.checks.push_back({name, passed, value, threshold, std::move(detail)});
  }

  ExperimentResult finish() {
    const fs::path dir(config_.out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) {
      throw ConfigError("--out", "cannot create output directory '" + config_.out + "'");
    }
    std::ostringstream cfg;
    cfg << "# " << header_ << "\n# full configuration of this run\n";
    write_config(cfg, config_);
    files_["config.ini"] << cfg.str();
    order_.insert(order_.begin(), "config.ini");

    std::ostringstream rep;
    rep << "# " << header_ << "\n# summary statistics and check outcomes\n";
    rep << "kind = " << kind_name(config_.kind) << "\n";
    rep << "seed = " << config_.seed << "\n";
    rep << "version = " << kVersion << "\n";
    for (const auto& [k, v] : result.report) rep << k << " = " << v << "\n";
    for (const auto& c : result.checks) {
      rep << "check." << c.name << " = " << (c.passed ? "pass" : "fail") << " value=" << num(c.value)
          << " threshold=" << num(c.threshold) << " (" << c.detail << ")\n";
    }
    rep << "status = " << (result.passed() ? "pass" : "fail") << "\n";
    files_["report.txt"] << rep.str();
    order_.insert(order_.begin() + 1, "report.txt");

    nlohmann::ordered_json manifest;
    manifest["tool"] = "towerlab";
    manifest["version"] = kVersion;
    manifest["checks_what"] = header_;
    manifest["kind"] = kind_name(config_.kind);
    manifest["seed"] = config_.seed;
    manifest["config_sha256"] = sha256_hex(config_text(config_));
    manifest["status"] = result.passed() ? "pass" : "fail";
    nlohmann::ordered_json checks = nlohmann::ordered_json::array();
    for (const auto& c : result.checks) {
      checks.push_back({{"name", c.name}, {"passed", c.passed}, {"value", num(c.value)},
                        {"threshold", num(c.threshold)}, {"detail", c.detail}});
    }
    manifest["checks"] = checks;
    nlohmann::ordered_json files = nlohmann::ordered_json::array();
    for (const auto& name : order_) {
      const std::string bytes = files_[name].str();
      files.push_back({{"name", name}, {"bytes", bytes.size()}, {"sha256", sha256_hex(bytes)}});
    }
    manifest["files"] = files;
    files_["manifest.json"] << manifest.dump(2) << "\n";
    order_.push_back("manifest.json");

    for (const auto& name : order_) {
      std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
      out << files_[name].str();
      if (!out) throw ConfigError("--out", "cannot write '" + (dir / name).string() + "'");
    }
    result.kind = config_.kind;
    result.files = order_;
    return result;
  }

  ExperimentResult result;

 private:
  const ExperimentConfig& config_;
  std::string header_;
  std::map<std::string, std::ostringstream> files_;
  std::vector<std::string> order_;
};

void check_slope(Outputs& o, const ExperimentConfig& c, double slope) {
  if (!c.checks.slope_target || !c.checks.slope_tolerance) return;
  const double err = std::abs(slope - *c.checks.slope_target);
  o.check("tail_slope", err <= *c.checks.slope_tolerance, slope, *c.checks.slope_target,
          "|slope - target| <= " + num(*c.checks.slope_tolerance));
}

// ---------------------------------------------------------------- return-tail

ExperimentResult run_return_tail(const ExperimentConfig& c) {
  Outputs o(c, "checks: return-time tail of the intermittent baker's map induced on Y = (1/2, 1], "
               "P(tau >= n) ~ n^(-1/alpha)");
  const maps::LsvParams p(c.maps.alpha);
  maps::ReturnTailConfig rc;
  rc.samples = c.maps.samples;
  rc.cap = c.maps.cap;
  rc.seed = c.seed;
  rc.mode = c.maps.mode == "orbit" ? maps::ReturnSampling::stationary_orbit
                                   : maps::ReturnSampling::uniform_start;
  rc.burn_in = c.maps.burn_in;
  rc.replicates = c.maps.replicates;
  const TailHistogram hist = maps::sample_return_tail(p, rc, c.workers);
  write_tail_csv(o.csv("tail.csv", "survival counts of the return time tau"), hist);

  o.report("alpha", c.maps.alpha);
  o.report("sampling", rc.mode == maps::ReturnSampling::stationary_orbit
                           ? std::string("stationary orbit")
                           : std::string("uniform start (diagnostic)"));
  o.report_count("returns", hist.total());
  o.report_count("censored", hist.censored());
  o.report("censored_fraction", hist.censored_fraction());
  o.report("mean_tau_uncensored", hist.mean_uncensored());
  o.report("expected_slope", -1.0 / c.maps.alpha);
  if (c.maps.alpha >= 0.5) {
    o.report("warning", std::string("tau is not square integrable for alpha >= 1/2"));
  }
  const stats::TailFit fit =
      stats::tail_exponent_fit(hist, c.fit.min, c.fit.max, c.fit.gamma, c.fit.bootstrap, c.seed);
  o.report_count("fit.n_min", c.fit.min);
  o.report_count("fit.n_max", c.fit.max);
  o.report("fit.gamma", c.fit.gamma);
  o.report_count("fit.points", fit.points);
  o.report("fit.slope", fit.slope);
  o.report("fit.intercept", fit.intercept);
  o.report("fit.r2", fit.r2);
  o.report("fit.ci_low", fit.ci_low);
  o.report("fit.ci_high", fit.ci_high);
  o.report("fit.hill_slope", fit.hill);
  check_slope(o, c, fit.slope);

  if (c.maps.kac_steps > 0) {
    const double occupation = maps::occupation_fraction(
        p, c.maps.kac_steps, c.maps.burn_in, derive_seed(c.seed, stream_tag::comparator));
    const double product = hist.mean_uncensored() * occupation;
    o.report("kac.occupation_fraction", occupation);
    o.report("kac.product", product);
    if (c.checks.kac_tolerance) {
      o.check("kac", std::abs(product - 1.0) <= *c.checks.kac_tolerance, product, 1.0,
              "mean return time times occupation of Y within tolerance " +
                  num(*c.checks.kac_tolerance) + " of 1");
    }
  }
  return o.finish();
}

// ---------------------------------------------------------------- meeting-tail

double g_beta(double x, double beta, double gamma, double eta) {
  if (x <= 0.0) return 0.0;
  return std::pow(x, beta - 1.0) * std::pow(std::log1p(x), -eta) / std::pow(1.0 + std::log(x), gamma);
}

ExperimentResult run_meeting_tail(const ExperimentConfig& c) {
  Outputs o(c, "checks: meeting-time tail of two tower chains sharing innovations against the roof "
               "tail, polynomial transfer n^-(beta-1), the comparator E[(h - n)_+] and exponential "
               "transfer for geometric roofs");
  const TowerSpec spec = build_tower(c);
  {
    auto& s = o.csv("tower.txt", "tower specification used by this run");
    write_tower_spec(s, spec);
  }
  const auto res = chain::meeting_tail_experiment(spec, c.chain.runs, c.chain.cap, c.seed, c.workers);
  const auto table = res.hist.survivor_table();
  {
    auto& s = o.csv("meeting_tail.csv", "survival of the meeting time T with comparator E[(h - n)_+]");
    s << "n,survivors,total,comparator,ratio\n";
    for (std::uint64_t n = 0; n <= c.chain.cap; ++n) {
      s << n << ',' << table[n] << ',' << res.hist.total() << ',' << num(res.comparator[n]) << ','
        << num(res.ratio[n]) << '\n';
    }
  }
  o.report_count("states", spec.state_count());
  o.report("mean_roof", spec.mean_roof());
  o.report("truncated_mass", spec.truncated_mass());
  o.report_count("runs", res.hist.total());
  o.report_count("censored", res.hist.censored());
  o.report("censored_fraction", res.hist.censored_fraction());
  o.report("mean_T_uncensored", res.hist.mean_uncensored());

  const bool polynomial = c.tower.model == "power" || c.tower.model == "lsv" || c.tower.model == "file";
  if (polynomial) {
    const stats::TailFit fit = stats::tail_exponent_fit(res.hist, c.fit.min, c.fit.max, c.fit.gamma,
                                                        c.fit.bootstrap, c.seed);
    o.report_count("fit.n_min", c.fit.min);
    o.report_count("fit.n_max", c.fit.max);
    o.report_count("fit.points", fit.points);
    o.report("fit.slope", fit.slope);
    o.report("fit.r2", fit.r2);
    o.report("fit.ci_low", fit.ci_low);
    o.report("fit.ci_high", fit.ci_high);
    o.report("fit.hill_slope", fit.hill);
    check_slope(o, c, fit.slope);

    // Moment of g_beta(T ^ cap), reported without a threshold.
    double moment = 0.0;
    for (std::uint64_t v = 1; v <= c.chain.cap; ++v) {
      moment += static_cast<double>(res.hist.count(v)) * g_beta(static_cast<double>(v), c.tower.beta,
                                                                c.tower.gamma, c.chain.moment_eta);
    }
    moment += static_cast<double>(res.hist.censored()) *
              g_beta(static_cast<double>(c.chain.cap), c.tower.beta, c.tower.gamma, c.chain.moment_eta);
    o.report("moment.g_beta_truncated", moment / static_cast<double>(res.hist.total()));
  }

  // Ratio trend over [fit.min, cap/4].
  {
    std::vector<double> ns, ratios;
    for (std::uint64_t n = c.fit.min; n <= c.chain.cap / 4; ++n) {
      if (res.comparator[n] <= 0.0) continue;
      ns.push_back(static_cast<double>(n));
      ratios.push_back(res.ratio[n]);
    }
    if (ns.size() >= 2) {
      const double rho = stats::spearman(ns, ratios);
      o.report("ratio.spearman", rho);
      o.report("ratio.max", *std::max_element(ratios.begin(), ratios.end()));
      if (c.checks.spearman_max) {
        o.check("ratio_trend", rho <= *c.checks.spearman_max, rho, *c.checks.spearman_max,
                "Spearman correlation of P(T >= n) / E[(h - n)_+] with n over [" + num(c.fit.min) +
                    ", " + num(c.chain.cap / 4) + "]");
      }
    }
  }

  if (c.checks.r2_min) {
    const stats::LinearFit lf = stats::exponential_tail_fit(res.hist, 1, c.chain.cap);
    o.report("exp_fit.slope", lf.slope);
    o.report("exp_fit.r2", lf.r2);
    o.check("exponential_linearity", lf.r2 > *c.checks.r2_min, lf.r2, *c.checks.r2_min,
            "R^2 of log P(T >= n) against n over points with >= 100 survivors");
  }

  if (c.checks.exact_sigma) {
    const auto exact = chain::exact_meeting_survival(spec, c.chain.exact_n);
    auto& s = o.csv("exact.csv", "exact P(T >= n) from the coupled product chain against Monte Carlo");
    s << "n,exact,empirical,sigma,z\n";
    double worst = 0.0;
    const double total = static_cast<double>(res.hist.total());
    for (std::uint64_t n = 0; n <= c.chain.exact_n; ++n) {
      const double p = exact[n];
      const double phat = static_cast<double>(table[n]) / total;
      const double sigma = std::sqrt(std::max(p * (1.0 - p), 0.0) / total);
      const double z = sigma > 0.0 ? std::abs(phat - p) / sigma : (phat == p ? 0.0 : INFINITY);
      worst = std::max(worst, z);
      s << n << ',' << num(p) << ',' << num(phat) << ',' << num(sigma) << ',' << num(z) << '\n';
    }
    o.report("exact.max_z", worst);
    o.check("exact_oracle", worst <= *c.checks.exact_sigma, worst, *c.checks.exact_sigma,
            "max |P_hat - P| / sigma for n <= " + num(c.chain.exact_n));
  }
  return o.finish();
}

// ---------------------------------------------------------------- approx-decay

ExperimentResult run_approx_decay(const ExperimentConfig& c) {
  Outputs o(c, "checks: decay of E|tilde X_{m,k} - X_k| against the comparator m^(-r/2) + P(T >= m/r)");
  const TowerSpec spec = build_tower(c);
  {
    auto& s = o.csv("tower.txt", "tower specification used by this run");
    write_tower_spec(s, spec);
  }
  const obs::ObservableSpec ob = build_observable(c, spec);
  obs::DecayConfig dc;
  dc.ms = c.decay.ms;
  dc.samples = c.decay.samples;
  dc.outer = c.decay.outer;
  dc.inner = c.decay.inner;
  dc.radius = c.decay.radius;
  dc.r = c.decay.r;
  dc.meeting_runs = c.decay.meeting_runs;
  dc.seed = c.seed;
  const auto points = obs::approx_decay_experiment(ob, spec, dc, c.workers);
  {
    auto& s = o.csv("decay.csv", "E|tilde X_{m,k} - X_k| per m with the comparator curve");
    s << "m,estimate,mcError,comparator,ratio,truncationBound\n";
    for (const auto& p : points) {
      s << p.m << ',' << num(p.estimate) << ',' << num(p.mc_error) << ',' << num(p.comparator) << ','
        << num(p.ratio) << ',' << num(p.truncation_bound) << '\n';
    }
  }
  o.report("observable", ob.name());
  o.report("observable.sup_bound", ob.sup_bound());
  o.report("observable.lipschitz", ob.lipschitz());
  const double calib = points.front().estimate / points.front().comparator;
  o.report("calibration_C", calib);
  for (const auto& p : points) {
    const std::string key = "m" + std::to_string(p.m);
    o.report(key + ".estimate", p.estimate);
    o.report(key + ".mc_error", p.mc_error);
    o.report(key + ".comparator", p.comparator);
  }
  if (c.checks.dominance) {
    for (std::size_t j = 1; j < points.size(); ++j) {
      const auto& p = points[j];
      const double bound = *c.checks.dominance * calib * p.comparator;
      o.check("dominance_m" + std::to_string(p.m), p.estimate <= bound, p.estimate, bound,
              "estimate <= C * comparator with C calibrated at m = " + std::to_string(points[0].m));
    }
  }
  if (c.checks.mc_relative_max) {
    for (const auto& p : points) {
      const double rel = p.estimate > 0.0 ? p.mc_error / p.estimate : INFINITY;
      o.check("mc_error_m" + std::to_string(p.m), rel < *c.checks.mc_relative_max, rel,
              *c.checks.mc_relative_max, "Monte Carlo error relative to the estimate");
    }
  }
  return o.finish();
}

// ---------------------------------------------------------------- clt

struct CltReplicate {
  stats::LagSums lags;
  double sum = 0.0;
  double short_sum = 0.0;
};

ExperimentResult run_clt(const ExperimentConfig& c) {
  Outputs o(c, "checks: covariance decay, existence of the Green-Kubo limit variance c^2 and the CLT "
               "for Birkhoff sums of a Lipschitz observable of the tower chain");
  const TowerSpec spec = build_tower(c);
  {
    auto& s = o.csv("tower.txt", "tower specification used by this run");
    write_tower_spec(s, spec);
  }
  const obs::ObservableSpec ob = build_observable(c, spec);
  const double mean = ob.mode() == obs::Mode::geometric ? obs::stationary_mean(ob, spec) : 0.0;
  const std::size_t max_lag =
      static_cast<std::size_t>(*std::max_element(c.clt.cutoffs.begin(), c.clt.cutoffs.end()));
  const std::uint64_t n = c.clt.length;
  const std::uint64_t path_length = n + 2 * c.clt.margin;

  std::vector<CltReplicate> reps(c.clt.replicates);
  std::vector<double> first_series;
  parallel_for(c.clt.replicates, resolve_workers(c.workers), [&](std::size_t r) {
    const TrajectoryWindow path = chain::simulate(spec, path_length, InnovationStream(c.seed, r));
    const std::vector<double> psi = obs::psi_series(ob, path);
    std::vector<double> x(psi.begin() + static_cast<std::ptrdiff_t>(c.clt.margin),
                          psi.begin() + static_cast<std::ptrdiff_t>(c.clt.margin + n));
    for (double& v : x) v -= mean;
    CltReplicate& rep = reps[r];
    rep.lags = stats::lag_sums(x, max_lag);
    rep.sum = rep.lags.sum;
    for (std::uint64_t i = 0; i < c.clt.short_length; ++i) rep.short_sum += x[i];
    if (r == 0) first_series = std::move(x);
  });

  std::vector<stats::LagSums> lags;
  lags.reserve(reps.size());
  std::vector<double> sums, short_sums;
  for (const auto& rep : reps) {
    lags.push_back(rep.lags);
    sums.push_back(rep.sum);
    short_sums.push_back(rep.short_sum);
  }
  const std::vector<double> cov = stats::autocovariance_from_lag_sums(lags);

  std::vector<double> abs_partial(cov.size());
  for (std::size_t k = 0; k < cov.size(); ++k) {
    abs_partial[k] = (k ? abs_partial[k - 1] : 0.0) + std::abs(cov[k]);
  }
  {
    auto& s = o.csv("autocovariance.csv", "autocovariance per lag with partial sums");
    s << "k,cov,absPartialSum,greenKubo\n";
    double gk = 0.0;
    for (std::size_t k = 0; k < cov.size(); ++k) {
      gk += (k ? 2.0 : 1.0) * cov[k];
      s << k << ',' << num(cov[k]) << ',' << num(abs_partial[k]) << ',' << num(gk) << '\n';
    }
  }

  std::vector<std::int64_t> cutoffs = c.clt.cutoffs;
  std::sort(cutoffs.begin(), cutoffs.end());
  std::map<std::int64_t, double> c2;
  for (auto k : cutoffs) c2[k] = stats::green_kubo_variance(cov, static_cast<std::size_t>(k));
  const std::int64_t kmax = cutoffs.back();
  const double c2max = c2[kmax];

  // Standard error of c^2(kmax) from disjoint groups of replicates.
  std::vector<double> group_c2(c.clt.groups);
  for (std::uint64_t g = 0; g < c.clt.groups; ++g) {
    const std::size_t begin = reps.size() * g / c.clt.groups;
    const std::size_t end = reps.size() * (g + 1) / c.clt.groups;
    const std::span<const stats::LagSums> part(lags.data() + begin, end - begin);
    group_c2[g] = stats::green_kubo_variance(stats::autocovariance_from_lag_sums(part),
                                             static_cast<std::size_t>(kmax));
  }
  double gmean = 0.0;
  for (double v : group_c2) gmean += v;
  gmean /= static_cast<double>(group_c2.size());
  double gss = 0.0;
  for (double v : group_c2) gss += (v - gmean) * (v - gmean);
  const double c2_se = std::sqrt(gss / static_cast<double>(group_c2.size() - 1) /
                                 static_cast<double>(group_c2.size()));

  o.report("observable", ob.name());
  o.report("observable.stationary_mean", mean);
  o.report_count("replicates", c.clt.replicates);
  o.report_count("length", n);
  o.report_count("total_steps", c.clt.replicates * n);
  o.report("variance", cov[0]);
  for (auto k : cutoffs) o.report("c2.K" + std::to_string(k), c2[k]);
  o.report("c2.se", c2_se);
  if (c.tower.model == "lsv") {
    o.report("tower.lsv_alpha", c.tower.lsv_alpha);
    if (c.tower.lsv_alpha >= 0.5) {
      o.report("warning", std::string("tau is not square integrable for alpha >= 1/2; diagnostic mode"));
    }
  }
  if (c.tower.model == "power" && c.tower.beta <= 2.0) {
    o.report("warning", std::string("roof tail beta <= 2; diagnostic mode"));
  }

  if (cutoffs.size() >= 2) {
    const std::int64_t kprev = cutoffs[cutoffs.size() - 2];
    const double total = abs_partial[static_cast<std::size_t>(kmax)];
    const double increment = (total - abs_partial[static_cast<std::size_t>(kprev)]) / total;
    o.report("plateau.increment", increment);
    if (c.checks.plateau_max) {
      o.check("covariance_plateau", increment < *c.checks.plateau_max, increment,
              *c.checks.plateau_max,
              "(sum_{k<=" + std::to_string(kmax) + "} |cov| - sum_{k<=" + std::to_string(kprev) +
                  "} |cov|) / total");
    }
    const double sensitivity = std::abs(c2[cutoffs.front()] - c2max) / std::abs(c2max);
    o.report("c2.cutoff_sensitivity", sensitivity);
    if (c.checks.cutoff_sensitivity_max) {
      o.check("cutoff_sensitivity", sensitivity < *c.checks.cutoff_sensitivity_max, sensitivity,
              *c.checks.cutoff_sensitivity_max,
              "|c2(K=" + std::to_string(cutoffs.front()) + ") - c2(K=" + std::to_string(kmax) +
                  ")| / c2(K=" + std::to_string(kmax) + ")");
    }
  }

  const double var_n = stats::scaled_sum_variance(sums, n);
  const double var_short = stats::scaled_sum_variance(short_sums, c.clt.short_length);
  const double gap = std::abs(var_n - c2max) / c2max;
  const double gap_short = std::abs(var_short - c2max) / c2max;
  {
    auto& s = o.csv("variance.csv", "Var(S_n) / n across replicates against c^2");
    s << "n,varScaled,c2,relativeGap\n";
    s << c.clt.short_length << ',' << num(var_short) << ',' << num(c2max) << ',' << num(gap_short) << '\n';
    s << n << ',' << num(var_n) << ',' << num(c2max) << ',' << num(gap) << '\n';
  }
  o.report("var_scaled.short", var_short);
  o.report("var_scaled.full", var_n);
  o.report("var_gap.short", gap_short);
  o.report("var_gap.full", gap);
  o.report("var_gap.decreasing", std::string(gap <= gap_short ? "yes" : "no"));
  if (c.checks.variance_gap_max) {
    o.check("variance_consistency", gap < *c.checks.variance_gap_max, gap, *c.checks.variance_gap_max,
            "|Var(S_n)/n - c2| / c2 at n = " + std::to_string(n));
  }

  const bool possibly_zero = c2max < 3.0 * c2_se;
  if (possibly_zero) {
    o.report("degenerate", std::string("possible zero variance; run the coboundary diagnostics"));
  } else {
    std::vector<double> scaled(sums.size());
    const double root = std::sqrt(static_cast<double>(n));
    for (std::size_t i = 0; i < sums.size(); ++i) scaled[i] = sums[i] / root;
    const double ks = stats::clt_test(scaled, c2max);
    o.report("ks_distance", ks);
    {
      auto& s = o.csv("scaled_sums.csv", "S_n / (c sqrt(n)) per replicate");
      s << "replicate,standardized\n";
      const double c = std::sqrt(c2max);
      for (std::size_t i = 0; i < scaled.size(); ++i) s << i << ',' << num(scaled[i] / c) << '\n';
    }
    if (first_series.size() >= 1000) {
      o.report("lil.max_ratio", stats::lil_envelope_check(first_series, c2max));
    }
  }
  if (c.checks.ks_max) {
    const double ks = possibly_zero ? 1.0 : ExperimentResult(o.result).metric("ks_distance");
    o.check("ks", !possibly_zero && ks < *c.checks.ks_max, ks, *c.checks.ks_max,
            possibly_zero ? "skipped: possible zero variance"
                          : "KS distance of S_n / (c sqrt(n)) from N(0, 1)");
  }
  return o.finish();
}

// ---------------------------------------------------------------- coboundary

ExperimentResult run_coboundary(const ExperimentConfig& c) {
  Outputs o(c, "checks: zero-variance case, Birkhoff sums of the coboundary chi o shift - chi stay "
               "within 2 sup|chi| and the Green-Kubo variance vanishes");
  const TowerSpec spec = build_tower(c);
  {
    auto& s = o.csv("tower.txt", "tower specification used by this run");
    write_tower_spec(s, spec);
  }
  const TrajectoryWindow path = chain::simulate(spec, c.coboundary.length + 1, InnovationStream(c.seed, 0));
  const stats::CoboundarySpec cob = stats::center_level_coboundary(spec);
  const stats::CoboundaryReport rep = stats::verify_coboundary(
      cob, path.states, c.coboundary.cutoff, c.coboundary.variance_fraction, c.coboundary.slack,
      c.workers);
  {
    auto& s = o.csv("sums.csv", "S_n against chi(g_n) - chi(g_0), every 1000th n");
    s << "n,S,telescoped\n";
    const std::vector<double> v = stats::make_coboundary(cob, path.states);
    double sum = 0.0;
    const double chi0 = cob.chi(path.states[0]);
    for (std::size_t i = 0; i < v.size(); ++i) {
      sum += v[i];
      const std::size_t nn = i + 1;
      if (nn % 1000 == 0 || nn == v.size()) {
        s << nn << ',' << num(sum) << ',' << num(cob.chi(path.states[nn]) - chi0) << '\n';
      }
    }
  }
  o.report("chi", cob.name);
  o.report("chi.sup", cob.sup);
  o.report_count("length", c.coboundary.length);
  o.report("max_abs_sum", rep.max_abs_sum);
  o.report("bound", rep.bound);
  o.report("max_identity_error", rep.max_identity_error);
  o.report("c2", rep.c2);
  o.report("variance", rep.variance);
  o.report("lil.max_ratio", rep.lil);
  o.check("bounded_sums", rep.bounded, rep.max_abs_sum, rep.bound + c.coboundary.slack,
          "sup_n |S_n| <= 2 sup|chi| + " + num(c.coboundary.slack));
  o.check("telescoping", rep.identity, rep.max_identity_error, rep.identity_tolerance,
          "|S_n - (chi_n - chi_0)| <= n 1e-15 sup|chi| for every n");
  o.check("zero_variance", rep.small_variance, std::abs(rep.c2), c.coboundary.variance_fraction * rep.variance,
          "|c2(K=" + std::to_string(c.coboundary.cutoff) + ")| < " + num(c.coboundary.variance_fraction) +
              " Var(v)");
  return o.finish();
}

// ---------------------------------------------------------------- stationarity

ExperimentResult run_stationarity(const ExperimentConfig& c) {
  Outputs o(c, "checks: invariance of nu under the tower chain kernel, occupancy of a long path and the "
               "base-return frequency 1/E[h]");
  const TowerSpec spec = build_tower(c);
  {
    auto& s = o.csv("tower.txt", "tower specification used by this run");
    write_tower_spec(s, spec);
  }
  const auto counts = chain::occupancy(spec, c.chain.steps, InnovationStream(c.seed, 0));
  const auto nu = nu_vector(spec);
  double tv = 0.0;
  std::uint64_t base = 0;
  const double steps = static_cast<double>(c.chain.steps);
  {
    auto& s = o.csv("occupancy.csv", "empirical state occupancy against nu");
    s << "symbol,roof,level,nu,empirical\n";
    for (std::uint64_t i = 0; i < counts.size(); ++i) {
      const ChainState st = spec.state_at(i);
      const double emp = static_cast<double>(counts[i]) / steps;
      tv += std::abs(emp - nu[i]);
      if (st.level == 0) base += counts[i];
      s << spec.id(st.symbol) << ',' << spec.roof(st.symbol) << ',' << st.level << ',' << num(nu[i])
        << ',' << num(emp) << '\n';
    }
  }
  tv *= 0.5;
  const double theta = static_cast<double>(base) / steps;
  const double target = 1.0 / spec.mean_roof();
  const double theta_err = std::abs(theta - target) / target;
  o.report_count("states", spec.state_count());
  o.report_count("steps", c.chain.steps);
  o.report("tv_distance", tv);
  o.report("theta_plus_over_u", theta);
  o.report("inverse_mean_roof", target);
  o.report("theta_relative_error", theta_err);
  if (c.checks.tv_max) {
    o.check("occupancy_tv", tv < *c.checks.tv_max, tv, *c.checks.tv_max,
            "total variation between occupancy and nu");
  }
  if (c.checks.kernel_error_max) {
    const double err = kernel_stationarity_error(spec);
    o.report("kernel_error", err);
    o.check("kernel_stationarity", err < *c.checks.kernel_error_max, err, *c.checks.kernel_error_max,
            "max |nu P - nu| by direct matrix-vector product");
  }
  if (c.checks.theta_tolerance) {
    o.check("base_return_frequency", theta_err <= *c.checks.theta_tolerance, theta_err,
            *c.checks.theta_tolerance, "|theta_u / u - 1/E[h]| / (1/E[h]) at u = steps");
  }
  return o.finish();
}

}  // namespace

TowerSpec build_tower(const ExperimentConfig& c) {
  const auto& t = c.tower;
  if (t.model == "power") return build_tower_from_model(PowerTail{t.beta, t.gamma}, t.cap, t.xi);
  if (t.model == "geometric") return build_tower_from_model(GeometricTail{t.ratio}, t.cap, t.xi);
  if (t.model == "uniform") return build_tower_from_model(UniformRoof{t.max_roof}, t.max_roof, t.xi);
  if (t.model == "lsv") {
    maps::ReturnTailConfig rc;
    rc.samples = t.lsv_samples;
    rc.cap = t.lsv_cap;
    rc.seed = derive_seed(c.seed, stream_tag::tower_tail);
    rc.mode = maps::ReturnSampling::stationary_orbit;
    const TailHistogram hist = maps::sample_return_tail(maps::LsvParams(t.lsv_alpha), rc, c.workers);
    return build_tower_from_tail(hist, t.xi);
  }
  if (t.model == "file") {
    std::ifstream in(t.file);
    if (!in) throw ConfigError("tower.file", "cannot open '" + t.file + "'");
    try {
      return read_tower_spec(in);
    } catch (const std::invalid_argument& e) {
      throw ConfigError("tower.file", e.what());
    }
  }
  throw ConfigError("tower.model", "unknown model '" + t.model + "'");
}

obs::ObservableSpec build_observable(const ExperimentConfig& c, const TowerSpec& spec) {
  obs::BaseFunction phi;
  try {
    phi = obs::make_base_function(c.observable.base, spec, c.observable.constant);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("observable.base", e.what());
  }
  if (c.observable.mode == "center") return obs::ObservableSpec::center(spec, std::move(phi));
  return obs::ObservableSpec::geometric(spec, std::move(phi)).normalized();
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  validate_config(config);
  switch (config.kind) {
    case ExperimentKind::return_tail: return run_return_tail(config);
    case ExperimentKind::meeting_tail: return run_meeting_tail(config);
    case ExperimentKind::approx_decay: return run_approx_decay(config);
    case ExperimentKind::clt: return run_clt(config);
    case ExperimentKind::coboundary: return run_coboundary(config);
    case ExperimentKind::stationarity: return run_stationarity(config);
  }
  throw ConfigError("experiment.kind", "unhandled kind");
}

std::vector<AcceptanceEntry> acceptance_suite(std::uint64_t seed) {
  std::vector<AcceptanceEntry> suite;

  ExperimentConfig rt = default_config(ExperimentKind::return_tail);
  rt.seed = seed;
  rt.maps.alpha = 0.5;
  rt.maps.samples = 10000000;
  rt.maps.cap = 1000000;
  rt.maps.mode = "orbit";
  rt.fit.min = 16;
  rt.fit.max = 1024;
  rt.checks.slope_target = -2.0;
  rt.checks.slope_tolerance = 0.2;
  suite.push_back({"return_tail", rt});

  ExperimentConfig mp = default_config(ExperimentKind::meeting_tail);
  mp.seed = seed;
  mp.tower.model = "power";
  mp.tower.beta = 3.0;
  mp.tower.cap = 10000;
  mp.chain.runs = 1000000;
  mp.chain.cap = 2048;
  mp.fit.min = 8;
  mp.fit.max = 512;
  mp.checks.slope_target = -2.0;
  mp.checks.slope_tolerance = 0.3;
  mp.checks.spearman_max = 0.2;
  suite.push_back({"meeting_tail_power", mp});

  ExperimentConfig mg = default_config(ExperimentKind::meeting_tail);
  mg.seed = seed;
  mg.tower.model = "geometric";
  mg.tower.ratio = 0.5;
  mg.tower.cap = 20;
  mg.chain.runs = 1000000;
  mg.chain.cap = 256;
  mg.chain.exact_n = 12;
  mg.fit.min = 1;
  mg.fit.max = 256;
  mg.checks = ChecksSection{};
  mg.checks.r2_min = 0.98;
  mg.checks.exact_sigma = 3.0;
  suite.push_back({"meeting_tail_geometric", mg});

  ExperimentConfig ad = default_config(ExperimentKind::approx_decay);
  ad.seed = seed;
  ad.tower.model = "power";
  ad.tower.beta = 3.0;
  ad.tower.cap = 10000;
  ad.decay.ms = {4, 8, 16, 32};
  ad.decay.samples = 100000;
  ad.decay.outer = 16;
  ad.decay.inner = 1;
  ad.decay.radius = 96;
  ad.decay.r = 2.0;
  ad.decay.meeting_runs = 1000000;
  ad.checks.mc_relative_max = 0.2;
  ad.checks.dominance = 1.0;
  suite.push_back({"approx_decay", ad});

  ExperimentConfig cv = default_config(ExperimentKind::clt);
  cv.seed = seed;
  cv.tower.model = "power";
  cv.tower.beta = 2.5;
  cv.tower.cap = 10000;
  cv.clt.length = 10000;
  cv.clt.replicates = 10000;
  cv.clt.cutoffs = {50, 100, 200};
  cv.clt.groups = 20;
  cv.checks = ChecksSection{};
  cv.checks.plateau_max = 0.02;
  cv.checks.cutoff_sensitivity_max = 0.05;
  cv.checks.variance_gap_max = 0.10;
  suite.push_back({"covariance_decay", cv});

  ExperimentConfig cl = default_config(ExperimentKind::clt);
  cl.seed = seed;
  cl.tower.model = "lsv";
  cl.tower.lsv_alpha = 0.4;
  cl.tower.lsv_samples = 1000000;
  cl.tower.lsv_cap = 100000;
  cl.clt.length = 10000;
  cl.clt.replicates = 5000;
  cl.clt.cutoffs = {50, 100, 200};
  cl.clt.groups = 20;
  cl.checks = ChecksSection{};
  cl.checks.ks_max = 0.03;
  suite.push_back({"clt_lsv", cl});

  ExperimentConfig cb = default_config(ExperimentKind::coboundary);
  cb.seed = seed;
  cb.tower.model = "uniform";
  cb.tower.max_roof = 8;
  cb.coboundary.length = 1000000;
  cb.coboundary.cutoff = 200;
  cb.coboundary.variance_fraction = 0.01;
  cb.coboundary.slack = 1e-9;
  suite.push_back({"coboundary", cb});

  ExperimentConfig st = default_config(ExperimentKind::stationarity);
  st.seed = seed;
  st.tower.model = "power";
  st.tower.beta = 3.0;
  st.tower.cap = 13;
  st.chain.steps = 10000000;
  st.checks.tv_max = 0.01;
  st.checks.kernel_error_max = 1e-12;
  st.checks.theta_tolerance = 0.01;
  suite.push_back({"stationarity", st});

  return suite;
}

bool AcceptanceRun::passed() const {
  return std::all_of(results.begin(), results.end(), [](const auto& r) { return r.second.passed(); });
}

AcceptanceRun run_all_acceptance(std::uint64_t seed, const std::string& out, int workers) {
  AcceptanceRun run;
  std::ostringstream summary;
  summary << "# acceptance suite: every experiment with its check outcomes\n";
  summary << "seed = " << seed << "\n";
  summary << "version = " << kVersion << "\n";
  for (auto& entry : acceptance_suite(seed)) {
    entry.config.workers = workers;
    entry.config.out = (fs::path(out) / entry.name).string();
    const auto start = std::chrono::steady_clock::now();
    ExperimentResult result = run_experiment(entry.config);
    run.seconds[entry.name] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    for (const auto& c : result.checks) {
      summary << entry.name << "." << c.name << " = " << (c.passed ? "pass" : "fail")
              << " value=" << num(c.value) << " threshold=" << num(c.threshold) << "\n";
    }
    run.results.emplace_back(entry.name, std::move(result));
  }
  summary << "status = " << (run.passed() ? "pass" : "fail") << "\n";
  std::ofstream file(fs::path(out) / "summary.txt", std::ios::binary | std::ios::trunc);
  file << summary.str();
  if (!file) throw ConfigError("--out", "cannot write summary in '" + out + "'");
  return run;
}

bool trees_identical(const std::string& a, const std::string& b, std::string* difference) {
  auto listing = [](const fs::path& root) {
    std::vector<std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
      if (e.is_regular_file()) files.push_back(fs::relative(e.path(), root).generic_string());
    }
    std::sort(files.begin(), files.end());
    return files;
  };
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
  };
  const auto fa = listing(a);
  const auto fb = listing(b);
  if (fa != fb) {
    if (difference) *difference = "file lists differ";
    return false;
  }
  for (const auto& f : fa) {
    if (slurp(fs::path(a) / f) != slurp(fs::path(b) / f)) {
      if (difference) *difference = f;
      return false;
    }
  }
  return true;
}

}  // namespace towerlab
