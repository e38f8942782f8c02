#include "towerlab/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "towerlab/format.hpp"

namespace towerlab {

namespace {

const std::map<ExperimentKind, std::string>& kind_names() {
  static const std::map<ExperimentKind, std::string> names{
      {ExperimentKind::return_tail, "return-tail"},   {ExperimentKind::meeting_tail, "meeting-tail"},
      {ExperimentKind::approx_decay, "approx-decay"}, {ExperimentKind::clt, "clt"},
      {ExperimentKind::coboundary, "coboundary"},     {ExperimentKind::stationarity, "stationarity"},
  };
  return names;
}

template <class T>
T parse_integer(const std::string& field, const std::string& text) {
  T value{};
  const char* end = text.data() + text.size();
  const auto r = std::from_chars(text.data(), end, value);
  if (r.ec != std::errc() || r.ptr != end) throw ConfigError(field, "not an integer: '" + text + "'");
  return value;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Text conversion for every field type used in the config.
void from_text(const std::string& f, const std::string& t, std::uint64_t& v) { v = parse_integer<std::uint64_t>(f, t); }
void from_text(const std::string& f, const std::string& t, std::uint32_t& v) { v = parse_integer<std::uint32_t>(f, t); }
void from_text(const std::string& f, const std::string& t, std::int64_t& v) { v = parse_integer<std::int64_t>(f, t); }
void from_text(const std::string&, const std::string& t, std::string& v) { v = t; }
void from_text(const std::string& f, const std::string& t, double& v) {
  try {
    v = parse_double(t);
  } catch (const std::invalid_argument&) {
    throw ConfigError(f, "not a number: '" + t + "'");
  }
}
void from_text(const std::string& f, const std::string& t, std::optional<double>& v) {
  if (t == "none") {
    v.reset();
    return;
  }
  double d = 0.0;
  from_text(f, t, d);
  v = d;
}
void from_text(const std::string& f, const std::string& t, std::vector<std::int64_t>& v) {
  v.clear();
  std::stringstream ss(t);
  std::string item;
  while (std::getline(ss, item, ',')) v.push_back(parse_integer<std::int64_t>(f, trim(item)));
  if (v.empty()) throw ConfigError(f, "empty list");
}

std::optional<std::string> to_text(std::uint64_t v) { return std::to_string(v); }
std::optional<std::string> to_text(std::uint32_t v) { return std::to_string(v); }
std::optional<std::string> to_text(std::int64_t v) { return std::to_string(v); }
std::optional<std::string> to_text(const std::string& v) { return v; }
std::optional<std::string> to_text(double v) { return format_double(v); }
std::optional<std::string> to_text(const std::optional<double>& v) {
  if (!v) return std::nullopt;
  return format_double(*v);
}
std::optional<std::string> to_text(const std::vector<std::int64_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + std::to_string(v[i]);
  return s;
}

// Calls visit(section, key, member) for every serialized field, in file order.
template <class Config, class Visit>
void visit_fields(Config& c, Visit&& visit) {
  visit("maps", "alpha", c.maps.alpha);
  visit("maps", "samples", c.maps.samples);
  visit("maps", "cap", c.maps.cap);
  visit("maps", "mode", c.maps.mode);
  visit("maps", "burn_in", c.maps.burn_in);
  visit("maps", "replicates", c.maps.replicates);
  visit("maps", "kac_steps", c.maps.kac_steps);
  visit("tower", "model", c.tower.model);
  visit("tower", "beta", c.tower.beta);
  visit("tower", "gamma", c.tower.gamma);
  visit("tower", "ratio", c.tower.ratio);
  visit("tower", "max_roof", c.tower.max_roof);
  visit("tower", "cap", c.tower.cap);
  visit("tower", "xi", c.tower.xi);
  visit("tower", "file", c.tower.file);
  visit("tower", "lsv_alpha", c.tower.lsv_alpha);
  visit("tower", "lsv_samples", c.tower.lsv_samples);
  visit("tower", "lsv_cap", c.tower.lsv_cap);
  visit("chain", "runs", c.chain.runs);
  visit("chain", "cap", c.chain.cap);
  visit("chain", "steps", c.chain.steps);
  visit("chain", "exact_n", c.chain.exact_n);
  visit("chain", "moment_eta", c.chain.moment_eta);
  visit("observable", "mode", c.observable.mode);
  visit("observable", "base", c.observable.base);
  visit("observable", "constant", c.observable.constant);
  visit("decay", "ms", c.decay.ms);
  visit("decay", "samples", c.decay.samples);
  visit("decay", "outer", c.decay.outer);
  visit("decay", "inner", c.decay.inner);
  visit("decay", "radius", c.decay.radius);
  visit("decay", "r", c.decay.r);
  visit("decay", "meeting_runs", c.decay.meeting_runs);
  visit("clt", "length", c.clt.length);
  visit("clt", "replicates", c.clt.replicates);
  visit("clt", "margin", c.clt.margin);
  visit("clt", "cutoffs", c.clt.cutoffs);
  visit("clt", "groups", c.clt.groups);
  visit("clt", "short_length", c.clt.short_length);
  visit("coboundary", "length", c.coboundary.length);
  visit("coboundary", "cutoff", c.coboundary.cutoff);
  visit("coboundary", "variance_fraction", c.coboundary.variance_fraction);
  visit("coboundary", "slack", c.coboundary.slack);
  visit("fit", "min", c.fit.min);
  visit("fit", "max", c.fit.max);
  visit("fit", "gamma", c.fit.gamma);
  visit("fit", "bootstrap", c.fit.bootstrap);
  visit("checks", "slope_target", c.checks.slope_target);
  visit("checks", "slope_tolerance", c.checks.slope_tolerance);
  visit("checks", "kac_tolerance", c.checks.kac_tolerance);
  visit("checks", "spearman_max", c.checks.spearman_max);
  visit("checks", "r2_min", c.checks.r2_min);
  visit("checks", "exact_sigma", c.checks.exact_sigma);
  visit("checks", "mc_relative_max", c.checks.mc_relative_max);
  visit("checks", "dominance", c.checks.dominance);
  visit("checks", "plateau_max", c.checks.plateau_max);
  visit("checks", "cutoff_sensitivity_max", c.checks.cutoff_sensitivity_max);
  visit("checks", "variance_gap_max", c.checks.variance_gap_max);
  visit("checks", "ks_max", c.checks.ks_max);
  visit("checks", "tv_max", c.checks.tv_max);
  visit("checks", "kernel_error_max", c.checks.kernel_error_max);
  visit("checks", "theta_tolerance", c.checks.theta_tolerance);
}

}  // namespace

void validate_config(const ExperimentConfig& c) {
  auto require = [](bool ok, const char* field, const char* message) {
    if (!ok) throw ConfigError(field, message);
  };
  require(c.maps.alpha > 0.0 && c.maps.alpha < 1.0, "maps.alpha", "must lie in (0, 1)");
  require(c.maps.samples >= 1, "maps.samples", "must be >= 1");
  require(c.maps.cap >= 1, "maps.cap", "must be >= 1");
  require(c.maps.mode == "orbit" || c.maps.mode == "uniform", "maps.mode", "must be orbit or uniform");
  require(c.maps.replicates >= 1, "maps.replicates", "must be >= 1");
  require(c.tower.model == "power" || c.tower.model == "geometric" || c.tower.model == "uniform" ||
              c.tower.model == "lsv" || c.tower.model == "file",
          "tower.model", "must be power, geometric, uniform, lsv or file");
  require(c.tower.xi > 0.0 && c.tower.xi < 1.0, "tower.xi", "must lie in (0, 1)");
  require(c.tower.beta > 1.0, "tower.beta", "must be > 1");
  require(c.tower.ratio > 0.0 && c.tower.ratio < 1.0, "tower.ratio", "must lie in (0, 1)");
  require(c.tower.max_roof >= 1, "tower.max_roof", "must be >= 1");
  require(c.tower.cap >= 1, "tower.cap", "must be >= 1");
  require(c.tower.model != "file" || !c.tower.file.empty(), "tower.file", "required for model = file");
  require(c.tower.lsv_alpha > 0.0 && c.tower.lsv_alpha < 1.0, "tower.lsv_alpha", "must lie in (0, 1)");
  require(c.chain.runs >= 1, "chain.runs", "must be >= 1");
  require(c.chain.cap >= 1, "chain.cap", "must be >= 1");
  require(c.chain.steps >= 1, "chain.steps", "must be >= 1");
  require(c.observable.mode == "geometric" || c.observable.mode == "center", "observable.mode",
          "must be geometric or center");
  require(!c.decay.ms.empty(), "decay.ms", "must not be empty");
  for (auto m : c.decay.ms) require(m >= 1 && m < c.decay.radius, "decay.ms", "each m must lie in [1, radius)");
  require(c.decay.samples >= 2, "decay.samples", "must be >= 2");
  require(c.decay.outer >= 1, "decay.outer", "must be >= 1");
  require(c.decay.inner >= 1, "decay.inner", "must be >= 1");
  require(c.decay.r > 0.0, "decay.r", "must be > 0");
  require(c.clt.length >= 2, "clt.length", "must be >= 2");
  require(c.clt.replicates >= 2, "clt.replicates", "must be >= 2");
  require(!c.clt.cutoffs.empty(), "clt.cutoffs", "must not be empty");
  for (auto k : c.clt.cutoffs) {
    require(k >= 1 && static_cast<std::uint64_t>(k) < c.clt.length, "clt.cutoffs",
            "each cutoff must lie in [1, length)");
  }
  require(c.clt.groups >= 2 && c.clt.groups <= c.clt.replicates, "clt.groups",
          "must lie in [2, replicates]");
  require(c.clt.short_length >= 1 && c.clt.short_length <= c.clt.length, "clt.short_length",
          "must lie in [1, length]");
  require(c.coboundary.length >= 2, "coboundary.length", "must be >= 2");
  require(c.coboundary.cutoff >= 1 && c.coboundary.cutoff < c.coboundary.length, "coboundary.cutoff",
          "must lie in [1, length)");
  require(c.fit.min >= 1 && c.fit.max > c.fit.min, "fit.max", "window must satisfy 1 <= min < max");
}


std::string kind_name(ExperimentKind kind) { return kind_names().at(kind); }

ExperimentKind parse_kind(const std::string& name) {
  for (const auto& [k, n] : kind_names()) {
    if (n == name) return k;
  }
  throw ConfigError("experiment.kind", "unknown experiment kind '" + name + "'");
}

ExperimentConfig parse_config(std::istream& in) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("config", std::string("malformed file: ") + e.message());
  }
  ExperimentKind kind = ExperimentKind::return_tail;
  if (auto name = tree.get_optional<std::string>("experiment.kind")) kind = parse_kind(trim(*name));
  ExperimentConfig c = default_config(kind);
  std::set<std::string> known;
  known.insert("experiment.kind");
  known.insert("experiment.seed");
  if (auto seed = tree.get_optional<std::string>("experiment.seed")) {
    c.seed = parse_integer<std::uint64_t>("experiment.seed", trim(*seed));
  }
  visit_fields(c, [&](const char* section, const char* key, auto& member) {
    const std::string path = std::string(section) + "." + key;
    known.insert(path);
    if (auto text = tree.get_optional<std::string>(path)) from_text(path, trim(*text), member);
  });
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) throw ConfigError(section, "key outside a section");
    for (const auto& [key, value] : body) {
      const std::string path = section + "." + key;
      if (!known.count(path)) throw ConfigError(path, "unknown field");
    }
  }
  validate_config(c);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("--config", "cannot open '" + path + "'");
  return parse_config(in);
}

void write_config(std::ostream& out, const ExperimentConfig& config) {
  out << "[experiment]\n";
  out << "kind = " << kind_name(config.kind) << "\n";
  out << "seed = " << config.seed << "\n";
  // Thresholds that the kind enables by default are written as "none" when cleared.
  std::set<std::string> set_by_default;
  const ExperimentConfig defaults = default_config(config.kind);
  visit_fields(defaults, [&](const char* section, const char* key, const auto& member) {
    if (to_text(member)) set_by_default.insert(std::string(section) + "." + key);
  });
  std::string current = "experiment";
  visit_fields(config, [&](const char* section, const char* key, const auto& member) {
    auto text = to_text(member);
    if (!text && set_by_default.count(std::string(section) + "." + key)) text = "none";
    if (!text) return;
    if (current != section) {
      current = section;
      out << "\n[" << section << "]\n";
    }
    out << key << " = " << *text << "\n";
  });
}

std::string config_text(const ExperimentConfig& config) {
  std::ostringstream out;
  write_config(out, config);
  return out.str();
}

ExperimentConfig default_config(ExperimentKind kind) {
  ExperimentConfig c;
  c.kind = kind;
  switch (kind) {
    case ExperimentKind::return_tail:
      c.checks.slope_target = -1.0 / c.maps.alpha;
      c.checks.slope_tolerance = 0.2;
      break;
    case ExperimentKind::meeting_tail:
      c.fit.min = 8;
      c.fit.max = 512;
      c.checks.slope_target = -(c.tower.beta - 1.0);
      c.checks.slope_tolerance = 0.3;
      c.checks.spearman_max = 0.2;
      break;
    case ExperimentKind::approx_decay:
      c.checks.mc_relative_max = 0.2;
      c.checks.dominance = 1.0;
      break;
    case ExperimentKind::clt:
      c.tower.beta = 2.5;
      c.checks.ks_max = 0.03;
      break;
    case ExperimentKind::coboundary:
      c.tower.model = "uniform";
      break;
    case ExperimentKind::stationarity:
      c.tower.cap = 13;
      c.chain.steps = 10000000;
      c.checks.tv_max = 0.01;
      c.checks.kernel_error_max = 1e-12;
      c.checks.theta_tolerance = 0.01;
      break;
  }
  return c;
}

}  // namespace towerlab
