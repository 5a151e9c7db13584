#include "metarisk/config_io.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "metarisk/csv.hpp"
#include "metarisk/digest.hpp"
#include "metarisk/error.hpp"
#include "metarisk/risk.hpp"

namespace metarisk {

using nlohmann::json;

namespace {

std::string child(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

std::string type_name(const json& j) { return j.type_name(); }

double as_double(const json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path + ": expected a number, got " + type_name(j));
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ConfigError(path + ": expected a finite number");
  return v;
}

std::size_t as_count(const json& j, const std::string& path) {
  if (j.is_number_unsigned()) return j.get<std::size_t>();
  if (j.is_number_integer()) {
    if (j.get<long long>() < 0) throw ConfigError(path + ": expected a non-negative integer");
    return static_cast<std::size_t>(j.get<long long>());
  }
  if (j.is_number_float()) {
    const double v = j.get<double>();
    if (v >= 0.0 && v == std::floor(v) && v < 9.0e15) return static_cast<std::size_t>(v);
  }
  throw ConfigError(path + ": expected a non-negative integer, got " + j.dump());
}

bool as_bool(const json& j, const std::string& path) {
  if (!j.is_boolean()) throw ConfigError(path + ": expected true or false");
  return j.get<bool>();
}

std::string as_string(const json& j, const std::string& path) {
  if (!j.is_string()) throw ConfigError(path + ": expected a string, got " + type_name(j));
  return j.get<std::string>();
}

std::vector<double> as_doubles(const json& j, const std::string& path) {
  if (!j.is_array()) throw ConfigError(path + ": expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i)
    out.push_back(as_double(j[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

std::vector<std::size_t> as_counts(const json& j, const std::string& path) {
  if (!j.is_array()) throw ConfigError(path + ": expected an array of integers");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < j.size(); ++i)
    out.push_back(as_count(j[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

/// Reads members of a JSON object and rejects the ones nobody asked for.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object())
      throw ConfigError((path_.empty() ? std::string("plan") : path_) +
                        ": expected an object, got " + type_name(j_));
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }

  const json& at(const std::string& key) {
    if (!has(key)) throw ConfigError("missing required field '" + child(path_, key) + "'");
    return j_.at(key);
  }

  std::string path(const std::string& key) const { return child(path_, key); }

  double number(const std::string& key) { return as_double(at(key), path(key)); }
  std::size_t count(const std::string& key) { return as_count(at(key), path(key)); }
  std::string string(const std::string& key) { return as_string(at(key), path(key)); }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!seen_.contains(key)) throw ConfigError("unknown field '" + child(path_, key) + "'");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

std::vector<double> read_csv_values(ObjectReader& r,
                                    const std::filesystem::path& base_dir) {
  std::filesystem::path p = r.string("path");
  if (p.is_relative()) p = base_dir / p;
  std::ifstream in(p);
  if (!in) throw ConfigError(r.path("path") + ": cannot open " + p.string());
  return read_spectrum_csv(in);
}

void require_dim(const std::vector<double>& values, std::size_t d, const std::string& path) {
  if (values.size() != d)
    throw ConfigError(path + ": has " + std::to_string(values.size()) + " values, expected d = " +
                      std::to_string(d));
}

std::pair<std::size_t, std::size_t> line_column(std::string_view text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

json parse_json_text(std::string_view text, const std::string& what) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    // e.byte is one past the offending character.
    const auto [line, col] = line_column(text, e.byte > 0 ? e.byte - 1 : 0);
    throw ConfigError(what + ": JSON syntax error at line " + std::to_string(line) +
                      ", column " + std::to_string(col) + ": " + e.what());
  }
}

const char* cross_term_name(CrossTermForm f) {
  return f == CrossTermForm::main_text ? "main_text" : "appendix";
}

PlanOptions parse_options(const json& j, const std::string& path) {
  PlanOptions o;
  if (j.is_null()) return o;
  ObjectReader r(j, path);
  if (r.has("checkpoints")) {
    o.checkpoints = r.string("checkpoints");
    if (o.checkpoints != "default" && o.checkpoints != "dense")
      throw ConfigError(r.path("checkpoints") + ": expected \"default\" or \"dense\"");
  }
  if (r.has("epsilon_factors")) {
    o.epsilon_factors = as_doubles(r.at("epsilon_factors"), r.path("epsilon_factors"));
    for (double f : o.epsilon_factors)
      if (!(f > 0.0)) throw ConfigError(r.path("epsilon_factors") + ": factors must be positive");
  }
  if (r.has("envelope_p")) {
    o.envelope_p = r.number("envelope_p");
    if (!(*o.envelope_p > 0.0)) throw ConfigError(r.path("envelope_p") + ": must be positive");
  }
  if (r.has("envelope_constants")) {
    ObjectReader c(r.at("envelope_constants"), r.path("envelope_constants"));
    o.envelope_constants =
        EnvelopeConstants{c.number("U_l"), c.number("U_t"), c.number("L_l"), c.number("L_t")};
    c.finish();
  }
  if (r.has("single_task_control"))
    o.single_task_control = as_bool(r.at("single_task_control"), r.path("single_task_control"));
  if (r.has("cross_term")) {
    const std::string f = r.string("cross_term");
    if (f == "main_text")
      o.cross_term = CrossTermForm::main_text;
    else if (f == "appendix")
      o.cross_term = CrossTermForm::appendix;
    else
      throw ConfigError(r.path("cross_term") + ": expected \"main_text\" or \"appendix\"");
  }
  if (r.has("battery_size")) o.battery_size = r.count("battery_size");
  if (r.has("battery_max_d")) o.battery_max_d = r.count("battery_max_d");
  if (r.has("bias_free_battery"))
    o.bias_free_battery = as_bool(r.at("bias_free_battery"), r.path("bias_free_battery"));
  if (r.has("check_violated_alpha"))
    o.check_violated_alpha =
        as_bool(r.at("check_violated_alpha"), r.path("check_violated_alpha"));
  if (r.has("allow_unstable"))
    o.allow_unstable = as_bool(r.at("allow_unstable"), r.path("allow_unstable"));
  r.finish();
  return o;
}

SweepAxes parse_sweep(const json& j, const std::string& path) {
  SweepAxes s;
  if (j.is_null()) return s;
  ObjectReader r(j, path);
  if (r.has("T")) {
    s.T = as_counts(r.at("T"), r.path("T"));
    for (auto t : s.T)
      if (t == 0) throw ConfigError(r.path("T") + ": iteration counts must be at least 1");
  }
  if (r.has("beta_tr")) s.beta_tr = as_doubles(r.at("beta_tr"), r.path("beta_tr"));
  if (r.has("beta_tr_scaled"))
    s.beta_tr_scaled = as_doubles(r.at("beta_tr_scaled"), r.path("beta_tr_scaled"));
  if (r.has("r")) s.r = as_doubles(r.at("r"), r.path("r"));
  if (r.has("epsilon")) {
    s.epsilon = as_doubles(r.at("epsilon"), r.path("epsilon"));
    for (double e : s.epsilon)
      if (!(e > 0.0)) throw ConfigError(r.path("epsilon") + ": values must be positive");
  }
  if (r.has("spectra")) {
    const json& arr = r.at("spectra");
    if (!arr.is_array()) throw ConfigError(r.path("spectra") + ": expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string p = r.path("spectra") + "[" + std::to_string(i) + "]";
      ObjectReader e(arr[i], p);
      LabeledSpectrum ls{e.string("label"), e.at("data_spectrum")};
      if (ls.label.empty() || ls.label.find_first_of("/\\ ,") != std::string::npos)
        throw ConfigError(p + ".label: must be non-empty without separators or spaces");
      e.finish();
      s.spectra.push_back(std::move(ls));
    }
  }
  if (!s.beta_tr.empty() && !s.beta_tr_scaled.empty())
    throw ConfigError(path + ": give either beta_tr or beta_tr_scaled, not both");
  r.finish();
  return s;
}

void require_axes(const ExperimentPlan& plan) {
  const auto& s = plan.sweep;
  const auto need = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(std::string("missing required field 'sweep.") + what + "'");
  };
  switch (plan.kind) {
    case ExperimentKind::phase_transition:
      need(!s.r.empty(), "r");
      need(!s.T.empty(), "T");
      break;
    case ExperimentKind::rate_check:
    case ExperimentKind::single_vs_meta:
    case ExperimentKind::bound_sandwich:
      need(!s.T.empty(), "T");
      break;
    case ExperimentKind::lr_tradeoff:
      need(!s.beta_tr.empty() || !s.beta_tr_scaled.empty(), "beta_tr");
      break;
    case ExperimentKind::stopping_time:
      need(!s.beta_tr.empty() || !s.beta_tr_scaled.empty(), "beta_tr");
      need(!s.epsilon.empty() || !plan.options.epsilon_factors.empty(), "epsilon");
      break;
  }
}

json axes_to_json(const SweepAxes& s) {
  json j = json::object();
  if (!s.T.empty()) j["T"] = s.T;
  if (!s.beta_tr.empty()) j["beta_tr"] = s.beta_tr;
  if (!s.beta_tr_scaled.empty()) j["beta_tr_scaled"] = s.beta_tr_scaled;
  if (!s.r.empty()) j["r"] = s.r;
  if (!s.epsilon.empty()) j["epsilon"] = s.epsilon;
  if (!s.spectra.empty()) {
    json arr = json::array();
    for (const auto& ls : s.spectra) arr.push_back({{"label", ls.label}, {"data_spectrum", ls.spec}});
    j["spectra"] = std::move(arr);
  }
  return j;
}

json options_to_json(const PlanOptions& o) {
  json j = {{"checkpoints", o.checkpoints},
            {"epsilon_factors", o.epsilon_factors},
            {"single_task_control", o.single_task_control},
            {"cross_term", cross_term_name(o.cross_term)},
            {"battery_size", o.battery_size},
            {"battery_max_d", o.battery_max_d},
            {"bias_free_battery", o.bias_free_battery},
            {"check_violated_alpha", o.check_violated_alpha},
            {"allow_unstable", o.allow_unstable}};
  if (o.envelope_p) j["envelope_p"] = *o.envelope_p;
  if (o.envelope_constants) {
    const auto& c = *o.envelope_constants;
    j["envelope_constants"] = {{"U_l", c.U_l}, {"U_t", c.U_t}, {"L_l", c.L_l}, {"L_t", c.L_t}};
  }
  return j;
}

Vector parse_vector(const json& j, const std::string& path, std::size_t d) {
  const std::vector<double> v = as_doubles(j, path);
  require_dim(v, d, path);
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::phase_transition: return "phase_transition";
    case ExperimentKind::rate_check: return "rate_check";
    case ExperimentKind::lr_tradeoff: return "lr_tradeoff";
    case ExperimentKind::stopping_time: return "stopping_time";
    case ExperimentKind::single_vs_meta: return "single_vs_meta";
    case ExperimentKind::bound_sandwich: return "bound_sandwich";
  }
  return "unknown";
}

ExperimentKind parse_experiment_kind(std::string_view name) {
  for (auto k : {ExperimentKind::phase_transition, ExperimentKind::rate_check,
                 ExperimentKind::lr_tradeoff, ExperimentKind::stopping_time,
                 ExperimentKind::single_vs_meta, ExperimentKind::bound_sandwich})
    if (to_string(k) == name) return k;
  throw ConfigError("kind: unknown experiment kind '" + std::string(name) + "'");
}

Spectrum resolve_data_spectrum(const json& spec, std::size_t d,
                               const std::filesystem::path& base_dir) {
  ObjectReader r(spec, "data_spectrum");
  const std::string kind = r.string("kind");
  Spectrum out;
  try {
    if (kind == "log_decay") {
      out = log_decay_spectrum(d, r.number("p"));
    } else if (kind == "poly") {
      out = poly_spectrum(d, r.number("q"));
    } else if (kind == "exp") {
      out = exp_spectrum(d);
    } else if (kind == "two_block") {
      out = two_block_spectrum(d, r.count("s"));
    } else if (kind == "values") {
      auto v = as_doubles(r.at("values"), r.path("values"));
      require_dim(v, d, r.path("values"));
      out = Spectrum::from_values(std::move(v));
    } else if (kind == "csv") {
      auto v = read_csv_values(r, base_dir);
      require_dim(v, d, r.path("path"));
      out = Spectrum::from_values(std::move(v));
    } else {
      throw ConfigError("data_spectrum.kind: unknown spectrum kind '" + kind + "'");
    }
  } catch (const ParameterDomainError& e) {
    throw ConfigError(std::string("data_spectrum: ") + e.what());
  }
  r.finish();
  return out;
}

TaskSpectrum resolve_task_spectrum(const json& spec, std::size_t d,
                                   const std::filesystem::path& base_dir) {
  ObjectReader r(spec, "task_spectrum");
  const std::string kind = r.string("kind");
  TaskSpectrum out;
  try {
    if (kind == "log_growth") {
      out = log_growth_task_spectrum(d, r.number("r"), r.has("scale") ? r.number("scale") : 1.0);
    } else if (kind == "isotropic") {
      const bool by_value = r.has("eta_sq");
      const bool by_trace = r.has("trace");
      if (by_value == by_trace)
        throw ConfigError("task_spectrum: isotropic needs exactly one of eta_sq or trace");
      const double eta_sq =
          by_value ? r.number("eta_sq") : r.number("trace") / static_cast<double>(d);
      out = isotropic_task_spectrum(d, eta_sq);
    } else if (kind == "zero") {
      out = zero_task_spectrum(d);
    } else if (kind == "values") {
      auto v = as_doubles(r.at("values"), r.path("values"));
      require_dim(v, d, r.path("values"));
      out = TaskSpectrum::from_values(std::move(v));
    } else if (kind == "csv") {
      auto v = read_csv_values(r, base_dir);
      require_dim(v, d, r.path("path"));
      out = TaskSpectrum::from_values(std::move(v));
    } else {
      throw ConfigError("task_spectrum.kind: unknown task spectrum kind '" + kind + "'");
    }
  } catch (const ParameterDomainError& e) {
    throw ConfigError(std::string("task_spectrum: ") + e.what());
  }
  r.finish();
  return out;
}

ResolvedConfig resolve_config(const json& block, std::uint64_t seed,
                              const std::filesystem::path& base_dir) {
  ObjectReader r(block, "config");
  ResolvedConfig out;
  ProblemConfig& c = out.config;
  c.seed = seed;
  c.d = r.count("d");
  c.T = r.count("T");
  if (c.d == 0) throw ConfigError("config.d: must be at least 1");
  if (c.T == 0) throw ConfigError("config.T: must be at least 1");
  if (r.has("n1")) c.n1 = r.count("n1");
  if (r.has("n2")) c.n2 = r.count("n2");
  if (r.has("m")) c.m = r.count("m");
  if (r.has("beta_tr")) c.beta_tr = r.number("beta_tr");
  if (r.has("beta_te")) c.beta_te = r.number("beta_te");
  if (r.has("noise_sigma")) c.noise_sigma = r.number("noise_sigma");
  c.data_spectrum = resolve_data_spectrum(r.at("data_spectrum"), c.d, base_dir);
  c.task_spectrum = resolve_task_spectrum(r.at("task_spectrum"), c.d, base_dir);

  json rates_json = {{"c1", c.rates.c1}, {"b1", c.rates.b1}, {"sigma_x", c.rates.sigma_x},
                     {"C", nullptr}};
  if (r.has("rates")) {
    ObjectReader rr(r.at("rates"), "config.rates");
    if (rr.has("c1")) c.rates.c1 = rr.number("c1");
    if (rr.has("b1")) c.rates.b1 = rr.number("b1");
    if (rr.has("sigma_x")) c.rates.sigma_x = rr.number("sigma_x");
    if (rr.has("C")) c.rates.C = rr.number("C");
    rr.finish();
    rates_json = c.rates;
  }

  json theta_spec = {{"kind", "random_unit"}, {"norm", 1.0}};
  if (r.has("theta_star")) {
    const json& t = r.at("theta_star");
    if (t.is_array()) {
      c.theta_star = parse_vector(t, "config.theta_star", c.d);
      theta_spec = t;
    } else {
      ObjectReader tr(t, "config.theta_star");
      const std::string kind = tr.string("kind");
      if (kind == "random_unit") {
        theta_spec = {{"kind", "random_unit"}};
        if (tr.has("seed")) theta_spec["seed"] = tr.count("seed");
      } else if (kind == "flat") {
        theta_spec = {{"kind", "flat"}};
      } else if (kind == "zero") {
        theta_spec = {{"kind", "zero"}};
      } else {
        throw ConfigError("config.theta_star.kind: expected random_unit, flat or zero");
      }
      if (kind != "zero") {
        const double norm = tr.has("norm") ? tr.number("norm") : 1.0;
        if (!(norm >= 0.0)) throw ConfigError("config.theta_star.norm: must be non-negative");
        theta_spec["norm"] = norm;
      }
      tr.finish();
    }
  }
  if (c.theta_star.size() == 0) {
    const auto dim = static_cast<Eigen::Index>(c.d);
    const double norm = theta_spec.value("norm", 1.0);
    if (theta_spec.at("kind") == "zero") {
      c.theta_star = Vector::Zero(dim);
    } else if (theta_spec.at("kind") == "flat") {
      c.theta_star = Vector::Constant(dim, norm / std::sqrt(static_cast<double>(c.d)));
    } else {
      const std::uint64_t ts = theta_spec.contains("seed") ? theta_spec["seed"].get<std::uint64_t>()
                                                           : seed;
      c.theta_star = norm * random_unit_vector(c.d, ts);
    }
  }

  json omega_spec = "zero";
  if (r.has("omega0")) {
    const json& o = r.at("omega0");
    if (o.is_array()) {
      c.omega0 = parse_vector(o, "config.omega0", c.d);
      omega_spec = o;
    } else {
      const std::string kind = as_string(o, "config.omega0");
      if (kind == "zero") {
        c.omega0 = Vector::Zero(static_cast<Eigen::Index>(c.d));
      } else if (kind == "theta_star") {
        c.omega0 = c.theta_star;
      } else {
        throw ConfigError("config.omega0: expected an array, \"zero\" or \"theta_star\"");
      }
      omega_spec = kind;
    }
  } else {
    c.omega0 = Vector::Zero(static_cast<Eigen::Index>(c.d));
  }

  const bool has_alpha = r.has("alpha");
  const bool has_fraction = r.has("alpha_fraction");
  if (has_alpha && has_fraction)
    throw ConfigError("config: give either alpha or alpha_fraction, not both");
  try {
    require_admissible_beta(c.data_spectrum, c.beta_tr, "βtr");
    require_admissible_beta(c.data_spectrum, c.beta_te, "βte");
  } catch (const ParameterDomainError& e) {
    throw ParameterDomainError(std::string("config: ") + e.what());
  }
  if (has_alpha) {
    c.alpha = r.number("alpha");
  } else {
    const double fraction = has_fraction ? r.number("alpha_fraction") : 0.5;
    if (!(fraction > 0.0)) throw ConfigError("config.alpha_fraction: must be positive");
    out.alpha_fraction = fraction;
    c.alpha = fraction * stability_threshold(c);
  }
  r.finish();

  out.block = {{"d", c.d},
               {"T", c.T},
               {"n1", c.n1},
               {"n2", c.n2},
               {"m", c.m},
               {"beta_tr", c.beta_tr},
               {"beta_te", c.beta_te},
               {"noise_sigma", c.noise_sigma},
               {"data_spectrum", block.at("data_spectrum")},
               {"task_spectrum", block.at("task_spectrum")},
               {"rates", rates_json},
               {"theta_star", theta_spec},
               {"omega0", omega_spec}};
  if (out.alpha_fraction)
    out.block["alpha_fraction"] = *out.alpha_fraction;
  else
    out.block["alpha"] = c.alpha;
  return out;
}

ExperimentPlan parse_plan(std::string_view text, const std::filesystem::path& base_dir) {
  json doc = parse_json_text(text, "plan");
  if (doc.is_object() && doc.contains("artifact") && doc.contains("plan")) doc = doc.at("plan");
  ObjectReader r(doc, "");
  ExperimentPlan plan;
  plan.base_dir = base_dir;
  plan.schema = static_cast<int>(r.count("schema"));
  if (plan.schema != 1)
    throw ConfigError("schema: unsupported plan schema " + std::to_string(plan.schema) +
                      " (expected 1)");
  plan.kind = parse_experiment_kind(r.string("kind"));
  if (r.has("seed")) plan.seed = r.count("seed");
  if (r.has("replications")) plan.replications = r.count("replications");
  if (plan.replications == 0) throw ConfigError("replications: must be at least 1");
  plan.config = r.at("config");
  if (!plan.config.is_object()) throw ConfigError("config: expected an object");
  plan.sweep = parse_sweep(r.has("sweep") ? r.at("sweep") : json(), "sweep");
  plan.options = parse_options(r.has("options") ? r.at("options") : json(), "options");
  r.finish();
  require_axes(plan);
  // Resolve once so that schema errors in the configuration block surface here.
  resolve_config(plan.config, plan.seed, plan.base_dir);
  for (const auto& ls : plan.sweep.spectra)
    resolve_data_spectrum(ls.spec, plan.config.at("d").get<std::size_t>(), plan.base_dir);
  return plan;
}

void apply_override(json& doc, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0)
    throw ConfigError("override '" + std::string(assignment) + "': expected key=value");
  const std::string key(assignment.substr(0, eq));
  const std::string value_text(assignment.substr(eq + 1));
  json value;
  try {
    value = json::parse(value_text);
  } catch (const json::parse_error&) {
    value = value_text;
  }
  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? dot : dot - start);
    if (part.empty()) throw ConfigError("override '" + key + "': empty key component");
    if (!node->is_object()) throw ConfigError("override '" + key + "': '" + part + "' is not inside an object");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
}

ExperimentPlan load_plan(const std::filesystem::path& path,
                         const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open plan file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  std::string text = ss.str();
  if (!overrides.empty()) {
    json doc = parse_json_text(text, path.string());
    if (doc.is_object() && doc.contains("artifact") && doc.contains("plan")) doc = doc.at("plan");
    for (const auto& o : overrides) apply_override(doc, o);
    text = doc.dump(2);
  }
  try {
    return parse_plan(text, path.parent_path());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

json plan_to_json(const ExperimentPlan& plan) {
  const ResolvedConfig rc = resolve_config(plan.config, plan.seed, plan.base_dir);
  return {{"schema", plan.schema},
          {"kind", to_string(plan.kind)},
          {"seed", plan.seed},
          {"replications", plan.replications},
          {"config", rc.block},
          {"sweep", axes_to_json(plan.sweep)},
          {"options", options_to_json(plan.options)}};
}

json config_to_json(const ProblemConfig& c) {
  auto vec = [](const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  auto span_vec = [](std::span<const double> s) { return std::vector<double>(s.begin(), s.end()); };
  return {{"d", c.d},
          {"T", c.T},
          {"n1", c.n1},
          {"n2", c.n2},
          {"m", c.m},
          {"alpha", c.alpha},
          {"beta_tr", c.beta_tr},
          {"beta_te", c.beta_te},
          {"noise_sigma", c.noise_sigma},
          {"seed", c.seed},
          {"rates", c.rates},
          {"data_spectrum", span_vec(c.data_spectrum.values())},
          {"task_spectrum", span_vec(c.task_spectrum.values())},
          {"theta_star", vec(c.theta_star)},
          {"omega0", vec(c.omega0)}};
}

std::string config_fingerprint(const ProblemConfig& config) {
  return sha256_hex(config_to_json(config).dump());
}

json derived_quantities(const ProblemConfig& c) {
  json j;
  j["trace_sigma"] = c.data_spectrum.trace();
  j["trace_sigma_sq"] = c.data_spectrum.trace_sq();
  j["lambda_1"] = c.data_spectrum.largest();
  j["beta_limit"] = 1.0 / c.data_spectrum.largest();
  j["c"] = c_rate(c.data_spectrum, c.beta_tr, c.rates);
  j["C"] = C_value(c.data_spectrum, c.beta_tr, c.rates);
  j["alpha"] = c.alpha;
  j["alpha_threshold"] = stability_threshold(c);
  j["mu_min_train"] = meta_covariance(c.data_spectrum, c.n1, c.beta_tr).min();
  j["mu_min_test"] = meta_covariance(c.data_spectrum, c.m, c.beta_te).min();
  j["bayes_error"] = bayes_error(c);
  j["fingerprint"] = config_fingerprint(c);
  return j;
}

}  // namespace metarisk
