#include "genpred/cli/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "genpred/errors.hpp"
#include "genpred/format.hpp"

namespace genpred::cli {

std::string to_string(Method m) { return m == Method::qnn ? "qnn" : "kernel"; }

Method parse_method(const std::string& s) {
  if (s == "qnn") return Method::qnn;
  if (s == "kernel") return Method::kernel;
  throw InputError("unknown method '" + s + "' (expected qnn or kernel)");
}

namespace {

std::string form_name(kernel::KernelForm f) {
  return f == kernel::KernelForm::radial ? "radial" : "inner_product";
}

kernel::KernelForm parse_form(const std::string& s) {
  if (s == "radial") return kernel::KernelForm::radial;
  if (s == "inner_product") return kernel::KernelForm::inner_product;
  throw InputError("unknown kernel form '" + s + "' (expected radial or inner_product)");
}

std::string execution_name(Execution e) { return e == Execution::serial ? "serial" : "parallel"; }

Execution parse_execution(const std::string& s) {
  if (s == "serial") return Execution::serial;
  if (s == "parallel") return Execution::parallel;
  throw InputError("unknown execution '" + s + "' (expected serial or parallel)");
}

std::uint64_t parse_u64(const std::string& s) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw InputError("not a non-negative integer: '" + s + "'");
  }
  return v;
}

bool parse_bool(const std::string& s) {
  if (s == "true") return true;
  if (s == "false") return false;
  throw InputError("not a boolean (true/false): '" + s + "'");
}

template <typename T, typename Parse>
std::vector<T> parse_list(const std::string& s, Parse parse) {
  std::vector<T> out;
  if (s.empty()) return out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto first = item.find_first_not_of(" \t");
    const auto last = item.find_last_not_of(" \t");
    out.push_back(parse(first == std::string::npos ? std::string() : item.substr(first, last - first + 1)));
  }
  return out;
}

template <typename T, typename Format>
std::string join(const std::vector<T>& v, Format format) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += format(v[i]);
  }
  return out;
}

std::string u64_text(std::uint64_t v) { return std::to_string(v); }
std::size_t size_value(const std::string& s) { return static_cast<std::size_t>(parse_u64(s)); }
std::string size_text(std::size_t v) { return std::to_string(v); }

struct Field {
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

using Section = std::vector<std::pair<std::string, Field>>;
using Schema = std::vector<std::pair<std::string, Section>>;

template <typename M>
Field real_field(M member) {
  return {[member](RunConfig& c, const std::string& s) { c.*member = parse_double(s); },
          [member](const RunConfig& c) { return format_double(c.*member); }};
}

template <typename M>
Field size_field(M member) {
  return {[member](RunConfig& c, const std::string& s) { c.*member = size_value(s); },
          [member](const RunConfig& c) { return size_text(c.*member); }};
}

template <typename M>
Field string_field(M member) {
  return {[member](RunConfig& c, const std::string& s) { c.*member = s; },
          [member](const RunConfig& c) { return c.*member; }};
}

template <typename M>
Field size_list_field(M member) {
  return {[member](RunConfig& c, const std::string& s) {
            c.*member = parse_list<std::size_t>(s, size_value);
          },
          [member](const RunConfig& c) { return join(c.*member, size_text); }};
}

const Schema& schema() {
  static const Schema s = {
      {"run",
       {{"seed", {[](RunConfig& c, const std::string& v) { c.seed = parse_u64(v); },
                  [](const RunConfig& c) { return u64_text(c.seed); }}},
        {"out", string_field(&RunConfig::out)}}},
      {"data",
       {{"path", string_field(&RunConfig::data_path)},
        {"calibration_path", string_field(&RunConfig::calibration_data_path)},
        {"input", string_field(&RunConfig::input_path)},
        {"target", string_field(&RunConfig::target)},
        {"train_fraction", real_field(&RunConfig::train_fraction)}}},
      {"model",
       {{"method", {[](RunConfig& c, const std::string& v) { c.method = parse_method(v); },
                    [](const RunConfig& c) { return to_string(c.method); }}},
        {"path", string_field(&RunConfig::model_path)},
        {"calibration", string_field(&RunConfig::calibration_path)}}},
      {"network",
       {{"taus", {[](RunConfig& c, const std::string& v) { c.taus = parse_list<double>(v, parse_double); },
                  [](const RunConfig& c) { return join(c.taus, format_double); }}},
        {"hidden", size_list_field(&RunConfig::hidden)},
        {"activation",
         {[](RunConfig& c, const std::string& v) { c.activation = qnn::parse_activation(v); },
          [](const RunConfig& c) { return qnn::to_string(c.activation); }}},
        {"head", {[](RunConfig& c, const std::string& v) { c.head = qnn::parse_head_mode(v); },
                  [](const RunConfig& c) { return qnn::to_string(c.head); }}},
        {"embedding_dim", size_field(&RunConfig::embedding_dim)},
        {"monotone",
         {[](RunConfig& c, const std::string& v) { c.monotone = qnn::parse_monotone_mode(v); },
          [](const RunConfig& c) { return qnn::to_string(c.monotone); }}},
        {"penalty_weight", real_field(&RunConfig::penalty_weight)}}},
      {"training",
       {{"learning_rate", real_field(&RunConfig::learning_rate)},
        {"batch_size", size_field(&RunConfig::batch_size)},
        {"epochs", size_field(&RunConfig::epochs)},
        {"huber_kappa", real_field(&RunConfig::huber_kappa)},
        {"standardize", {[](RunConfig& c, const std::string& v) { c.standardize = parse_bool(v); },
                         [](const RunConfig& c) { return std::string(c.standardize ? "true" : "false"); }}},
        {"execution", {[](RunConfig& c, const std::string& v) { c.execution = parse_execution(v); },
                       [](const RunConfig& c) { return execution_name(c.execution); }}}}},
      {"conformal", {{"alpha", real_field(&RunConfig::alpha)}}},
      {"kernel",
       {{"sigma", real_field(&RunConfig::kernel_sigma)},
        {"form", {[](RunConfig& c, const std::string& v) { c.kernel_form = parse_form(v); },
                  [](const RunConfig& c) { return form_name(c.kernel_form); }}}}},
      {"efron",
       {{"n", size_field(&RunConfig::efron_n)},
        {"replications", size_field(&RunConfig::efron_replications)},
        {"prediction_replications", size_field(&RunConfig::efron_prediction_replications)},
        {"oracle_replications", size_field(&RunConfig::efron_oracle_replications)},
        {"future", size_field(&RunConfig::efron_future)},
        {"sweep", size_list_field(&RunConfig::efron_sweep)},
        {"theta", real_field(&RunConfig::efron_theta)}}},
      {"normal_normal",
       {{"prior_mean", real_field(&RunConfig::nn_prior_mean)},
        {"prior_variance", real_field(&RunConfig::nn_prior_variance)},
        {"noise_variance", real_field(&RunConfig::nn_noise_variance)},
        {"true_theta", real_field(&RunConfig::nn_true_theta)},
        {"n", size_field(&RunConfig::nn_n)},
        {"grid_points", size_field(&RunConfig::nn_grid_points)},
        {"p_points", size_field(&RunConfig::nn_p_points)}}},
      {"coverage",
       {{"dgp", {[](RunConfig& c, const std::string& v) {
                   try {
                     c.cov_dgp = experiments::parse_dgp(v);
                   } catch (const DomainError& e) {
                     throw InputError(e.what());
                   }
                 },
                 [](const RunConfig& c) { return experiments::to_string(c.cov_dgp); }}},
        {"n_train", size_field(&RunConfig::cov_n_train)},
        {"n_cal", size_field(&RunConfig::cov_n_cal)},
        {"n_test", size_field(&RunConfig::cov_n_test)},
        {"replications", size_field(&RunConfig::cov_replications)},
        {"hidden", size_list_field(&RunConfig::cov_hidden)},
        {"learning_rate", real_field(&RunConfig::cov_learning_rate)},
        {"batch_size", size_field(&RunConfig::cov_batch_size)},
        {"epochs", size_field(&RunConfig::cov_epochs)}}},
  };
  return s;
}

const Field* find_field(const std::string& section, const std::string& key) {
  for (const auto& [name, fields] : schema()) {
    if (name != section) continue;
    for (const auto& [k, field] : fields) {
      if (k == key) return &field;
    }
  }
  return nullptr;
}

bool known_section(const std::string& section) {
  for (const auto& entry : schema()) {
    if (entry.first == section) return true;
  }
  return false;
}

}  // namespace

void RunConfig::validate() const {
  auto fail = [](const std::string& what) { throw InputError("config: " + what); };
  if (out.empty()) fail("[run] out must not be empty");
  if (target.empty()) fail("[data] target must not be empty");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) fail("[data] train_fraction must lie in (0, 1)");
  if (!(alpha > 0.0 && alpha < 1.0)) fail("[conformal] alpha must lie in (0, 1)");
  try {
    qnn::QuantileGrid grid(taus);
    (void)grid;
    network_spec(1).validate();
    training_config().validate();
    kernel_config().validate();
    efron_config().validate();
    normal_demo_config().model.validate();
    coverage_config().validate();
  } catch (const DomainError& e) {
    fail(e.what());
  }
  if (efron_sweep.empty()) fail("[efron] sweep must list at least one n");
  for (std::size_t n : efron_sweep) {
    if (n < 2) fail("[efron] sweep entries must be >= 2");
  }
  if (efron_prediction_replications < 1) fail("[efron] prediction_replications must be >= 1");
  if (efron_oracle_replications < 2) fail("[efron] oracle_replications must be >= 2");
  if (nn_n == 0) fail("[normal_normal] n must be positive");
  if (nn_grid_points < 2 || nn_p_points < 1) fail("[normal_normal] grid sizes too small");
}

qnn::NetworkSpec RunConfig::network_spec(std::size_t input_dim) const {
  qnn::NetworkSpec spec;
  spec.input_dim = input_dim;
  spec.hidden = hidden;
  spec.activation = activation;
  spec.head = head;
  spec.grid = qnn::QuantileGrid(taus);
  spec.embedding_dim = embedding_dim;
  spec.monotone = monotone;
  spec.penalty_weight = penalty_weight;
  return spec;
}

qnn::TrainingConfig RunConfig::training_config() const {
  qnn::TrainingConfig t;
  t.learning_rate = learning_rate;
  t.batch_size = batch_size;
  t.epochs = epochs;
  t.huber_kappa = huber_kappa;
  t.seed = seed;
  t.standardize = standardize;
  t.execution = execution;
  return t;
}

kernel::KernelConfig RunConfig::kernel_config() const { return {kernel_sigma, kernel_form}; }

experiments::EfronConfig RunConfig::efron_config() const {
  experiments::EfronConfig e;
  e.n = efron_n;
  e.replications = efron_replications;
  e.seed = seed;
  e.theta = efron_theta;
  e.future = efron_future;
  e.execution = Execution::parallel;
  return e;
}

experiments::NormalDemoConfig RunConfig::normal_demo_config() const {
  experiments::NormalDemoConfig d;
  d.model = {nn_prior_mean, nn_prior_variance, nn_noise_variance};
  d.true_theta = nn_true_theta;
  d.n = nn_n;
  d.seed = seed;
  d.theta_grid_points = nn_grid_points;
  d.p_grid_points = nn_p_points;
  return d;
}

experiments::CoverageBenchConfig RunConfig::coverage_config() const {
  experiments::CoverageBenchConfig c;
  c.dgp = cov_dgp;
  c.n_train = cov_n_train;
  c.n_cal = cov_n_cal;
  c.n_test = cov_n_test;
  c.alpha = alpha;
  c.replications = cov_replications;
  c.seed = seed;
  c.hidden = cov_hidden;
  c.activation = activation;
  c.training.learning_rate = cov_learning_rate;
  c.training.batch_size = cov_batch_size;
  c.training.epochs = cov_epochs;
  c.training.huber_kappa = huber_kappa;
  c.kernel = kernel_config();
  return c;
}

std::filesystem::path RunConfig::resolved_model_path() const {
  return model_path.empty() ? out_dir() / "model.gpq" : std::filesystem::path(model_path);
}

RunConfig parse_config(std::istream& in, const std::string& source) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw InputError(source + ":" + std::to_string(e.line()) + ": " + e.message());
  }
  RunConfig config;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      throw InputError(source + ": key '" + section + "' outside any section");
    }
    if (!known_section(section)) throw InputError(source + ": unknown section [" + section + "]");
    for (const auto& [key, value] : body) {
      const Field* field = find_field(section, key);
      if (!field) throw InputError(source + ": unknown key '" + key + "' in [" + section + "]");
      try {
        field->set(config, value.data());
      } catch (const std::exception& e) {
        throw InputError(source + ": [" + section + "] " + key + ": " + e.what());
      }
    }
  }
  config.validate();
  return config;
}

RunConfig parse_config_text(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError(path.string() + ": cannot open config file");
  return parse_config(in, path.string());
}

std::string echo_config(const RunConfig& config) {
  std::string out;
  for (const auto& [section, fields] : schema()) {
    if (!out.empty()) out += '\n';
    out += '[' + section + "]\n";
    for (const auto& [key, field] : fields) out += key + " = " + field.get(config) + '\n';
  }
  return out;
}

}  // namespace genpred::cli
