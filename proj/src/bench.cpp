#include "emtl/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

#include "emtl/datagen.hpp"
#include "emtl/error.hpp"
#include "emtl/io.hpp"
#include "emtl/rng.hpp"

namespace emtl {

namespace {

constexpr std::pair<Method, std::string_view> kMethodNames[] = {
    {Method::source, "source"},
    {Method::source_loc, "source_loc"},
    {Method::naive, "naive"},
    {Method::naive_loc, "naive_loc"},
    {Method::em, "em"},
    {Method::em_loc, "em_loc"},
    {Method::retrain, "retrain"},
    {Method::retrain_loc, "retrain_loc"},
    {Method::gmlvq_transfer, "gmlvq_transfer"},
};

bool uses_shared_model(Method m) {
  return m == Method::source || m == Method::naive || m == Method::em || m == Method::gmlvq_transfer;
}

bool uses_local_model(Method m) {
  return m == Method::source_loc || m == Method::naive_loc || m == Method::em_loc;
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  for (const char c : text) {
    if (c == ',' || c == ' ' || c == '\t') {
      if (!current.empty()) out.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

[[noreturn]] void config_fail(std::size_t line, const std::string& what) {
  throw Error(ErrorKind::parse_error, "config line " + std::to_string(line) + ": " + what);
}

double to_double(const std::string& text, std::size_t line) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    config_fail(line, "expected a number, got '" + text + "'");
  }
  if (used != text.size()) config_fail(line, "expected a number, got '" + text + "'");
  return v;
}

long long to_integer(const std::string& text, std::size_t line) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(text, &used);
  } catch (const std::exception&) {
    config_fail(line, "expected an integer, got '" + text + "'");
  }
  if (used != text.size()) config_fail(line, "expected an integer, got '" + text + "'");
  return v;
}

std::vector<int> to_int_list(const std::string& text, std::size_t line) {
  std::vector<int> out;
  for (const auto& item : split_list(text)) out.push_back(static_cast<int>(to_integer(item, line)));
  return out;
}

MethodStats summarize(const std::vector<double>& errors, const std::vector<double>& times) {
  MethodStats s;
  std::vector<double> e;
  std::vector<double> t;
  for (std::size_t f = 0; f < errors.size(); ++f) {
    if (std::isnan(errors[f])) {
      ++s.failures;
    } else {
      e.push_back(errors[f]);
      t.push_back(times[f]);
    }
  }
  s.folds = static_cast<int>(e.size());
  auto mean_std = [](const std::vector<double>& v, double& mean, double& sd) {
    mean = 0.0;
    sd = 0.0;
    if (v.empty()) {
      mean = std::numeric_limits<double>::quiet_NaN();
      sd = mean;
      return;
    }
    for (const double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    if (v.size() < 2) return;
    double ss = 0.0;
    for (const double x : v) ss += (x - mean) * (x - mean);
    sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
  };
  mean_std(e, s.err_mean, s.err_std);
  mean_std(t, s.time_mean, s.time_std);
  return s;
}

struct FoldData {
  Dataset source_train;
  Dataset source_test;
  Dataset target_pool;
  Dataset target_test;
};

FoldData make_fold_data(const ExperimentConfig& config, const SeedStream& fold_stream) {
  FoldData d;
  if (config.dataset == DatasetChoice::csv) {
    d.source_train = read_dataset_csv(config.source_csv);
    d.source_test = d.source_train;
    const Dataset target = read_dataset_csv(config.target_csv);
    d.target_pool = exclude_classes(target, config.excluded_classes);
    d.target_test = config.target_test_csv.empty() ? target : read_dataset_csv(config.target_test_csv);
    return d;
  }
  GeneratorSpec source = config.custom_source;
  GeneratorSpec target = config.custom_target;
  if (config.dataset == DatasetChoice::toy) {
    source = toy_source_spec();
    target = toy_target_spec();
  } else if (config.dataset == DatasetChoice::cigars) {
    source = cigars_source_spec();
    target = cigars_target_spec();
  }
  auto draw = [&](GeneratorSpec spec, int n, std::uint64_t child) {
    spec.points_per_component = n;
    spec.seed = fold_stream.child(child).value();
    return sample(spec);
  };
  const int test_n = config.test_per_class > 0 ? config.test_per_class : config.n_per_class;
  d.source_train = draw(source, config.n_per_class, 0);
  d.source_test = draw(source, test_n, 1);
  d.target_pool = exclude_classes(draw(target, config.n_per_class, 2), config.excluded_classes);
  d.target_test = draw(target, test_n, 3);
  return d;
}

struct FoldResult {
  std::vector<std::vector<double>> errors;  // [method][n index]
  std::vector<std::vector<double>> times;
  std::vector<std::string> failures;
};

template <class F>
double seconds_spent(bool measure, F&& f) {
  const auto start = std::chrono::steady_clock::now();
  f();
  if (!measure) return 0.0;
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

FoldResult run_fold(const ExperimentConfig& config, int fold) {
  const SeedStream fold_stream = SeedStream(config.seed).child(static_cast<std::uint64_t>(fold));
  const std::size_t method_count = config.methods.size();
  const std::size_t n_count = config.n_grid.size();
  FoldResult result;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  result.errors.assign(method_count, std::vector<double>(n_count, nan));
  result.times.assign(method_count, std::vector<double>(n_count, nan));

  auto fail_all = [&](const std::string& what) {
    result.failures.push_back("fold " + std::to_string(fold) + ": " + what);
  };

  FoldData data;
  LvqModel shared_model;
  LvqModel local_model;
  bool have_shared = false;
  bool have_local = false;
  try {
    data = make_fold_data(config, fold_stream);
    LvqTrainingConfig lvq = config.lvq;
    if (std::any_of(config.methods.begin(), config.methods.end(), uses_shared_model)) {
      lvq.seed = fold_stream.child(4).value();
      shared_model = train_gmlvq(data.source_train, lvq);
      have_shared = true;
    }
    if (std::any_of(config.methods.begin(), config.methods.end(), uses_local_model)) {
      lvq.seed = fold_stream.child(5).value();
      local_model = train_lgmlvq(data.source_train, lvq);
      have_local = true;
    }
  } catch (const std::exception& e) {
    fail_all(e.what());
    return result;
  }

  std::optional<LabeledGMM> shared_gmm;
  std::optional<LabeledGMM> local_gmm;
  if (have_shared) {
    shared_gmm = to_lgmm(shared_model, config.sigma.value_or(default_conversion_sigma(shared_model)));
  }
  if (have_local) {
    local_gmm = to_lgmm(local_model, config.sigma.value_or(default_conversion_sigma(local_model)));
  }

  for (std::size_t i = 0; i < n_count; ++i) {
    Dataset train;
    try {
      train = subsample_balanced(data.target_pool, static_cast<std::size_t>(config.n_grid[i]),
                                 fold_stream.child(16 + i).value());
    } catch (const std::exception& e) {
      fail_all("N=" + std::to_string(config.n_grid[i]) + ": " + e.what());
      continue;
    }
    LvqTrainingConfig retrain_config = config.lvq;
    retrain_config.seed = fold_stream.child(1000 + i).value();

    for (std::size_t m = 0; m < method_count; ++m) {
      const Method method = config.methods[m];
      auto run = [&]() -> double {
        switch (method) {
          case Method::source:
            return lvq_error(shared_model, data.source_test);
          case Method::source_loc:
            return lvq_error(local_model, data.source_test);
          case Method::naive:
            return baseline_naive(shared_model, data.target_test);
          case Method::naive_loc:
            return baseline_naive(local_model, data.target_test);
          case Method::em:
          case Method::em_loc: {
            const bool loc = method == Method::em_loc;
            TransferMap map;
            result.times[m][i] = seconds_spent(config.measure_time, [&] {
              map = em_transfer(loc ? *local_gmm : *shared_gmm, train, config.transfer);
            });
            return lvq_error(loc ? local_model : shared_model, data.target_test, map.H);
          }
          case Method::retrain:
          case Method::retrain_loc: {
            const MetricKind family = method == Method::retrain ? MetricKind::shared : MetricKind::local;
            LvqModel fresh;
            result.times[m][i] = seconds_spent(config.measure_time, [&] {
              fresh = family == MetricKind::shared ? train_gmlvq(train, retrain_config)
                                                   : train_lgmlvq(train, retrain_config);
            });
            return lvq_error(fresh, data.target_test);
          }
          case Method::gmlvq_transfer: {
            GmlvqTransferResult r;
            result.times[m][i] = seconds_spent(config.measure_time, [&] {
              r = baseline_gmlvq_transfer(shared_model, train, data.target_test, config.gmlvq_transfer_solver,
                                          config.lvq.phi);
            });
            return r.error;
          }
        }
        return nan;
      };
      try {
        // The first grid point of each fold runs every method once untimed.
        if (i == 0) run();
        result.times[m][i] = 0.0;
        result.errors[m][i] = run();
      } catch (const std::exception& e) {
        result.errors[m][i] = nan;
        result.times[m][i] = nan;
        result.failures.push_back("fold " + std::to_string(fold) + ", N=" + std::to_string(config.n_grid[i]) +
                                  ", " + std::string(method_name(method)) + ": " + e.what());
      }
    }
  }
  return result;
}

}  // namespace

std::string_view method_name(Method method) {
  for (const auto& [m, name] : kMethodNames) {
    if (m == method) return name;
  }
  return "unknown";
}

std::optional<Method> parse_method(std::string_view name) {
  for (const auto& [m, n] : kMethodNames) {
    if (n == name) return m;
  }
  return std::nullopt;
}

std::string_view dataset_name(DatasetChoice choice) {
  switch (choice) {
    case DatasetChoice::toy:
      return "toy";
    case DatasetChoice::cigars:
      return "cigars";
    case DatasetChoice::csv:
      return "csv";
    case DatasetChoice::custom:
      return "custom";
  }
  return "unknown";
}

std::optional<DatasetChoice> parse_dataset(std::string_view name) {
  if (name == "toy") return DatasetChoice::toy;
  if (name == "cigars") return DatasetChoice::cigars;
  if (name == "csv") return DatasetChoice::csv;
  return std::nullopt;
}

ExperimentConfig ExperimentConfig::defaults_for(DatasetChoice dataset) {
  ExperimentConfig c;
  c.dataset = dataset;
  c.excluded_classes = {3};
  switch (dataset) {
    case DatasetChoice::toy:
      c.methods = {Method::naive, Method::em, Method::retrain, Method::gmlvq_transfer};
      c.n_grid = {4, 8, 16, 32, 64};
      c.folds = 10;
      c.n_per_class = 100;
      c.test_per_class = 100;
      break;
    case DatasetChoice::cigars:
      c.methods = {Method::source,  Method::source_loc, Method::naive,       Method::naive_loc,     Method::em,
                   Method::em_loc,  Method::retrain,    Method::retrain_loc, Method::gmlvq_transfer};
      c.n_grid = {4, 8, 12, 16, 32, 64};
      c.folds = 30;
      c.n_per_class = 1000;
      c.test_per_class = 1000;
      break;
    case DatasetChoice::csv:
    case DatasetChoice::custom:
      c.methods = {Method::naive, Method::em, Method::retrain, Method::gmlvq_transfer};
      c.n_grid = {4, 8, 16, 32, 64};
      c.folds = 10;
      c.excluded_classes.clear();
      c.n_per_class = 100;
      break;
  }
  return c;
}

void ExperimentConfig::validate() const {
  auto bad = [](const std::string& what) { throw Error(ErrorKind::invalid_configuration, what); };
  if (methods.empty()) bad("no methods selected");
  if (n_grid.empty()) bad("empty N grid");
  for (std::size_t i = 0; i < n_grid.size(); ++i) {
    if (n_grid[i] < 1) bad("N grid entries must be positive");
    if (i > 0 && n_grid[i] <= n_grid[i - 1]) bad("N grid must be strictly ascending");
  }
  if (folds < 2) bad("at least two folds are required");
  if (threads < 0) bad("thread count must be non-negative");
  if (sigma && !(*sigma > 0.0 && std::isfinite(*sigma))) bad("sigma must be positive");
  if (dataset == DatasetChoice::csv) {
    if (source_csv.empty() || target_csv.empty()) bad("csv dataset needs source_csv and target_csv");
  } else if (n_per_class < 1) {
    bad("n_per_class must be positive");
  }
  if (dataset == DatasetChoice::custom) {
    custom_source.validate();
    custom_target.validate();
  }
  lvq.validate();
  transfer.validate();
  gmlvq_transfer_solver.validate();
}

ExperimentConfig parse_experiment_config(const std::string& text) {
  struct Entry {
    std::string key;
    std::string value;
    std::size_t line;
  };
  std::vector<Entry> entries;
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string_view line = trim(std::string_view(raw).substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) config_fail(line_no, "expected key = value");
    entries.push_back({std::string(trim(line.substr(0, eq))), std::string(trim(line.substr(eq + 1))), line_no});
  }

  DatasetChoice dataset = DatasetChoice::toy;
  for (const auto& e : entries) {
    if (e.key != "dataset") continue;
    const auto d = parse_dataset(e.value);
    if (!d) config_fail(e.line, "unknown dataset '" + e.value + "'");
    dataset = *d;
  }
  ExperimentConfig c = ExperimentConfig::defaults_for(dataset);
  for (const auto& e : entries) {
    const std::string& k = e.key;
    const std::string& v = e.value;
    if (k == "dataset") {
      continue;
    } else if (k == "methods") {
      c.methods.clear();
      for (const auto& name : split_list(v)) {
        const auto m = parse_method(name);
        if (!m) config_fail(e.line, "unknown method '" + name + "'");
        c.methods.push_back(*m);
      }
    } else if (k == "n_grid") {
      c.n_grid = to_int_list(v, e.line);
    } else if (k == "folds") {
      c.folds = static_cast<int>(to_integer(v, e.line));
    } else if (k == "excluded_classes" || k == "exclude_classes") {
      c.excluded_classes = to_int_list(v, e.line);
    } else if (k == "seed") {
      const long long s = to_integer(v, e.line);
      if (s < 0) config_fail(e.line, "seed must be non-negative");
      c.seed = static_cast<std::uint64_t>(s);
    } else if (k == "output_path" || k == "out") {
      c.output_path = v;
    } else if (k == "n_per_class") {
      c.n_per_class = static_cast<int>(to_integer(v, e.line));
    } else if (k == "test_per_class") {
      c.test_per_class = static_cast<int>(to_integer(v, e.line));
    } else if (k == "source_csv") {
      c.source_csv = v;
    } else if (k == "target_csv") {
      c.target_csv = v;
    } else if (k == "target_test_csv") {
      c.target_test_csv = v;
    } else if (k == "sigma") {
      c.sigma = to_double(v, e.line);
    } else if (k == "epsilon") {
      c.transfer.epsilon = to_double(v, e.line);
    } else if (k == "relative_epsilon") {
      if (v != "true" && v != "false") config_fail(e.line, "expected true or false");
      c.transfer.relative_epsilon = v == "true";
    } else if (k == "ridge") {
      c.transfer.ridge = to_double(v, e.line);
    } else if (k == "max_iterations") {
      c.transfer.max_iterations = static_cast<int>(to_integer(v, e.line));
    } else if (k == "prototypes_per_class") {
      c.lvq.prototypes_per_class = static_cast<int>(to_integer(v, e.line));
    } else if (k == "epochs") {
      c.lvq.epochs = static_cast<int>(to_integer(v, e.line));
    } else if (k == "learning_rate_prototypes") {
      c.lvq.learning_rate_prototypes = to_double(v, e.line);
    } else if (k == "learning_rate_omega") {
      c.lvq.learning_rate_omega = to_double(v, e.line);
    } else if (k == "measure_time") {
      if (v != "true" && v != "false") config_fail(e.line, "expected true or false");
      c.measure_time = v == "true";
    } else if (k == "threads") {
      c.threads = static_cast<int>(to_integer(v, e.line));
    } else {
      config_fail(e.line, "unknown key '" + k + "'");
    }
  }
  return c;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::invalid_input, "cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_experiment_config(buffer.str());
}

const MethodStats& ExperimentReport::at(Method method, int n) const {
  const auto m = std::find(methods.begin(), methods.end(), method);
  const auto i = std::find(n_grid.begin(), n_grid.end(), n);
  if (m == methods.end() || i == n_grid.end()) {
    throw Error(ErrorKind::invalid_input, "report has no entry for " + std::string(method_name(method)) +
                                              " at N=" + std::to_string(n));
  }
  return stats[static_cast<std::size_t>(m - methods.begin())][static_cast<std::size_t>(i - n_grid.begin())];
}

bool ExperimentReport::has(Method method) const {
  return std::find(methods.begin(), methods.end(), method) != methods.end();
}

double baseline_naive(const LvqModel& source_model, const Dataset& target_test) {
  if (target_test.dim() == source_model.dim()) return lvq_error(source_model, target_test);
  return lvq_error(source_model, target_test, padded_identity(source_model.dim(), target_test.dim()));
}

double baseline_retrain(const Dataset& target_train, const Dataset& target_test, MetricKind family,
                        const LvqTrainingConfig& config) {
  const LvqModel model =
      family == MetricKind::shared ? train_gmlvq(target_train, config) : train_lgmlvq(target_train, config);
  return lvq_error(model, target_test);
}

double glvq_transfer_cost(const LvqModel& source_model, const Dataset& target, const Matrix& H,
                          const Sigmoid& phi, Matrix* gradient) {
  source_model.validate();
  target.validate();
  if (H.rows() != source_model.dim() || H.cols() != target.dim()) {
    throw Error(ErrorKind::invalid_input, "transfer matrix shape does not match model and data");
  }
  std::vector<Matrix> lambdas;
  for (std::size_t k = 0; k < source_model.omegas.size(); ++k) {
    lambdas.push_back(source_model.omegas[k].transpose() * source_model.omegas[k]);
  }
  auto lambda = [&](int k) -> const Matrix& {
    return source_model.metric == MetricKind::shared ? lambdas.front() : lambdas[static_cast<std::size_t>(k)];
  };
  if (gradient) gradient->setZero(H.rows(), H.cols());
  double cost = 0.0;
  Vector z;
  for (std::size_t j = 0; j < target.size(); ++j) {
    const auto row = static_cast<Eigen::Index>(j);
    z.noalias() = H * target.points.row(row).transpose();
    const Winners w = find_winners(source_model, z, target.labels[j]);
    const double mu = relative_distance_difference(w.d_plus, w.d_minus);
    cost += phi(mu);
    if (!gradient) continue;
    const double denom = w.d_plus + w.d_minus;
    if (denom <= 0.0) continue;
    const double f = phi.derivative(mu);
    const double g_plus = f * 2.0 * w.d_minus / (denom * denom);
    const double g_minus = -f * 2.0 * w.d_plus / (denom * denom);
    const Vector diff_plus = z - source_model.prototypes.row(w.plus).transpose();
    const Vector diff_minus = z - source_model.prototypes.row(w.minus).transpose();
    const Vector dz = 2.0 * (g_plus * (lambda(w.plus) * diff_plus) + g_minus * (lambda(w.minus) * diff_minus));
    gradient->noalias() += dz * target.points.row(row);
  }
  return cost;
}

GmlvqTransferResult baseline_gmlvq_transfer(const LvqModel& source_model, const Dataset& target_train,
                                            const Dataset& target_test, const SolverConfig& solver,
                                            const Sigmoid& phi) {
  const Eigen::Index m = source_model.dim();
  const Eigen::Index n = target_train.dim();
  const Matrix H0 = padded_identity(m, n);
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Vector x0 = Eigen::Map<const Vector>(RowMajor(H0).data(), m * n);
  Matrix grad(m, n);
  const Objective objective = [&](const Vector& x, Vector& g) {
    const Matrix H = Eigen::Map<const RowMajor>(x.data(), m, n);
    const double value = glvq_transfer_cost(source_model, target_train, H, phi, &grad);
    g = Eigen::Map<const Vector>(RowMajor(grad).data(), m * n);
    return value;
  };
  const SolverResult r = minimize(objective, x0, solver);
  if (r.status == SolverStatus::numerical_failure) {
    throw Error(ErrorKind::numerical_failure, "GLVQ transfer produced non-finite values");
  }
  GmlvqTransferResult out;
  out.H = Eigen::Map<const RowMajor>(r.x.data(), m, n);
  out.status = r.status;
  out.error = lvq_error(source_model, target_test, out.H);
  return out;
}

ExperimentReport run_experiment(const ExperimentConfig& config) {
  config.validate();
  const auto fold_count = static_cast<std::size_t>(config.folds);
  std::vector<FoldResult> folds(fold_count);

  unsigned threads = config.threads > 0 ? static_cast<unsigned>(config.threads)
                                        : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(fold_count));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t f = next++; f < fold_count; f = next++) folds[f] = run_fold(config, static_cast<int>(f));
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  ExperimentReport report;
  report.methods = config.methods;
  report.n_grid = config.n_grid;
  const std::size_t method_count = config.methods.size();
  const std::size_t n_count = config.n_grid.size();
  report.fold_errors.assign(method_count, std::vector<std::vector<double>>(n_count));
  report.fold_times.assign(method_count, std::vector<std::vector<double>>(n_count));
  report.stats.assign(method_count, std::vector<MethodStats>(n_count));
  for (std::size_t f = 0; f < fold_count; ++f) {
    for (std::size_t m = 0; m < method_count; ++m) {
      for (std::size_t i = 0; i < n_count; ++i) {
        report.fold_errors[m][i].push_back(folds[f].errors[m][i]);
        report.fold_times[m][i].push_back(folds[f].times[m][i]);
      }
    }
    report.failure_messages.insert(report.failure_messages.end(), folds[f].failures.begin(),
                                   folds[f].failures.end());
  }
  for (std::size_t m = 0; m < method_count; ++m) {
    for (std::size_t i = 0; i < n_count; ++i) {
      report.stats[m][i] = summarize(report.fold_errors[m][i], report.fold_times[m][i]);
    }
  }
  if (!config.output_path.empty()) write_report_csv(report, config.output_path);
  return report;
}

}  // namespace emtl
