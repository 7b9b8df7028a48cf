#include "emtl/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string_view>
#include <system_error>

#include <nlohmann/json.hpp>

#include "emtl/error.hpp"

namespace emtl {

namespace {

using nlohmann::json;

std::string format_double(double v) {
  char buf[32];
  const int len = std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf, static_cast<std::size_t>(len));
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    fields.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return fields;
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void parse_fail(const std::string& source, std::size_t line, const std::string& what) {
  throw Error(ErrorKind::parse_error, source + ":" + std::to_string(line) + ": " + what);
}

bool parse_number(std::string_view text, double& out) {
  text = trim(text);
  if (text.empty()) return false;
  if (text.front() == '+') text.remove_prefix(1);
  const auto res = std::from_chars(text.data(), text.data() + text.size(), out);
  return res.ec == std::errc() && res.ptr == text.data() + text.size();
}

bool parse_integer(std::string_view text, int& out) {
  text = trim(text);
  if (text.empty()) return false;
  if (text.front() == '+') text.remove_prefix(1);
  const auto res = std::from_chars(text.data(), text.data() + text.size(), out);
  return res.ec == std::errc() && res.ptr == text.data() + text.size();
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::invalid_input, "cannot open " + path);
  return in;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::invalid_input, "cannot write " + path);
  return out;
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(rows)}};
}

Matrix matrix_from_json(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const json& data = j.at("data");
  if (rows < 0 || cols < 0 || data.size() != static_cast<std::size_t>(rows)) {
    throw Error(ErrorKind::parse_error, "matrix row count does not match its data");
  }
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const json& row = data.at(static_cast<std::size_t>(i));
    if (row.size() != static_cast<std::size_t>(cols)) {
      throw Error(ErrorKind::parse_error, "matrix row " + std::to_string(i) + " has wrong length");
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = row.at(static_cast<std::size_t>(c)).get<double>();
  }
  return m;
}

json vector_to_json(const Vector& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Vector vector_from_json(const json& j) {
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j.at(i).get<double>();
  return v;
}

json to_json(const LabeledGMM& model) {
  json precisions = json::array();
  for (const auto& p : model.precisions) precisions.push_back(matrix_to_json(p));
  return json{{"type", "labeled_gmm"},
              {"means", matrix_to_json(model.means)},
              {"precisions", std::move(precisions)},
              {"shared_precision", model.shared_precision},
              {"label_cond", matrix_to_json(model.label_cond)},
              {"priors", vector_to_json(model.priors)}};
}

json to_json(const LvqModel& model) {
  json omegas = json::array();
  for (const auto& o : model.omegas) omegas.push_back(matrix_to_json(o));
  return json{{"type", "lvq"},
              {"metric", model.metric == MetricKind::shared ? "shared" : "local"},
              {"prototypes", matrix_to_json(model.prototypes)},
              {"labels", model.labels},
              {"omegas", std::move(omegas)}};
}

json to_json(const TransferMap& map) {
  return json{{"type", "transfer_map"},
              {"H", matrix_to_json(map.H)},
              {"iterations", map.iterations},
              {"converged", map.converged},
              {"final_eq_error", map.final_eq_error()},
              {"eq_error_trace", map.eq_error_trace},
              {"loglik_trace", map.loglik_trace}};
}

LabeledGMM lgmm_from_json(const json& j) {
  LabeledGMM model;
  model.means = matrix_from_json(j.at("means"));
  for (const auto& p : j.at("precisions")) model.precisions.push_back(matrix_from_json(p));
  model.shared_precision = j.at("shared_precision").get<bool>();
  model.label_cond = matrix_from_json(j.at("label_cond"));
  model.priors = vector_from_json(j.at("priors"));
  model.validate();
  return model;
}

LvqModel lvq_from_json(const json& j) {
  LvqModel model;
  const auto metric = j.at("metric").get<std::string>();
  if (metric == "shared") {
    model.metric = MetricKind::shared;
  } else if (metric == "local") {
    model.metric = MetricKind::local;
  } else {
    throw Error(ErrorKind::parse_error, "unknown metric kind '" + metric + "'");
  }
  model.prototypes = matrix_from_json(j.at("prototypes"));
  model.labels = j.at("labels").get<std::vector<int>>();
  for (const auto& o : j.at("omegas")) model.omegas.push_back(matrix_from_json(o));
  model.validate();
  return model;
}

// Traces written by json are finite or null; null reads back as NaN.
std::vector<double> trace_from_json(const json& j) {
  std::vector<double> out;
  for (const auto& v : j) out.push_back(v.is_null() ? std::nan("") : v.get<double>());
  return out;
}

TransferMap transfer_map_from_json(const json& j) {
  TransferMap map;
  map.H = matrix_from_json(j.at("H"));
  map.iterations = j.at("iterations").get<int>();
  map.converged = j.at("converged").get<bool>();
  map.eq_error_trace = trace_from_json(j.at("eq_error_trace"));
  map.loglik_trace = trace_from_json(j.at("loglik_trace"));
  if (map.eq_error_trace.empty() && j.contains("final_eq_error")) {
    map.eq_error_trace.push_back(j.at("final_eq_error").get<double>());
  }
  if (!map.H.allFinite()) throw Error(ErrorKind::parse_error, "transfer matrix has non-finite entries");
  return map;
}

template <class F>
auto guarded(F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::parse_error, std::string("malformed model document: ") + e.what());
  }
}

json parse_json(const std::string& text) {
  return guarded([&] { return json::parse(text); });
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

}  // namespace

Dataset parse_dataset_csv(std::istream& in, const std::string& source_name) {
  std::string line;
  std::size_t line_no = 0;
  std::size_t columns = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) break;
  }
  if (trim(line).empty()) throw Error(ErrorKind::parse_error, source_name + ": missing header");
  const auto header = split_commas(line);
  columns = header.size();
  if (columns < 2 || trim(header.back()) != "label") {
    parse_fail(source_name, line_no, "header must be x_1,...,x_d,label");
  }
  const auto dim = static_cast<Eigen::Index>(columns - 1);

  std::vector<double> values;
  std::vector<int> labels;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_commas(line);
    if (fields.size() != columns) {
      parse_fail(source_name, line_no,
                 "expected " + std::to_string(columns) + " fields, found " + std::to_string(fields.size()));
    }
    for (std::size_t c = 0; c + 1 < columns; ++c) {
      double v = 0.0;
      if (!parse_number(fields[c], v) || !std::isfinite(v)) {
        parse_fail(source_name, line_no, "malformed feature in column " + std::to_string(c + 1));
      }
      values.push_back(v);
    }
    int label = 0;
    if (!parse_integer(fields.back(), label) || label < 1) {
      parse_fail(source_name, line_no, "malformed label '" + std::string(trim(fields.back())) + "'");
    }
    labels.push_back(label);
  }
  if (labels.empty()) throw Error(ErrorKind::invalid_input, source_name + ": no data rows");

  Dataset data;
  data.points = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      values.data(), static_cast<Eigen::Index>(labels.size()), dim);
  data.labels = std::move(labels);
  return data;
}

Dataset read_dataset_csv(const std::string& path) {
  auto in = open_input(path);
  return parse_dataset_csv(in, path);
}

void write_dataset_csv(const Dataset& data, std::ostream& out) {
  data.validate();
  for (Eigen::Index c = 0; c < data.dim(); ++c) out << "x_" << (c + 1) << ',';
  out << "label\n";
  for (std::size_t j = 0; j < data.size(); ++j) {
    const auto row = static_cast<Eigen::Index>(j);
    for (Eigen::Index c = 0; c < data.dim(); ++c) out << format_double(data.points(row, c)) << ',';
    out << data.labels[j] << '\n';
  }
}

void write_dataset_csv(const Dataset& data, const std::string& path) {
  auto out = open_output(path);
  write_dataset_csv(data, out);
}

void write_report_csv(const ExperimentReport& report, std::ostream& out) {
  out << 'n';
  for (const Method m : report.methods) {
    const std::string name(method_name(m));
    out << ",err_mean_" << name << ",err_std_" << name << ",time_mean_" << name << ",time_std_" << name;
  }
  out << '\n';
  for (std::size_t i = 0; i < report.n_grid.size(); ++i) {
    out << report.n_grid[i];
    for (std::size_t m = 0; m < report.methods.size(); ++m) {
      const MethodStats& s = report.stats.at(m).at(i);
      out << ',' << format_double(s.err_mean) << ',' << format_double(s.err_std) << ','
          << format_double(s.time_mean) << ',' << format_double(s.time_std);
    }
    out << '\n';
  }
}

void write_report_csv(const ExperimentReport& report, const std::string& path) {
  auto out = open_output(path);
  write_report_csv(report, out);
}

ExperimentReport parse_report_csv(std::istream& in, const std::string& source_name) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw Error(ErrorKind::parse_error, source_name + ": missing header");
  ++line_no;
  const auto header = split_commas(line);
  if (trim(header.front()) != "n" || (header.size() - 1) % 4 != 0) {
    parse_fail(source_name, line_no, "report header must be n followed by four columns per method");
  }
  ExperimentReport report;
  static constexpr std::string_view kPrefixes[4] = {"err_mean_", "err_std_", "time_mean_", "time_std_"};
  for (std::size_t c = 1; c < header.size(); c += 4) {
    const std::string_view first = trim(header[c]);
    if (first.substr(0, kPrefixes[0].size()) != kPrefixes[0]) {
      parse_fail(source_name, line_no, "unexpected column '" + std::string(first) + "'");
    }
    const std::string_view name = first.substr(kPrefixes[0].size());
    const auto method = parse_method(name);
    if (!method) parse_fail(source_name, line_no, "unknown method '" + std::string(name) + "'");
    for (std::size_t q = 1; q < 4; ++q) {
      if (trim(header[c + q]) != std::string(kPrefixes[q]) + std::string(name)) {
        parse_fail(source_name, line_no, "unexpected column '" + std::string(trim(header[c + q])) + "'");
      }
    }
    report.methods.push_back(*method);
  }
  report.stats.resize(report.methods.size());

  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_commas(line);
    if (fields.size() != header.size()) parse_fail(source_name, line_no, "wrong number of fields");
    int n = 0;
    if (!parse_integer(fields[0], n)) parse_fail(source_name, line_no, "malformed n");
    report.n_grid.push_back(n);
    for (std::size_t m = 0; m < report.methods.size(); ++m) {
      double v[4];
      for (std::size_t q = 0; q < 4; ++q) {
        if (!parse_number(fields[1 + 4 * m + q], v[q])) {
          parse_fail(source_name, line_no, "malformed value in column " + std::to_string(2 + 4 * m + q));
        }
      }
      MethodStats s;
      s.err_mean = v[0];
      s.err_std = v[1];
      s.time_mean = v[2];
      s.time_std = v[3];
      report.stats[m].push_back(s);
    }
  }
  return report;
}

ExperimentReport read_report_csv(const std::string& path) {
  auto in = open_input(path);
  return parse_report_csv(in, path);
}

std::string to_document(const LabeledGMM& model) {
  model.validate();
  return dump(to_json(model));
}

std::string to_document(const LvqModel& model) {
  model.validate();
  return dump(to_json(model));
}

std::string to_document(const TransferMap& map) { return dump(to_json(map)); }

ModelDocument parse_document(const std::string& text) {
  const json j = parse_json(text);
  return guarded([&]() -> ModelDocument {
    const auto type = j.at("type").get<std::string>();
    if (type == "labeled_gmm") return lgmm_from_json(j);
    if (type == "lvq") return lvq_from_json(j);
    if (type == "transfer_map") return transfer_map_from_json(j);
    throw Error(ErrorKind::parse_error, "unknown document type '" + type + "'");
  });
}

ModelDocument load_document(const std::string& path) {
  auto in = open_input(path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_document(buffer.str());
}

void save_document(const std::string& text, const std::string& path) {
  auto out = open_output(path);
  out << text;
  if (!out) throw Error(ErrorKind::invalid_input, "failed writing " + path);
}

LabeledGMM lgmm_from_document(const std::string& text) {
  auto doc = parse_document(text);
  if (auto* m = std::get_if<LabeledGMM>(&doc)) return std::move(*m);
  throw Error(ErrorKind::parse_error, "document is not a labeled GMM");
}

LvqModel lvq_from_document(const std::string& text) {
  auto doc = parse_document(text);
  if (auto* m = std::get_if<LvqModel>(&doc)) return std::move(*m);
  throw Error(ErrorKind::parse_error, "document is not an LVQ model");
}

TransferMap transfer_map_from_document(const std::string& text) {
  auto doc = parse_document(text);
  if (auto* m = std::get_if<TransferMap>(&doc)) return std::move(*m);
  throw Error(ErrorKind::parse_error, "document is not a transfer map");
}

}  // namespace emtl
