#include "krondpp/io.hpp"

#include <json.hpp>

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <system_error>

namespace krondpp {

namespace {

using nlohmann::json;

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open for reading: " + path.string());
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  return out;
}

void finish_output(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

[[noreturn]] void line_error(const std::filesystem::path& path, std::size_t line,
                             const std::string& what) {
  std::ostringstream msg;
  msg << path.string() << ":" << line << ": " << what;
  throw IoError(msg.str());
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& token, const std::string& context) {
  double value = 0.0;
  const char* first = token.data();
  const char* last = token.data() + token.size();
  const auto res = std::from_chars(first, last, value);
  if (res.ec != std::errc{} || res.ptr != last)
    throw IoError(context + ": malformed number '" + token + "'");
  return value;
}

void save_matrix_csv(const Matrix& m, const std::filesystem::path& path) {
  std::ofstream out = open_output(path);
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j > 0) out << ',';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
  finish_output(out, path);
}

Matrix load_matrix_csv(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string token;
    while (std::getline(ss, token, ',')) {
      std::ostringstream ctx;
      ctx << path.string() << ":" << line_no;
      row.push_back(parse_double(token, ctx.str()));
    }
    if (row.empty()) line_error(path, line_no, "empty row");
    if (!rows.empty() && row.size() != rows.front().size())
      line_error(path, line_no, "ragged row: expected " + std::to_string(rows.front().size()) +
                                    " entries, found " + std::to_string(row.size()));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw IoError(path.string() + ": empty matrix file");
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j)
      m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  return m;
}

void save_kernel(const KronKernel& k, const std::filesystem::path& manifest_path) {
  json manifest;
  manifest["version"] = 1;
  manifest["factors"] = json::array();
  const std::string stem = manifest_path.stem().string();
  for (Index f = 0; f < k.num_factors(); ++f) {
    const std::string factor_name = stem + ".factor" + std::to_string(f) + ".csv";
    save_matrix_csv(k.factor(f).mat(), manifest_path.parent_path() / factor_name);
    manifest["factors"].push_back({{"rows", k.factor(f).rows()}, {"path", factor_name}});
  }
  std::ofstream out = open_output(manifest_path);
  out << manifest.dump(2) << '\n';
  finish_output(out, manifest_path);
}

KronKernel load_kernel(const std::filesystem::path& manifest_path) {
  std::ifstream in = open_input(manifest_path);
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    throw IoError(manifest_path.string() + ": invalid manifest JSON: " + e.what());
  }
  if (!manifest.is_object() || !manifest.contains("version") || !manifest.contains("factors"))
    throw IoError(manifest_path.string() + ": manifest must have 'version' and 'factors'");
  if (manifest["version"] != 1)
    throw IoError(manifest_path.string() + ": unsupported manifest version");
  if (!manifest["factors"].is_array() || manifest["factors"].empty())
    throw IoError(manifest_path.string() + ": manifest needs a non-empty factor list");

  std::vector<SpdMatrix> factors;
  for (const auto& entry : manifest["factors"]) {
    if (!entry.is_object() || !entry.contains("rows") || !entry.contains("path"))
      throw IoError(manifest_path.string() + ": each factor needs 'rows' and 'path'");
    const Index rows = entry["rows"].get<Index>();
    std::filesystem::path factor_path = entry["path"].get<std::string>();
    if (factor_path.is_relative()) factor_path = manifest_path.parent_path() / factor_path;
    const Matrix m = load_matrix_csv(factor_path);
    if (m.rows() != rows || m.cols() != rows) {
      std::ostringstream msg;
      msg << factor_path.string() << ": factor is " << m.rows() << "x" << m.cols()
          << " but the manifest declares " << rows << "x" << rows;
      throw IoError(msg.str());
    }
    factors.push_back(SpdMatrix::checked(m));
  }
  return KronKernel(std::move(factors));
}

void save_subsets(std::span<const Subset> subsets, const std::filesystem::path& path,
                  std::optional<std::size_t> empty_count) {
  std::ofstream out = open_output(path);
  for (const Subset& y : subsets) {
    if (y.empty())
      throw IoError(path.string() + ": the subsets format cannot represent an empty subset");
    for (std::size_t a = 0; a < y.size(); ++a) {
      if (a > 0) out << ' ';
      out << y[a];
    }
    out << '\n';
  }
  if (empty_count.has_value()) out << "# empty_count=" << *empty_count << '\n';
  finish_output(out, path);
}

namespace {

std::vector<Subset> parse_subsets(const std::filesystem::path& path, Index ground_size,
                                  bool infer_ground, Index* inferred) {
  std::ifstream in = open_input(path);
  std::vector<Subset> subsets;
  std::string line;
  std::size_t line_no = 0;
  Index max_index = -1;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::stringstream ss(line);
    Subset y;
    std::string token;
    while (ss >> token) {
      Index value = 0;
      const auto res = std::from_chars(token.data(), token.data() + token.size(), value);
      if (res.ec != std::errc{} || res.ptr != token.data() + token.size())
        line_error(path, line_no, "malformed index '" + token + "'");
      if (value < 0) line_error(path, line_no, "negative index");
      if (!infer_ground && value >= ground_size)
        line_error(path, line_no, "index " + std::to_string(value) + " outside [0, " +
                                      std::to_string(ground_size) + ")");
      for (Index prev : y)
        if (prev == value)
          line_error(path, line_no, "duplicate index " + std::to_string(value));
      y.push_back(value);
      max_index = std::max(max_index, value);
    }
    if (!y.empty()) subsets.push_back(std::move(y));
  }
  if (infer_ground) *inferred = max_index + 1;
  return subsets;
}

}  // namespace

TrainingSet load_subsets(const std::filesystem::path& path, Index ground_size) {
  std::vector<Subset> subsets = parse_subsets(path, ground_size, false, nullptr);
  return TrainingSet(ground_size, std::move(subsets));
}

TrainingSet load_subsets(const std::filesystem::path& path) {
  Index inferred = 0;
  std::vector<Subset> subsets = parse_subsets(path, 0, true, &inferred);
  if (inferred < 1) throw IoError(path.string() + ": no subsets found");
  return TrainingSet(inferred, std::move(subsets));
}

void save_trace_csv(const FitHistory& history, const std::filesystem::path& path) {
  std::ofstream out = open_output(path);
  out << "iter,seconds,loglik\n";
  char seconds_buf[32];
  for (const FitRecord& rec : history.records) {
    std::snprintf(seconds_buf, sizeof(seconds_buf), "%.6f", rec.seconds);
    out << rec.iteration << ',' << seconds_buf << ',' << format_double(rec.log_likelihood)
        << '\n';
  }
  finish_output(out, path);
}

void save_partition_json(const PartitionPlan& plan, const std::filesystem::path& path) {
  json doc;
  doc["z"] = plan.z;
  doc["groups"] = json::array();
  for (std::size_t g = 0; g < plan.groups.size(); ++g)
    doc["groups"].push_back({{"subsets", plan.groups[g]}, {"union", plan.unions[g]}});
  std::ofstream out = open_output(path);
  out << doc.dump(2) << '\n';
  finish_output(out, path);
}

PartitionPlan load_partition_json(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": invalid plan JSON: " + e.what());
  }
  if (!doc.is_object() || !doc.contains("z") || !doc.contains("groups"))
    throw IoError(path.string() + ": plan must have 'z' and 'groups'");
  PartitionPlan plan;
  try {
    plan.z = doc["z"].get<Index>();
    for (const auto& entry : doc["groups"]) {
      plan.groups.push_back(entry.at("subsets").get<std::vector<Index>>());
      plan.unions.push_back(entry.at("union").get<Subset>());
    }
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": invalid plan JSON: " + e.what());
  }
  return plan;
}

}  // namespace krondpp
