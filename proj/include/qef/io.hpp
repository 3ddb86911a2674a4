#pragma once

// Configuration, presets and artifact emission for the experiment runner.
// Configs are a single nested key-value schema with two encodings: JSON, or a
// plain text file of dotted keys (`alpha.start = 0`). Both funnel into one
// nlohmann::json document. All randomness is seeded mt19937_64, so outputs
// are byte-identical across runs for a fixed config.

#include "qef/classical.hpp"
#include "qef/linalg.hpp"
#include "qef/system.hpp"

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace qef {

using Json = nlohmann::json;

// ---------------------------------------------------------------------------
// Config parsing
// ---------------------------------------------------------------------------

struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(what) {}
};

namespace detail {

inline Json parse_scalar(const std::string& raw) {
  std::string s = raw;
  auto trim = [](std::string& x) {
    x.erase(0, x.find_first_not_of(" \t"));
    x.erase(x.find_last_not_of(" \t") + 1);
  };
  trim(s);
  if (s.empty()) throw ConfigError("empty value");
  if (s.front() == '"' && s.back() == '"' && s.size() >= 2)
    return s.substr(1, s.size() - 2);
  if (s.front() == '[') return Json::parse(s);
  if (s == "true") return true;
  if (s == "false") return false;
  try {
    size_t pos = 0;
    if (s.find_first_of(".eE") == std::string::npos) {
      long long v = std::stoll(s, &pos);
      if (pos == s.size()) return v;
    }
    pos = 0;
    double v = std::stod(s, &pos);
    if (pos == s.size()) return v;
  } catch (...) {
  }
  return s;  // bare string
}

}  // namespace detail

/// Text encoding: one `dotted.key = value` per line, '#' comments.
inline Json parse_keyvalue_text(const std::string& text) {
  Json root = Json::object();
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    std::string key = line.substr(0, eq);
    key.erase(0, key.find_first_not_of(" \t"));
    key.erase(key.find_last_not_of(" \t") + 1);
    if (key.empty())
      throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    Json* node = &root;
    size_t pos = 0;
    while (true) {
      auto dot = key.find('.', pos);
      std::string part = key.substr(pos, dot == std::string::npos ? dot : dot - pos);
      if (dot == std::string::npos) {
        (*node)[part] = detail::parse_scalar(line.substr(eq + 1));
        break;
      }
      node = &(*node)[part];
      pos = dot + 1;
    }
  }
  return root;
}

inline Json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  std::string text = buf.str();
  auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && (text[first] == '{' || text[first] == '['))
    return Json::parse(text);
  return parse_keyvalue_text(text);
}

/// "start:stop:count" grid specification.
struct GridSpec {
  double start = 0, stop = 0;
  int count = 1;

  std::vector<double> points() const {
    std::vector<double> out;
    if (count < 1) throw ConfigError("grid: count must be >= 1");
    for (int k = 0; k < count; ++k)
      out.push_back(count == 1 ? start
                               : start + (stop - start) * k / (count - 1));
    return out;
  }

  static GridSpec parse(const std::string& s) {
    GridSpec g;
    auto c1 = s.find(':'), c2 = s.rfind(':');
    if (c1 == std::string::npos || c2 == c1)
      throw ConfigError("grid spec must be start:stop:count, got " + s);
    g.start = std::stod(s.substr(0, c1));
    g.stop = std::stod(s.substr(c1 + 1, c2 - c1 - 1));
    g.count = std::stoi(s.substr(c2 + 1));
    if (g.count < 1) throw ConfigError("grid spec: count must be >= 1");
    return g;
  }

  static GridSpec from_json(const Json& j, const std::string& key) {
    if (j.is_string()) return parse(j.get<std::string>());
    GridSpec g;
    if (!j.is_object() || !j.contains("start") || !j.contains("stop") ||
        !j.contains("count"))
      throw ConfigError("config key '" + key + "': expected start/stop/count");
    g.start = j["start"].get<double>();
    g.stop = j["stop"].get<double>();
    g.count = j["count"].get<int>();
    if (g.count < 1) throw ConfigError("config key '" + key + "': count must be >= 1");
    return g;
  }
};

// ---------------------------------------------------------------------------
// Matrix (de)serialization: JSON array-of-arrays of [re, im] pairs
// ---------------------------------------------------------------------------

inline Json matrix_to_json(const Mat& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      row.push_back(Json::array({m(i, j).real(), m(i, j).imag()}));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Mat matrix_from_json(const Json& j) {
  if (!j.is_array() || j.empty()) throw ConfigError("matrix: expected array of rows");
  const int rows = static_cast<int>(j.size());
  const int cols = static_cast<int>(j[0].size());
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    if (static_cast<int>(j[i].size()) != cols)
      throw ConfigError("matrix: ragged rows");
    for (int c = 0; c < cols; ++c) {
      const Json& e = j[i][c];
      if (e.is_number())
        m(i, c) = Complex(e.get<double>(), 0.0);
      else if (e.is_array() && e.size() == 2)
        m(i, c) = Complex(e[0].get<double>(), e[1].get<double>());
      else
        throw ConfigError("matrix: entries must be numbers or [re, im] pairs");
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// System construction from definition files and named presets
// ---------------------------------------------------------------------------

namespace detail {

inline Mat named_hamiltonian(const std::string& name, int dim, Rng& rng) {
  if (name == "pauli-z") {
    if (dim != 2) throw ConfigError("pauli-z requires dim 2");
    Mat h(2, 2);
    h << 1, 0, 0, -1;
    return h;
  }
  if (name == "pauli-x") {
    if (dim != 2) throw ConfigError("pauli-x requires dim 2");
    Mat h(2, 2);
    h << 0, 1, 1, 0;
    return h;
  }
  if (name == "random-real") return rng.real_symmetric(dim);
  if (name == "random-complex") return rng.hermitian(dim);
  throw ConfigError("unknown Hamiltonian preset: " + name);
}

inline Mat read_operator(const Json& j, int dim, double scale, Rng& rng) {
  Mat h = j.is_string() ? named_hamiltonian(j.get<std::string>(), dim, rng)
                        : matrix_from_json(j);
  return scale * h;
}

}  // namespace detail

/// Builds an open system from its definition document. Randomness ("random-real"
/// couplings or Hamiltonians) is drawn from a single seeded stream in document
/// order, so the file plus seed pins the system exactly.
inline OpenQuantumSystem open_system_from_json(const Json& doc, std::uint64_t seed) {
  Rng rng(doc.value("seed", seed));
  const Json& small = doc.at("small");
  int ds = small.at("dim").get<int>();
  Mat hs = detail::read_operator(small.at("H"), ds, small.value("H_scale", 1.0), rng);
  Mat ws;
  if (!small.contains("omega") || small["omega"] == "maximally-mixed")
    ws = Mat::Identity(ds, ds) / static_cast<double>(ds);
  else if (small["omega"].is_string() && small["omega"].get<std::string>().rfind("gibbs", 0) == 0) {
    double beta = small.value("omega_beta", 1.0);
    ws = herm_fn(hs, [&](double e) { return std::exp(-beta * e); });
    ws /= ws.trace();
  } else
    ws = matrix_from_json(small["omega"]);

  FiniteQuantumSystem s{HermitianOperator(hs), DensityMatrix(ws)};

  std::vector<Reservoir> reservoirs;
  for (const Json& rj : doc.at("reservoirs")) {
    int dr = rj.at("dim").get<int>();
    Mat hr = detail::read_operator(rj.at("H"), dr, rj.value("H_scale", 1.0), rng);
    reservoirs.emplace_back(HermitianOperator(hr), rj.at("beta").get<double>());
  }

  std::vector<HermitianOperator> couplings;
  const Json& cj = doc.at("couplings");
  if (cj.is_string()) {
    std::string kind = cj.get<std::string>();
    for (const auto& r : reservoirs) {
      int dd = ds * r.dim();
      if (kind == "random-real")
        couplings.emplace_back(rng.real_symmetric(dd));
      else if (kind == "random-complex")
        couplings.emplace_back(rng.hermitian(dd));
      else
        throw ConfigError("unknown coupling preset: " + kind);
    }
  } else {
    for (const Json& one : cj) couplings.emplace_back(matrix_from_json(one));
  }
  return OpenQuantumSystem(std::move(s), std::move(reservoirs), std::move(couplings),
                           doc.value("lambda", 1.0));
}

inline MarkovGibbsModel markov_from_json(const Json& doc) {
  const Json& pj = doc.at("p");
  const int n = static_cast<int>(pj.size());
  RMat p(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) p(i, j) = pj[i][j].get<double>();
  RVec mu0;
  if (doc.contains("mu0")) {
    mu0.resize(n);
    for (int i = 0; i < n; ++i) mu0(i) = doc["mu0"][i].get<double>();
  } else {
    mu0 = RVec::Constant(n, 1.0 / n);
  }
  return MarkovGibbsModel(p, mu0);
}

/// Named system presets used by the CLI and the test suites.
inline Json preset_document(const std::string& name) {
  if (name == "demo32" || name == "demo32-complex") {
    Json doc;
    doc["small"] = {{"dim", 2}, {"H", "pauli-z"}, {"H_scale", 0.5},
                    {"omega", "maximally-mixed"}};
    doc["reservoirs"] = Json::array({
        Json{{"dim", 4}, {"H", "random-real"}, {"beta", 1.0}},
        Json{{"dim", 4}, {"H", "random-real"}, {"beta", 2.0}},
    });
    doc["couplings"] = name == "demo32" ? "random-real" : "random-complex";
    doc["lambda"] = 0.5;
    doc["seed"] = 2;
    return doc;
  }
  if (name == "mini8" || name == "mini8-complex") {
    Json doc;
    doc["small"] = {{"dim", 2}, {"H", "pauli-z"}, {"H_scale", 0.5},
                    {"omega", "maximally-mixed"}};
    doc["reservoirs"] = Json::array({
        Json{{"dim", 2}, {"H", "random-real"}, {"beta", 1.0}},
        Json{{"dim", 2}, {"H", "random-real"}, {"beta", 2.0}},
    });
    doc["couplings"] = name == "mini8" ? "random-real" : "random-complex";
    doc["lambda"] = 0.5;
    doc["seed"] = 11;
    return doc;
  }
  throw ConfigError("unknown preset: " + name);
}

inline OpenQuantumSystem preset_system(const std::string& name) {
  return open_system_from_json(preset_document(name), 1);
}

inline MarkovGibbsModel preset_markov(const std::string& name) {
  if (name == "twostate") {
    RMat p(2, 2);
    p << 0.9, 0.1, 0.2, 0.8;
    Json doc;
    doc["p"] = {{0.9, 0.1}, {0.2, 0.8}};
    return markov_from_json(doc);
  }
  if (name == "fourstate-random") {
    Rng rng(404);
    RMat p(4, 4);
    for (int i = 0; i < 4; ++i) {
      double row = 0;
      for (int j = 0; j < 4; ++j) {
        p(i, j) = 0.1 + rng.uniform();
        row += p(i, j);
      }
      p.row(i) /= row;
    }
    RVec mu0 = RVec::Constant(4, 0.25);
    return MarkovGibbsModel(p, mu0);
  }
  throw ConfigError("unknown classical preset: " + name);
}

// ---------------------------------------------------------------------------
// Artifact emission
// ---------------------------------------------------------------------------

inline std::string format_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17e", v);
  return buf;
}

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, std::vector<std::string> columns)
      : out_(path) {
    if (!out_) throw Error("cannot open output file: " + path.string());
    for (size_t i = 0; i < columns.size(); ++i)
      out_ << (i ? "," : "") << columns[i];
    out_ << "\n";
  }

  void row(const std::vector<double>& values) {
    for (size_t i = 0; i < values.size(); ++i)
      out_ << (i ? "," : "") << format_full(values[i]);
    out_ << "\n";
  }

 private:
  std::ofstream out_;
};

struct ResidualRecord {
  std::string identity;
  std::string params;
  double residual;
  double tolerance;
  bool pass;
};

/// Aggregates every identity exercised during a run. The expected-check list
/// is declared up front; a missing check fails the report by itself.
class ResidualReport {
 public:
  void expect(const std::string& identity) { expected_.push_back(identity); }

  void record(const std::string& identity, const std::string& params, double residual,
              double tolerance) {
    records_.push_back({identity, params, residual, tolerance,
                        residual <= tolerance});
  }

  bool all_pass() const {
    for (const auto& r : records_)
      if (!r.pass) return false;
    for (const auto& e : expected_) {
      bool found = false;
      for (const auto& r : records_) found |= (r.identity == e);
      if (!found) return false;
    }
    return true;
  }

  Json to_json() const {
    Json checks = Json::array();
    for (const auto& r : records_)
      checks.push_back({{"identity", r.identity},
                        {"parameters", r.params},
                        {"residual", r.residual},
                        {"tolerance", r.tolerance},
                        {"pass", r.pass}});
    Json missing = Json::array();
    for (const auto& e : expected_) {
      bool found = false;
      for (const auto& r : records_) found |= (r.identity == e);
      if (!found) missing.push_back(e);
    }
    return {{"checks", checks}, {"missing", missing}, {"all_pass", all_pass()}};
  }

  const std::vector<ResidualRecord>& records() const { return records_; }

 private:
  std::vector<ResidualRecord> records_;
  std::vector<std::string> expected_;
};

inline void write_json(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open output file: " + path.string());
  out << j.dump(2) << "\n";
}

}  // namespace qef
