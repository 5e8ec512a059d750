#pragma once

// JSON documents for models and provenance, CSV for snapshot batches, and
// small file helpers. Doubles are written in shortest round-trip form, so a
// parse of the output reproduces every value bit for bit.

#include <Eigen/Dense>
#include <json.hpp>

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mixlearn/core_model.hpp"
#include "mixlearn/errors.hpp"
#include "mixlearn/isotropize.hpp"
#include "mixlearn/learner.hpp"
#include "mixlearn/sampling.hpp"
#include "mixlearn/spectral.hpp"

namespace mixlearn {

using Json = nlohmann::json;

namespace detail {

template <class T>
T json_field(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw InputError(std::string("json: missing field \"") + key + "\"");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("json: field \"") + key + "\" has the wrong type: " + e.what());
  }
}

inline Json vector_json(const Eigen::VectorXd& v) { return Json(std::vector<double>(v.data(), v.data() + v.size())); }

inline Json matrix_columns_json(const Eigen::MatrixXd& m) {
  Json cols = Json::array();
  for (Eigen::Index c = 0; c < m.cols(); ++c) cols.push_back(vector_json(m.col(c)));
  return cols;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Models

inline Json to_json(const MixtureSource& src) {
  Json j;
  j["n"] = src.n();
  j["k"] = src.k();
  j["weights"] = src.weights();
  j["constituents"] = detail::matrix_columns_json(src.constituents());
  return j;
}

inline MixtureSource mixture_from_json(const Json& j) {
  const auto n = detail::json_field<std::size_t>(j, "n");
  const auto k = detail::json_field<std::size_t>(j, "k");
  auto weights = detail::json_field<std::vector<double>>(j, "weights");
  const auto cols = detail::json_field<std::vector<std::vector<double>>>(j, "constituents");
  if (weights.size() != k || cols.size() != k) throw InputError("json: model has inconsistent k");
  for (const auto& c : cols)
    if (c.size() != n) throw InputError("json: constituent length differs from n");
  return MixtureSource(std::move(weights), cols);
}

inline Json to_json(const KSpikeDistribution& d) {
  return Json{{"weights", d.weights()}, {"locations", d.locations()}};
}

inline KSpikeDistribution kspike_from_json(const Json& j) {
  return KSpikeDistribution(detail::json_field<std::vector<double>>(j, "weights"),
                            detail::json_field<std::vector<double>>(j, "locations"));
}

// ---------------------------------------------------------------------------
// Provenance

inline Json to_json(const ItemMap& map) {
  return Json{{"sigma", map.sigma},   {"n", map.n},           {"nprime", map.nprime},
              {"splits", map.splits}, {"offsets", map.offsets}, {"eliminated", map.eliminated_items()}};
}

inline ItemMap item_map_from_json(const Json& j) {
  ItemMap map;
  map.sigma = detail::json_field<double>(j, "sigma");
  map.n = detail::json_field<std::size_t>(j, "n");
  map.nprime = detail::json_field<std::size_t>(j, "nprime");
  map.splits = detail::json_field<std::vector<std::uint32_t>>(j, "splits");
  map.offsets = detail::json_field<std::vector<std::uint32_t>>(j, "offsets");
  if (map.splits.size() != map.n || map.offsets.size() != map.n) throw InputError("json: item map arrays differ from n");
  std::size_t total = 0;
  for (std::size_t i = 0; i < map.n; ++i) {
    if (map.splits[i] > 0 && map.offsets[i] != total) throw InputError("json: item map offsets are not contiguous");
    total += map.splits[i];
  }
  if (total != map.nprime) throw InputError("json: item map nprime differs from the sum of splits");
  map.origin.assign(map.nprime, 0);
  for (std::size_t i = 0; i < map.n; ++i)
    for (std::uint32_t c = 0; c < map.splits[i]; ++c) map.origin[map.offsets[i] + c] = static_cast<std::uint32_t>(i);
  return map;
}

inline Json to_json(const SpectralSubspace& sub) {
  return Json{{"rtilde", detail::vector_json(sub.rtilde)},
              {"eigenvalues", detail::vector_json(sub.eigenvalues)},
              {"threshold", sub.threshold},
              {"kprime", sub.kprime},
              {"retained_vectors", detail::matrix_columns_json(sub.retained_vectors())},
              {"basis", detail::matrix_columns_json(sub.basis)}};
}

inline Json to_json(const LearnerConstants& c) {
  return Json{{"n", c.n},         {"k", c.k},
              {"w_min", c.w_min}, {"zeta", c.zeta},
              {"omega", c.omega}, {"delta", c.delta},
              {"T", c.T},         {"H", c.H},
              {"L", c.L},         {"match_tol", c.match_tol},
              {"delta_bound", c.delta_bound}, {"delta_warning", c.delta_warning}};
}

// ---------------------------------------------------------------------------
// Snapshot CSV: a header line "aperture=m" then one comma-separated row per
// snapshot.

inline std::string snapshots_to_csv(const SnapshotBatch& batch) {
  std::string out = "aperture=" + std::to_string(batch.aperture()) + "\n";
  for (std::size_t r = 0; r < batch.size(); ++r) {
    const auto row = batch.row(r);
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j > 0) out += ',';
      out += std::to_string(row[j]);
    }
    out += '\n';
  }
  return out;
}

inline SnapshotBatch snapshots_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("aperture=", 0) != 0) {
    throw InputError("snapshot csv: first line must be aperture=m");
  }
  std::size_t m = 0;
  const char* first = line.data() + 9;
  const char* last = line.data() + line.size();
  if (!line.empty() && line.back() == '\r') --last;
  const auto [ptr, ec] = std::from_chars(first, last, m);
  if (ec != std::errc() || ptr != last || m == 0) throw InputError("snapshot csv: bad aperture in \"" + line + "\"");
  SnapshotBatch batch(m);
  std::vector<std::uint32_t> row;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    row.clear();
    const char* p = line.data();
    const char* end = line.data() + line.size();
    while (p <= end) {
      std::uint32_t v = 0;
      const auto res = std::from_chars(p, end, v);
      if (res.ec != std::errc()) throw InputError("snapshot csv: bad item on line " + std::to_string(lineno));
      row.push_back(v);
      p = res.ptr;
      if (p == end) break;
      if (*p != ',') throw InputError("snapshot csv: expected ',' on line " + std::to_string(lineno));
      ++p;
    }
    if (row.size() != m) throw InputError("snapshot csv: line " + std::to_string(lineno) + " has the wrong length");
    batch.push_back(row);
  }
  return batch;
}

// ---------------------------------------------------------------------------
// Files

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path + " for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("failed while reading " + path);
  return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << text;
  if (!out) throw IoError("failed while writing " + path);
}

inline Json read_json_file(const std::string& path) {
  const std::string text = read_text_file(path);
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(path + ": " + e.what());
  }
}

inline void write_json_file(const std::string& path, const Json& j) { write_text_file(path, j.dump(2) + "\n"); }

}  // namespace mixlearn
