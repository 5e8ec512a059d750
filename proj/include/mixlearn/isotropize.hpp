#pragma once

// Reduction to isotropic sources: estimate r from 1-snapshots, drop rare
// items, split frequent items into equal-probability copies, map snapshots
// into the refined domain and aggregate learned constituents back.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mixlearn/core_model.hpp"
#include "mixlearn/errors.hpp"
#include "mixlearn/sampling.hpp"

namespace mixlearn {

/// Empirical item frequencies of a batch of 1-snapshots.
inline Eigen::VectorXd estimate_r(const SnapshotBatch& batch, std::size_t n) {
  if (batch.empty()) throw InputError("estimate_r: empty batch");
  if (batch.aperture() != 1) throw InputError("estimate_r: expected 1-snapshots");
  batch.check_domain(n);
  std::vector<std::uint64_t> counts(n, 0);
  for (std::uint32_t v : batch.items()) ++counts[v];
  Eigen::VectorXd r(static_cast<Eigen::Index>(n));
  const auto total = static_cast<double>(batch.size());
  for (std::size_t i = 0; i < n; ++i) r(static_cast<Eigen::Index>(i)) = static_cast<double>(counts[i]) / total;
  return r;
}

/// 1-snapshot count after which the frequency estimate is within a factor
/// (1 +- sigma) of r_i on every item with r_i >= sigma/2n, with probability
/// at least 1 - n^-mu.
inline std::size_t rest_sample_count(double mu, double sigma, std::size_t n) {
  const double nn = static_cast<double>(n);
  return static_cast<std::size_t>(std::ceil(8.0 * (mu + 2.0) / (sigma * sigma * sigma) * nn * std::log(nn)));
}

/// Split granularity sigma = eps zeta^2 / (32 k w_min).
inline double default_sigma(double eps, double zeta, std::size_t k, double w_min) {
  return eps * zeta * zeta / (32.0 * static_cast<double>(k) * w_min);
}

/// Refinement of [n] into [n']: eliminated items map to nothing, kept item i
/// maps to copies offset[i] .. offset[i] + splits[i] - 1.
struct ItemMap {
  double sigma = 0.0;
  std::size_t n = 0;
  std::size_t nprime = 0;
  std::vector<std::uint32_t> splits;   // n_i, zero when eliminated
  std::vector<std::uint32_t> offsets;  // first copy of item i
  std::vector<std::uint32_t> origin;   // copy -> original item

  [[nodiscard]] bool eliminated(std::size_t i) const { return splits[i] == 0; }
  [[nodiscard]] std::vector<std::uint32_t> eliminated_items() const {
    std::vector<std::uint32_t> s;
    for (std::size_t i = 0; i < n; ++i)
      if (splits[i] == 0) s.push_back(static_cast<std::uint32_t>(i));
    return s;
  }
};

/// Eliminates items with r_i < 2 sigma / n and splits the others into
/// floor(n r_i / sigma) copies.
inline ItemMap build_refinement(const Eigen::VectorXd& rtilde, double sigma) {
  if (!(sigma > 0.0 && sigma < 1.0)) throw InputError("build_refinement: sigma must lie in (0,1)");
  ItemMap map;
  map.sigma = sigma;
  map.n = static_cast<std::size_t>(rtilde.size());
  if (map.n == 0) throw InputError("build_refinement: empty domain");
  const double nn = static_cast<double>(map.n);
  map.splits.assign(map.n, 0);
  map.offsets.assign(map.n, 0);
  for (std::size_t i = 0; i < map.n; ++i) {
    const double ri = rtilde(static_cast<Eigen::Index>(i));
    map.offsets[i] = static_cast<std::uint32_t>(map.nprime);
    if (ri < 2.0 * sigma / nn) continue;
    const double copies = std::floor(nn * ri / sigma);
    if (copies > static_cast<double>(UINT32_MAX / 2)) {
      throw InputError("build_refinement: sigma too small, refined domain overflows");
    }
    map.splits[i] = static_cast<std::uint32_t>(copies);
    map.nprime += map.splits[i];
    for (std::uint32_t c = 0; c < map.splits[i]; ++c) map.origin.push_back(static_cast<std::uint32_t>(i));
  }
  if (map.nprime == 0) throw InputError("build_refinement: every item eliminated; sigma is too large");
  return map;
}

/// Maps a row over [n] into [n'], or nothing when it touches an eliminated item.
inline std::optional<std::vector<std::uint32_t>> map_snapshot(const ItemMap& map,
                                                              std::span<const std::uint32_t> row,
                                                              RngStream& rng) {
  std::vector<std::uint32_t> out(row.size());
  for (std::size_t j = 0; j < row.size(); ++j) {
    const std::uint32_t i = row[j];
    if (i >= map.n) throw InputError("map_snapshot: item outside the map domain");
    if (map.splits[i] == 0) return std::nullopt;
  }
  for (std::size_t j = 0; j < row.size(); ++j) {
    const std::uint32_t i = row[j];
    out[j] = map.offsets[i] + static_cast<std::uint32_t>(rng.below(map.splits[i]));
  }
  return out;
}

struct MappedBatch {
  SnapshotBatch batch;
  std::size_t offered = 0;
  std::size_t survived = 0;

  [[nodiscard]] double survival_rate() const {
    return offered == 0 ? 0.0 : static_cast<double>(survived) / static_cast<double>(offered);
  }
};

/// Maps every row with child stream r of `rng`; surviving rows keep their order.
inline MappedBatch map_batch(const ItemMap& map, const SnapshotBatch& batch, const RngStream& rng,
                             unsigned threads = 1) {
  const std::size_t m = batch.aperture();
  std::vector<std::uint32_t> mapped(batch.size() * m);
  std::vector<std::uint8_t> keep(batch.size(), 0);
  parallel_rows(batch.size(), threads, [&](std::size_t b, std::size_t e) {
    for (std::size_t r = b; r < e; ++r) {
      RngStream row_rng = rng.child(r);
      auto out = map_snapshot(map, batch.row(r), row_rng);
      if (!out) continue;
      keep[r] = 1;
      std::copy(out->begin(), out->end(), mapped.begin() + static_cast<std::ptrdiff_t>(r * m));
    }
  });
  MappedBatch res{SnapshotBatch(m), batch.size(), 0};
  std::vector<std::uint32_t> items;
  items.reserve(mapped.size());
  for (std::size_t r = 0; r < batch.size(); ++r) {
    if (!keep[r]) continue;
    ++res.survived;
    items.insert(items.end(), mapped.begin() + static_cast<std::ptrdiff_t>(r * m),
                 mapped.begin() + static_cast<std::ptrdiff_t>((r + 1) * m));
  }
  res.batch = SnapshotBatch(m, std::move(items));
  return res;
}

/// The refined source seen through the map: each constituent restricted to
/// kept items, renormalized, and spread evenly over copies. Weights unchanged.
inline MixtureSource refine_source(const MixtureSource& src, const ItemMap& map) {
  if (src.n() != map.n) throw InputError("refine_source: source and map domains differ");
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(map.nprime),
                                            static_cast<Eigen::Index>(src.k()));
  for (std::size_t t = 0; t < src.k(); ++t) {
    const auto col = src.constituents().col(static_cast<Eigen::Index>(t));
    double kept = 0.0;
    for (std::size_t i = 0; i < map.n; ++i)
      if (map.splits[i] > 0) kept += col(static_cast<Eigen::Index>(i));
    if (!(kept > 0.0)) {
      throw InputError("refine_source: constituent " + std::to_string(t) +
                       " has no mass on kept items");
    }
    for (std::size_t i = 0; i < map.n; ++i) {
      for (std::uint32_t c = 0; c < map.splits[i]; ++c) {
        p(map.offsets[i] + c, static_cast<Eigen::Index>(t)) =
            col(static_cast<Eigen::Index>(i)) / (kept * map.splits[i]);
      }
    }
    p.col(static_cast<Eigen::Index>(t)) /= p.col(static_cast<Eigen::Index>(t)).sum();
  }
  return MixtureSource(src.weights(), std::move(p));
}

/// Sums copy probabilities per original item, zeroes eliminated items and
/// renormalizes each constituent.
inline MixtureSource pull_back(const ItemMap& map, const MixtureSource& learned) {
  if (learned.n() != map.nprime) {
    throw InputError("pull_back: learned source lives on " + std::to_string(learned.n()) +
                     " items, map refines to " + std::to_string(map.nprime));
  }
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(map.n),
                                            static_cast<Eigen::Index>(learned.k()));
  for (std::size_t j = 0; j < map.nprime; ++j)
    p.row(map.origin[j]) += learned.constituents().row(static_cast<Eigen::Index>(j));
  for (Eigen::Index t = 0; t < p.cols(); ++t) {
    const double s = p.col(t).sum();
    if (!(s > 0.0)) throw NumericalError("pull_back: constituent with zero mass");
    p.col(t) /= s;
  }
  return MixtureSource(learned.weights(), std::move(p));
}

}  // namespace mixlearn
