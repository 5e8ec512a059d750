#pragma once

// Seeded snapshot generation, projections onto real vectors and randomized
// binarization.
//
// Randomness is counter based: a stream is a (seed, stream id) pair and the
// j-th output is a mixing function of (key, j). Per-row child streams make
// every generated row a pure function of (seed, stream, row index), so
// multithreaded generation is bit-identical to serial generation.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <span>
#include <thread>
#include <vector>

#include "mixlearn/core_model.hpp"
#include "mixlearn/errors.hpp"

namespace mixlearn {

namespace detail {

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace detail

/// Counter-based random stream. Satisfies UniformRandomBitGenerator so it
/// can drive <random> distributions.
class RngStream {
 public:
  using result_type = std::uint64_t;

  explicit RngStream(std::uint64_t seed = 0, std::uint64_t stream = 0)
      : seed_(seed), stream_(stream),
        key_(detail::mix64(seed ^ detail::mix64(stream + detail::kGolden))) {}

  [[nodiscard]] std::uint64_t seed() const { return seed_; }
  [[nodiscard]] std::uint64_t stream() const { return stream_; }
  [[nodiscard]] std::uint64_t position() const { return counter_; }

  /// Independent stream derived from this stream's identity and `id`.
  /// Does not depend on how many values were already drawn.
  [[nodiscard]] RngStream child(std::uint64_t id) const {
    return RngStream(seed_, detail::mix64(key_ ^ detail::mix64(id * detail::kGolden + 1)));
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return detail::mix64(key_ + (++counter_) * detail::kGolden); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Uniform on (0, 1].
  double uniform_open_closed() { return static_cast<double>(((*this)() >> 11) + 1) * 0x1.0p-53; }

  /// Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound) {
    // Lemire's multiply-shift with rejection for exact uniformity.
    std::uint64_t x = (*this)();
    __uint128_t m = static_cast<__uint128_t>(x) * bound;
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
      const std::uint64_t threshold = (0 - bound) % bound;
      while (low < threshold) {
        x = (*this)();
        m = static_cast<__uint128_t>(x) * bound;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  /// Standard normal via Box-Muller (portable across standard libraries).
  double normal() {
    const double u1 = uniform_open_closed();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// Vose alias table for O(1) draws from a fixed discrete distribution.
class AliasTable {
 public:
  AliasTable() = default;

  explicit AliasTable(std::span<const double> p) {
    const std::size_t n = p.size();
    if (n == 0) throw InputError("AliasTable: empty distribution");
    double total = 0.0;
    for (double v : p) {
      if (!(v >= 0.0) || !std::isfinite(v)) throw InputError("AliasTable: invalid probability");
      total += v;
    }
    if (!(total > 0.0)) throw InputError("AliasTable: zero total mass");
    prob_.assign(n, 1.0);
    alias_.resize(n);
    for (std::size_t i = 0; i < n; ++i) alias_[i] = static_cast<std::uint32_t>(i);

    std::vector<double> scaled(n);
    std::vector<std::uint32_t> small;
    std::vector<std::uint32_t> large;
    for (std::size_t i = 0; i < n; ++i) {
      scaled[i] = p[i] * static_cast<double>(n) / total;
      (scaled[i] < 1.0 ? small : large).push_back(static_cast<std::uint32_t>(i));
    }
    while (!small.empty() && !large.empty()) {
      const std::uint32_t s = small.back();
      small.pop_back();
      const std::uint32_t l = large.back();
      prob_[s] = scaled[s];
      alias_[s] = l;
      scaled[l] = (scaled[l] + scaled[s]) - 1.0;
      if (scaled[l] < 1.0) {
        large.pop_back();
        small.push_back(l);
      }
    }
    // Leftovers carry probability 1 up to rounding. A leftover with zero
    // mass (possible only through rounding) must never be emitted.
    for (std::uint32_t i : small) prob_[i] = p[i] > 0.0 ? 1.0 : 0.0;
    for (std::uint32_t i : large) prob_[i] = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (prob_[i] == 0.0 && p[alias_[i]] == 0.0) {
        alias_[i] = static_cast<std::uint32_t>(
            std::max_element(p.begin(), p.end()) - p.begin());
      }
    }
  }

  [[nodiscard]] std::size_t size() const { return prob_.size(); }

  std::uint32_t sample(RngStream& rng) const {
    const auto column = static_cast<std::uint32_t>(rng.below(prob_.size()));
    return rng.uniform() < prob_[column] ? column : alias_[column];
  }

 private:
  std::vector<double> prob_;
  std::vector<std::uint32_t> alias_;
};

/// Multiset of m-snapshots over [n], stored row-major.
class SnapshotBatch {
 public:
  explicit SnapshotBatch(std::size_t aperture = 1) : m_(aperture) {
    if (aperture < 1) throw InputError("SnapshotBatch: aperture must be at least 1");
  }
  SnapshotBatch(std::size_t aperture, std::vector<std::uint32_t> items)
      : m_(aperture), items_(std::move(items)) {
    if (aperture < 1) throw InputError("SnapshotBatch: aperture must be at least 1");
    if (items_.size() % m_ != 0) throw InputError("SnapshotBatch: ragged rows");
  }

  [[nodiscard]] std::size_t aperture() const { return m_; }
  [[nodiscard]] std::size_t size() const { return items_.size() / m_; }
  [[nodiscard]] bool empty() const { return items_.empty(); }
  [[nodiscard]] std::span<const std::uint32_t> row(std::size_t i) const {
    return {items_.data() + i * m_, m_};
  }
  [[nodiscard]] const std::vector<std::uint32_t>& items() const { return items_; }

  void push_back(std::span<const std::uint32_t> row) {
    if (row.size() != m_) throw InputError("SnapshotBatch: row length differs from aperture");
    items_.insert(items_.end(), row.begin(), row.end());
  }

  /// Rows [begin, end) as a new batch.
  [[nodiscard]] SnapshotBatch slice(std::size_t begin, std::size_t end) const {
    end = std::min(end, size());
    begin = std::min(begin, end);
    return SnapshotBatch(m_, std::vector<std::uint32_t>(items_.begin() + static_cast<std::ptrdiff_t>(begin * m_),
                                                        items_.begin() + static_cast<std::ptrdiff_t>(end * m_)));
  }

  /// Throws unless every item lies in [0, n).
  void check_domain(std::size_t n) const {
    for (std::uint32_t v : items_) {
      if (v >= n) {
        throw InputError("SnapshotBatch: item " + std::to_string(v) + " outside [0," +
                         std::to_string(n) + ")");
      }
    }
  }

  friend bool operator==(const SnapshotBatch&, const SnapshotBatch&) = default;

 private:
  std::size_t m_;
  std::vector<std::uint32_t> items_;
};

/// Multiset of fixed-length bit tuples (binarized 1-D snapshots).
class BitBatch {
 public:
  explicit BitBatch(std::size_t aperture = 1) : m_(aperture) {}
  BitBatch(std::size_t aperture, std::vector<std::uint8_t> bits)
      : m_(aperture), bits_(std::move(bits)) {
    if (m_ == 0 || bits_.size() % m_ != 0) throw InputError("BitBatch: ragged rows");
  }

  [[nodiscard]] std::size_t aperture() const { return m_; }
  [[nodiscard]] std::size_t size() const { return m_ == 0 ? 0 : bits_.size() / m_; }
  [[nodiscard]] bool empty() const { return bits_.empty(); }
  [[nodiscard]] std::span<const std::uint8_t> row(std::size_t i) const {
    return {bits_.data() + i * m_, m_};
  }
  [[nodiscard]] const std::vector<std::uint8_t>& bits() const { return bits_; }

  void push_back(std::span<const std::uint8_t> row) {
    if (row.size() != m_) throw InputError("BitBatch: row length differs from aperture");
    bits_.insert(bits_.end(), row.begin(), row.end());
  }

  /// count[i] = number of rows with exactly i ones, i = 0..aperture.
  [[nodiscard]] std::vector<std::uint64_t> ones_histogram() const {
    std::vector<std::uint64_t> h(m_ + 1, 0);
    for (std::size_t r = 0; r < size(); ++r) {
      std::size_t ones = 0;
      for (std::uint8_t b : row(r)) ones += b;
      ++h[ones];
    }
    return h;
  }

 private:
  std::size_t m_;
  std::vector<std::uint8_t> bits_;
};

/// Runs fn(begin, end) over [0, count) split into contiguous chunks on at most
/// `threads` workers. Chunk boundaries never affect results when fn writes
/// only to its own rows.
template <class Fn>
void parallel_rows(std::size_t count, unsigned threads, Fn&& fn) {
  if (threads <= 1 || count < 4096) {
    fn(std::size_t{0}, count);
    return;
  }
  threads = std::min<unsigned>(threads, static_cast<unsigned>(count / 1024));
  std::vector<std::thread> pool;
  const std::size_t chunk = (count + threads - 1) / threads;
  for (unsigned w = 0; w < threads; ++w) {
    const std::size_t b = w * chunk;
    const std::size_t e = std::min(count, b + chunk);
    if (b >= e) break;
    pool.emplace_back([&fn, b, e] { fn(b, e); });
  }
  for (auto& t : pool) t.join();
}

/// N independent m-snapshots: each row draws t ~ w, then m items i.i.d. from p^t.
inline SnapshotBatch draw_snapshots(const MixtureSource& src, std::size_t m, std::size_t N,
                                    const RngStream& rng, unsigned threads = 1) {
  if (m < 1) throw InputError("draw_snapshots: aperture must be at least 1");
  const AliasTable pick(src.weights());
  std::vector<AliasTable> items;
  items.reserve(src.k());
  for (std::size_t t = 0; t < src.k(); ++t) {
    const auto col = src.constituents().col(static_cast<Eigen::Index>(t));
    items.emplace_back(std::span<const double>(col.data(), static_cast<std::size_t>(col.size())));
  }
  std::vector<std::uint32_t> out(N * m);
  parallel_rows(N, threads, [&](std::size_t b, std::size_t e) {
    for (std::size_t r = b; r < e; ++r) {
      RngStream row_rng = rng.child(r);
      const auto& table = items[pick.sample(row_rng)];
      for (std::size_t j = 0; j < m; ++j) out[r * m + j] = table.sample(row_rng);
    }
  });
  return SnapshotBatch(m, std::move(out));
}

/// Sample count for one batch: N itself, or Poisson(N) when `poissonize` is set.
inline std::size_t draw_count(std::size_t N, bool poissonize, RngStream& rng) {
  if (!poissonize || N == 0) return N;
  std::poisson_distribution<std::uint64_t> pois(static_cast<double>(N));
  return static_cast<std::size_t>(pois(rng));
}

/// Finite distribution on the real line, support sorted ascending.
struct DiscreteDistribution {
  std::vector<double> values;
  std::vector<double> masses;

  [[nodiscard]] double mean() const {
    double s = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) s += values[i] * masses[i];
    return s;
  }
  [[nodiscard]] double total_mass() const {
    double s = 0.0;
    for (double v : masses) s += v;
    return s;
  }
};

/// pi_x(p): mass sum_{i : x_i = beta} p_i at every distinct value beta of x.
inline DiscreteDistribution project_distribution(const Eigen::VectorXd& p, const Eigen::VectorXd& x) {
  if (p.size() != x.size()) throw InputError("project_distribution: length mismatch");
  std::map<double, double> acc;
  for (Eigen::Index i = 0; i < p.size(); ++i) acc[x(i)] += p(i);
  DiscreteDistribution d;
  for (const auto& [v, m] : acc) {
    d.values.push_back(v == 0.0 ? 0.0 : v);  // fold -0.0 into 0.0
    d.masses.push_back(m);
  }
  return d;
}

/// Replaces every item i of the row by x_i.
inline std::vector<double> project_snapshot(std::span<const std::uint32_t> row, const Eigen::VectorXd& x) {
  std::vector<double> out(row.size());
  for (std::size_t j = 0; j < row.size(); ++j) {
    if (row[j] >= static_cast<std::size_t>(x.size())) {
      throw InputError("project_snapshot: item outside the projection vector");
    }
    out[j] = x(row[j]);
  }
  return out;
}

/// Randomized rounding: bit_i = 1 iff value_i >= u_i with u_i uniform on (0, 1].
inline std::vector<std::uint8_t> binarize(std::span<const double> values, RngStream& rng) {
  std::vector<std::uint8_t> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double z = values[i];
    if (!(z >= 0.0 && z <= 1.0)) {
      throw InputError("binarize: value " + std::to_string(z) + " outside [0,1]");
    }
    out[i] = z >= rng.uniform_open_closed() ? 1 : 0;
  }
  return out;
}

/// Projects every row onto x (entries must lie in [0,1]) and binarizes it,
/// using child stream r of `rng` for row r.
inline BitBatch project_and_binarize(const SnapshotBatch& batch, const Eigen::VectorXd& x,
                                     const RngStream& rng, unsigned threads = 1) {
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (!(x(i) >= 0.0 && x(i) <= 1.0)) {
      throw InputError("project_and_binarize: projection vector leaves [0,1]");
    }
  }
  batch.check_domain(static_cast<std::size_t>(x.size()));
  const std::size_t m = batch.aperture();
  std::vector<std::uint8_t> bits(batch.size() * m);
  parallel_rows(batch.size(), threads, [&](std::size_t b, std::size_t e) {
    for (std::size_t r = b; r < e; ++r) {
      RngStream row_rng = rng.child(r);
      const auto row = batch.row(r);
      for (std::size_t j = 0; j < m; ++j) {
        bits[r * m + j] = x(row[j]) >= row_rng.uniform_open_closed() ? 1 : 0;
      }
    }
  });
  return BitBatch(m, std::move(bits));
}

/// N bit tuples of length m from a spike mixture: pick spike j with
/// probability weight_j, then m independent Bernoulli(location_j) bits.
inline BitBatch draw_spike_bits(const KSpikeDistribution& d, std::size_t m, std::size_t N,
                                const RngStream& rng, unsigned threads = 1) {
  const AliasTable pick(d.weights());
  std::vector<std::uint8_t> bits(N * m);
  parallel_rows(N, threads, [&](std::size_t b, std::size_t e) {
    for (std::size_t r = b; r < e; ++r) {
      RngStream row_rng = rng.child(r);
      const double a = d.locations()[pick.sample(row_rng)];
      for (std::size_t j = 0; j < m; ++j) bits[r * m + j] = a >= row_rng.uniform_open_closed() ? 1 : 0;
    }
  });
  return BitBatch(m, std::move(bits));
}

}  // namespace mixlearn
