#pragma once

// Dense two-phase simplex for the small linear programs used throughout the
// library (transport plans, the l1 annihilator program, simplex l1
// projection, moment-matching lower bound constructions).
//
// Problems are stated as
//
//   minimize    c^T x
//   subject to  a_r^T x  (<= | >= | ==)  b_r     for every row r
//               x >= 0
//
// The tableau is kept in long double. Pivoting uses Bland's rule (smallest
// eligible column enters, ties on the ratio test broken by smallest basic
// column), which is deterministic and cannot cycle.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "mixlearn/errors.hpp"

namespace mixlearn::linalg {

enum class RowSense { kLessEqual, kGreaterEqual, kEqual };

struct LpRow {
  std::vector<double> coeffs;
  RowSense sense = RowSense::kLessEqual;
  double rhs = 0.0;
};

struct LinearProgram {
  std::vector<double> objective;  // one entry per variable
  std::vector<LpRow> rows;

  [[nodiscard]] std::size_t num_vars() const { return objective.size(); }

  void add_row(std::vector<double> coeffs, RowSense sense, double rhs) {
    rows.push_back(LpRow{std::move(coeffs), sense, rhs});
  }
};

enum class LpStatus { kOptimal, kInfeasible, kUnbounded, kIterationLimit };

inline const char* to_string(LpStatus s) {
  switch (s) {
    case LpStatus::kOptimal: return "optimal";
    case LpStatus::kInfeasible: return "infeasible";
    case LpStatus::kUnbounded: return "unbounded";
    case LpStatus::kIterationLimit: return "iteration-limit";
  }
  return "unknown";
}

struct LpSolution {
  LpStatus status = LpStatus::kInfeasible;
  double value = 0.0;
  std::vector<double> x;
  std::size_t pivots = 0;
};

struct LpOptions {
  long double pivot_tol = 1e-15L;     // smallest usable pivot magnitude
  long double cost_tol = 1e-15L;      // reduced costs above -cost_tol are optimal
  long double feasibility_tol = 1e-9L;  // phase-one residual accepted as feasible
  std::size_t max_pivots = 200000;
};

namespace detail {

class Tableau {
 public:
  using Real = long double;

  Tableau(std::size_t rows, std::size_t cols)
      : m_(rows), n_(cols), a_(rows * (cols + 1), 0.0L), basis_(rows, 0) {}

  Real& at(std::size_t r, std::size_t c) { return a_[r * (n_ + 1) + c]; }
  Real at(std::size_t r, std::size_t c) const { return a_[r * (n_ + 1) + c]; }
  Real& rhs(std::size_t r) { return at(r, n_); }
  Real rhs(std::size_t r) const { return at(r, n_); }

  std::size_t rows() const { return m_; }
  std::size_t cols() const { return n_; }
  std::vector<std::size_t>& basis() { return basis_; }
  const std::vector<std::size_t>& basis() const { return basis_; }

  void pivot(std::size_t pr, std::size_t pc) {
    const Real inv = 1.0L / at(pr, pc);
    for (std::size_t c = 0; c <= n_; ++c) at(pr, c) *= inv;
    at(pr, pc) = 1.0L;
    for (std::size_t r = 0; r < m_; ++r) {
      if (r == pr) continue;
      const Real f = at(r, pc);
      if (f == 0.0L) continue;
      for (std::size_t c = 0; c <= n_; ++c) at(r, c) -= f * at(pr, c);
      at(r, pc) = 0.0L;
    }
    basis_[pr] = pc;
  }

  void drop_row(std::size_t r) {
    a_.erase(a_.begin() + static_cast<std::ptrdiff_t>(r * (n_ + 1)),
             a_.begin() + static_cast<std::ptrdiff_t>((r + 1) * (n_ + 1)));
    basis_.erase(basis_.begin() + static_cast<std::ptrdiff_t>(r));
    --m_;
  }

 private:
  std::size_t m_;
  std::size_t n_;
  std::vector<Real> a_;
  std::vector<std::size_t> basis_;
};

// Runs simplex iterations minimizing `cost` over columns flagged in `allowed`.
// Returns kOptimal, kUnbounded or kIterationLimit.
inline LpStatus run_simplex(Tableau& t, const std::vector<long double>& cost,
                            const std::vector<bool>& allowed, const LpOptions& opt,
                            std::size_t& pivots) {
  const std::size_t m = t.rows();
  const std::size_t n = t.cols();
  std::vector<long double> reduced(n);
  while (true) {
    // reduced_j = c_j - sum_r c_{B(r)} a_{r,j}
    for (std::size_t j = 0; j < n; ++j) reduced[j] = cost[j];
    for (std::size_t r = 0; r < t.rows(); ++r) {
      const long double cb = cost[t.basis()[r]];
      if (cb == 0.0L) continue;
      for (std::size_t j = 0; j < n; ++j) reduced[j] -= cb * t.at(r, j);
    }
    std::size_t enter = n;
    for (std::size_t j = 0; j < n; ++j) {
      if (allowed[j] && reduced[j] < -opt.cost_tol) {
        enter = j;
        break;
      }
    }
    if (enter == n) return LpStatus::kOptimal;

    std::size_t leave = m;
    long double best_ratio = std::numeric_limits<long double>::infinity();
    for (std::size_t r = 0; r < t.rows(); ++r) {
      const long double a = t.at(r, enter);
      if (a <= opt.pivot_tol) continue;
      const long double ratio = std::max(t.rhs(r), 0.0L) / a;
      if (ratio < best_ratio ||
          (ratio == best_ratio && leave != m && t.basis()[r] < t.basis()[leave])) {
        best_ratio = ratio;
        leave = r;
      }
    }
    if (leave == m) return LpStatus::kUnbounded;
    t.pivot(leave, enter);
    if (++pivots > opt.max_pivots) return LpStatus::kIterationLimit;
  }
}

}  // namespace detail

/// Solves `lp` to optimality or reports why it could not.
inline LpSolution solve_lp(const LinearProgram& lp, const LpOptions& opt = {}) {
  const std::size_t nv = lp.num_vars();
  const std::size_t m = lp.rows.size();
  for (const auto& row : lp.rows) {
    if (row.coeffs.size() != nv) {
      throw InputError("solve_lp: row has " + std::to_string(row.coeffs.size()) +
                       " coefficients, expected " + std::to_string(nv));
    }
  }

  // Column layout: [structural | slack/surplus | artificial].
  std::size_t n_slack = 0;
  for (const auto& row : lp.rows) n_slack += row.sense != RowSense::kEqual ? 1 : 0;

  struct Prepared {
    long double sign;
    RowSense sense;
  };
  std::vector<Prepared> prep(m);
  std::size_t n_art = 0;
  for (std::size_t r = 0; r < m; ++r) {
    const auto& row = lp.rows[r];
    const long double sign = row.rhs < 0.0 ? -1.0L : 1.0L;
    RowSense s = row.sense;
    if (sign < 0.0L && s == RowSense::kLessEqual) s = RowSense::kGreaterEqual;
    else if (sign < 0.0L && s == RowSense::kGreaterEqual) s = RowSense::kLessEqual;
    prep[r] = {sign, s};
    if (s != RowSense::kLessEqual) ++n_art;
  }

  const std::size_t n_total = nv + n_slack + n_art;
  detail::Tableau t(m, n_total);
  std::size_t slack_col = nv;
  std::size_t art_col = nv + n_slack;
  for (std::size_t r = 0; r < m; ++r) {
    const auto& row = lp.rows[r];
    for (std::size_t j = 0; j < nv; ++j) t.at(r, j) = prep[r].sign * row.coeffs[j];
    t.rhs(r) = prep[r].sign * static_cast<long double>(row.rhs);
    if (row.sense != RowSense::kEqual) {
      // Slack enters with +1 for "<=" after sign normalization, -1 for ">=".
      t.at(r, slack_col) = prep[r].sense == RowSense::kLessEqual ? 1.0L : -1.0L;
      if (prep[r].sense == RowSense::kLessEqual) t.basis()[r] = slack_col;
      ++slack_col;
    }
    if (prep[r].sense != RowSense::kLessEqual) {
      t.at(r, art_col) = 1.0L;
      t.basis()[r] = art_col;
      ++art_col;
    }
  }

  LpSolution sol;
  std::vector<bool> allowed(n_total, true);

  if (n_art > 0) {
    std::vector<long double> phase1(n_total, 0.0L);
    for (std::size_t j = nv + n_slack; j < n_total; ++j) phase1[j] = 1.0L;
    const LpStatus st = detail::run_simplex(t, phase1, allowed, opt, sol.pivots);
    if (st == LpStatus::kIterationLimit) {
      sol.status = st;
      return sol;
    }
    long double infeas = 0.0L;
    for (std::size_t r = 0; r < t.rows(); ++r) {
      if (t.basis()[r] >= nv + n_slack) infeas += t.rhs(r);
    }
    long double scale = 1.0L;
    for (const auto& row : lp.rows) scale = std::max(scale, std::fabs(static_cast<long double>(row.rhs)));
    if (infeas > opt.feasibility_tol * scale) {
      sol.status = LpStatus::kInfeasible;
      return sol;
    }
    // Drive remaining artificials out of the basis; rows where that is
    // impossible are linearly dependent and get dropped.
    for (std::size_t r = 0; r < t.rows();) {
      if (t.basis()[r] < nv + n_slack) {
        ++r;
        continue;
      }
      std::size_t pc = nv + n_slack;
      long double best = opt.pivot_tol;
      for (std::size_t j = 0; j < nv + n_slack; ++j) {
        if (std::fabs(t.at(r, j)) > best) {
          best = std::fabs(t.at(r, j));
          pc = j;
        }
      }
      if (pc == nv + n_slack) {
        t.drop_row(r);
      } else {
        t.pivot(r, pc);
        ++r;
      }
    }
    for (std::size_t j = nv + n_slack; j < n_total; ++j) allowed[j] = false;
  }

  std::vector<long double> cost(n_total, 0.0L);
  for (std::size_t j = 0; j < nv; ++j) cost[j] = lp.objective[j];
  const LpStatus st = detail::run_simplex(t, cost, allowed, opt, sol.pivots);
  sol.status = st;
  if (st != LpStatus::kOptimal) return sol;

  sol.x.assign(nv, 0.0);
  for (std::size_t r = 0; r < t.rows(); ++r) {
    const std::size_t b = t.basis()[r];
    if (b < nv) sol.x[b] = static_cast<double>(std::max(t.rhs(r), 0.0L));
  }
  long double value = 0.0L;
  for (std::size_t j = 0; j < nv; ++j) value += static_cast<long double>(lp.objective[j]) * sol.x[j];
  sol.value = static_cast<double>(value);
  return sol;
}

}  // namespace mixlearn::linalg
