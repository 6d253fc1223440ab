#pragma once

// Templated bottleneck DP shared by warp.cpp and shadowing.cpp.

#include "orbitshade/warp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

namespace orbitshade::detail {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct Cell {
  double b = kInf;  // bottleneck
  double s = kInf;  // running sum, tie-break
};

inline bool better(const Cell& a, const Cell& b) { return a.b < b.b || (a.b == b.b && a.s < b.s); }

struct Band {
  long n = 0, m = 0, w = 0;
  std::vector<long> lo, hi, off;
  long total = 0;

  Band(long n_, long m_, long w_) : n(n_), m(m_), w(w_), lo(n_), hi(n_), off(n_ + 1) {
    off[0] = 0;
    for (long i = 0; i < n; ++i) {
      lo[i] = std::max(0L, i - w);
      hi[i] = std::min(m - 1, i + w);
      off[i + 1] = off[i] + std::max(0L, hi[i] - lo[i] + 1);
    }
    total = off[n];
  }
  bool in(long i, long j) const { return i >= 0 && i < n && j >= lo[i] && j <= hi[i]; }
};

// back pointer codes for the unconstrained DP
enum : std::uint8_t { kFromDiag = 0, kFromRef = 1, kFromCand = 2, kStart = 3 };

template <class Cost>
WarpPath dp_unconstrained(long n, long m, const Cost& cost, const WarpOptions& opt,
                          const std::vector<double>* pen, bool keep_path) {
  const long w = opt.band < 0 ? std::max(n, m) : opt.band;
  Band band(n, m, w);
  std::vector<std::uint8_t> bp;
  if (keep_path) bp.assign(static_cast<std::size_t>(band.total), kStart);
  std::vector<Cell> prev, cur;
  long prev_lo = 0, prev_hi = -1;
  for (long i = 0; i < n; ++i) {
    const long lo = band.lo[i], hi = band.hi[i];
    cur.assign(static_cast<std::size_t>(std::max(0L, hi - lo + 1)), Cell{});
    double row_min = kInf;
    for (long j = lo; j <= hi; ++j) {
      const double c = cost(i, j);
      Cell best;
      std::uint8_t from = kStart;
      if (i == 0 && j == 0) {
        best = {c, c};
      } else {
        if (i > 0 && j > 0 && j - 1 >= prev_lo && j - 1 <= prev_hi) {
          const Cell& p = prev[static_cast<std::size_t>(j - 1 - prev_lo)];
          best = p;
          from = kFromDiag;
        }
        if (i > 0 && j >= prev_lo && j <= prev_hi) {
          const Cell& p = prev[static_cast<std::size_t>(j - prev_lo)];
          if (better(p, best)) {
            best = p;
            from = kFromRef;
          }
        }
        if (j > lo) {
          const Cell& p = cur[static_cast<std::size_t>(j - 1 - lo)];
          if (better(p, best)) {
            best = p;
            from = kFromCand;
          }
        }
        if (from != kStart) best = {std::max(best.b, c), best.s + c};
      }
      cur[static_cast<std::size_t>(j - lo)] = best;
      if (keep_path) bp[static_cast<std::size_t>(band.off[i] + j - lo)] = from;
      row_min = std::min(row_min, best.b);
    }
    if (row_min > opt.abandon_above) {
      WarpPath out;
      out.cost = kInf;
      out.abandoned = true;
      return out;
    }
    prev.swap(cur);
    prev_lo = lo;
    prev_hi = hi;
  }

  // choose the end cell
  long jend = -1;
  Cell endc;
  if (!opt.open_end) {
    if (!band.in(n - 1, m - 1)) throw PreconditionError("warp: end cell outside the band");
    jend = m - 1;
    endc = prev[static_cast<std::size_t>(m - 1 - prev_lo)];
  } else {
    for (long j = prev_lo; j <= prev_hi; ++j) {
      Cell c = prev[static_cast<std::size_t>(j - prev_lo)];
      if (pen) c.b = std::max(c.b, (*pen)[static_cast<std::size_t>(j)]);
      if (jend < 0 || better(c, endc) ||
          (c.b == endc.b && c.s == endc.s && std::abs(j - (n - 1)) < std::abs(jend - (n - 1)))) {
        endc = c;
        jend = j;
      }
    }
  }
  WarpPath out;
  out.cost = endc.b;
  if (!keep_path || !std::isfinite(endc.b)) return out;
  long i = n - 1, j = jend;
  out.path.push_back({i, j});
  while (!(i == 0 && j == 0)) {
    const std::uint8_t f = bp[static_cast<std::size_t>(band.off[i] + j - band.lo[i])];
    if (f == kFromDiag) {
      --i;
      --j;
    } else if (f == kFromRef) {
      --i;
    } else if (f == kFromCand) {
      --j;
    } else {
      throw Error("warp: broken back pointer");
    }
    out.path.push_back({i, j});
  }
  std::reverse(out.path.begin(), out.path.end());
  return out;
}

// Slope constraint: at least P diagonal steps before every off-diagonal step
// (counted from the start). State k = diagonal steps since the last
// off-diagonal step, capped at P.
template <class Cost>
WarpPath dp_slope(long n, long m, const Cost& cost, const WarpOptions& opt, const std::vector<double>* pen,
                  bool keep_path) {
  const long P = slope_run_length(opt.eps);
  const long w = opt.band < 0 ? std::max(n, m) / P + 2 : opt.band;
  const std::size_t S = static_cast<std::size_t>(P + 1);
  Band band(n, m, w);
  // bit0: state 0 reached by a candidate step (else a reference step)
  // bit1: state P reached from state P (else from P-1)
  std::vector<std::uint8_t> bp;
  if (keep_path) bp.assign(static_cast<std::size_t>(band.total), 0);
  std::vector<Cell> prev, cur;
  long prev_lo = 0, prev_hi = -1;
  auto at = [&](std::vector<Cell>& row, long lo, long j, long k) -> Cell& {
    return row[static_cast<std::size_t>(j - lo) * S + static_cast<std::size_t>(k)];
  };
  for (long i = 0; i < n; ++i) {
    const long lo = band.lo[i], hi = band.hi[i];
    cur.assign(static_cast<std::size_t>(std::max(0L, hi - lo + 1)) * S, Cell{});
    double row_min = kInf;
    for (long j = lo; j <= hi; ++j) {
      const double c = cost(i, j);
      std::uint8_t bits = 0;
      const bool has_diag = i > 0 && j > 0 && j - 1 >= prev_lo && j - 1 <= prev_hi;
      const bool has_ref = i > 0 && j >= prev_lo && j <= prev_hi;
      const bool has_cand = j > lo;
      auto lift = [&](const Cell& p) { return Cell{std::max(p.b, c), p.s + c}; };
      // state 0
      {
        Cell best;
        if (i == 0 && j == 0) {
          best = {c, c};
        } else {
          if (has_ref) best = at(prev, prev_lo, j, P);
          if (has_cand) {
            const Cell& p = at(cur, lo, j - 1, P);
            if (better(p, best)) {
              best = p;
              bits |= 1;
            }
          }
          if (std::isfinite(best.b)) best = lift(best);
        }
        at(cur, lo, j, 0) = best;
        row_min = std::min(row_min, best.b);
      }
      if (has_diag) {
        for (long k = 1; k < P; ++k) {
          const Cell& p = at(prev, prev_lo, j - 1, k - 1);
          if (std::isfinite(p.b)) {
            at(cur, lo, j, k) = lift(p);
            row_min = std::min(row_min, at(cur, lo, j, k).b);
          }
        }
        Cell best = at(prev, prev_lo, j - 1, P - 1);
        const Cell& pp = at(prev, prev_lo, j - 1, P);
        if (better(pp, best)) {
          best = pp;
          bits |= 2;
        }
        if (std::isfinite(best.b)) {
          at(cur, lo, j, P) = lift(best);
          row_min = std::min(row_min, at(cur, lo, j, P).b);
        }
      }
      if (keep_path) bp[static_cast<std::size_t>(band.off[i] + j - lo)] = bits;
    }
    if (row_min > opt.abandon_above) {
      WarpPath out;
      out.cost = kInf;
      out.abandoned = true;
      return out;
    }
    prev.swap(cur);
    prev_lo = lo;
    prev_hi = hi;
  }

  long jend = -1, kend = -1;
  Cell endc;
  auto consider = [&](long j) {
    for (long k = 0; k <= P; ++k) {
      Cell c = at(prev, prev_lo, j, k);
      if (!std::isfinite(c.b)) continue;
      if (pen) c.b = std::max(c.b, (*pen)[static_cast<std::size_t>(j)]);
      if (jend < 0 || better(c, endc) ||
          (c.b == endc.b && c.s == endc.s && std::abs(j - (n - 1)) < std::abs(jend - (n - 1)))) {
        endc = c;
        jend = j;
        kend = k;
      }
    }
  };
  if (!opt.open_end) {
    if (!band.in(n - 1, m - 1)) throw PreconditionError("warp: end cell outside the band");
    consider(m - 1);
  } else {
    for (long j = prev_lo; j <= prev_hi; ++j) consider(j);
  }
  WarpPath out;
  if (jend < 0) {
    out.cost = kInf;
    return out;
  }
  out.cost = endc.b;
  if (!keep_path) return out;
  long i = n - 1, j = jend, k = kend;
  out.path.push_back({i, j});
  while (!(i == 0 && j == 0)) {
    const std::uint8_t bits = bp[static_cast<std::size_t>(band.off[i] + j - band.lo[i])];
    if (k == 0) {
      if (bits & 1) {
        --j;
      } else {
        --i;
      }
      k = P;
    } else if (k < P) {
      --i;
      --j;
      --k;
    } else {
      --i;
      --j;
      k = (bits & 2) ? P : P - 1;
    }
    out.path.push_back({i, j});
  }
  std::reverse(out.path.begin(), out.path.end());
  return out;
}

template <class Cost>
WarpPath run_warp(long n, long m, const Cost& cost, const WarpOptions& opt, const std::vector<double>* pen,
                  bool keep_path) {
  if (n <= 0 || m <= 0) throw PreconditionError("warp: empty sequence");
  if (pen && static_cast<long>(pen->size()) != m) throw PreconditionError("warp: end penalty size mismatch");
  if (opt.constraint == WarpConstraint::Slope) return dp_slope(n, m, cost, opt, pen, keep_path);
  return dp_unconstrained(n, m, cost, opt, pen, keep_path);
}

}  // namespace orbitshade::detail
