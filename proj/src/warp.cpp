#include "orbitshade/warp.hpp"

#include "warp_impl.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

namespace orbitshade {

double Reparametrization::operator()(double t) const {
  if (knots.empty()) return t;
  if (t <= knots.front().first) return knots.front().second + (t - knots.front().first);
  if (t >= knots.back().first) return knots.back().second + (t - knots.back().first);
  auto it = std::upper_bound(knots.begin(), knots.end(), t,
                             [](double v, const std::pair<double, double>& k) { return v < k.first; });
  const auto& b = *it;
  const auto& a = *(it - 1);
  const double u = (t - a.first) / (b.first - a.first);
  return a.second + u * (b.second - a.second);
}

bool Reparametrization::valid() const {
  if (knots.empty() || knots.front().first != 0.0 || knots.front().second != 0.0) return false;
  for (std::size_t k = 1; k < knots.size(); ++k)
    if (!(knots[k].first > knots[k - 1].first && knots[k].second > knots[k - 1].second)) return false;
  return true;
}

bool Reparametrization::satisfies_slope(double eps) const {
  for (std::size_t k = 1; k < knots.size(); ++k) {
    const double slope = (knots[k].second - knots[k - 1].second) / (knots[k].first - knots[k - 1].first);
    if (std::abs(slope - 1.0) > eps * (1.0 + 1e-12)) return false;
  }
  return true;
}

double Reparametrization::max_deviation() const {
  double d = 0.0;
  for (const auto& k : knots) d = std::max(d, std::abs(k.second - k.first));
  return d;
}

long slope_run_length(double eps) {
  if (!(eps > 0.0) || eps >= 1.0) throw PreconditionError("slope constraint needs 0 < eps < 1");
  return std::max(1L, static_cast<long>(std::ceil(1.0 / eps - 1e-9)));
}

WarpPath warp_path(long n, long m, const std::function<double(long, long)>& cost, const WarpOptions& opt,
                   const std::vector<double>* end_penalty, bool keep_path) {
  return detail::run_warp(n, m, cost, opt, end_penalty, keep_path);
}

Reparametrization reparametrization_from_path(const std::vector<std::pair<long, long>>& path, double dt,
                                             double slope_eps) {
  Reparametrization h;
  if (path.empty()) return Reparametrization::identity();
  auto step = [&](std::size_t k) {
    const long di = path[k + 1].first - path[k].first;
    const long dj = path[k + 1].second - path[k].second;
    return static_cast<int>(di * 2 + dj);
  };
  std::vector<std::pair<long, long>> corners{path.front()};
  for (std::size_t k = 1; k + 1 < path.size(); ++k)
    if (step(k - 1) != step(k)) corners.push_back(path[k]);
  if (path.size() > 1) corners.push_back(path.back());
  std::pair<long, long> last = corners.front();
  h.knots.push_back({last.first * dt, last.second * dt});
  for (std::size_t k = 1; k < corners.size(); ++k) {
    if (corners[k].first > last.first && corners[k].second > last.second) {
      last = corners[k];
      h.knots.push_back({last.first * dt, last.second * dt});
    }
  }
  // a constrained path may stop a few steps after an off-diagonal step;
  // drop that last knot and let h continue with slope 1
  if (slope_eps > 0.0 && h.knots.size() > 1 && !h.satisfies_slope(slope_eps)) h.knots.pop_back();
  return h;
}

std::vector<long> row_matches(const std::vector<std::pair<long, long>>& path,
                              const std::function<double(long, long)>& cost) {
  std::vector<long> c;
  std::vector<double> best;
  for (auto [i, j] : path) {
    const auto row = static_cast<std::size_t>(i);
    if (row >= c.size()) {
      c.resize(row + 1, -1);
      best.resize(row + 1, detail::kInf);
    }
    const double v = cost(i, j);
    if (c[row] < 0 || v < best[row]) {
      c[row] = j;
      best[row] = v;
    }
  }
  if (!c.empty()) c[0] = 0;
  return c;
}

Reparametrization reparametrization_from_matches(const std::vector<long>& c, double dt) {
  constexpr std::int64_t M = std::int64_t{1} << 30;
  Reparametrization h;
  if (c.empty()) return Reparametrization::identity();
  std::vector<std::int64_t> H(c.size());
  std::int64_t r = 0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (i > 0 && c[i] < c[i - 1]) throw PreconditionError("matches must be nondecreasing");
    r = (i > 0 && c[i] == c[i - 1]) ? r + 1 : 0;
    if (r >= M) throw PreconditionError("too many repeated matches");
    H[i] = static_cast<std::int64_t>(c[i]) * M + r;
  }
  const double unit = dt / static_cast<double>(M);
  for (std::size_t i = 0; i < c.size(); ++i) {
    const bool interior = i > 0 && i + 1 < c.size();
    if (interior && H[i + 1] - H[i] == H[i] - H[i - 1]) continue;
    h.knots.push_back({static_cast<double>(i) * dt, static_cast<double>(H[i]) * unit});
  }
  return h;
}

WarpResult warp_distance(const std::vector<Vec>& reference, const std::vector<Vec>& candidate, double dt,
                         const WarpOptions& opt) {
  if (!(dt > 0.0)) throw PreconditionError("warp_distance: dt must be positive");
  auto cost = [&](long i, long j) {
    return (reference[static_cast<std::size_t>(i)] - candidate[static_cast<std::size_t>(j)]).norm();
  };
  WarpPath p = detail::run_warp(static_cast<long>(reference.size()), static_cast<long>(candidate.size()), cost, opt,
                                nullptr, true);
  WarpResult r;
  r.distance = p.cost;
  r.path = std::move(p.path);
  if (opt.constraint == WarpConstraint::Slope)
    r.warp = reparametrization_from_path(r.path, dt, opt.eps);
  else if (!r.path.empty())
    r.warp = reparametrization_from_matches(row_matches(r.path, cost), dt);
  return r;
}

namespace {

struct Enumerator {
  const std::vector<std::vector<double>>& c;
  long n, m, P;
  bool slope;
  double best = detail::kInf;

  void go(long i, long j, long k, double mx) {
    mx = std::max(mx, c[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
    if (i == n - 1 && j == m - 1) {
      best = std::min(best, mx);
      return;
    }
    if (i + 1 < n && j + 1 < m) go(i + 1, j + 1, slope ? std::min(P, k + 1) : 0, mx);
    if (!slope || k == P) {
      if (i + 1 < n) go(i + 1, j, 0, mx);
      if (j + 1 < m) go(i, j + 1, 0, mx);
    }
  }
};

}  // namespace

double brute_force_warp_distance(const std::vector<std::vector<double>>& cost, const WarpOptions& opt) {
  if (cost.empty() || cost.front().empty()) throw PreconditionError("brute force: empty cost matrix");
  const bool slope = opt.constraint == WarpConstraint::Slope;
  Enumerator e{cost, static_cast<long>(cost.size()), static_cast<long>(cost.front().size()),
               slope ? slope_run_length(opt.eps) : 0, slope};
  e.go(0, 0, 0, 0.0);
  return e.best;
}

}  // namespace orbitshade
