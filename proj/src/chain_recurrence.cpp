#include "orbitshade/chain_recurrence.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>

namespace orbitshade {

std::vector<std::vector<int>> strongly_connected_components(const std::vector<std::vector<int>>& adj) {
  const int n = static_cast<int>(adj.size());
  std::vector<int> index(n, -1), low(n, 0), stack;
  std::vector<char> on_stack(n, 0);
  std::vector<std::vector<int>> comps;
  int counter = 0;
  struct Frame {
    int v;
    std::size_t next;
  };
  std::vector<Frame> call;
  for (int root = 0; root < n; ++root) {
    if (index[root] >= 0) continue;
    call.push_back({root, 0});
    index[root] = low[root] = counter++;
    stack.push_back(root);
    on_stack[root] = 1;
    while (!call.empty()) {
      Frame& f = call.back();
      const int v = f.v;
      if (f.next < adj[v].size()) {
        const int w = adj[v][f.next++];
        if (index[w] < 0) {
          index[w] = low[w] = counter++;
          stack.push_back(w);
          on_stack[w] = 1;
          call.push_back({w, 0});
        } else if (on_stack[w]) {
          low[v] = std::min(low[v], index[w]);
        }
        continue;
      }
      if (low[v] == index[v]) {
        std::vector<int> comp;
        int w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = 0;
          comp.push_back(w);
        } while (w != v);
        std::sort(comp.begin(), comp.end());
        comps.push_back(std::move(comp));
      }
      call.pop_back();
      if (!call.empty()) low[call.back().v] = std::min(low[call.back().v], low[v]);
    }
  }
  return comps;
}

Vec ChainRecurrenceResult::center(long id) const {
  Vec c(lo.size());
  for (Eigen::Index k = lo.size() - 1; k >= 0; --k) {
    const long i = id % shape[k];
    id /= shape[k];
    c[k] = lo[k] + (i + 0.5) * box_size;
  }
  return c;
}

long ChainRecurrenceResult::box_of(const Vec& x) const {
  long id = 0;
  for (Eigen::Index k = 0; k < lo.size(); ++k) {
    const double f = (x[k] - lo[k]) / box_size;
    if (!(f >= 0) || f >= static_cast<double>(shape[k])) return -1;
    id = id * shape[k] + static_cast<long>(std::floor(f));
  }
  return id;
}

int ChainRecurrenceResult::class_of_box(long id) const {
  auto it = std::lower_bound(box_ids.begin(), box_ids.end(), id);
  if (it == box_ids.end() || *it != id) return -1;
  return class_of[static_cast<std::size_t>(it - box_ids.begin())];
}

namespace {

constexpr Eigen::Index kMaxGridDim = 8;

// Visits the ids of all grid boxes whose slack-inflated closure meets the
// axis-aligned box spanned by p and q.
template <class F>
void boxes_near(const ChainRecurrenceResult& g, const Vec& p, const Vec& q, double slack, F&& visit) {
  const Eigen::Index d = g.lo.size();
  std::array<long, kMaxGridDim> a{}, b{};
  for (Eigen::Index k = 0; k < d; ++k) {
    a[k] = static_cast<long>(std::floor((std::min(p[k], q[k]) - slack - g.lo[k]) / g.box_size));
    b[k] = static_cast<long>(std::floor((std::max(p[k], q[k]) + slack - g.lo[k]) / g.box_size));
    a[k] = std::max(a[k], 0L);
    b[k] = std::min(b[k], g.shape[k] - 1);
    if (a[k] > b[k]) return;
  }
  std::array<long, kMaxGridDim> i = a;
  while (true) {
    long id = 0;
    for (Eigen::Index k = 0; k < d; ++k) id = id * g.shape[k] + i[k];
    visit(id);
    Eigen::Index k = d - 1;
    while (k >= 0 && i[k] == b[k]) {
      i[k] = a[k];
      --k;
    }
    if (k < 0) break;
    ++i[k];
  }
}

}  // namespace

ChainRecurrenceResult chain_recurrence_classes(const VectorFieldDef& field, const Region& region, double box_size,
                                               const ChainRecurrenceOptions& opt) {
  if (!(box_size > 0)) throw PreconditionError("box_size must be positive");
  if (opt.T < 1.0) throw PreconditionError("T must be at least 1");
  if (opt.samples_per_axis < 1) throw PreconditionError("samples_per_axis must be positive");
  const Eigen::Index d = region.lo.size();
  if (region.hi.size() != d || d != static_cast<Eigen::Index>(field.dimension()))
    throw DimensionError("region dimension does not match the field");
  if (d > kMaxGridDim) throw DimensionError("grid dimension above 8");
  if (!((region.hi - region.lo).minCoeff() > 0)) throw PreconditionError("region is empty");
  const double T_max = opt.T_max >= opt.T ? opt.T_max : opt.T + 1.0;
  const double delta_edge = opt.delta_edge >= 0 ? opt.delta_edge : box_size / 10;
  const bool sphere = field.constraint() == Constraint::UnitSphere;

  ChainRecurrenceResult g;
  g.lo = region.lo;
  g.box_size = box_size;
  long total = 1;
  for (Eigen::Index k = 0; k < d; ++k) {
    g.shape.push_back(std::max(1L, static_cast<long>(std::ceil((region.hi[k] - region.lo[k]) / box_size - 1e-9))));
    total *= g.shape.back();
  }
  if (total > 50'000'000) throw PreconditionError("grid too large");

  // samples per box
  const int m = opt.samples_per_axis;
  std::vector<Vec> offsets;
  {
    std::vector<int> i(d, 0);
    while (true) {
      Vec o(d);
      for (Eigen::Index k = 0; k < d; ++k) o[k] = ((i[k] + 0.5) / m - 0.5) * box_size;
      offsets.push_back(o);
      Eigen::Index k = d - 1;
      while (k >= 0 && i[k] == m - 1) {
        i[k] = 0;
        --k;
      }
      if (k < 0) break;
      ++i[k];
    }
  }
  std::map<long, std::vector<Vec>> samples;
  for (long id = 0; id < total; ++id) {
    const Vec c = g.center(id);
    std::vector<Vec> pts;
    if (sphere) {
      if (std::fabs(c.norm() - 1.0) > box_size * std::sqrt(static_cast<double>(d))) continue;
      for (const auto& o : offsets) {
        const Vec p = field.project(c + o);
        if (((p - c).cwiseAbs().maxCoeff()) <= box_size / 2) pts.push_back(p);
      }
      if (pts.empty()) {
        const Vec p = field.project(c);
        if (((p - c).cwiseAbs().maxCoeff()) <= box_size / 2) pts.push_back(p);
      }
      if (pts.empty()) continue;
    } else {
      for (const auto& o : offsets) pts.push_back(c + o);
    }
    samples.emplace(id, std::move(pts));
  }
  for (const auto& kv : samples) g.box_ids.push_back(kv.first);
  const std::size_t nb = g.box_ids.size();
  std::vector<int> dense(static_cast<std::size_t>(total), -1);
  for (std::size_t j = 0; j < nb; ++j) dense[static_cast<std::size_t>(g.box_ids[j])] = static_cast<int>(j);
  auto local = [&](long id) { return dense[static_cast<std::size_t>(id)]; };

  std::vector<std::vector<int>> adj(nb);
  std::vector<char> failed(nb, 0);
  // a singularity is a sample of every box whose closure holds it
  std::vector<std::vector<Vec>> singular_samples(nb);

  {
    const int density = std::clamp(static_cast<int>(g.shape[0]) / 4, 6, 24);
    for (const auto& s : find_singularities(field, region, density)) {
      boxes_near(g, s.location, s.location, 1e-12, [&](long id) {
        const int j = local(id);
        if (j >= 0) {
          singular_samples[j].push_back(s.location);
          g.singular_boxes.push_back(id);
        }
      });
    }
    std::sort(g.singular_boxes.begin(), g.singular_boxes.end());
    g.singular_boxes.erase(std::unique(g.singular_boxes.begin(), g.singular_boxes.end()), g.singular_boxes.end());
  }

  IntegratorOptions io;
  io.tol = opt.tol;
  const Vec span = region.hi - region.lo;
  for (std::size_t j = 0; j < nb; ++j) {
    const long id = g.box_ids[j];
    const double slack = opt.gauge ? (*opt.gauge)(g.center(id)) : delta_edge;
    const double spacing = box_size / 2;
    std::vector<int> out;
    // marks every box within slack of the chord p-q
    auto mark = [&](const Vec& p, const Vec& q) {
      boxes_near(g, p, q, slack, [&](long t) {
        const int k = local(t);
        if (k < 0) return;
        const std::size_t back = out.size() < 8 ? 0 : out.size() - 8;
        if (std::find(out.begin() + static_cast<long>(back), out.end(), k) == out.end()) out.push_back(k);
      });
    };
    for (const auto& sg : singular_samples[j]) mark(sg, sg);
    try {
      for (const auto& x : samples.at(id)) {
        const Vec start = flow(field, x, opt.T, opt.tol);
        mark(start, start);
        bool outside = false;
        integrate(field, start, T_max - opt.T, io, [&](const DenseSegment& seg) {
          const Vec a = seg.start(), b = seg.end();
          const int sub = std::max(1, static_cast<int>(std::ceil((b - a).norm() / spacing)));
          Vec prev = a;
          for (int q = 1; q <= sub; ++q) {
            Vec cur = seg.at_theta(static_cast<double>(q) / sub);
            mark(prev, cur);
            prev = std::move(cur);
          }
          const Vec lo = region.lo - 0.5 * span, hi = region.hi + 0.5 * span;
          outside = (b.array() < lo.array()).any() || (b.array() > hi.array()).any();
          return !outside;
        });
      }
    } catch (const IntegrationError&) {
      failed[j] = 1;
      g.failed_boxes.push_back(id);
      continue;
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    adj[j] = std::move(out);
  }
  for (std::size_t j = 0; j < nb; ++j) {
    if (failed[j]) {
      adj[j].clear();
      continue;
    }
    adj[j].erase(std::remove_if(adj[j].begin(), adj[j].end(), [&](int k) { return failed[k] != 0; }), adj[j].end());
  }

  g.class_of.assign(nb, -1);
  std::vector<std::vector<int>> nontrivial;
  for (auto& comp : strongly_connected_components(adj)) {
    const int v = comp.front();
    const bool loop = comp.size() > 1 || std::binary_search(adj[v].begin(), adj[v].end(), v);
    if (loop) nontrivial.push_back(std::move(comp));
  }
  std::sort(nontrivial.begin(), nontrivial.end(), [](const auto& a, const auto& b) { return a.front() < b.front(); });
  for (std::size_t c = 0; c < nontrivial.size(); ++c) {
    std::vector<long> ids;
    for (int v : nontrivial[c]) {
      g.class_of[v] = static_cast<int>(c);
      ids.push_back(g.box_ids[v]);
    }
    g.classes.push_back(std::move(ids));
  }
  return g;
}

}  // namespace orbitshade
