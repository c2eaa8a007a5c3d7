// Acceptance checks. One PASS/FAIL line per criterion; exit status 1 if any fails.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "scanflow/adaptivity.hpp"
#include "scanflow/problems.hpp"
#include "scanflow/quadrature_opt.hpp"
#include "scanflow/segmentation.hpp"
#include "scanflow_app/commands.hpp"

using namespace scanflow;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = SCANFLOW_CONFIGS;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

app::Context context(const std::string& config, const std::string& name) {
  app::Context ctx;
  ctx.config = app::RunConfig::load(kConfigs / config);
  ctx.out_dir = fs::temp_directory_path() / ("scanflow_acceptance_" + name);
  fs::create_directories(ctx.out_dir);
  return ctx;
}

// Criteria 1-3 share the circle benchmark.
app::QuadCircleSummary circle;
double circle_seconds = 0.0;

void run_circle() {
  const auto t0 = std::chrono::steady_clock::now();
  circle = app::cmd_bench_quad_circle(context("quad_circle.ini", "circle"));
  circle_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Outcome quadrature_factor() {
  run_circle();
  const double ratio = circle.optimized_error / circle.equal_error;
  return {ratio <= 0.1 && circle_seconds < 10.0,
          fmt("budget %zu: equal %.3e, optimized %.3e (%zu points), ratio %.3g <= 0.1; %.2f s", circle.budget,
              circle.equal_error, circle.optimized_error, circle.optimized_points, ratio, circle_seconds)};
}

Outcome quadrature_points() {
  const double share = double(circle.optimized_points_at_target) / double(circle.equal_points_at_target);
  return {circle.equal_points_at_target > 0 && circle.optimized_points_at_target > 0 && share <= 0.4 &&
              circle_seconds < 10.0,
          fmt("error <= %g: optimized %zu vs equal %zu points, share %.2f <= 0.40", circle.target,
              circle.optimized_points_at_target, circle.equal_points_at_target, share)};
}

Outcome strategy_equivalence() {
  return {circle.strategy_ratio > 0.0 && circle.strategy_ratio <= 2.0,
          fmt("worst octree/sub-cell ratio at matched points %.3f <= 2", circle.strategy_ratio)};
}

Partition random_cut(std::mt19937& rng, Box2& box) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (;;) {
    const Point2 lo{-2 + 4 * u(rng), -2 + 4 * u(rng)};
    box = {lo, {lo[0] + 0.1 + 2.9 * u(rng), lo[1] + 0.1 + 2.9 * u(rng)}};
    const Point2 c{box.lo[0] + box.extent(0) * (1.4 * u(rng) - 0.2), box.lo[1] + box.extent(1) * (1.4 * u(rng) - 0.2)};
    const double r = (0.2 + u(rng)) * std::max(box.extent(0), box.extent(1));
    const double a = 2 * std::numbers::pi * u(rng);
    LevelSetFunction f;
    if (rng() % 2)
      f = [=](const Point2& x) { return r - norm(x - c); };
    else
      f = [=](const Point2& x) { return std::cos(a) * (x[0] - c[0]) + std::sin(a) * (x[1] - c[1]); };
    const int depth = 1 + static_cast<int>(rng() % 4);
    Partition p = trim_element(sample_lattice(f, depth, box), depth, box);
    if (!p.empty() && !p.full()) return p;
  }
}

Outcome closed_form_oracle() {
  std::mt19937 rng(2024);
  std::normal_distribution<double> g;
  double worst_rel = 0.0, worst_excess = -1e300, smallest = INFINITY;
  for (int t = 0; t < 50; ++t) {
    Box2 box;
    const Partition p = random_cut(rng, box);
    const int k = 1 + t % 3;
    const MomentBasis b(box, k);
    // below k+1 points per axis so the defect is not at roundoff level
    const QuadRule rule = equal_order_rule(p, 1 + static_cast<int>(rng() % k));
    const Eigen::VectorXd xi = exact_moments(b, p);
    Eigen::VectorXd xb = Eigen::VectorXd::Zero(b.size());
    for (const auto& m : subcell_moments(b, rule)) xb += m;
    const Supremizer s = supremizer(b, xi, xb);
    const Eigen::VectorXd d = xi - xb;
    const double closed = std::sqrt(d.dot(b.gramian().ldlt().solve(d)));
    smallest = std::min(smallest, closed);
    if (!(closed > 0.0)) {
      worst_rel = INFINITY;
      continue;
    }
    worst_rel = std::max(worst_rel, std::abs(s.error - closed) / closed);
    worst_rel = std::max(worst_rel, std::abs(polynomial_error(s.coeffs, xi, xb) - closed) / closed);
    for (int trial = 0; trial < 2000; ++trial) {
      Eigen::VectorXd c(b.size());
      for (auto& v : c) v = g(rng);
      c /= std::sqrt(c.dot(b.gramian() * c));
      worst_excess = std::max(worst_excess, polynomial_error(c, xi, xb) - closed);
    }
  }
  return {worst_rel <= 1e-10 && worst_excess <= 1e-10,
          fmt("50 cuts, k=1..3, smallest error %.2e: worst relative mismatch %.2e <= 1e-10; random search excess "
              "%.2e <= 1e-10",
              smallest, worst_rel, worst_excess)};
}

GrayscaleGrid random_image(std::mt19937& rng, int nx, int ny) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(static_cast<std::size_t>(nx) * ny);
  for (auto& x : v) x = u(rng);
  return GrayscaleGrid::from_values({nx, ny}, v, {1.0 / nx, 1.0 / ny});
}

std::shared_ptr<const SplineSpace2> space_on(const GrayscaleGrid& g, int nx, int ny, int k) {
  return std::make_shared<const SplineSpace2>(HierarchicalMesh2(RectMesh2::uniform(g.box(), {nx, ny})), k);
}

Outcome conservation() {
  std::mt19937 rng(11);
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    const GrayscaleGrid g = random_image(rng, 12 + t % 7, 10 + t % 5);
    auto s = space_on(g, 3 + t % 4, 2 + t % 3, 1 + t % 3);
    const LevelSetField f = smooth(g, s, 0.5);
    worst = std::max(worst, std::abs(f.mean() - g.mean()));
    // two rounds of hierarchical refinement
    for (int round = 0; round < 2; ++round) {
      std::vector<std::size_t> marked;
      for (std::size_t e = round; e < s->mesh().num_elements(); e += 2 + round) marked.push_back(e);
      s = std::make_shared<const SplineSpace2>(s->refine(marked));
      worst = std::max(worst, std::abs(smooth(g, s, 0.5).mean() - g.mean()));
    }
  }
  double violation = 0.0;
  for (int k = 1; k <= 3; ++k)
    for (int t = 0; t < 3; ++t) {
      const GrayscaleGrid g = random_image(rng, 12, 12);
      violation = std::max(violation, check_bounds(smooth(g, space_on(g, 6, 6, k)), g, 7).worst_violation);
      std::vector<double> v(256);
      for (int j = 0; j < 16; ++j)
        for (int i = 0; i < 16; ++i) v[j * 16 + i] = std::hypot(i - 7.3 + t, j - 8.1) < 5.0 ? 1.0 : 0.0;
      const auto disk = GrayscaleGrid::from_values({16, 16}, v);
      violation = std::max(violation, check_bounds(smooth(disk, space_on(disk, 8, 8, k)), disk, 7).worst_violation);
    }
  return {worst <= 1e-12 && violation <= 1e-10,
          fmt("mean mismatch %.2e <= 1e-12 over 20 images and refined spaces; worst bound violation %.2e <= 1e-10",
              worst, violation)};
}

Outcome attenuation() {
  const double a12 = predict_attenuation({1.0, 2}), a13 = predict_attenuation({1.0, 3});
  bool half = true;
  double worst_half = 0.0;
  for (int k : {2, 3, 4}) {
    const double a = predict_attenuation({0.5, k});
    half = half && a < 0.5;
    worst_half = std::max(worst_half, a);
  }
  return {a12 > 0.5 && a13 < 0.5 && half,
          fmt("l=1,k=2: %.3f > 0.5; l=1,k=3: %.3f < 0.5; l=1/2, k=2..4: max %.3f < 0.5", a12, a13, worst_half)};
}

Outcome tessellation() {
  std::mt19937 rng(42);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst_area = 0.0, worst_point = 0.0;
  for (int t = 0; t < 10000; ++t) {
    const std::array<double, 4> v{u(rng), u(rng), u(rng), u(rng)};
    const Tessellation a = mosaic_element(v), b = mosaic_element({-v[0], -v[1], -v[2], -v[3]});
    worst_area = std::max(worst_area, std::abs(a.area() + b.area() - 1.0));
    if (a.boundary.size() != b.boundary.size()) worst_point = INFINITY;
    for (const auto& s : a.boundary) {
      double best = INFINITY;
      for (const auto& r : b.boundary)
        best = std::min(best, std::max(std::min(norm(s.a - r.a), norm(s.a - r.b)), std::min(norm(s.b - r.a), norm(s.b - r.b))));
      worst_point = std::max(worst_point, best);
    }
  }
  const Box2 unit{{0, 0}, {1, 1}};
  const auto disk = [](const Point2& x) { return 0.16 - (x[0] - 0.5) * (x[0] - 0.5) - (x[1] - 0.5) * (x[1] - 0.5); };
  const double exact = std::numbers::pi * 0.16;
  const double e2 = std::abs(trim_element(sample_lattice(disk, 2, unit), 2, unit).volume() - exact);
  const double e6 = std::abs(trim_element(sample_lattice(disk, 6, unit), 6, unit).volume() - exact);
  const double order = std::log2(e2 / e6) / 4.0;
  double linear = 0.0;
  for (int t = 0; t < 50; ++t) {
    const double a = u(rng), b = u(rng), c = 0.5 * u(rng);
    auto f = [=](const Point2& x) { return a * (x[0] - 0.5) + b * (x[1] - 0.5) + c; };
    const double area = trim_element(sample_lattice(f, 3, unit), 3, unit).volume();
    std::vector<Point2> sq{{0, 0}, {1, 0}, {1, 1}, {0, 1}}, poly;
    for (std::size_t i = 0; i < 4; ++i) {
      const Point2 p0 = sq[i], p1 = sq[(i + 1) % 4];
      const double f0 = f(p0), f1 = f(p1);
      if (f0 > 0) poly.push_back(p0);
      if ((f0 > 0) != (f1 > 0)) poly.push_back(p0 + (f0 / (f0 - f1)) * (p1 - p0));
    }
    double ref = 0.0;
    for (std::size_t i = 0; i < poly.size(); ++i) ref += 0.5 * cross(poly[i], poly[(i + 1) % poly.size()]);
    linear = std::max(linear, std::abs(area - ref));
  }
  return {worst_point <= 1e-14 && worst_area <= 1e-12 && order >= 1.8 && linear <= 1e-12,
          fmt("1e4 quadruples: interface gap %.1e, volume defect %.1e; disk area order %.2f >= 1.8; linear area "
              "error %.1e",
              worst_point, worst_area, order, linear)};
}

Outcome stokes_convergence() {
  const auto t0 = std::chrono::steady_clock::now();
  bool ok = true;
  std::string detail;
  for (int k : {1, 2}) {
    const auto rows = app::cmd_solve(context("disk_k" + std::to_string(k) + ".ini", "disk" + std::to_string(k)));
    const auto& last = rows.back();
    ok = ok && rows.size() == 4 && last.rate_u_l2 >= k + 0.8 && last.rate_energy >= k - 0.2;
    detail += fmt("k=%d: L2 order %.2f >= %.1f, energy order %.2f >= %.1f; ", k, last.rate_u_l2, k + 0.8,
                  last.rate_energy, k - 0.2);
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {ok && secs < 300.0, detail + fmt("%.1f s", secs)};
}

Outcome stabilization() {
  const int n = 16, k = 1;
  auto sp = std::make_shared<const SplineSpace2>(HierarchicalMesh2(RectMesh2::uniform({{0, 0}, {1, 1}}, {n, n})), k);
  std::mt19937 rng(1);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  // Disk offset producing the thinnest cut fragment.
  double thinnest = 1.0;
  DiskGeometry sliver;
  for (int t = 0; t < 200; ++t) {
    DiskGeometry g;
    g.center = {0.5 + u(rng) / n, 0.5 + u(rng) / n};
    const ImmersedMesh m = build_immersed_mesh(disk_level_set(g), sp->mesh(), 2);
    for (std::size_t e : m.crossed) {
      const double frac = m.partitions[e].volume() / sp->mesh().element_box(e).volume();
      if (frac < thinnest) {
        thinnest = frac;
        sliver = g;
      }
    }
  }
  const ImmersedMesh m = build_immersed_mesh(disk_level_set(sliver), sp->mesh(), 2);
  const StokesQuadrature q = build_quadrature(m, k);
  const StokesProblem pr = manufactured_disk_problem(sliver);
  double peak[2];
  for (int on = 0; on < 2; ++on) {
    StabilizationParams p;
    p.gamma_s = on ? 5e-2 : 0.0;
    const DiscreteSolution s = solve_stokes(pr, sp, m, q, p);
    peak[on] = s.coeffs.tail(s.coeffs.size() - static_cast<Eigen::Index>(s.disc.velocity_size())).cwiseAbs().maxCoeff();
  }
  double variation[2];
  for (int on = 0; on < 2; ++on) {
    double lo = INFINITY, hi = 0.0;
    for (int t = 0; t < 20; ++t) {
      DiskGeometry g;
      g.center = {0.5 + u(rng) / n, 0.5 + u(rng) / n};
      const ImmersedMesh mm = build_immersed_mesh(disk_level_set(g), sp->mesh(), 2);
      const StokesProblem pp = manufactured_disk_problem(g);
      StabilizationParams p;
      p.gamma_g = on ? 5e-2 : 0.0;
      const Discretization d = make_discretization(sp, mm, pp);
      const double r = diagonal_ratio(assemble(pp, d, build_quadrature(mm, k), p), d);
      lo = std::min(lo, r);
      hi = std::max(hi, r);
    }
    variation[on] = hi / lo;
  }
  const double suppression = peak[0] / peak[1];
  return {suppression >= 10.0 && variation[1] < 1e2 && variation[0] >= 1e3,
          fmt("sliver fraction %.1e: max |p| %.3g off vs %.3g on, suppression %.3g >= 10; diagonal ratio variation "
              "%.3g with ghost (< 1e2), %.3g without (>= 1e3)",
              thinnest, peak[0], peak[1], suppression, variation[1], variation[0])};
}

Outcome adaptivity() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto runs = app::cmd_bench_corner(context("corner.ini", "corner"));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  auto find = [&](int k, bool adaptive) -> const app::CornerRun& {
    for (const auto& r : runs)
      if (r.k == k && r.adaptive == adaptive) return r;
    throw std::runtime_error("corner run missing");
  };
  const auto &a1 = find(1, true), &u1 = find(1, false), &a2 = find(2, true), &u2 = find(2, false);
  const double optimal = -0.5;
  const bool rate = std::abs(a1.rate_energy - optimal) <= 0.15 * std::abs(optimal);
  const bool better = a1.rate_energy < u1.rate_energy;
  const bool k2 = a2.rate_energy <= u2.rate_energy;
  const bool local = a1.localization >= 0.0 && a1.localization <= 0.1;
  return {rate && better && k2 && local && secs < 600.0,
          fmt("k=1 adaptive rate %.3f (steps %d-%d, optimal -0.5 +-15%%), uniform %.3f; k=2 adaptive %.3f vs uniform "
              "%.3f; finest elements within %.3f of the corner after 5 steps (<= 0.1); %.0f s (< 600)",
              a1.rate_energy, a1.fit_first, a1.fit_last, u1.rate_energy, a2.rate_energy, u2.rate_energy,
              a1.localization, secs)};
}

Outcome dorfler() {
  std::mt19937 rng(77);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int mismatches = 0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 1 + rng() % 12;
    std::vector<double> eta(n);
    for (auto& e : eta) e = rng() % 5 == 0 ? 0.0 : u(rng);
    if (std::all_of(eta.begin(), eta.end(), [](double e) { return e == 0.0; })) eta[0] = 1.0;
    const double theta = 0.05 + 0.95 * u(rng);
    double total = 0.0;
    for (double e : eta) total += e * e;
    // smallest qualifying cardinality, and the largest sum at that cardinality
    std::size_t best = n + 1;
    double best_sum = 0.0;
    for (unsigned mask = 1; mask < (1u << n); ++mask) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        if (mask >> i & 1) s += eta[i] * eta[i];
      if (s < theta * total) continue;
      const std::size_t c = static_cast<std::size_t>(std::popcount(mask));
      if (c < best || (c == best && s > best_sum)) {
        best = c;
        best_sum = s;
      }
    }
    const auto m = dorfler_mark(eta, theta);
    double s = 0.0;
    for (std::size_t i : m) s += eta[i] * eta[i];
    if (m.size() != best || std::abs(s - best_sum) > 1e-12 * total) ++mismatches;
  }
  return {mismatches == 0, fmt("100 trials, lengths 1..12: %d mismatches against enumeration", mismatches)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"quadrature factor", quadrature_factor},
      {"quadrature points", quadrature_points},
      {"marking-strategy equivalence", strategy_equivalence},
      {"closed-form error oracle", closed_form_oracle},
      {"segmentation conservation", conservation},
      {"attenuation thresholds", attenuation},
      {"tessellation", tessellation},
      {"Stokes convergence", stokes_convergence},
      {"stabilization properties", stabilization},
      {"adaptivity on the re-entrant corner", adaptivity},
      {"Dorfler marking", dorfler},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failed ? 1 : 0;
}
