#include "scanflow/spline_basis.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <map>
#include <tuple>

namespace scanflow {

namespace {

template <int D>
Index<D> unflatten(int l, int n) {
  Index<D> t{};
  for (int a = 0; a < D; ++a) {
    t[a] = l % n;
    l /= n;
  }
  return t;
}

template <int D>
bool lex_less(const Index<D>& x, const Index<D>& y) {
  for (int a = D - 1; a >= 0; --a)
    if (x[a] != y[a]) return x[a] < y[a];
  return false;
}

int ipow(int b, int e) {
  int r = 1;
  while (e-- > 0) r *= b;
  return r;
}

}  // namespace

void bspline_ders(const std::vector<double>& U, int span, int p, double u, int n, double* out) {
  thread_local std::vector<double> ndu, left, right, a;
  ndu.assign((p + 1) * (p + 1), 0.0);
  left.assign(p + 1, 0.0);
  right.assign(p + 1, 0.0);
  a.assign(2 * (p + 1), 0.0);
  auto N = [&](int i, int j) -> double& { return ndu[i * (p + 1) + j]; };
  N(0, 0) = 1.0;
  for (int j = 1; j <= p; ++j) {
    left[j] = u - U[span + 1 - j];
    right[j] = U[span + j] - u;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      N(j, r) = right[r + 1] + left[j - r];
      const double temp = N(r, j - 1) / N(j, r);
      N(r, j) = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    N(j, j) = saved;
  }
  for (int i = 0; i < (n + 1) * (p + 1); ++i) out[i] = 0.0;
  for (int j = 0; j <= p; ++j) out[j] = N(j, p);
  const int nn = std::min(n, p);
  auto A = [&](int s, int j) -> double& { return a[s * (p + 1) + j]; };
  for (int r = 0; r <= p; ++r) {
    int s1 = 0, s2 = 1;
    A(0, 0) = 1.0;
    for (int k = 1; k <= nn; ++k) {
      double d = 0.0;
      const int rk = r - k, pk = p - k;
      if (r >= k) {
        A(s2, 0) = A(s1, 0) / N(pk + 1, rk);
        d = A(s2, 0) * N(rk, pk);
      }
      const int j1 = rk >= -1 ? 1 : -rk;
      const int j2 = (r - 1 <= pk) ? k - 1 : p - r;
      for (int j = j1; j <= j2; ++j) {
        A(s2, j) = (A(s1, j) - A(s1, j - 1)) / N(pk + 1, rk + j);
        d += A(s2, j) * N(rk + j, pk);
      }
      if (r <= pk) {
        A(s2, k) = -A(s1, k - 1) / N(pk + 1, r);
        d += A(s2, k) * N(r, pk);
      }
      out[k * (p + 1) + r] = d;
      std::swap(s1, s2);
    }
  }
  double f = p;
  for (int k = 1; k <= nn; ++k) {
    for (int j = 0; j <= p; ++j) out[k * (p + 1) + j] *= f;
    f *= (p - k);
  }
}

// ---------------------------------------------------------------- RectMesh

template <int D>
RectMesh<D>::RectMesh(std::array<std::vector<double>, D> breaks) : breaks_(std::move(breaks)) {
  for (int a = 0; a < D; ++a) {
    if (breaks_[a].size() < 2) throw DomainError("RectMesh: need at least one cell per axis");
    for (std::size_t i = 1; i < breaks_[a].size(); ++i)
      if (!(breaks_[a][i] > breaks_[a][i - 1]))
        throw DomainError("RectMesh: breakpoints must be strictly increasing");
  }
}

template <int D>
RectMesh<D> RectMesh<D>::uniform(const Box<D>& box, const Index<D>& cells) {
  std::array<std::vector<double>, D> b;
  for (int a = 0; a < D; ++a) {
    if (cells[a] < 1) throw DomainError("RectMesh: need at least one cell per axis");
    b[a].resize(cells[a] + 1);
    for (int i = 0; i <= cells[a]; ++i)
      b[a][i] = box.lo[a] + (box.hi[a] - box.lo[a]) * i / cells[a];
    b[a].back() = box.hi[a];
  }
  return RectMesh(std::move(b));
}

template <int D>
std::size_t RectMesh<D>::num_elements() const {
  std::size_t n = 1;
  for (int a = 0; a < D; ++a) n *= cells(a);
  return n;
}

template <int D>
Box<D> RectMesh<D>::box() const {
  Box<D> b;
  for (int a = 0; a < D; ++a) {
    b.lo[a] = breaks_[a].front();
    b.hi[a] = breaks_[a].back();
  }
  return b;
}

template <int D>
Box<D> RectMesh<D>::element(const Index<D>& c) const {
  Box<D> b;
  for (int a = 0; a < D; ++a) {
    b.lo[a] = breaks_[a][c[a]];
    b.hi[a] = breaks_[a][c[a] + 1];
  }
  return b;
}

// -------------------------------------------------------- HierarchicalMesh

template <int D>
std::uint64_t HierarchicalMesh<D>::key(const Index<D>& idx) {
  std::uint64_t k = 0;
  for (int a = 0; a < D; ++a) k |= static_cast<std::uint64_t>(idx[a]) << (21 * a);
  return k;
}

template <int D>
HierarchicalMesh<D>::HierarchicalMesh(RectMesh<D> root, int max_level_jump)
    : root_(std::move(root)), max_level_jump_(max_level_jump) {
  ensure_level(0);
  const int n = static_cast<int>(root_.num_elements());
  for (int l = 0; l < n; ++l) {
    Index<D> idx;
    int r = l;
    for (int a = 0; a < D; ++a) {
      idx[a] = r % root_.cells(a);
      r /= root_.cells(a);
    }
    levels_[0][key(idx)] = false;
  }
  rebuild_active();
}

template <int D>
void HierarchicalMesh<D>::ensure_level(int level) {
  while (static_cast<int>(breaks_.size()) <= level) {
    std::array<std::vector<double>, D> b;
    for (int a = 0; a < D; ++a) {
      if (breaks_.empty()) {
        b[a] = root_.breaks(a);
      } else {
        const auto& prev = breaks_.back()[a];
        b[a].resize(2 * prev.size() - 1);
        for (std::size_t i = 0; i + 1 < prev.size(); ++i) {
          b[a][2 * i] = prev[i];
          b[a][2 * i + 1] = 0.5 * (prev[i] + prev[i + 1]);
        }
        b[a].back() = prev.back();
      }
    }
    breaks_.push_back(std::move(b));
  }
  while (static_cast<int>(levels_.size()) <= level) levels_.emplace_back();
}

template <int D>
const std::vector<double>& HierarchicalMesh<D>::breaks(int level, int axis) const {
  return breaks_.at(level)[axis];
}

template <int D>
Box<D> HierarchicalMesh<D>::cell_box(const Cell<D>& c) const {
  Box<D> b;
  for (int a = 0; a < D; ++a) {
    const auto& br = breaks_.at(c.level)[a];
    b.lo[a] = br[c.index[a]];
    b.hi[a] = br[c.index[a] + 1];
  }
  return b;
}

template <int D>
bool HierarchicalMesh<D>::exists(int level, const Index<D>& idx) const {
  if (level < 0 || level >= num_levels()) return false;
  for (int a = 0; a < D; ++a)
    if (idx[a] < 0 || idx[a] >= cells(level, a)) return false;
  return levels_[level].count(key(idx)) > 0;
}

template <int D>
bool HierarchicalMesh<D>::refined(int level, const Index<D>& idx) const {
  if (level < 0 || level >= num_levels()) return false;
  auto it = levels_[level].find(key(idx));
  return it != levels_[level].end() && it->second;
}

template <int D>
std::vector<Index<D>> HierarchicalMesh<D>::level_cells(int level) const {
  std::vector<Index<D>> out;
  if (level < 0 || level >= num_levels()) return out;
  out.reserve(levels_[level].size());
  for (const auto& [k, _] : levels_[level]) {
    Index<D> idx;
    for (int a = 0; a < D; ++a) idx[a] = static_cast<int>((k >> (21 * a)) & ((1u << 21) - 1));
    out.push_back(idx);
  }
  std::sort(out.begin(), out.end(), lex_less<D>);
  return out;
}

template <int D>
void HierarchicalMesh<D>::rebuild_active() {
  active_.clear();
  active_id_.assign(levels_.size(), {});
  for (int l = 0; l < num_levels(); ++l)
    for (const auto& idx : level_cells(l))
      if (!refined(l, idx)) active_.push_back({l, idx});
  for (std::size_t e = 0; e < active_.size(); ++e)
    active_id_[active_[e].level][key(active_[e].index)] = e;
  while (!levels_.empty() && levels_.back().empty()) levels_.pop_back();
}

template <int D>
std::optional<std::size_t> HierarchicalMesh<D>::element_id(const Cell<D>& c) const {
  if (c.level < 0 || c.level >= static_cast<int>(active_id_.size())) return std::nullopt;
  auto it = active_id_[c.level].find(key(c.index));
  if (it == active_id_[c.level].end()) return std::nullopt;
  return it->second;
}

template <int D>
std::optional<std::size_t> HierarchicalMesh<D>::covering(const Cell<D>& c) const {
  for (int a = 0; a < D; ++a)
    if (c.index[a] < 0 || c.index[a] >= cells(c.level, a)) return std::nullopt;
  for (int l = std::min(c.level, num_levels() - 1); l >= 0; --l) {
    Index<D> idx;
    for (int a = 0; a < D; ++a) idx[a] = c.index[a] >> (c.level - l);
    if (exists(l, idx)) {
      if (refined(l, idx)) return std::nullopt;
      return element_id({l, idx});
    }
  }
  return std::nullopt;
}

template <int D>
std::size_t HierarchicalMesh<D>::locate(const Vec<D>& x) const {
  const Box<D> b = box();
  for (int a = 0; a < D; ++a) {
    const double tol = 1e-12 * (b.hi[a] - b.lo[a]);
    if (!(x[a] >= b.lo[a] - tol && x[a] <= b.hi[a] + tol))
      throw DomainError("point outside the mesh box");
  }
  Index<D> idx;
  for (int a = 0; a < D; ++a) {
    const auto& br = root_.breaks(a);
    const int i = static_cast<int>(std::upper_bound(br.begin(), br.end(), x[a]) - br.begin()) - 1;
    idx[a] = std::clamp(i, 0, root_.cells(a) - 1);
  }
  int l = 0;
  while (refined(l, idx)) {
    for (int a = 0; a < D; ++a) {
      const double mid = breaks_[l + 1][a][2 * idx[a] + 1];
      idx[a] = 2 * idx[a] + (x[a] >= mid ? 1 : 0);
    }
    ++l;
  }
  return active_id_[l].at(key(idx));
}

template <int D>
void HierarchicalMesh<D>::mark_refined(int level, const Index<D>& idx) {
  auto& flag = levels_[level].at(key(idx));
  if (flag) return;
  flag = true;
  ensure_level(level + 1);
  for (int l = 0; l < (1 << D); ++l) {
    Index<D> child;
    for (int a = 0; a < D; ++a) child[a] = 2 * idx[a] + ((l >> a) & 1);
    levels_[level + 1].emplace(key(child), false);
  }
}

template <int D>
HierarchicalMesh<D> HierarchicalMesh<D>::refine(const std::vector<std::size_t>& marked) const {
  HierarchicalMesh out = *this;
  for (std::size_t e : marked) {
    const Cell<D>& c = active_.at(e);
    out.mark_refined(c.level, c.index);
  }
  out.rebuild_active();
  if (max_level_jump_ < 0) return out;
  bool changed = true;
  while (changed) {
    changed = false;
    for (const Cell<D>& c : std::vector<Cell<D>>(out.active_)) {
      for (int a = 0; a < D; ++a)
        for (int dir : {-1, 1}) {
          Cell<D> nb = c;
          nb.index[a] += dir;
          const auto cov = out.covering(nb);
          if (cov && out.active_[*cov].level < c.level - max_level_jump_) {
            const Cell<D> coarse = out.active_[*cov];
            out.mark_refined(coarse.level, coarse.index);
            changed = true;
          }
        }
      if (changed) break;
    }
    if (changed) out.rebuild_active();
  }
  return out;
}

// ------------------------------------------------------------- SplineSpace

template <int D>
SplineSpace<D>::SplineSpace(HierarchicalMesh<D> mesh, int k) : mesh_(std::move(mesh)), k_(k) {
  if (k < 1) throw std::invalid_argument("build_space: degree must be >= 1");
  nloc_ = ipow(k + 1, D);
  const int L = mesh_.num_levels();
  knots_.resize(L);
  for (int l = 0; l < L; ++l)
    for (int a = 0; a < D; ++a) {
      const auto& br = mesh_.breaks(l, a);
      auto& U = knots_[l][a];
      U.assign(k, br.front());
      U.insert(U.end(), br.begin(), br.end());
      U.insert(U.end(), k, br.back());
    }
  region_cache_.assign(L, {});
  function_id_.assign(L, {});

  for (int l = 0; l < L; ++l) {
    std::vector<Index<D>> cand;
    std::unordered_map<std::uint64_t, bool> seen;
    for (const auto& c : mesh_.level_cells(l))
      for (int s = 0; s < nloc_; ++s) {
        const Index<D> t = unflatten<D>(s, k + 1);
        Index<D> j;
        for (int a = 0; a < D; ++a) j[a] = c[a] + t[a];
        if (!seen.emplace(HierarchicalMesh<D>::key(j), true).second) continue;
        if (in_region(l, j) && !fully_refined(l, j)) cand.push_back(j);
      }
    std::sort(cand.begin(), cand.end(), lex_less<D>);
    for (const auto& j : cand) {
      function_id_[l][HierarchicalMesh<D>::key(j)] = functions_.size();
      functions_.push_back({l, j});
    }
  }

  // Local two-scale matrices R[t][s]: coarse local s on the parent interval in
  // terms of fine local t on the child interval.
  std::map<std::tuple<int, int, int>, Eigen::MatrixXd> rloc;
  auto local_refinement = [&](int axis, int m, int cm) -> const Eigen::MatrixXd& {
    auto keyt = std::make_tuple(axis, m, cm);
    auto it = rloc.find(keyt);
    if (it != rloc.end()) return it->second;
    const auto& Uf = knots_[m][axis];
    const auto& Uc = knots_[m - 1][axis];
    const double lo = Uf[cm + k], hi = Uf[cm + k + 1];
    Eigen::MatrixXd Bf(k + 1, k + 1), Bc(k + 1, k + 1);
    std::vector<double> buf(k + 1);
    for (int q = 0; q <= k; ++q) {
      const double x = lo + (hi - lo) * (q + 1.0) / (k + 2.0);
      bspline_ders(Uf, cm + k, k, x, 0, buf.data());
      for (int t = 0; t <= k; ++t) Bf(q, t) = buf[t];
      bspline_ders(Uc, cm / 2 + k, k, x, 0, buf.data());
      for (int s = 0; s <= k; ++s) Bc(q, s) = buf[s];
    }
    Eigen::MatrixXd R = Bf.partialPivLu().solve(Bc);
    for (int i = 0; i < R.size(); ++i)
      if (std::abs(R.data()[i]) < 1e-14) R.data()[i] = 0.0;
    return rloc.emplace(keyt, std::move(R)).first->second;
  };

  const std::size_t ne = mesh_.num_elements();
  elem_funcs_.resize(ne);
  extraction_.resize(ne);
  for (std::size_t e = 0; e < ne; ++e) {
    const Cell<D>& cell = mesh_.element(e);
    const int Le = cell.level;
    std::vector<std::size_t> ids;
    std::vector<Eigen::RowVectorXd> rows;
    for (int l = 0; l <= Le; ++l) {
      Index<D> anc;
      for (int a = 0; a < D; ++a) anc[a] = cell.index[a] >> (Le - l);
      std::vector<int> act;
      std::vector<std::size_t> act_ids;
      for (int s = 0; s < nloc_; ++s) {
        const Index<D> t = unflatten<D>(s, k + 1);
        Index<D> j;
        for (int a = 0; a < D; ++a) j[a] = anc[a] + t[a];
        auto it = function_id_[l].find(HierarchicalMesh<D>::key(j));
        if (it != function_id_[l].end()) {
          act.push_back(s);
          act_ids.push_back(it->second);
        }
      }
      if (act.empty()) continue;
      Eigen::MatrixXd M = Eigen::MatrixXd::Zero(static_cast<int>(act.size()), nloc_);
      for (std::size_t r = 0; r < act.size(); ++r) M(static_cast<int>(r), act[r]) = 1.0;
      for (int m = l + 1; m <= Le; ++m) {
        Index<D> cm;
        for (int a = 0; a < D; ++a) cm[a] = cell.index[a] >> (Le - m);
        std::array<const Eigen::MatrixXd*, D> R;
        for (int a = 0; a < D; ++a) R[a] = &local_refinement(a, m, cm[a]);
        Eigen::MatrixXd T(nloc_, nloc_);
        for (int t = 0; t < nloc_; ++t) {
          const Index<D> tt = unflatten<D>(t, k + 1);
          for (int s = 0; s < nloc_; ++s) {
            const Index<D> ss = unflatten<D>(s, k + 1);
            double v = 1.0;
            for (int a = 0; a < D; ++a) v *= (*R[a])(tt[a], ss[a]);
            T(t, s) = v;
          }
        }
        M = (M * T.transpose()).eval();
        for (int t = 0; t < nloc_; ++t) {
          const Index<D> tt = unflatten<D>(t, k + 1);
          Index<D> j;
          for (int a = 0; a < D; ++a) j[a] = cm[a] + tt[a];
          if (in_region(m, j)) M.col(t).setZero();
        }
      }
      for (std::size_t r = 0; r < act.size(); ++r)
        if (M.row(static_cast<int>(r)).cwiseAbs().maxCoeff() > 1e-14) {
          ids.push_back(act_ids[r]);
          rows.push_back(M.row(static_cast<int>(r)));
        }
    }
    Eigen::MatrixXd C(static_cast<int>(rows.size()), nloc_);
    for (std::size_t r = 0; r < rows.size(); ++r) C.row(static_cast<int>(r)) = rows[r];
    elem_funcs_[e] = std::move(ids);
    extraction_[e] = std::move(C);
  }
  func_elems_.assign(functions_.size(), {});
  for (std::size_t e = 0; e < ne; ++e)
    for (std::size_t f : elem_funcs_[e]) func_elems_[f].push_back(e);
}

template <int D>
bool SplineSpace<D>::in_region(int level, const Index<D>& j) const {
  const std::uint64_t kk = HierarchicalMesh<D>::key(j);
  auto& cache = region_cache_[level];
  auto it = cache.find(kk);
  if (it != cache.end()) return it->second;
  Index<D> lo, hi;
  for (int a = 0; a < D; ++a) {
    lo[a] = std::max(0, j[a] - k_);
    hi[a] = std::min(mesh_.cells(level, a) - 1, j[a]);
  }
  bool inside = true;
  Index<D> c = lo;
  while (inside) {
    if (!mesh_.exists(level, c)) inside = false;
    int a = 0;
    for (; a < D; ++a) {
      if (++c[a] <= hi[a]) break;
      c[a] = lo[a];
    }
    if (a == D) break;
  }
  cache.emplace(kk, inside);
  return inside;
}

template <int D>
bool SplineSpace<D>::fully_refined(int level, const Index<D>& j) const {
  Index<D> lo, hi;
  for (int a = 0; a < D; ++a) {
    lo[a] = std::max(0, j[a] - k_);
    hi[a] = std::min(mesh_.cells(level, a) - 1, j[a]);
  }
  Index<D> c = lo;
  while (true) {
    if (!mesh_.refined(level, c)) return false;
    int a = 0;
    for (; a < D; ++a) {
      if (++c[a] <= hi[a]) break;
      c[a] = lo[a];
    }
    if (a == D) return true;
  }
}

template <int D>
Box<D> SplineSpace<D>::support(std::size_t i) const {
  const Function& f = functions_.at(i);
  Box<D> b;
  for (int a = 0; a < D; ++a) {
    const auto& U = knots_[f.level][a];
    b.lo[a] = U[f.index[a]];
    b.hi[a] = U[f.index[a] + k_ + 1];
  }
  return b;
}

template <int D>
void SplineSpace<D>::local_ders(std::size_t e, const Vec<D>& x, int order, LocalDers<D>& out) const {
  const Cell<D>& c = mesh_.element(e);
  out.order = order;
  for (int a = 0; a < D; ++a) {
    out.ders[a].resize(static_cast<std::size_t>((order + 1) * (k_ + 1)));
    bspline_ders(knots_[c.level][a], c.index[a] + k_, k_, x[a], order, out.ders[a].data());
  }
}

template <int D>
void SplineSpace<D>::local_values(const LocalDers<D>& ld, const Index<D>& alpha, double* out) const {
  for (int l = 0; l < nloc_; ++l) {
    const Index<D> t = unflatten<D>(l, k_ + 1);
    double v = 1.0;
    for (int a = 0; a < D; ++a) v *= ld.ders[a][alpha[a] * (k_ + 1) + t[a]];
    out[l] = v;
  }
}

template <int D>
Eigen::VectorXd SplineSpace<D>::eval_element(std::size_t e, const Vec<D>& x, const Index<D>& alpha) const {
  return eval_element(e, x, std::vector<Index<D>>{alpha}).col(0);
}

template <int D>
Eigen::MatrixXd SplineSpace<D>::eval_element(std::size_t e, const Vec<D>& x,
                                             const std::vector<Index<D>>& alphas) const {
  Eigen::MatrixXd out;
  eval_element(e, x, alphas, out);
  return out;
}

template <int D>
void SplineSpace<D>::eval_element(std::size_t e, const Vec<D>& x, const std::vector<Index<D>>& alphas,
                                  Eigen::MatrixXd& out) const {
  int order = 0;
  for (const auto& al : alphas)
    for (int a = 0; a < D; ++a) order = std::max(order, al[a]);
  thread_local LocalDers<D> ld;
  thread_local Eigen::MatrixXd T;
  local_ders(e, x, order, ld);
  T.resize(nloc_, static_cast<int>(alphas.size()));
  for (std::size_t i = 0; i < alphas.size(); ++i) local_values(ld, alphas[i], T.col(static_cast<int>(i)).data());
  out.noalias() = extraction_[e] * T;
}

template <int D>
typename SplineSpace<D>::SparseValues SplineSpace<D>::eval(const Vec<D>& x, const Index<D>& alpha) const {
  int total = 0;
  for (int a = 0; a < D; ++a) total += alpha[a];
  if (total > k_) throw std::invalid_argument("eval: derivative order exceeds the degree");
  const std::size_t e = mesh_.locate(x);
  SparseValues out;
  out.ids = elem_funcs_[e];
  const Eigen::VectorXd v = eval_element(e, x, alpha);
  out.values.assign(v.data(), v.data() + v.size());
  return out;
}

template <int D>
SplineSpace<D> SplineSpace<D>::refine(const std::vector<std::size_t>& marked) const {
  return SplineSpace(mesh_.refine(marked), k_);
}

template class RectMesh<1>;
template class RectMesh<2>;
template class HierarchicalMesh<1>;
template class HierarchicalMesh<2>;
template class SplineSpace<1>;
template class SplineSpace<2>;

}  // namespace scanflow
