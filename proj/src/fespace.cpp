#include "stfem/fespace.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

namespace stfem {

namespace {

struct KeyHash {
  template <class K>
  std::size_t operator()(const K& key) const noexcept {
    std::uint64_t h = 0x9e3779b97f4a7c15ull;
    for (const auto& ak : key) {
      for (std::uint64_t v : {static_cast<std::uint64_t>(ak.a), static_cast<std::uint64_t>(ak.b),
                              static_cast<std::uint64_t>(ak.k)}) {
        h ^= v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
      }
    }
    return static_cast<std::size_t>(h);
  }
};

template <class K>
bool keys_equal(const K& x, const K& y) {
  for (std::size_t a = 0; a < x.size(); ++a) {
    if (x[a].a != y[a].a || x[a].b != y[a].b || x[a].k != y[a].k) return false;
  }
  return true;
}

int ipow(int b, int e) {
  int r = 1;
  while (e-- > 0) r *= b;
  return r;
}

}  // namespace

FeSpace::FeSpace(std::shared_ptr<const BrickMesh> mesh, int degree, bool cut_slit)
    : mesh_(std::move(mesh)), shapes_(degree) {
  require(mesh_ != nullptr && mesh_->num_active() > 0, ErrorKind::invalid_mesh,
          "finite element space needs a non-empty mesh");
  require(degree >= 1 && degree <= 8, ErrorKind::invalid_argument,
          "polynomial degree must be in [1, 8]");
  nodes_per_element_ = ipow(degree + 1, mesh_->dim());
  cut_slit_ = cut_slit && mesh_->domain().slit.has_value();
  elements_.assign(mesh_->active().begin(), mesh_->active().end());
  element_index_.assign(mesh_->num_bricks(), -1);
  for (int e = 0; e < num_elements(); ++e) element_index_[elements_[e]] = e;
  number_nodes();
  build_constraints();
  essential_.assign(num_true(), 0);
  essential_values_.assign(num_true(), 0.0);
}

int FeSpace::element_of_brick(int brick) const {
  if (brick < 0 || brick >= static_cast<int>(element_index_.size())) return -1;
  return element_index_[brick];
}

void FeSpace::number_nodes() {
  // The last entry carries the slit side of cut nodes.
  using Key = std::array<AxisKey, kMaxDim + 1>;
  struct Hasher {
    std::size_t operator()(const Key& k) const noexcept { return KeyHash{}(k); }
  };
  struct Eq {
    bool operator()(const Key& x, const Key& y) const noexcept { return keys_equal(x, y); }
  };
  std::unordered_map<Key, int, Hasher, Eq> lookup;
  const int d = dim();
  const int p = degree();
  const int n1 = p + 1;
  const auto& xi = shapes_.nodes();
  lookup.reserve(static_cast<std::size_t>(num_elements()) * nodes_per_element_ / 2);
  Lattice slit_pos = 0;
  double slit_from = 0.0;
  double slit_to = 0.0;
  if (cut_slit_) {
    const SlitFacet& sf = *mesh_->domain().slit;
    slit_pos = std::llround(mesh_->lattice_position(sf.normal_axis, sf.position));
    slit_from = mesh_->lattice_position(sf.along_axis, sf.from);
    slit_to = mesh_->lattice_position(sf.along_axis, sf.to);
  }
  element_nodes_.resize(static_cast<std::size_t>(num_elements()) * nodes_per_element_);
  for (int e = 0; e < num_elements(); ++e) {
    const LatticeBox& box = mesh_->box(elements_[e]);
    for (int l = 0; l < nodes_per_element_; ++l) {
      Key key{};
      int rem = l;
      for (int a = 0; a < d; ++a) {
        const int k = rem % n1;
        rem /= n1;
        if (k == 0) {
          key[a] = {box.lo[a], box.lo[a], 0};
        } else if (k == p) {
          key[a] = {box.hi[a], box.hi[a], 0};
        } else {
          key[a] = {box.lo[a], box.hi[a], k};
        }
      }
      key[kMaxDim] = {-1, 0, 0};
      if (cut_slit_) {
        const SlitFacet& sf = *mesh_->domain().slit;
        const AxisKey& nk = key[sf.normal_axis];
        const AxisKey& ak = key[sf.along_axis];
        const double along = ak.k == 0 ? static_cast<double>(ak.a)
                                       : static_cast<double>(ak.a) +
                                             xi[ak.k] * static_cast<double>(ak.b - ak.a);
        if (nk.k == 0 && nk.a == slit_pos && along > slit_from && along <= slit_to) {
          key[kMaxDim].a = box.lo[sf.normal_axis] >= slit_pos ? 1 : 0;
        }
      }
      auto [it, inserted] = lookup.try_emplace(key, static_cast<int>(positions_.size()));
      if (inserted) {
        Point x{};
        for (int a = 0; a < d; ++a) {
          const AxisKey& ak = key[a];
          const double lat = ak.k == 0 ? static_cast<double>(ak.a)
                                       : static_cast<double>(ak.a) +
                                             xi[ak.k] * static_cast<double>(ak.b - ak.a);
          x[a] = mesh_->coordinate(a, lat);
        }
        positions_.push_back(x);
        keys_.push_back({key[0], key[1], key[2]});
        side_.push_back(static_cast<std::int8_t>(key[kMaxDim].a));
      }
      element_nodes_[static_cast<std::size_t>(e) * nodes_per_element_ + l] = it->second;
    }
  }
}

void FeSpace::build_constraints() {
  const int d = dim();
  const int p = degree();
  const int n1 = p + 1;
  const int nn = num_nodes();
  const auto& xi = shapes_.nodes();
  // Direct (unresolved) constraints: node -> list of (node, weight).
  std::vector<std::vector<std::pair<int, double>>> direct(nn);
  std::vector<char> hanging(nn, 0);
  double vals[16];

  for (int n = 0; n < nn; ++n) {
    const auto& key = keys_[n];
    bool on_boundary = false;
    std::array<Lattice, kMaxDim> q0{};
    std::array<Lattice, kMaxDim> q1{};
    for (int a = 0; a < d; ++a) {
      if (key[a].k == 0) {
        on_boundary = true;
        q0[a] = 2 * key[a].a - 1;
        q1[a] = 2 * key[a].a + 1;
      } else {
        q0[a] = 2 * key[a].a;
        q1[a] = 2 * key[a].b;
      }
    }
    if (!on_boundary) continue;

    int best = -1;
    double best_score = 0.0;
    mesh_->for_each_leaf(q0, q1, [&](int leaf) {
      const LatticeBox& b = mesh_->box(leaf);
      if (side_[n] >= 0) {
        const int na = mesh_->domain().slit->normal_axis;
        const bool upper = b.lo[na] >= key[na].a;
        if (upper != (side_[n] == 1)) return;
      }
      bool larger = false;
      double score = 0.0;
      for (int a = 0; a < d; ++a) {
        if (key[a].k == 0) {
          const Lattice X = key[a].a;
          if (b.lo[a] < X && X < b.hi[a]) {
            larger = true;
            score += static_cast<double>(b.hi[a] - b.lo[a]);
          }
        } else {
          if (b.lo[a] > key[a].a || b.hi[a] < key[a].b) return;  // finer along this axis
          if (b.lo[a] != key[a].a || b.hi[a] != key[a].b) larger = true;
          score += static_cast<double>(b.hi[a] - b.lo[a]);
        }
      }
      if (!larger) return;
      if (best < 0 || score > best_score) {
        best = leaf;
        best_score = score;
      }
    });
    if (best < 0) continue;

    // Interpolate from the master brick's nodes on the entity containing the node.
    hanging[n] = 1;
    const LatticeBox& b = mesh_->box(best);
    const int me = element_index_[best];
    std::array<std::vector<std::pair<int, double>>, kMaxDim> axis_terms;
    for (int a = 0; a < d; ++a) {
      const double lat = key[a].k == 0 ? static_cast<double>(key[a].a)
                                       : static_cast<double>(key[a].a) +
                                             xi[key[a].k] * static_cast<double>(key[a].b - key[a].a);
      if (key[a].k == 0 && key[a].a == b.lo[a]) {
        axis_terms[a].push_back({0, 1.0});
      } else if (key[a].k == 0 && key[a].a == b.hi[a]) {
        axis_terms[a].push_back({p, 1.0});
      } else {
        const double s = (lat - static_cast<double>(b.lo[a])) / static_cast<double>(b.hi[a] - b.lo[a]);
        shapes_.eval(s, vals, nullptr, nullptr);
        for (int k = 0; k < n1; ++k) {
          if (std::abs(vals[k]) > 1e-14) axis_terms[a].push_back({k, vals[k]});
        }
      }
    }
    const auto local = element_nodes(me);
    std::array<std::size_t, kMaxDim> idx{};
    while (true) {
      int l = 0;
      double w = 1.0;
      int stride = 1;
      for (int a = 0; a < d; ++a) {
        l += axis_terms[a][idx[a]].first * stride;
        w *= axis_terms[a][idx[a]].second;
        stride *= n1;
      }
      direct[n].push_back({local[l], w});
      int a = 0;
      while (a < d && ++idx[a] == axis_terms[a].size()) idx[a++] = 0;
      if (a == d) break;
    }
  }

  // True DOFs: unconstrained nodes ordered by position, time slowest.
  true_nodes_.clear();
  for (int n = 0; n < nn; ++n) {
    if (!hanging[n]) true_nodes_.push_back(n);
  }
  std::sort(true_nodes_.begin(), true_nodes_.end(), [&](int x, int y) {
    for (int a = d - 1; a >= 0; --a) {
      if (positions_[x][a] != positions_[y][a]) return positions_[x][a] < positions_[y][a];
    }
    return x < y;
  });
  true_index_.assign(nn, -1);
  for (int i = 0; i < num_true(); ++i) true_index_[true_nodes_[i]] = i;

  // Resolve chains so every row refers to true DOFs only.
  std::vector<std::vector<std::pair<int, double>>> resolved(nn);
  std::vector<char> state(nn, 0);
  std::function<void(int)> resolve = [&](int n) {
    if (state[n] == 2) return;
    require(state[n] == 0, ErrorKind::invalid_mesh, "cyclic hanging-node constraints");
    state[n] = 1;
    std::vector<std::pair<int, double>> row;
    if (!hanging[n]) {
      row.push_back({true_index_[n], 1.0});
    } else {
      for (auto [m, w] : direct[n]) {
        resolve(m);
        for (auto [t, wt] : resolved[m]) row.push_back({t, w * wt});
      }
      std::sort(row.begin(), row.end());
      std::vector<std::pair<int, double>> merged;
      for (auto [t, w] : row) {
        if (!merged.empty() && merged.back().first == t) {
          merged.back().second += w;
        } else {
          merged.push_back({t, w});
        }
      }
      row.clear();
      for (auto [t, w] : merged) {
        if (std::abs(w) > 1e-14) row.push_back({t, w});
      }
    }
    resolved[n] = std::move(row);
    state[n] = 2;
  };
  constraint_ptr_.assign(nn + 1, 0);
  constraint_entries_.clear();
  for (int n = 0; n < nn; ++n) {
    resolve(n);
    for (auto [t, w] : resolved[n]) constraint_entries_.push_back({t, w});
    constraint_ptr_[n + 1] = static_cast<int>(constraint_entries_.size());
  }
}

std::vector<double> FeSpace::expand(std::span<const double> true_coeffs) const {
  require(static_cast<int>(true_coeffs.size()) == num_true(), ErrorKind::invalid_argument,
          "coefficient vector size does not match the number of true DOFs");
  std::vector<double> full(num_nodes(), 0.0);
  for (int n = 0; n < num_nodes(); ++n) {
    double s = 0.0;
    for (const ConstraintEntry& c : constraint(n)) s += c.weight * true_coeffs[c.true_dof];
    full[n] = s;
  }
  return full;
}

void FeSpace::gather(int e, std::span<const double> full, std::span<double> local) const {
  const auto nodes = element_nodes(e);
  for (int l = 0; l < nodes_per_element_; ++l) local[l] = full[nodes[l]];
}

bool FeSpace::on_slit(const Point& x) const {
  const auto& dom = mesh_->domain();
  if (!dom.slit) return false;
  const SlitFacet& s = *dom.slit;
  const double tol = 1e-12 * (dom.upper[s.normal_axis] - dom.lower[s.normal_axis]);
  const double tol_t = 1e-12 * (dom.upper[s.along_axis] - dom.lower[s.along_axis]);
  return std::abs(x[s.normal_axis] - s.position) <= tol && x[s.along_axis] >= s.from - tol_t &&
         x[s.along_axis] <= s.to + tol_t;
}

std::vector<char> FeSpace::boundary_mask(unsigned parts) const {
  const int d = dim();
  const int ta = d - 1;
  const auto& roots = mesh_->root_cells();
  std::vector<char> mask(num_true(), 0);
  for (int i = 0; i < num_true(); ++i) {
    const int n = true_nodes_[i];
    const auto& key = keys_[n];
    bool hit = false;
    if (parts & kLateral) {
      for (int a = 0; a < ta; ++a) {
        if (key[a].k == 0 && (key[a].a == 0 || key[a].a == roots[a] * kRootSpan)) hit = true;
      }
      if (!hit && on_slit(positions_[n])) hit = true;
    }
    if ((parts & kInitial) && key[ta].k == 0 && key[ta].a == 0) hit = true;
    if ((parts & kTerminal) && key[ta].k == 0 && key[ta].a == roots[ta] * kRootSpan) hit = true;
    mask[i] = hit ? 1 : 0;
  }
  return mask;
}

int FeSpace::num_essential() const {
  return static_cast<int>(std::count(essential_.begin(), essential_.end(), 1));
}

void FeSpace::set_boundary_data(const BoundaryDataSpec& bc) {
  essential_ = boundary_mask(kLateral | kInitial);
  essential_values_.assign(num_true(), 0.0);
  if (!bc.trace) return;
  for (int i = 0; i < num_true(); ++i) {
    if (essential_[i]) essential_values_[i] = bc.trace(positions_[true_nodes_[i]]);
  }
}

FeSpace build_space(std::shared_ptr<const BrickMesh> mesh, int degree, const BoundaryDataSpec& bc) {
  FeSpace space(std::move(mesh), degree);
  space.set_boundary_data(bc);
  return space;
}

std::vector<double> interpolate(const FeSpace& space, const ScalarFunction& g) {
  std::vector<double> u(space.num_true());
  for (int i = 0; i < space.num_true(); ++i) u[i] = g(space.node_position(space.node_of_true(i)));
  return u;
}

std::vector<double> prolongate(const FeSpace& coarse, std::span<const double> u_coarse,
                               const FeSpace& fine) {
  require(fine.mesh().refines(coarse.mesh()), ErrorKind::hierarchy,
          "fine mesh does not refine the coarse mesh");
  require(fine.degree() == coarse.degree(), ErrorKind::hierarchy,
          "prolongation requires equal polynomial degrees");
  const std::vector<double> full = coarse.expand(u_coarse);
  std::vector<double> out(fine.num_true());
  for (int i = 0; i < fine.num_true(); ++i) {
    out[i] = evaluate_at(coarse, full, fine.node_position(fine.node_of_true(i))).value;
  }
  return out;
}

Tabulation tabulate(const ShapeSet& shapes, int dim, std::span<const Point> ref_points) {
  const int n1 = shapes.size();
  Tabulation t;
  t.dim = dim;
  t.num_points = static_cast<int>(ref_points.size());
  t.num_basis = ipow(n1, dim);
  const std::size_t total = static_cast<std::size_t>(t.num_points) * t.num_basis;
  t.value.assign(total, 0.0);
  for (int a = 0; a < dim; ++a) {
    t.d1[a].assign(total, 0.0);
    t.d2[a].assign(total, 0.0);
  }
  double v[kMaxDim][16];
  double d1[kMaxDim][16];
  double d2[kMaxDim][16];
  for (int q = 0; q < t.num_points; ++q) {
    for (int a = 0; a < dim; ++a) shapes.eval(ref_points[q][a], v[a], d1[a], d2[a]);
    for (int i = 0; i < t.num_basis; ++i) {
      int k[kMaxDim] = {0, 0, 0};
      int rem = i;
      for (int a = 0; a < dim; ++a) {
        k[a] = rem % n1;
        rem /= n1;
      }
      double val = 1.0;
      for (int a = 0; a < dim; ++a) val *= v[a][k[a]];
      const std::size_t at = static_cast<std::size_t>(q) * t.num_basis + i;
      t.value[at] = val;
      for (int a = 0; a < dim; ++a) {
        double g1 = 1.0;
        double g2 = 1.0;
        for (int b = 0; b < dim; ++b) {
          g1 *= b == a ? d1[b][k[b]] : v[b][k[b]];
          g2 *= b == a ? d2[b][k[b]] : v[b][k[b]];
        }
        t.d1[a][at] = g1;
        t.d2[a][at] = g2;
      }
    }
  }
  return t;
}

PointValues evaluate_local(const ShapeSet& shapes, int dim, const Brick& brick,
                           std::span<const double> local, const Point& ref) {
  const Point pts[1] = {ref};
  const Tabulation t = tabulate(shapes, dim, pts);
  PointValues out;
  for (int i = 0; i < t.num_basis; ++i) {
    out.value += local[i] * t.v(0, i);
    for (int a = 0; a < dim; ++a) {
      out.grad[a] += local[i] * t.dv(a, 0, i) / brick.sizes[a];
      out.second[a] += local[i] * t.ddv(a, 0, i) / (brick.sizes[a] * brick.sizes[a]);
    }
  }
  return out;
}

PointValues evaluate_at(const FeSpace& space, std::span<const double> full, const Point& x) {
  const int id = space.mesh().locate(x);
  const int e = space.element_of_brick(id);
  const Brick b = space.mesh().brick(id);
  Point ref{};
  for (int a = 0; a < b.dim; ++a) ref[a] = std::clamp((x[a] - b.anchor[a]) / b.sizes[a], 0.0, 1.0);
  std::vector<double> local(space.nodes_per_element());
  space.gather(e, full, local);
  return evaluate_local(space.shapes(), b.dim, b, local, ref);
}

}  // namespace stfem
