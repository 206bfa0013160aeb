#include "stfem/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <unordered_map>

namespace stfem {

double DomainSpec::volume() const {
  double v = 1.0;
  for (int a = 0; a < dim; ++a) v *= upper[a] - lower[a];
  return v;
}

DomainSpec DomainSpec::unit_cylinder(int spatial_dim, double terminal_time) {
  require(spatial_dim >= 1 && spatial_dim + 1 <= kMaxDim, ErrorKind::invalid_argument,
          "spatial dimension must be 1 or 2");
  DomainSpec d;
  d.dim = spatial_dim + 1;
  for (int a = 0; a < spatial_dim; ++a) {
    d.lower[a] = 0.0;
    d.upper[a] = 1.0;
  }
  d.lower[spatial_dim] = 0.0;
  d.upper[spatial_dim] = terminal_time;
  return d;
}

double Brick::h_x() const {
  double hx = 0.0;
  for (int a = 0; a + 1 < dim; ++a) hx = std::max(hx, sizes[a]);
  return hx;
}

double Brick::volume() const {
  double v = 1.0;
  for (int a = 0; a < dim; ++a) v *= sizes[a];
  return v;
}

Point Brick::upper() const {
  Point p{};
  for (int a = 0; a < dim; ++a) p[a] = anchor[a] + sizes[a];
  return p;
}

ElementSizes element_sizes(const Brick& brick, HkConvention convention) {
  ElementSizes s;
  s.h = brick.sizes;
  s.h_x = brick.h_x();
  s.h_t = brick.h_t();
  double hmin = s.h[0];
  double hmax = s.h[0];
  for (int a = 1; a < brick.dim; ++a) {
    hmin = std::min(hmin, s.h[a]);
    hmax = std::max(hmax, s.h[a]);
  }
  switch (convention) {
    case HkConvention::temporal: s.h_K = s.h_t; break;
    case HkConvention::min: s.h_K = hmin; break;
    case HkConvention::max: s.h_K = hmax; break;
  }
  return s;
}

namespace {

bool on_grid_line(double x, double lo, double hi, int cells) {
  const double s = (x - lo) / (hi - lo) * cells;
  return std::abs(s - std::round(s)) < 1e-10;
}

}  // namespace

BrickMesh build_tensor_mesh(const DomainSpec& domain, std::span<const int> cells) {
  require(domain.dim >= 2 && domain.dim <= kMaxDim, ErrorKind::invalid_argument,
          "space-time dimension must be 2 or 3");
  require(static_cast<int>(cells.size()) == domain.dim, ErrorKind::invalid_argument,
          "cells_per_axis must have one entry per axis");
  for (int a = 0; a < domain.dim; ++a) {
    require(cells[a] >= 1, ErrorKind::invalid_argument, "cells_per_axis entries must be >= 1");
    require(domain.upper[a] > domain.lower[a], ErrorKind::invalid_argument,
            "degenerate domain box");
  }
  if (domain.slit) {
    const SlitFacet& s = *domain.slit;
    require(s.normal_axis >= 0 && s.normal_axis < domain.spatial_dim() && s.along_axis >= 0 &&
                s.along_axis < domain.spatial_dim() && s.along_axis != s.normal_axis,
            ErrorKind::invalid_argument, "slit axes must be distinct spatial axes");
    const int n = s.normal_axis;
    const int t = s.along_axis;
    require(on_grid_line(s.position, domain.lower[n], domain.upper[n], cells[n]) &&
                on_grid_line(s.from, domain.lower[t], domain.upper[t], cells[t]),
            ErrorKind::invalid_argument, "slit facet must lie on initial grid lines");
  }

  BrickMesh mesh;
  mesh.domain_ = domain;
  mesh.roots_ = {1, 1, 1};
  for (int a = 0; a < domain.dim; ++a) mesh.roots_[a] = cells[a];
  const int n0 = mesh.roots_[0];
  const int n1 = mesh.roots_[1];
  const int n2 = mesh.roots_[2];
  mesh.nodes_.reserve(static_cast<std::size_t>(n0) * n1 * n2);
  for (int k = 0; k < n2; ++k) {
    for (int j = 0; j < n1; ++j) {
      for (int i = 0; i < n0; ++i) {
        BrickMesh::Node node;
        const std::array<int, kMaxDim> r{i, j, k};
        for (int a = 0; a < kMaxDim; ++a) {
          node.box.lo[a] = r[a] * kRootSpan;
          node.box.hi[a] = (r[a] + 1) * kRootSpan;
        }
        mesh.nodes_.push_back(node);
      }
    }
  }
  mesh.rebuild_active();
  return mesh;
}

int BrickMesh::root_index(const std::array<int, kMaxDim>& r) const {
  return r[0] + roots_[0] * (r[1] + roots_[1] * r[2]);
}

int BrickMesh::root_of(int id) const {
  while (nodes_[id].parent >= 0) id = nodes_[id].parent;
  return id;
}

std::array<int, kMaxDim> BrickMesh::levels(int id) const {
  std::array<int, kMaxDim> l{};
  for (int a = 0; a < kMaxDim; ++a) l[a] = nodes_[id].level[a];
  return l;
}

std::vector<int> BrickMesh::children(int id) const {
  std::vector<int> c;
  const Node& n = nodes_[id];
  for (int i = 0; i < n.num_children; ++i) c.push_back(n.first_child + i);
  return c;
}

double BrickMesh::coordinate(int axis, double lattice) const {
  const double frac = lattice / (static_cast<double>(kRootSpan) * roots_[axis]);
  return domain_.lower[axis] + (domain_.upper[axis] - domain_.lower[axis]) * frac;
}

double BrickMesh::lattice_position(int axis, double x) const {
  return (x - domain_.lower[axis]) / (domain_.upper[axis] - domain_.lower[axis]) *
         static_cast<double>(kRootSpan) * roots_[axis];
}

Brick BrickMesh::brick(int id) const {
  const Node& n = nodes_[id];
  Brick b;
  b.id = id;
  b.dim = dim();
  for (int a = 0; a < dim(); ++a) {
    b.anchor[a] = coordinate(a, static_cast<double>(n.box.lo[a]));
    b.sizes[a] = coordinate(a, static_cast<double>(n.box.hi[a])) - b.anchor[a];
    b.axis_levels[a] = n.level[a];
  }
  b.status = n.first_child < 0 ? BrickStatus::active : BrickStatus::refined;
  return b;
}

void BrickMesh::split(int id, unsigned axes) {
  require(nodes_[id].first_child < 0, ErrorKind::stale_directive,
          "cannot split refined brick " + std::to_string(id));
  std::array<int, kMaxDim> ax{};
  int k = 0;
  for (int a = 0; a < dim(); ++a) {
    if (axes & (1u << a)) {
      require(nodes_[id].level[a] < kMaxLevel, ErrorKind::invalid_argument,
              "refinement depth limit reached");
      ax[k++] = a;
    }
  }
  const int nc = 1 << k;
  const int first = static_cast<int>(nodes_.size());
  const Node parent = nodes_[id];
  for (int c = 0; c < nc; ++c) {
    Node child;
    child.box = parent.box;
    child.level = parent.level;
    child.parent = id;
    for (int j = 0; j < k; ++j) {
      const int a = ax[j];
      const Lattice mid = (parent.box.lo[a] + parent.box.hi[a]) / 2;
      if (c & (1 << j)) {
        child.box.lo[a] = mid;
      } else {
        child.box.hi[a] = mid;
      }
      child.level[a] = static_cast<std::int8_t>(parent.level[a] + 1);
    }
    nodes_.push_back(child);
  }
  nodes_[id].first_child = first;
  nodes_[id].num_children = static_cast<std::uint8_t>(nc);
  nodes_[id].split = static_cast<std::uint8_t>(axes);
}

void BrickMesh::rebuild_active() {
  active_.clear();
  for (int i = 0; i < num_bricks(); ++i) {
    if (nodes_[i].first_child < 0) active_.push_back(i);
  }
}

std::vector<int> BrickMesh::face_neighbors(int id, int axis, int side) const {
  const LatticeBox& b = nodes_[id].box;
  std::array<Lattice, kMaxDim> q0{};
  std::array<Lattice, kMaxDim> q1{};
  for (int a = 0; a < dim(); ++a) {
    q0[a] = 2 * b.lo[a];
    q1[a] = 2 * b.hi[a];
  }
  if (side == 0) {
    q0[axis] = 2 * b.lo[axis] - 1;
    q1[axis] = 2 * b.lo[axis];
  } else {
    q0[axis] = 2 * b.hi[axis];
    q1[axis] = 2 * b.hi[axis] + 1;
  }
  std::vector<int> out;
  for_each_leaf(q0, q1, [&](int nb) { out.push_back(nb); });
  std::sort(out.begin(), out.end());
  return out;
}

int BrickMesh::locate_from(int start, const Point& x) const {
  int id = start;
  while (nodes_[id].first_child >= 0) {
    const Node& n = nodes_[id];
    int c = 0;
    int j = 0;
    for (int a = 0; a < dim(); ++a) {
      if (!(n.split & (1u << a))) continue;
      const double mid = 0.5 * (static_cast<double>(n.box.lo[a]) + static_cast<double>(n.box.hi[a]));
      if (lattice_position(a, x[a]) >= mid) c |= 1 << j;
      ++j;
    }
    id = n.first_child + c;
  }
  return id;
}

int BrickMesh::locate(const Point& x) const {
  std::array<int, kMaxDim> r{0, 0, 0};
  for (int a = 0; a < dim(); ++a) {
    const double s = lattice_position(a, x[a]) / static_cast<double>(kRootSpan);
    r[a] = std::clamp(static_cast<int>(std::floor(s)), 0, roots_[a] - 1);
  }
  return locate_from(root_index(r), x);
}

std::vector<Face> BrickMesh::faces() const {
  std::vector<Face> out;
  const int d = dim();
  for (int id : active_) {
    const LatticeBox& b = nodes_[id].box;
    for (int axis = 0; axis < d; ++axis) {
      for (int side = 0; side < 2; ++side) {
        const std::vector<int> nbs = face_neighbors(id, axis, side);
        if (nbs.empty()) continue;
        bool same = nbs.size() == 1;
        bool finer = true;
        for (int nb : nbs) {
          const LatticeBox& c = nodes_[nb].box;
          for (int a = 0; a < d; ++a) {
            if (a == axis) continue;
            if (c.lo[a] != b.lo[a] || c.hi[a] != b.hi[a]) same = false;
            if (c.lo[a] < b.lo[a] || c.hi[a] > b.hi[a]) finer = false;
          }
        }
        if (same) {
          if (side == 1) out.push_back(Face{axis, id, nbs});
        } else if (finer) {
          out.push_back(Face{axis, id, nbs});
        }
      }
    }
  }
  return out;
}

void BrickMesh::write_snapshot(std::ostream& os) const {
  const auto flags = os.flags();
  const auto prec = os.precision();
  os << "# stfem-brick-mesh dim " << dim() << " bricks " << num_bricks() << " active "
     << num_active() << '\n';
  os << std::setprecision(17);
  for (int id = 0; id < num_bricks(); ++id) {
    const Brick b = brick(id);
    os << id;
    for (int a = 0; a < dim(); ++a) os << ' ' << b.anchor[a];
    for (int a = 0; a < dim(); ++a) os << ' ' << b.sizes[a];
    os << ' ' << (b.status == BrickStatus::active ? "active" : "refined") << '\n';
  }
  os.flags(flags);
  os.precision(prec);
}

bool BrickMesh::refines(const BrickMesh& coarse) const {
  if (coarse.dim() != dim() || coarse.roots_ != roots_) return false;
  if (coarse.num_bricks() > num_bricks()) return false;
  for (int a = 0; a < dim(); ++a) {
    if (coarse.domain_.lower[a] != domain_.lower[a] || coarse.domain_.upper[a] != domain_.upper[a])
      return false;
  }
  for (int id = 0; id < coarse.num_bricks(); ++id) {
    const Node& c = coarse.nodes_[id];
    const Node& f = nodes_[id];
    if (c.box.lo != f.box.lo || c.box.hi != f.box.hi) return false;
    if (c.first_child >= 0 && (c.first_child != f.first_child || c.split != f.split)) return false;
  }
  return true;
}

namespace {

/// Axes along which each of two face-adjacent bricks must be split so that the pair is
/// 1-irregular and the coarser face contains the finer one.
std::pair<unsigned, unsigned> closure_masks(const std::array<int, kMaxDim>& la,
                                            const std::array<int, kMaxDim>& lb, int dim,
                                            int normal) {
  unsigned ma = 0;
  unsigned mb = 0;
  bool a_finer = false;
  bool b_finer = false;
  for (int x = 0; x < dim; ++x) {
    if (la[x] - lb[x] > 1) mb |= 1u << x;
    if (lb[x] - la[x] > 1) ma |= 1u << x;
    if (x == normal) continue;
    if (la[x] > lb[x]) a_finer = true;
    if (lb[x] > la[x]) b_finer = true;
  }
  if (a_finer && b_finer) {
    // Crossed faces: bring b up to a's level along the axes where b is coarser.
    for (int x = 0; x < dim; ++x) {
      if (x != normal && la[x] > lb[x]) mb |= 1u << x;
    }
  }
  return {ma, mb};
}

}  // namespace

BrickMesh refine(const BrickMesh& mesh, std::span<const RefinementDirective> directives) {
  BrickMesh out = mesh;
  const int d = mesh.dim();
  const unsigned all = (1u << d) - 1;
  std::unordered_map<int, unsigned> merged;
  std::vector<int> order;
  for (const RefinementDirective& r : directives) {
    require(r.element >= 0 && r.element < mesh.num_bricks(), ErrorKind::invalid_argument,
            "directive references unknown brick " + std::to_string(r.element));
    require(mesh.is_active(r.element), ErrorKind::stale_directive,
            "directive references refined brick " + std::to_string(r.element));
    require(r.axes != 0 && (r.axes & ~all) == 0, ErrorKind::invalid_argument,
            "directive axes must be a non-empty subset of the mesh axes");
    auto [it, inserted] = merged.try_emplace(r.element, 0u);
    if (inserted) order.push_back(r.element);
    it->second |= r.axes;
  }

  std::vector<int> work;
  auto split_and_queue = [&](int id, unsigned axes) {
    out.split(id, axes);
    const int first = out.nodes_[id].first_child;
    for (int c = 0; c < out.nodes_[id].num_children; ++c) work.push_back(first + c);
  };
  for (int id : order) split_and_queue(id, merged[id]);

  while (!work.empty()) {
    const int e = work.back();
    work.pop_back();
    if (!out.is_active(e)) continue;
    bool e_split = false;
    for (int axis = 0; axis < d && !e_split; ++axis) {
      for (int side = 0; side < 2 && !e_split; ++side) {
        for (int nb : out.face_neighbors(e, axis, side)) {
          const auto [me, them] = closure_masks(out.levels(e), out.levels(nb), d, axis);
          if (them) split_and_queue(nb, them);
          if (me) {
            split_and_queue(e, me);
            e_split = true;
            break;
          }
        }
      }
    }
  }
  out.rebuild_active();
  return out;
}

std::vector<RefinementDirective> uniform_directives(const BrickMesh& mesh) {
  std::vector<RefinementDirective> out;
  const unsigned all = (1u << mesh.dim()) - 1;
  for (int id : mesh.active()) out.push_back({id, all});
  return out;
}

}  // namespace stfem
