#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "stfem/common.hpp"

namespace stfem {

/// A spatial segment {x_normal = position, from <= x_along <= to} carrying a Dirichlet tag.
/// It must coincide with lines of the initial grid.
struct SlitFacet {
  int normal_axis = 1;
  double position = 0.0;
  int along_axis = 0;
  double from = 0.0;
  double to = 1.0;
};

/// Box-shaped space-time cylinder. The last axis is time.
struct DomainSpec {
  int dim = 2;
  Point lower{};
  Point upper{};
  std::optional<SlitFacet> slit;

  int spatial_dim() const { return dim - 1; }
  int time_axis() const { return dim - 1; }
  double terminal_time() const { return upper[dim - 1]; }
  double volume() const;

  static DomainSpec unit_cylinder(int spatial_dim, double terminal_time = 1.0);
};

enum class BrickStatus : std::uint8_t { active, refined };

/// Geometric view of one element of the forest.
struct Brick {
  int id = -1;
  int dim = 0;
  Point anchor{};
  Point sizes{};
  std::array<int, kMaxDim> axis_levels{};
  BrickStatus status = BrickStatus::active;

  double h(int axis) const { return sizes[axis]; }
  double h_x() const;
  double h_t() const { return sizes[dim - 1]; }
  double volume() const;
  Point upper() const;
};

enum class HkConvention { temporal, min, max };

struct ElementSizes {
  Point h{};
  double h_x = 0.0;
  double h_t = 0.0;
  double h_K = 0.0;
};

ElementSizes element_sizes(const Brick& brick, HkConvention convention = HkConvention::temporal);

/// Bisect `element` along every axis set in the `axes` bitmask (bit i = axis i).
struct RefinementDirective {
  int element = -1;
  unsigned axes = 0;
};

/// Interface between face-adjacent active bricks across `axis`. For a conforming face
/// `slaves` holds the single brick on the upper side; for a hanging face the master is
/// the coarse brick and `slaves` the finer bricks tiling its face.
struct Face {
  int axis = 0;
  int master = -1;
  std::vector<int> slaves;
  bool hanging() const { return slaves.size() > 1; }
};

/// Integer box in lattice units; the root cell i along an axis covers [i, i+1] * 2^kMaxLevel.
struct LatticeBox {
  std::array<Lattice, kMaxDim> lo{};
  std::array<Lattice, kMaxDim> hi{};
};

/// Forest of axis-aligned bricks over a tensor grid of root cells.
/// Refinement never removes nodes, so brick ids stay valid across refine() calls.
class BrickMesh {
 public:
  const DomainSpec& domain() const { return domain_; }
  int dim() const { return domain_.dim; }
  const std::array<int, kMaxDim>& root_cells() const { return roots_; }

  std::span<const int> active() const { return active_; }
  int num_active() const { return static_cast<int>(active_.size()); }
  int num_bricks() const { return static_cast<int>(nodes_.size()); }

  bool is_active(int id) const { return nodes_[id].first_child < 0; }
  Brick brick(int id) const;
  const LatticeBox& box(int id) const { return nodes_[id].box; }
  std::array<int, kMaxDim> levels(int id) const;
  int parent(int id) const { return nodes_[id].parent; }
  unsigned split_axes(int id) const { return nodes_[id].split; }
  std::vector<int> children(int id) const;
  int root_of(int id) const;

  /// Physical coordinate of a (possibly fractional) lattice position along `axis`.
  double coordinate(int axis, double lattice) const;
  /// Lattice position of a physical coordinate (fractional).
  double lattice_position(int axis, double x) const;

  /// Active bricks sharing a (d)-dimensional face with `id` on the given side (0 lower, 1 upper).
  std::vector<int> face_neighbors(int id, int axis, int side) const;

  /// Active bricks whose open box meets the open box (q0, q1) given in doubled lattice units.
  template <class Fn>
  void for_each_leaf(const std::array<Lattice, kMaxDim>& q0,
                     const std::array<Lattice, kMaxDim>& q1, Fn&& fn) const;

  /// Active brick containing x (ties resolved toward the upper brick, clamped to the domain).
  int locate(const Point& x) const;
  /// Active descendant of `start` (or the brick itself) containing x.
  int locate_from(int start, const Point& x) const;

  std::vector<Face> faces() const;

  /// One brick per line: id, anchor, sizes, status. Active and refined bricks both appear.
  void write_snapshot(std::ostream& os) const;

  /// True when every active brick of `this` is a (non-strict) descendant of a brick of `coarse`.
  bool refines(const BrickMesh& coarse) const;

  friend BrickMesh build_tensor_mesh(const DomainSpec& domain, std::span<const int> cells);
  friend BrickMesh refine(const BrickMesh& mesh, std::span<const RefinementDirective> directives);

 private:
  struct Node {
    LatticeBox box;
    std::array<std::int8_t, kMaxDim> level{};
    int parent = -1;
    int first_child = -1;
    std::uint8_t split = 0;
    std::uint8_t num_children = 0;
  };

  void split(int id, unsigned axes);
  void rebuild_active();
  int root_index(const std::array<int, kMaxDim>& r) const;

  DomainSpec domain_;
  std::array<int, kMaxDim> roots_{1, 1, 1};
  std::vector<Node> nodes_;
  std::vector<int> active_;
};

BrickMesh build_tensor_mesh(const DomainSpec& domain, std::span<const int> cells);
BrickMesh refine(const BrickMesh& mesh, std::span<const RefinementDirective> directives);

/// Directive set that splits every active brick along all axes.
std::vector<RefinementDirective> uniform_directives(const BrickMesh& mesh);

inline constexpr Lattice kRootSpan = Lattice{1} << kMaxLevel;

template <class Fn>
void BrickMesh::for_each_leaf(const std::array<Lattice, kMaxDim>& q0,
                              const std::array<Lattice, kMaxDim>& q1, Fn&& fn) const {
  const int d = dim();
  std::array<int, kMaxDim> rlo{0, 0, 0};
  std::array<int, kMaxDim> rhi{0, 0, 0};
  const Lattice span2 = 2 * kRootSpan;
  for (int a = 0; a < d; ++a) {
    auto floor_div = [](Lattice x, Lattice m) { return x >= 0 ? x / m : -((-x + m - 1) / m); };
    Lattice lo = floor_div(q0[a], span2);
    Lattice hi = floor_div(q1[a] - 1, span2);
    lo = std::max<Lattice>(lo, 0);
    hi = std::min<Lattice>(hi, roots_[a] - 1);
    if (lo > hi) return;
    rlo[a] = static_cast<int>(lo);
    rhi[a] = static_cast<int>(hi);
  }
  auto meets = [&](const LatticeBox& b) {
    for (int a = 0; a < d; ++a) {
      if (!(2 * b.lo[a] < q1[a] && q0[a] < 2 * b.hi[a])) return false;
    }
    return true;
  };
  std::vector<int> stack;
  std::array<int, kMaxDim> r{0, 0, 0};
  for (r[2] = rlo[2]; r[2] <= rhi[2]; ++r[2]) {
    for (r[1] = rlo[1]; r[1] <= rhi[1]; ++r[1]) {
      for (r[0] = rlo[0]; r[0] <= rhi[0]; ++r[0]) {
        stack.push_back(root_index(r));
        while (!stack.empty()) {
          const int id = stack.back();
          stack.pop_back();
          const Node& n = nodes_[id];
          if (!meets(n.box)) continue;
          if (n.first_child < 0) {
            fn(id);
          } else {
            for (int c = n.num_children - 1; c >= 0; --c) stack.push_back(n.first_child + c);
          }
        }
      }
    }
  }
}

}  // namespace stfem
