#ifndef HTMC_MESH_HPP
#define HTMC_MESH_HPP

#include <array>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace htmc {

// Dyadic refinement level of the uniform unit-square mesh, h = 2^-l.
struct MeshLevel {
  int l;

  explicit MeshLevel(int level) : l(level) {
    if (l < 1 || l > 10) throw std::invalid_argument("mesh level must be in [1, 10]");
  }

  int cells_per_side() const { return 1 << l; }
  int nodes_per_side() const { return (1 << l) + 1; }
  double h() const { return 1.0 / static_cast<double>(1 << l); }
  std::size_t node_count() const {
    const std::size_t n = nodes_per_side();
    return n * n;
  }
  std::size_t triangle_count() const {
    const std::size_t c = cells_per_side();
    return 2 * c * c;
  }
  bool operator==(const MeshLevel& o) const { return l == o.l; }
};

// Structured triangulation of [0,1]^2: each grid square is split along the
// diagonal from its lower-left to upper-right corner. Node ordering is
// row-major, x fastest.
class Mesh {
public:
  explicit Mesh(MeshLevel level) : level_(level) {
    const int n = level.cells_per_side();
    const int m = n + 1;
    nodes_.reserve(static_cast<std::size_t>(m) * m);
    const double h = level.h();
    for (int j = 0; j < m; ++j)
      for (int i = 0; i < m; ++i)
        nodes_.push_back({i * h, j * h});
    triangles_.reserve(2u * n * n);
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) {
        const int a = j * m + i;
        const int b = a + 1;
        const int c = a + m + 1;
        const int d = a + m;
        triangles_.push_back({a, b, c});  // lower
        triangles_.push_back({a, c, d});  // upper
      }
    }
  }

  MeshLevel level() const { return level_; }
  const std::vector<std::array<double, 2>>& nodes() const { return nodes_; }
  const std::vector<std::array<int, 3>>& triangles() const { return triangles_; }

  int node_index(int i, int j) const { return j * level_.nodes_per_side() + i; }

  // Locates the triangle containing (x, y) and returns (triangle index,
  // barycentric coordinates w.r.t. its three vertices).
  struct Location {
    int triangle;
    std::array<double, 3> bary;
  };

  Location locate(double x, double y) const {
    if (x < 0.0 || x > 1.0 || y < 0.0 || y > 1.0)
      throw std::invalid_argument("point outside [0,1]^2");
    const int n = level_.cells_per_side();
    const double h = level_.h();
    int i = static_cast<int>(x / h);
    int j = static_cast<int>(y / h);
    if (i >= n) i = n - 1;
    if (j >= n) j = n - 1;
    const double xl = x / h - i;  // local coords in [0,1]
    const double yl = y / h - j;
    const std::size_t cell = 2 * (static_cast<std::size_t>(j) * n + i);
    if (yl <= xl) {
      // lower triangle (a, b, c): bary = (1-xl, xl-yl, yl)
      return {static_cast<int>(cell), {1.0 - xl, xl - yl, yl}};
    }
    // upper triangle (a, c, d): bary = (1-yl, xl, yl-xl)
    return {static_cast<int>(cell + 1), {1.0 - yl, xl, yl - xl}};
  }

private:
  MeshLevel level_;
  std::vector<std::array<double, 2>> nodes_;
  std::vector<std::array<int, 3>> triangles_;
};

inline Mesh build_mesh(int l) { return Mesh(MeshLevel(l)); }

}  // namespace htmc

#endif
