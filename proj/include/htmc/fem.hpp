#ifndef HTMC_FEM_HPP
#define HTMC_FEM_HPP

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <array>
#include <cmath>
#include <fstream>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "htmc/mesh.hpp"

namespace htmc {

// Diffusion coefficient sampled at mesh nodes.
struct CoefficientField {
  Eigen::VectorXd values;
  std::string provenance;

  void check_positive() const {
    for (Eigen::Index i = 0; i < values.size(); ++i)
      if (!(values[i] > 0.0))
        throw std::invalid_argument("coefficient field must be strictly positive");
  }
};

struct FemSolution {
  MeshLevel level;
  Eigen::VectorXd values;

  std::size_t dofs() const { return static_cast<std::size_t>(values.size()); }
};

// Dirichlet data on the x1=0 and x1=1 faces; the x2 faces carry zero Neumann.
struct BoundarySpec {
  double left = 0.0;
  double right = 1.0;
};

using SourceFunction = std::function<double(double, double)>;

namespace detail {

inline std::array<std::array<double, 2>, 3> p1_gradients(
    const std::array<double, 2>& p0, const std::array<double, 2>& p1,
    const std::array<double, 2>& p2, double& area) {
  const double x0 = p0[0], y0 = p0[1];
  const double x1 = p1[0], y1 = p1[1];
  const double x2 = p2[0], y2 = p2[1];
  const double det = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0);
  area = 0.5 * std::abs(det);
  return {{{(y1 - y2) / det, (x2 - x1) / det},
           {(y2 - y0) / det, (x0 - x2) / det},
           {(y0 - y1) / det, (x1 - x0) / det}}};
}

}  // namespace detail

// Solves div(K grad u) = f with the boundary conditions above. The weak form
// of this sign convention is  integral(K grad u . grad v) = -integral(f v).
// Solved by direct sparse Cholesky (AMD-ordered) at every level.
inline FemSolution assemble_and_solve(const Mesh& mesh, const CoefficientField& K,
                                      const SourceFunction& f,
                                      const BoundarySpec& bc = {}) {
  K.check_positive();
  const MeshLevel level = mesh.level();
  const int m = level.nodes_per_side();
  const std::size_t n_nodes = level.node_count();
  if (static_cast<std::size_t>(K.values.size()) != n_nodes)
    throw std::invalid_argument("coefficient field size does not match mesh");

  // Dirichlet nodes: first and last column of the grid.
  std::vector<int> free_index(n_nodes, -1);
  Eigen::VectorXd dirichlet(n_nodes);
  dirichlet.setZero();
  std::vector<char> is_dirichlet(n_nodes, 0);
  int n_free = 0;
  for (int j = 0; j < m; ++j) {
    for (int i = 0; i < m; ++i) {
      const int idx = j * m + i;
      if (i == 0) {
        is_dirichlet[idx] = 1;
        dirichlet[idx] = bc.left;
      } else if (i == m - 1) {
        is_dirichlet[idx] = 1;
        dirichlet[idx] = bc.right;
      } else {
        free_index[idx] = n_free++;
      }
    }
  }

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(mesh.triangles().size() * 9);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n_free);

  for (const auto& tri : mesh.triangles()) {
    const auto& p0 = mesh.nodes()[tri[0]];
    const auto& p1 = mesh.nodes()[tri[1]];
    const auto& p2 = mesh.nodes()[tri[2]];
    double area;
    const auto grads = detail::p1_gradients(p0, p1, p2, area);
    // Midpoint (centroid) rule: K interpolated from the vertices.
    const double k_mid = (K.values[tri[0]] + K.values[tri[1]] + K.values[tri[2]]) / 3.0;
    const double cx = (p0[0] + p1[0] + p2[0]) / 3.0;
    const double cy = (p0[1] + p1[1] + p2[1]) / 3.0;
    const double f_mid = f ? f(cx, cy) : 0.0;

    for (int a = 0; a < 3; ++a) {
      const int ga = tri[a];
      const int ra = free_index[ga];
      if (ra < 0) continue;
      // load: -f, one-point rule, weight area/3 per vertex
      rhs[ra] -= f_mid * area / 3.0;
      for (int b = 0; b < 3; ++b) {
        const int gb = tri[b];
        const double k_ab = k_mid * area *
                            (grads[a][0] * grads[b][0] + grads[a][1] * grads[b][1]);
        if (is_dirichlet[gb]) {
          rhs[ra] -= k_ab * dirichlet[gb];
        } else {
          triplets.emplace_back(ra, free_index[gb], k_ab);
        }
      }
    }
  }

  Eigen::SparseMatrix<double> A(n_free, n_free);
  A.setFromTriplets(triplets.begin(), triplets.end());

  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> solver;
  solver.compute(A);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("sparse Cholesky failed (internal error)");
  const Eigen::VectorXd u_free = solver.solve(rhs);

  FemSolution sol{level, Eigen::VectorXd(n_nodes)};
  for (std::size_t idx = 0; idx < n_nodes; ++idx)
    sol.values[idx] = is_dirichlet[idx] ? dirichlet[idx] : u_free[free_index[idx]];
  return sol;
}

// Point evaluation of a nodal field on a mesh of matching level.
class FieldEvaluator {
public:
  explicit FieldEvaluator(MeshLevel level) : mesh_(level) {}

  double operator()(const Eigen::VectorXd& nodal, double x, double y) const {
    const auto loc = mesh_.locate(x, y);
    const auto& tri = mesh_.triangles()[loc.triangle];
    return loc.bary[0] * nodal[tri[0]] + loc.bary[1] * nodal[tri[1]] +
           loc.bary[2] * nodal[tri[2]];
  }

  const Mesh& mesh() const { return mesh_; }

private:
  Mesh mesh_;
};

// Interior observation points, evaluated by P1 interpolation.
struct ObservationLayout {
  std::vector<std::array<double, 2>> points;

  void validate() const {
    for (const auto& p : points)
      if (!(p[0] > 0.0 && p[0] < 1.0 && p[1] > 0.0 && p[1] < 1.0))
        throw std::invalid_argument("observation point must be strictly interior");
  }

  // Default 6x6 lattice at (i/7, j/7), i,j in 1..6.
  static ObservationLayout lattice6x6() {
    ObservationLayout layout;
    for (int j = 1; j <= 6; ++j)
      for (int i = 1; i <= 6; ++i)
        layout.points.push_back({i / 7.0, j / 7.0});
    return layout;
  }
};

inline Eigen::VectorXd observe(const FemSolution& u, const ObservationLayout& layout) {
  layout.validate();
  const FieldEvaluator eval(u.level);
  Eigen::VectorXd out(static_cast<Eigen::Index>(layout.points.size()));
  for (std::size_t i = 0; i < layout.points.size(); ++i)
    out[static_cast<Eigen::Index>(i)] =
        eval(u.values, layout.points[i][0], layout.points[i][1]);
  return out;
}

// Discrete L2 norm of u_a - u_b on the finer of the two meshes; the coarser
// field is prolonged by P1 interpolation (dyadic grids are nested).
inline double l2_norm_difference(const FemSolution& u_a, const FemSolution& u_b) {
  const FemSolution& fine = (u_a.level.l >= u_b.level.l) ? u_a : u_b;
  const FemSolution& coarse = (u_a.level.l >= u_b.level.l) ? u_b : u_a;

  const Mesh fine_mesh(fine.level);
  Eigen::VectorXd diff(fine.values.size());
  if (coarse.level.l == fine.level.l) {
    diff = fine.values - coarse.values;
  } else {
    const FieldEvaluator coarse_eval(coarse.level);
    for (std::size_t i = 0; i < fine.level.node_count(); ++i) {
      const auto& p = fine_mesh.nodes()[i];
      diff[static_cast<Eigen::Index>(i)] =
          fine.values[static_cast<Eigen::Index>(i)] - coarse_eval(coarse.values, p[0], p[1]);
    }
  }

  // Exact elementwise integral of the squared P1 difference.
  double acc = 0.0;
  const double area = 0.5 * fine.level.h() * fine.level.h();
  for (const auto& tri : fine_mesh.triangles()) {
    const double v0 = diff[tri[0]], v1 = diff[tri[1]], v2 = diff[tri[2]];
    acc += area / 6.0 * (v0 * v0 + v1 * v1 + v2 * v2 + v0 * v1 + v0 * v2 + v1 * v2);
  }
  return std::sqrt(acc);
}

// CSV dump: header x,y,value, row-major node order.
inline void dump_solution_csv(const FemSolution& u, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out.precision(17);
  out << "x,y,value\n";
  const Mesh mesh(u.level);
  for (std::size_t i = 0; i < u.level.node_count(); ++i) {
    const auto& p = mesh.nodes()[i];
    out << p[0] << ',' << p[1] << ',' << u.values[static_cast<Eigen::Index>(i)] << '\n';
  }
}

}  // namespace htmc

#endif
