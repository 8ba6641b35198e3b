// Assembly of small linear elastodynamic systems: 1D mass-spring chains and
// 2D plane-stress triangle meshes with lumped mass and Rayleigh damping.
#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <array>
#include <random>
#include <string>
#include <vector>

#include "wiggly/errors.hpp"
#include "wiggly/types.hpp"

namespace wiggly {

// The physical system
//   mass * u'' + (alpha*mass + beta*stiffness) * u' + stiffness * u + load = 0
// over the free scalar DOF. `load` is the constant vector exactly as it
// appears on the left-hand side of the equation of motion, so an external
// force f enters as load = -f. The damping matrix is derived, never stored.
template <class Scalar>
struct ModelSystemT {
  MatX<Scalar> mass;       // symmetric positive-definite, n x n
  MatX<Scalar> stiffness;  // symmetric positive-semidefinite, n x n
  Scalar alpha = 0;        // Rayleigh mass coefficient, >= 0
  Scalar beta = 0;         // Rayleigh stiffness coefficient, >= 0
  VecX<Scalar> load;       // constant left-hand-side vector, length n

  Index dim() const { return mass.rows(); }
  MatX<Scalar> damping() const { return alpha * mass + beta * stiffness; }
};

template <class Scalar>
struct SpringT {
  Index i = 0;        // first mass index, or -1 for ground
  Index j = 0;        // second mass index, or -1 for ground
  Scalar k = 0;       // spring stiffness, > 0
};

// Point masses in a row; DOF index == mass index before clamping.
template <class Scalar>
struct ChainSpecT {
  std::vector<Scalar> masses;
  std::vector<SpringT<Scalar>> springs;
  std::vector<Index> fixed;     // clamped DOF indices
  std::vector<Scalar> gravity;  // per-DOF constant acceleration (may be empty)
};

// Linear-triangle plane-stress mesh; two DOF (x, y) per vertex.
template <class Scalar>
struct Mesh2DSpecT {
  std::vector<std::array<Scalar, 2>> vertices;
  std::vector<std::array<Index, 3>> triangles;
  Scalar young = 1;
  Scalar poisson = 0;  // in [0, 0.5)
  Scalar density = 1;
  std::vector<Index> fixed;           // clamped vertex indices
  std::array<Scalar, 2> gravity{0, 0};  // acceleration
};

// Invariant checks shared by every assembled system. Throws ValidationError.
template <class Scalar>
void validate(const ModelSystemT<Scalar>& sys) {
  const Index n = sys.dim();
  if (n == 0) throw ValidationError("empty system");
  if (sys.mass.cols() != n || sys.stiffness.rows() != n ||
      sys.stiffness.cols() != n || sys.load.size() != n)
    throw ValidationError("system dimensions disagree");
  if (!(sys.alpha >= 0) || !(sys.beta >= 0))
    throw ValidationError("Rayleigh coefficients must be non-negative");

  const Scalar m_scale = sys.mass.template lpNorm<Eigen::Infinity>();
  const Scalar k_scale = sys.stiffness.template lpNorm<Eigen::Infinity>();
  if ((sys.mass - sys.mass.transpose()).template lpNorm<Eigen::Infinity>() >
      Scalar(1e-12) * m_scale)
    throw ValidationError("mass matrix is not symmetric");
  if ((sys.stiffness - sys.stiffness.transpose())
          .template lpNorm<Eigen::Infinity>() > Scalar(1e-12) * k_scale)
    throw ValidationError("stiffness matrix is not symmetric");

  Eigen::LLT<MatX<Scalar>> llt(sys.mass);
  if (llt.info() != Eigen::Success)
    throw ValidationError("mass matrix is not positive definite");

  // Probe semidefiniteness of K; a handful of random directions is enough
  // to catch assembly sign errors.
  std::mt19937_64 rng(0x5eed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (int probe = 0; probe < 16; ++probe) {
    VecX<Scalar> x(n);
    for (Index i = 0; i < n; ++i) x[i] = Scalar(unit(rng));
    const Scalar quad = x.dot(sys.stiffness * x);
    if (quad < -Scalar(1e-10) * k_scale * x.squaredNorm())
      throw ValidationError("stiffness matrix is indefinite");
  }
}

template <class Scalar>
ModelSystemT<Scalar> assemble_chain(const ChainSpecT<Scalar>& spec) {
  const Index total = Index(spec.masses.size());
  if (total == 0) throw ValidationError("chain has no masses");
  for (const Scalar& m : spec.masses)
    if (!(m > 0)) throw ValidationError("chain mass must be positive");
  std::vector<bool> clamped(size_t(total), false);
  for (Index f : spec.fixed) {
    if (f < 0 || f >= total)
      throw ValidationError("fixed index out of range");
    clamped[size_t(f)] = true;
  }
  if (!spec.gravity.empty() && Index(spec.gravity.size()) != total)
    throw ValidationError("gravity length must match mass count");

  // Map original DOF -> free DOF index (-1 when clamped).
  std::vector<Index> remap(size_t(total), -1);
  Index n = 0;
  for (Index i = 0; i < total; ++i)
    if (!clamped[size_t(i)]) remap[size_t(i)] = n++;
  if (n == 0) throw ValidationError("empty system");

  ModelSystemT<Scalar> sys;
  sys.mass = MatX<Scalar>::Zero(n, n);
  sys.stiffness = MatX<Scalar>::Zero(n, n);
  sys.load = VecX<Scalar>::Zero(n);
  for (Index i = 0; i < total; ++i)
    if (remap[size_t(i)] >= 0)
      sys.mass(remap[size_t(i)], remap[size_t(i)]) = spec.masses[size_t(i)];

  for (const auto& s : spec.springs) {
    if (!(s.k > 0)) throw ValidationError("spring stiffness must be positive");
    if (s.i < -1 || s.i >= total || s.j < -1 || s.j >= total || s.i == s.j)
      throw ValidationError("spring endpoint out of range");
    const Index a = (s.i >= 0 && !clamped[size_t(s.i)]) ? remap[size_t(s.i)] : -1;
    const Index b = (s.j >= 0 && !clamped[size_t(s.j)]) ? remap[size_t(s.j)] : -1;
    if (a >= 0) sys.stiffness(a, a) += s.k;
    if (b >= 0) sys.stiffness(b, b) += s.k;
    if (a >= 0 && b >= 0) {
      sys.stiffness(a, b) -= s.k;
      sys.stiffness(b, a) -= s.k;
    }
  }

  if (!spec.gravity.empty())
    for (Index i = 0; i < total; ++i)
      if (remap[size_t(i)] >= 0)
        sys.load[remap[size_t(i)]] =
            -spec.masses[size_t(i)] * spec.gravity[size_t(i)];

  validate(sys);
  return sys;
}

template <class Scalar>
ModelSystemT<Scalar> assemble_mesh2d(const Mesh2DSpecT<Scalar>& spec) {
  const Index nv = Index(spec.vertices.size());
  if (nv == 0) throw ValidationError("mesh has no vertices");
  if (!(spec.poisson >= 0 && spec.poisson < Scalar(0.5)))
    throw ValidationError("Poisson ratio must lie in [0, 0.5)");
  if (!(spec.young > 0) || !(spec.density > 0))
    throw ValidationError("Young's modulus and density must be positive");

  Scalar lo_x = spec.vertices[0][0], hi_x = lo_x;
  Scalar lo_y = spec.vertices[0][1], hi_y = lo_y;
  for (const auto& v : spec.vertices) {
    lo_x = std::min(lo_x, v[0]); hi_x = std::max(hi_x, v[0]);
    lo_y = std::min(lo_y, v[1]); hi_y = std::max(hi_y, v[1]);
  }
  const Scalar bbox = std::max(hi_x - lo_x, hi_y - lo_y);

  std::vector<bool> clamped(size_t(nv), false);
  for (Index f : spec.fixed) {
    if (f < 0 || f >= nv) throw ValidationError("fixed index out of range");
    clamped[size_t(f)] = true;
  }
  std::vector<Index> remap(size_t(nv), -1);
  Index free_vertices = 0;
  for (Index i = 0; i < nv; ++i)
    if (!clamped[size_t(i)]) remap[size_t(i)] = free_vertices++;
  if (free_vertices == 0) throw ValidationError("empty system");
  const Index n = 2 * free_vertices;

  // Plane-stress constitutive matrix.
  const Scalar nu = spec.poisson;
  const Scalar factor = spec.young / (1 - nu * nu);
  Eigen::Matrix<Scalar, 3, 3> constitutive;
  constitutive << factor, factor * nu, 0,
                  factor * nu, factor, 0,
                  0, 0, factor * (1 - nu) / 2;

  MatX<Scalar> stiffness = MatX<Scalar>::Zero(n, n);
  VecX<Scalar> lumped = VecX<Scalar>::Zero(n);

  Index tri_index = 0;
  for (const auto& tri : spec.triangles) {
    for (Index c : tri)
      if (c < 0 || c >= nv)
        throw ValidationError("triangle vertex index out of range");
    const Scalar x0 = spec.vertices[size_t(tri[0])][0], y0 = spec.vertices[size_t(tri[0])][1];
    const Scalar x1 = spec.vertices[size_t(tri[1])][0], y1 = spec.vertices[size_t(tri[1])][1];
    const Scalar x2 = spec.vertices[size_t(tri[2])][0], y2 = spec.vertices[size_t(tri[2])][1];
    const Scalar area2 = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0);
    const Scalar area = area2 / 2;
    if (!(area > Scalar(1e-12) * bbox * bbox))
      throw ValidationError("degenerate triangle #" + std::to_string(tri_index));

    // Constant-strain triangle: strain = B * [u0x u0y u1x u1y u2x u2y].
    const Scalar b0 = y1 - y2, b1 = y2 - y0, b2 = y0 - y1;
    const Scalar c0 = x2 - x1, c1 = x0 - x2, c2 = x1 - x0;
    Eigen::Matrix<Scalar, 3, 6> strain_op;
    strain_op << b0, 0, b1, 0, b2, 0,
                 0, c0, 0, c1, 0, c2,
                 c0, b0, c1, b1, c2, b2;
    strain_op /= area2;
    const Eigen::Matrix<Scalar, 6, 6> element =
        area * strain_op.transpose() * constitutive * strain_op;

    const Scalar vertex_mass = spec.density * area / 3;
    for (int a = 0; a < 3; ++a) {
      const Index ra = remap[size_t(tri[size_t(a)])];
      if (ra < 0) continue;
      lumped[2 * ra] += vertex_mass;
      lumped[2 * ra + 1] += vertex_mass;
      for (int b = 0; b < 3; ++b) {
        const Index rb = remap[size_t(tri[size_t(b)])];
        if (rb < 0) continue;
        for (int da = 0; da < 2; ++da)
          for (int db = 0; db < 2; ++db)
            stiffness(2 * ra + da, 2 * rb + db) +=
                element(2 * a + da, 2 * b + db);
      }
    }
    ++tri_index;
  }

  ModelSystemT<Scalar> sys;
  sys.mass = lumped.asDiagonal();
  sys.stiffness = (stiffness + stiffness.transpose()) / 2;
  sys.load = VecX<Scalar>::Zero(n);
  for (Index i = 0; i < free_vertices; ++i) {
    sys.load[2 * i] = -lumped[2 * i] * spec.gravity[0];
    sys.load[2 * i + 1] = -lumped[2 * i + 1] * spec.gravity[1];
  }

  validate(sys);
  return sys;
}

using ModelSystem = ModelSystemT<double>;
using Spring = SpringT<double>;
using ChainSpec = ChainSpecT<double>;
using Mesh2DSpec = Mesh2DSpecT<double>;

}  // namespace wiggly
