// Brute-force reference solver: direct time transcription of the spacetime
// functionals on a uniform grid with second-order finite differences,
// minimized as a sparse quadratic (or nonlinear least-squares) problem.
// Deliberately independent of the modal/wiggly machinery: it works on raw
// displacement samples only.
#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/Sparse>
#include <cmath>
#include <vector>

#include "wiggly/constraints.hpp"
#include "wiggly/errors.hpp"
#include "wiggly/model.hpp"
#include "wiggly/trajectory.hpp"
#include "wiggly/warp_map.hpp"

namespace wiggly {

namespace detail {

// One finite-difference stencil row: sample offsets and coefficients.
template <class Scalar>
struct StencilT {
  Index base[4];
  Scalar coeff[4];
  int size;
};

// Second-order velocity stencil at sample j of N+1 samples.
template <class Scalar>
StencilT<Scalar> velocity_stencil(Index j, Index last, Scalar dt) {
  StencilT<Scalar> s;
  if (j == 0) {
    s = {{0, 1, 2, 0},
         {Scalar(-1.5) / dt, Scalar(2) / dt, Scalar(-0.5) / dt, 0},
         3};
  } else if (j == last) {
    s = {{last, last - 1, last - 2, 0},
         {Scalar(1.5) / dt, Scalar(-2) / dt, Scalar(0.5) / dt, 0},
         3};
  } else {
    s = {{j - 1, j + 1, 0, 0}, {Scalar(-0.5) / dt, Scalar(0.5) / dt, 0, 0}, 2};
  }
  return s;
}

// Second-order acceleration stencil at sample j.
template <class Scalar>
StencilT<Scalar> acceleration_stencil(Index j, Index last, Scalar dt) {
  const Scalar inv = 1 / (dt * dt);
  StencilT<Scalar> s;
  if (j == 0) {
    s = {{0, 1, 2, 3}, {2 * inv, -5 * inv, 4 * inv, -inv}, 4};
  } else if (j == last) {
    s = {{last, last - 1, last - 2, last - 3},
         {2 * inv, -5 * inv, 4 * inv, -inv},
         4};
  } else {
    s = {{j - 1, j, j + 1, 0}, {inv, -2 * inv, inv, 0}, 3};
  }
  return s;
}

template <class Scalar>
VecX<Scalar> apply_stencil(const StencilT<Scalar>& s,
                           const MatX<Scalar>& samples, Index /*n*/) {
  VecX<Scalar> out = s.coeff[0] * samples.row(s.base[0]).transpose();
  for (int p = 1; p < s.size; ++p)
    out += s.coeff[p] * samples.row(s.base[p]).transpose();
  return out;
}

}  // namespace detail

// Uniform transcription grid hitting every constraint node exactly.
template <class Scalar>
struct TranscriptionGridT {
  VecX<Scalar> times;
  Scalar dt = 0;
  std::vector<Index> node_samples;  // grid index of each constraint node
};

template <class Scalar>
TranscriptionGridT<Scalar> make_grid(const VecX<Scalar>& nodes, Scalar dt) {
  if (!(dt > 0)) throw ValidationError("grid step must be positive");
  if (nodes.size() < 2) throw ValidationError("grid needs >= 2 nodes");
  const Scalar t0 = nodes[0];
  TranscriptionGridT<Scalar> grid;
  grid.dt = dt;
  grid.node_samples.resize(size_t(nodes.size()));
  for (Index k = 0; k < nodes.size(); ++k) {
    const Scalar exact = (nodes[k] - t0) / dt;
    const Index j = Index(std::llround(double(exact)));
    if (std::abs(exact - Scalar(j)) * dt >
        Scalar(1e-9) * std::max<Scalar>(1, std::abs(nodes[k])))
      throw ValidationError("grid step does not divide the node spacing");
    grid.node_samples[size_t(k)] = j;
  }
  const Index total = grid.node_samples.back() + 1;
  grid.times.resize(total);
  for (Index j = 0; j < total; ++j) grid.times[j] = t0 + Scalar(j) * dt;
  return grid;
}

// Discrete spacetime energy of a sampled trajectory: trapezoid-weighted sum
// of the M^{-1}-norm of the force residual, derivatives by the stencils
// above. Requires >= 4 samples.
template <class Scalar>
Scalar discrete_energy(const ModelSystemT<Scalar>& sys,
                       const TrajectoryT<Scalar>& traj) {
  const Index last = traj.samples() - 1;
  if (last < 3) throw ValidationError("discrete energy needs >= 4 samples");
  const Scalar dt = traj.times[1] - traj.times[0];
  const MatX<Scalar> damping = sys.damping();
  Eigen::LLT<MatX<Scalar>> mass_llt(sys.mass);
  Scalar acc = 0;
  for (Index j = 0; j <= last; ++j) {
    const VecX<Scalar> vel = detail::apply_stencil(
        detail::velocity_stencil<Scalar>(j, last, dt), traj.displacements,
        sys.dim());
    const VecX<Scalar> accel = detail::apply_stencil(
        detail::acceleration_stencil<Scalar>(j, last, dt), traj.displacements,
        sys.dim());
    const VecX<Scalar> residual = sys.mass * accel + damping * vel +
                                  sys.stiffness * traj.displacements.row(j).transpose() +
                                  sys.load;
    const Scalar weight = (j == 0 || j == last) ? dt / 2 : dt;
    acc += weight / 2 * residual.dot(mass_llt.solve(residual));
  }
  return acc;
}

namespace detail {

template <class Scalar>
Index sample_of_node(const TrajectoryT<Scalar>& traj, Scalar t) {
  const Scalar dt = traj.times[1] - traj.times[0];
  const Index j = Index(std::llround(double((t - traj.times[0]) / dt)));
  if (j < 0 || j >= traj.samples() ||
      std::abs(traj.times[j] - t) > Scalar(1e-9) * std::max<Scalar>(1, std::abs(t)))
    throw ValidationError("constraint node does not lie on the sample grid");
  return j;
}

}  // namespace detail

// E_C evaluated at the grid indices of the constraint nodes.
template <class Scalar>
Scalar discrete_constraint_energy(const ConstraintSetT<Scalar>& constraints,
                                  const TrajectoryT<Scalar>& traj) {
  const Index last = traj.samples() - 1;
  const Scalar dt = traj.times[1] - traj.times[0];
  Scalar acc = 0;
  for (Index k = 0; k < constraints.node_count(); ++k) {
    const auto& c = constraints.at[size_t(k)];
    if (!c.has_position() && !c.has_velocity()) continue;
    const Index j = detail::sample_of_node(traj, constraints.nodes[k]);
    if (c.has_position())
      acc += constraints.position_weight(k) / 2 *
             (c.position * traj.displacements.row(j).transpose() -
              c.position_target)
                 .squaredNorm();
    if (c.has_velocity()) {
      const VecX<Scalar> vel = detail::apply_stencil(
          detail::velocity_stencil<Scalar>(j, last, dt), traj.displacements,
          traj.dim());
      acc += constraints.velocity_weight(k) / 2 *
             (c.velocity * vel - c.velocity_target).squaredNorm();
    }
  }
  return acc;
}

template <class Scalar>
Scalar discrete_objective(const ModelSystemT<Scalar>& sys,
                          const ConstraintSetT<Scalar>& constraints,
                          const TrajectoryT<Scalar>& traj) {
  return discrete_energy(sys, traj) +
         discrete_constraint_energy(constraints, traj);
}

// Warped constraint energy on the grid; the velocity residual applies the
// warp differential at u(t_k) to the stencil velocity.
template <class Scalar>
Scalar discrete_constraint_energy_warped(
    const WarpedConstraintProblemT<Scalar>& problem,
    const TrajectoryT<Scalar>& traj) {
  const auto& constraints = problem.constraints;
  const Index last = traj.samples() - 1;
  const Scalar dt = traj.times[1] - traj.times[0];
  Scalar acc = 0;
  for (Index k = 0; k < constraints.node_count(); ++k) {
    const auto& c = constraints.at[size_t(k)];
    if (!c.has_position() && !c.has_velocity()) continue;
    const Index j = detail::sample_of_node(traj, constraints.nodes[k]);
    const VecX<Scalar> u = traj.displacements.row(j).transpose();
    if (c.has_position())
      acc += constraints.position_weight(k) / 2 *
             (c.position * problem.warp.apply(u) - c.position_target)
                 .squaredNorm();
    if (c.has_velocity()) {
      const VecX<Scalar> vel = detail::apply_stencil(
          detail::velocity_stencil<Scalar>(j, last, dt), traj.displacements,
          traj.dim());
      acc += constraints.velocity_weight(k) / 2 *
             (c.velocity * problem.warp.differential(u, vel) -
              c.velocity_target)
                 .squaredNorm();
    }
  }
  return acc;
}

template <class Scalar>
Scalar discrete_objective_warped(const ModelSystemT<Scalar>& sys,
                                 const WarpedConstraintProblemT<Scalar>& problem,
                                 const TrajectoryT<Scalar>& traj) {
  return discrete_energy(sys, traj) +
         discrete_constraint_energy_warped(problem, traj);
}

namespace detail {

// Sparse residual operator R and offset: residual_j = (R U)_j + load, with
// U the stacked samples, plus the trapezoid/M^{-1} weighting blocks.
template <class Scalar>
struct DiscreteSystemT {
  Eigen::SparseMatrix<Scalar> residual_op;   // (N+1)n x (N+1)n
  Eigen::SparseMatrix<Scalar> weight;        // block diag w_j * M^{-1}
  Eigen::SparseMatrix<Scalar> weight_sqrt;   // block diag sqrt(w_j) * M^{-1/2}
  VecX<Scalar> offset;                       // stacked load vector
  Index samples = 0;
  Index n = 0;
};

template <class Scalar>
DiscreteSystemT<Scalar> build_discrete_system(const ModelSystemT<Scalar>& sys,
                                              const TranscriptionGridT<Scalar>& grid,
                                              bool with_sqrt) {
  DiscreteSystemT<Scalar> d;
  d.samples = grid.times.size();
  d.n = sys.dim();
  const Index last = d.samples - 1;
  if (last < 3)
    throw ValidationError("transcription needs >= 4 grid samples");
  const Index total = d.samples * d.n;
  const MatX<Scalar> damping = sys.damping();

  using Triplet = Eigen::Triplet<Scalar>;
  std::vector<Triplet> op_triplets;
  op_triplets.reserve(size_t(total) * size_t(4 * d.n));
  for (Index j = 0; j <= last; ++j) {
    const auto vel = velocity_stencil<Scalar>(j, last, grid.dt);
    const auto accel = acceleration_stencil<Scalar>(j, last, grid.dt);
    // Collect the dense block contributed to each touched sample column.
    Index touched[8];
    int touched_count = 0;
    auto note = [&](Index p) {
      for (int q = 0; q < touched_count; ++q)
        if (touched[q] == p) return;
      touched[touched_count++] = p;
    };
    note(j);
    for (int p = 0; p < accel.size; ++p) note(accel.base[p]);
    for (int p = 0; p < vel.size; ++p) note(vel.base[p]);
    for (int ti = 0; ti < touched_count; ++ti) {
      const Index col_sample = touched[ti];
      Scalar a_coeff = 0, v_coeff = 0;
      for (int p = 0; p < accel.size; ++p)
        if (accel.base[p] == col_sample) a_coeff += accel.coeff[p];
      for (int p = 0; p < vel.size; ++p)
        if (vel.base[p] == col_sample) v_coeff += vel.coeff[p];
      const bool diagonal = col_sample == j;
      MatX<Scalar> block = a_coeff * sys.mass + v_coeff * damping;
      if (diagonal) block += sys.stiffness;
      for (Index r = 0; r < d.n; ++r)
        for (Index c = 0; c < d.n; ++c)
          if (block(r, c) != 0)
            op_triplets.emplace_back(j * d.n + r, col_sample * d.n + c,
                                     block(r, c));
    }
  }
  d.residual_op.resize(total, total);
  d.residual_op.setFromTriplets(op_triplets.begin(), op_triplets.end());

  d.offset.resize(total);
  for (Index j = 0; j <= last; ++j) d.offset.segment(j * d.n, d.n) = sys.load;

  const MatX<Scalar> mass_inv =
      sys.mass.llt().solve(MatX<Scalar>::Identity(d.n, d.n));
  std::vector<Triplet> w_triplets, ws_triplets;
  MatX<Scalar> mass_inv_sqrt;
  if (with_sqrt) {
    Eigen::SelfAdjointEigenSolver<MatX<Scalar>> eig(mass_inv);
    mass_inv_sqrt = eig.operatorSqrt();
  }
  for (Index j = 0; j <= last; ++j) {
    const Scalar w = (j == 0 || j == last) ? grid.dt / 2 : grid.dt;
    for (Index r = 0; r < d.n; ++r)
      for (Index c = 0; c < d.n; ++c) {
        if (mass_inv(r, c) != 0)
          w_triplets.emplace_back(j * d.n + r, j * d.n + c, w * mass_inv(r, c));
        if (with_sqrt && mass_inv_sqrt(r, c) != 0)
          ws_triplets.emplace_back(j * d.n + r, j * d.n + c,
                                   std::sqrt(w) * mass_inv_sqrt(r, c));
      }
  }
  d.weight.resize(total, total);
  d.weight.setFromTriplets(w_triplets.begin(), w_triplets.end());
  if (with_sqrt) {
    d.weight_sqrt.resize(total, total);
    d.weight_sqrt.setFromTriplets(ws_triplets.begin(), ws_triplets.end());
  }
  return d;
}

// Sparse row operator extracting the stencil velocity at one grid sample.
template <class Scalar>
Eigen::SparseMatrix<Scalar> velocity_rows(const MatX<Scalar>& selector,
                                          Index j, Index last, Scalar dt,
                                          Index n, Index total) {
  const auto vel = velocity_stencil<Scalar>(j, last, dt);
  std::vector<Eigen::Triplet<Scalar>> triplets;
  for (int p = 0; p < vel.size; ++p)
    for (Index r = 0; r < selector.rows(); ++r)
      for (Index c = 0; c < n; ++c)
        if (selector(r, c) != 0)
          triplets.emplace_back(r, vel.base[p] * n + c,
                                vel.coeff[p] * selector(r, c));
  Eigen::SparseMatrix<Scalar> rows(selector.rows(), total);
  rows.setFromTriplets(triplets.begin(), triplets.end());
  return rows;
}

template <class Scalar>
TrajectoryT<Scalar> unstack(const TranscriptionGridT<Scalar>& grid,
                            const VecX<Scalar>& stacked, Index n) {
  TrajectoryT<Scalar> traj;
  traj.times = grid.times;
  const Index samples = grid.times.size();
  traj.displacements.resize(samples, n);
  for (Index j = 0; j < samples; ++j)
    traj.displacements.row(j) = stacked.segment(j * n, n).transpose();
  traj.velocities.resize(samples, n);
  const Index last = samples - 1;
  for (Index j = 0; j < samples; ++j)
    traj.velocities.row(j) =
        apply_stencil(velocity_stencil<Scalar>(j, last, grid.dt),
                      traj.displacements, n)
            .transpose();
  return traj;
}

template <class Scalar>
VecX<Scalar> solve_sparse_spd(const Eigen::SparseMatrix<Scalar>& H,
                              const VecX<Scalar>& rhs) {
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<Scalar>> ldlt(H);
  if (ldlt.info() != Eigen::Success)
    throw SolverError("transcription system factorization failed");
  const VecX<Scalar> d = ldlt.vectorD();
  const Scalar dmax = d.cwiseAbs().maxCoeff();
  if (d.cwiseAbs().minCoeff() < Scalar(1e-13) * dmax)
    throw SolverError(
        "underdetermined: transcription system is numerically singular");
  return ldlt.solve(rhs);
}

}  // namespace detail

// Minimizes the discrete E + E_C over all stacked samples by one sparse
// symmetric solve.
template <class Scalar>
TrajectoryT<Scalar> transcribe_minimize(const ModelSystemT<Scalar>& sys,
                                        const ConstraintSetT<Scalar>& constraints,
                                        Scalar dt) {
  validate(constraints, sys.dim());
  const auto grid = make_grid(constraints.nodes, dt);
  const auto d = detail::build_discrete_system(sys, grid, false);
  const Index total = d.samples * d.n;
  const Index last = d.samples - 1;

  Eigen::SparseMatrix<Scalar> H =
      d.residual_op.transpose() * d.weight * d.residual_op;
  VecX<Scalar> b = d.residual_op.transpose() * (d.weight * d.offset);

  std::vector<Eigen::Triplet<Scalar>> extra;
  for (Index k = 0; k < constraints.node_count(); ++k) {
    const auto& c = constraints.at[size_t(k)];
    const Index j = grid.node_samples[size_t(k)];
    if (c.has_position()) {
      const Scalar w = constraints.position_weight(k);
      const MatX<Scalar> gram = w * c.position.transpose() * c.position;
      for (Index r = 0; r < d.n; ++r)
        for (Index cc = 0; cc < d.n; ++cc)
          if (gram(r, cc) != 0)
            extra.emplace_back(j * d.n + r, j * d.n + cc, gram(r, cc));
      b.segment(j * d.n, d.n) -= w * c.position.transpose() * c.position_target;
    }
    if (c.has_velocity()) {
      const Scalar w = constraints.velocity_weight(k);
      const auto rows =
          detail::velocity_rows(c.velocity, j, last, grid.dt, d.n, total);
      Eigen::SparseMatrix<Scalar> gram = rows.transpose() * rows;
      for (Index outer = 0; outer < gram.outerSize(); ++outer)
        for (typename Eigen::SparseMatrix<Scalar>::InnerIterator it(gram, outer);
             it; ++it)
          extra.emplace_back(it.row(), it.col(), w * it.value());
      b -= w * (rows.transpose() * c.velocity_target);
    }
  }
  Eigen::SparseMatrix<Scalar> H_extra(total, total);
  H_extra.setFromTriplets(extra.begin(), extra.end());
  H += H_extra;

  const VecX<Scalar> solution = detail::solve_sparse_spd<Scalar>(H, -b);
  return detail::unstack(grid, solution, d.n);
}

struct TranscribeOptions {
  int max_iter = 60;
  double tol = 1e-12;
  double damping = 0;
};

// Gauss-Newton with Levenberg damping on the discretized warped residual
// stack; identical discretization to transcribe_minimize.
template <class Scalar>
TrajectoryT<Scalar> transcribe_minimize_warped(
    const ModelSystemT<Scalar>& sys,
    const WarpedConstraintProblemT<Scalar>& problem, Scalar dt,
    const TrajectoryT<Scalar>* init = nullptr,
    const TranscribeOptions& opts = {}) {
  const auto& constraints = problem.constraints;
  validate(constraints, sys.dim());
  const auto grid = make_grid(constraints.nodes, dt);
  const auto d = detail::build_discrete_system(sys, grid, true);
  const Index total = d.samples * d.n;
  const Index last = d.samples - 1;

  VecX<Scalar> u(total);
  if (init) {
    if (init->samples() != d.samples || init->dim() != d.n)
      throw ValidationError("warped transcription init has the wrong grid");
    for (Index j = 0; j < d.samples; ++j)
      u.segment(j * d.n, d.n) = init->displacements.row(j).transpose();
  } else {
    u.setZero();
  }

  const Eigen::SparseMatrix<Scalar> energy_jac = d.weight_sqrt * d.residual_op;

  auto objective = [&](const VecX<Scalar>& stacked) {
    return discrete_objective_warped(sys, problem,
                                     detail::unstack(grid, stacked, d.n));
  };

  const Eigen::SparseMatrix<Scalar> energy_hessian =
      Eigen::SparseMatrix<Scalar>(energy_jac.transpose()) * energy_jac;

  Scalar mu = Scalar(opts.damping);
  Scalar current = objective(u);
  for (int iter = 0; iter < opts.max_iter; ++iter) {
    // Gradient and normal matrix: energy part is exactly quadratic.
    Eigen::SparseMatrix<Scalar> JtJ = energy_hessian;
    VecX<Scalar> grad =
        energy_jac.transpose() * (d.weight_sqrt * (d.residual_op * u + d.offset));

    std::vector<Eigen::Triplet<Scalar>> extra;
    for (Index k = 0; k < constraints.node_count(); ++k) {
      const auto& c = constraints.at[size_t(k)];
      const Index j = grid.node_samples[size_t(k)];
      const VecX<Scalar> uk = u.segment(j * d.n, d.n);
      if (c.has_position()) {
        const Scalar w = constraints.position_weight(k);
        const VecX<Scalar> res = c.position * problem.warp.apply(uk) -
                                 c.position_target;
        const MatX<Scalar> jac =
            c.position * warp_derivative_matrix(problem.warp, uk);
        const MatX<Scalar> gram = w * jac.transpose() * jac;
        for (Index r = 0; r < d.n; ++r)
          for (Index cc = 0; cc < d.n; ++cc)
            if (gram(r, cc) != 0)
              extra.emplace_back(j * d.n + r, j * d.n + cc, gram(r, cc));
        grad.segment(j * d.n, d.n) += w * jac.transpose() * res;
      }
      if (c.has_velocity()) {
        const Scalar w = constraints.velocity_weight(k);
        const auto vel = detail::velocity_stencil<Scalar>(j, last, grid.dt);
        VecX<Scalar> udot = VecX<Scalar>::Zero(d.n);
        for (int p = 0; p < vel.size; ++p)
          udot += vel.coeff[p] * u.segment(vel.base[p] * d.n, d.n);
        const VecX<Scalar> res =
            c.velocity * problem.warp.differential(uk, udot) -
            c.velocity_target;
        // Jacobian rows: DW term through the stencil plus the state
        // dependence of DW itself.
        const MatX<Scalar> dw = warp_derivative_matrix(problem.warp, uk);
        const auto stencil_rows = detail::velocity_rows(
            MatX<Scalar>(c.velocity * dw), j, last, grid.dt, d.n, total);
        Eigen::SparseMatrix<Scalar> jac = stencil_rows;
        const MatX<Scalar> state_term =
            c.velocity * warp_velocity_jacobian(problem.warp, uk, udot);
        std::vector<Eigen::Triplet<Scalar>> jt;
        for (Index r = 0; r < state_term.rows(); ++r)
          for (Index cc = 0; cc < d.n; ++cc)
            if (state_term(r, cc) != 0)
              jt.emplace_back(r, j * d.n + cc, state_term(r, cc));
        Eigen::SparseMatrix<Scalar> state_rows(state_term.rows(), total);
        state_rows.setFromTriplets(jt.begin(), jt.end());
        jac += state_rows;

        Eigen::SparseMatrix<Scalar> gram = jac.transpose() * jac;
        for (Index outer = 0; outer < gram.outerSize(); ++outer)
          for (typename Eigen::SparseMatrix<Scalar>::InnerIterator it(gram,
                                                                      outer);
               it; ++it)
            extra.emplace_back(it.row(), it.col(), w * it.value());
        grad += w * (jac.transpose() * res);
      }
    }
    Eigen::SparseMatrix<Scalar> H_extra(total, total);
    H_extra.setFromTriplets(extra.begin(), extra.end());
    JtJ += H_extra;

    const Scalar grad_inf = grad.template lpNorm<Eigen::Infinity>();
    const Scalar scale = 1 + std::abs(current);
    if (grad_inf <= Scalar(opts.tol) * scale)
      return detail::unstack(grid, u, d.n);

    // Levenberg loop: escalate damping until a step decreases the objective.
    bool accepted = false;
    for (int escalation = 0; escalation < 10 && !accepted; ++escalation) {
      Eigen::SparseMatrix<Scalar> system = JtJ;
      if (mu > 0) {
        Eigen::SparseMatrix<Scalar> identity(total, total);
        identity.setIdentity();
        system += mu * identity;
      }
      VecX<Scalar> step;
      try {
        step = detail::solve_sparse_spd<Scalar>(system, -grad);
      } catch (const SolverError&) {
        mu = std::max(Scalar(1e-8), mu * 10);
        continue;
      }
      const VecX<Scalar> candidate = u + step;
      const Scalar next = objective(candidate);
      if (next <= current) {
        u = candidate;
        current = next;
        mu /= 2;
        accepted = true;
        if (step.template lpNorm<Eigen::Infinity>() <= Scalar(opts.tol))
          return detail::unstack(grid, u, d.n);
      } else {
        mu = std::max(Scalar(1e-8), mu * 10);
      }
    }
    if (!accepted)
      throw NonConvergenceError(
          "warped transcription: damping escalation failed to find a descent step",
          Eigen::VectorXd(u.template cast<double>()), double(grad_inf));
  }
  {
    // Out of iterations; report the gradient norm at the last iterate.
    VecX<Scalar> grad = energy_jac.transpose() *
                        (d.weight_sqrt * (d.residual_op * u + d.offset));
    throw NonConvergenceError("warped transcription: max iterations exceeded",
                              Eigen::VectorXd(u.template cast<double>()),
                              double(grad.template lpNorm<Eigen::Infinity>()));
  }
}

// Central-difference directional derivative of the discrete E + E_C at a
// sampled trajectory, in the direction of a perturbation trajectory on the
// same grid.
template <class Scalar>
Scalar variation_probe(const ModelSystemT<Scalar>& sys,
                       const ConstraintSetT<Scalar>& constraints,
                       const TrajectoryT<Scalar>& traj,
                       const TrajectoryT<Scalar>& direction, Scalar h) {
  if (direction.samples() != traj.samples() || direction.dim() != traj.dim())
    throw ValidationError("perturbation must live on the same grid");
  TrajectoryT<Scalar> shifted = traj;
  shifted.displacements = traj.displacements + h * direction.displacements;
  const Scalar plus = discrete_objective(sys, constraints, shifted);
  shifted.displacements = traj.displacements - h * direction.displacements;
  const Scalar minus = discrete_objective(sys, constraints, shifted);
  return (plus - minus) / (2 * h);
}

template <class Scalar>
Scalar variation_probe_warped(const ModelSystemT<Scalar>& sys,
                              const WarpedConstraintProblemT<Scalar>& problem,
                              const TrajectoryT<Scalar>& traj,
                              const TrajectoryT<Scalar>& direction, Scalar h) {
  if (direction.samples() != traj.samples() || direction.dim() != traj.dim())
    throw ValidationError("perturbation must live on the same grid");
  TrajectoryT<Scalar> shifted = traj;
  shifted.displacements = traj.displacements + h * direction.displacements;
  const Scalar plus = discrete_objective_warped(sys, problem, shifted);
  shifted.displacements = traj.displacements - h * direction.displacements;
  const Scalar minus = discrete_objective_warped(sys, problem, shifted);
  return (plus - minus) / (2 * h);
}

using TranscriptionGrid = TranscriptionGridT<double>;

}  // namespace wiggly
