// Warped constraint energy E_WC and the Gauss-Newton solver minimizing
// E + E_WC over the same stacked Hermite DOF as the linear solvers. The
// spacetime energy is exactly quadratic in the DOF, so its own Hessian is
// its Gauss-Newton block; only the constraint residuals need linearizing.
#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "wiggly/spacetime.hpp"
#include "wiggly/warp_map.hpp"

namespace wiggly {

namespace detail {

template <class Scalar>
struct WarpedResidualAccumulator {
  MatX<Scalar> normal;   // Gauss-Newton normal matrix contribution
  VecX<Scalar> gradient;
  Scalar energy = 0;     // E_WC value
};

// Residuals, Jacobian blocks and value of E_WC at the given DOF. The
// velocity-residual Jacobian carries both the DW * (d udot / d q) term and
// the state dependence of DW itself (finite-differenced on the warp).
template <class Scalar>
WarpedResidualAccumulator<Scalar> accumulate_warped(
    const WarpedConstraintProblemT<Scalar>& problem,
    const ModalBasisT<Scalar>& basis, const VecX<Scalar>& dof,
    bool with_derivatives) {
  const auto& constraints = problem.constraints;
  const Index node_count = constraints.node_count();
  const Index r = basis.count();
  const Index d = dof_count(r, node_count);
  WarpedResidualAccumulator<Scalar> acc;
  if (with_derivatives) {
    acc.normal = MatX<Scalar>::Zero(d, d);
    acc.gradient = VecX<Scalar>::Zero(d);
  }

  for (Index k = 0; k < node_count; ++k) {
    const auto& c = constraints.at[size_t(k)];
    if (!c.has_position() && !c.has_velocity()) continue;
    VecX<Scalar> w(r), wdot(r);
    for (Index i = 0; i < r; ++i) {
      w[i] = dof[dof_index(i, k, false, node_count)];
      wdot[i] = dof[dof_index(i, k, true, node_count)];
    }
    const VecX<Scalar> u = basis.modes * w;
    const VecX<Scalar> udot = basis.modes * wdot;

    auto scatter = [&](const MatX<Scalar>& block_val,
                       const MatX<Scalar>& block_vel,
                       const VecX<Scalar>& residual, Scalar weight) {
      acc.energy += weight / 2 * residual.squaredNorm();
      if (!with_derivatives || weight == 0) return;
      const MatX<Scalar> gram_vv = weight * block_val.transpose() * block_val;
      const MatX<Scalar> gram_dd = weight * block_vel.transpose() * block_vel;
      const MatX<Scalar> gram_vd = weight * block_val.transpose() * block_vel;
      const VecX<Scalar> pull_v = weight * block_val.transpose() * residual;
      const VecX<Scalar> pull_d = weight * block_vel.transpose() * residual;
      for (Index i1 = 0; i1 < r; ++i1) {
        const Index sv = dof_index(i1, k, false, node_count);
        const Index sd = dof_index(i1, k, true, node_count);
        acc.gradient[sv] += pull_v[i1];
        acc.gradient[sd] += pull_d[i1];
        for (Index i2 = 0; i2 < r; ++i2) {
          const Index tv = dof_index(i2, k, false, node_count);
          const Index td = dof_index(i2, k, true, node_count);
          acc.normal(sv, tv) += gram_vv(i1, i2);
          acc.normal(sd, td) += gram_dd(i1, i2);
          acc.normal(sv, td) += gram_vd(i1, i2);
          acc.normal(td, sv) += gram_vd(i1, i2);
        }
      }
    };

    if (c.has_position()) {
      const VecX<Scalar> residual =
          c.position * problem.warp.apply(u) - c.position_target;
      MatX<Scalar> jac_val = MatX<Scalar>::Zero(residual.size(), r);
      const MatX<Scalar> jac_vel = MatX<Scalar>::Zero(residual.size(), r);
      if (with_derivatives)
        jac_val = c.position * warp_derivative_matrix(problem.warp, u) *
                  basis.modes;
      scatter(jac_val, jac_vel, residual, constraints.position_weight(k));
    }
    if (c.has_velocity()) {
      const VecX<Scalar> residual =
          c.velocity * problem.warp.differential(u, udot) - c.velocity_target;
      MatX<Scalar> jac_vel = MatX<Scalar>::Zero(residual.size(), r);
      MatX<Scalar> jac_val = MatX<Scalar>::Zero(residual.size(), r);
      if (with_derivatives) {
        jac_vel = c.velocity * warp_derivative_matrix(problem.warp, u) *
                  basis.modes;
        jac_val = c.velocity * warp_velocity_jacobian(problem.warp, u, udot) *
                  basis.modes;
      }
      scatter(jac_val, jac_vel, residual, constraints.velocity_weight(k));
    }
  }
  return acc;
}

}  // namespace detail

// Value of the warped constraint energy at a DOF vector.
template <class Scalar>
Scalar eval_EWC(const WarpedConstraintProblemT<Scalar>& problem,
                const ModalBasisT<Scalar>& basis, const VecX<Scalar>& dof) {
  validate(problem.constraints, basis.dim());
  if (dof.size() != dof_count(basis.count(), problem.constraints.node_count()))
    throw ValidationError("eval_EWC: DOF dimension mismatch");
  return detail::accumulate_warped(problem, basis, dof, false).energy;
}

template <class Scalar>
struct GaussNewtonOptionsT {
  int max_iter = 50;
  Scalar tol = Scalar(1e-10);
  Scalar damping = 0;  // initial Levenberg parameter
};

template <class Scalar>
struct WarpedSolveResultT {
  WigglySolutionT<Scalar> solution;
  int iterations = 0;
  std::vector<Scalar> objective_history;  // value at each accepted iterate
  Scalar gradient_inf = 0;
};

// Gauss-Newton with Levenberg damping on the stacked residuals of
// E + E_WC. Default initialization is the sparse solve with the unwarped
// constraints, matching the functional form the minimizer must take.
template <class Scalar>
WarpedSolveResultT<Scalar> solve_warped(
    const ModelSystemT<Scalar>& sys, const ModalBasisT<Scalar>& basis,
    const WarpedConstraintProblemT<Scalar>& problem,
    const VecX<Scalar>* init = nullptr,
    const GaussNewtonOptionsT<Scalar>& opts = {}) {
  validate(problem.constraints, sys.dim());
  const Index node_count = problem.constraints.node_count();
  const Index d = dof_count(basis.count(), node_count);

  VecX<Scalar> dof;
  if (init) {
    if (init->size() != d)
      throw ValidationError("solve_warped: init DOF dimension mismatch");
    if (!init->allFinite())
      throw ValidationError("solve_warped: init DOF must be finite");
    dof = *init;
  } else {
    dof = solve_sparse(sys, basis, problem.constraints).dof;
  }

  const QuadraticFormT<Scalar> energy =
      assemble_E(basis, problem.constraints.nodes);
  auto objective = [&](const VecX<Scalar>& q) {
    return energy.value(q) +
           detail::accumulate_warped(problem, basis, q, false).energy;
  };

  WarpedSolveResultT<Scalar> result;
  Scalar current = objective(dof);
  result.objective_history.push_back(current);
  Scalar mu = opts.damping;
  bool converged = false;

  for (int iter = 0; iter < opts.max_iter && !converged; ++iter) {
    const auto acc = detail::accumulate_warped(problem, basis, dof, true);
    const VecX<Scalar> grad = energy.gradient(dof) + acc.gradient;
    const Scalar grad_inf = grad.template lpNorm<Eigen::Infinity>();
    result.gradient_inf = grad_inf;
    const Scalar scale = 1 + std::abs(current);
    if (grad_inf <= opts.tol * scale) {
      converged = true;
      break;
    }

    const MatX<Scalar> normal = energy.hessian + acc.normal;
    bool accepted = false;
    for (int escalation = 0; escalation < 10 && !accepted; ++escalation) {
      MatX<Scalar> system = normal;
      if (mu > 0) system.diagonal().array() += mu;
      Eigen::LDLT<MatX<Scalar>> ldlt(system);
      const VecX<Scalar> diag = ldlt.vectorD();
      const Scalar dmax = diag.cwiseAbs().maxCoeff();
      if (!(dmax > 0) ||
          diag.cwiseAbs().minCoeff() < Scalar(1e-13) * dmax) {
        mu = std::max(Scalar(1e-8), mu * 10);
        continue;
      }
      const VecX<Scalar> step = ldlt.solve(-grad);
      const VecX<Scalar> candidate = dof + step;
      const Scalar next = objective(candidate);
      if (next <= current) {
        dof = candidate;
        current = next;
        result.objective_history.push_back(current);
        mu /= 2;
        accepted = true;
        result.iterations = iter + 1;
        if (step.template lpNorm<Eigen::Infinity>() <= opts.tol)
          converged = true;
      } else {
        mu = std::max(Scalar(1e-8), mu * 10);
      }
    }
    if (!accepted)
      throw NonConvergenceError(
          "solve_warped: no descent step found under damping escalation",
          Eigen::VectorXd(dof.template cast<double>()), double(grad_inf));
  }
  if (!converged)
    throw NonConvergenceError("solve_warped: max iterations exceeded",
                              Eigen::VectorXd(dof.template cast<double>()),
                              double(result.gradient_inf));

  result.solution = solution_from_dof(basis, problem.constraints.nodes, dof);
  return result;
}

// Samples the solution and applies the warp: the output motion is
// W(u(t)), with velocities DW|_u u'(t) when requested.
template <class Scalar>
TrajectoryT<Scalar> warp_trajectory(const WigglySolutionT<Scalar>& sol,
                                    const WarpMapT<Scalar>& warp,
                                    const VecX<Scalar>& times,
                                    bool with_velocities = false) {
  TrajectoryT<Scalar> traj;
  traj.times = times;
  traj.displacements.resize(times.size(), sol.basis.dim());
  if (with_velocities) traj.velocities.resize(times.size(), sol.basis.dim());
  for (Index i = 0; i < times.size(); ++i) {
    const VecX<Scalar> u = sol.basis.modes * modal_state(sol, times[i], 0);
    traj.displacements.row(i) = warp.apply(u).transpose();
    if (with_velocities) {
      const VecX<Scalar> udot = sol.basis.modes * modal_state(sol, times[i], 1);
      traj.velocities.row(i) = warp.differential(u, udot).transpose();
    }
  }
  return traj;
}

// Stationarity verification of E + E_WC: exact DOF gradient plus
// oracle-discretized full-space variations.
template <class Scalar>
StationarityReportT<Scalar> verify_stationarity_warped(
    const WigglySolutionT<Scalar>& sol, const ModelSystemT<Scalar>& sys,
    const ModalBasisT<Scalar>& basis,
    const WarpedConstraintProblemT<Scalar>& problem, int probes, Scalar h,
    Scalar dt, unsigned long long seed = 42) {
  StationarityReportT<Scalar> report;
  const QuadraticFormT<Scalar> energy =
      assemble_E(basis, problem.constraints.nodes);
  const auto acc = detail::accumulate_warped(problem, basis, sol.dof, true);
  const VecX<Scalar> grad = energy.gradient(sol.dof) + acc.gradient;
  report.dof_gradient_inf = grad.template lpNorm<Eigen::Infinity>();
  report.dof_gradient_scale =
      1 + (energy.hessian * sol.dof).template lpNorm<Eigen::Infinity>() +
      energy.linear.template lpNorm<Eigen::Infinity>() +
      acc.gradient.template lpNorm<Eigen::Infinity>();

  for (const auto& spline : sol.splines) {
    const auto ode = ode_residual(spline);
    report.ode_residual_max = std::max(report.ode_residual_max, ode.max_residual);
    report.ode_residual_scale = std::max(report.ode_residual_scale, ode.scale);
  }

  const auto grid = make_grid(problem.constraints.nodes, dt);
  const TrajectoryT<Scalar> traj = sample_solution(sol, grid.times, false);
  report.probe_scale =
      1 + std::abs(discrete_objective_warped(sys, problem, traj));
  std::mt19937_64 rng(seed);
  report.probes = probes;
  for (int p = 0; p < probes; ++p) {
    const auto probe = detail::random_probe(grid.times, sys.dim(), rng);
    const Scalar derivative =
        variation_probe_warped(sys, problem, traj, probe, h);
    report.max_directional_derivative =
        std::max(report.max_directional_derivative, std::abs(derivative));
  }
  return report;
}

using GaussNewtonOptions = GaussNewtonOptionsT<double>;
using WarpedSolveResult = WarpedSolveResultT<double>;

}  // namespace wiggly
