// Spacetime energy and constraint assembly over the stacked Hermite DOF of
// all modes, the hard-keyframe and sparse least-squares solvers, and the
// a-posteriori stationarity/smoothness verification.
//
// DOF layout: mode-major, then node-major, value before velocity; mode i,
// node k contribute slots i*(2*node_count) + 2*k and ... + 2*k + 1. With
// M-orthonormal modes the spacetime energy decouples per mode, so its
// Hessian is block diagonal; the constraint energy couples modes through
// the selector-times-modes products.
#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <random>
#include <sstream>
#include <vector>

#include "wiggly/constraints.hpp"
#include "wiggly/errors.hpp"
#include "wiggly/modal.hpp"
#include "wiggly/oracle.hpp"
#include "wiggly/quadrature.hpp"
#include "wiggly/wiggly_spline.hpp"

namespace wiggly {

template <class Scalar>
struct QuadraticFormT {
  MatX<Scalar> hessian;   // symmetric d x d
  VecX<Scalar> linear;    // d
  Scalar constant = 0;

  Scalar value(const VecX<Scalar>& q) const {
    return q.dot(hessian * q) / 2 + linear.dot(q) + constant;
  }
  VecX<Scalar> gradient(const VecX<Scalar>& q) const {
    return hessian * q + linear;
  }
  QuadraticFormT& operator+=(const QuadraticFormT& other) {
    hessian += other.hessian;
    linear += other.linear;
    constant += other.constant;
    return *this;
  }
  QuadraticFormT& operator*=(Scalar factor) {
    hessian *= factor;
    linear *= factor;
    constant *= factor;
    return *this;
  }
};

inline Index dof_count(Index modes, Index node_count) {
  return modes * 2 * node_count;
}

inline Index dof_index(Index mode, Index node, bool velocity,
                       Index node_count) {
  return mode * 2 * node_count + 2 * node + (velocity ? 1 : 0);
}

// E(q) = 1/2 sum_i int (w_i'' + 2 delta_i w_i' + lambda_i w_i + g_i)^2 dt
// expressed through the per-interval Hermite collocation maps and Gauss
// quadrature. Exactly block diagonal across modes.
template <class Scalar>
QuadraticFormT<Scalar> assemble_E(const ModalBasisT<Scalar>& basis,
                                  const VecX<Scalar>& nodes) {
  const Index node_count = nodes.size();
  if (node_count < 2) throw ValidationError("assemble_E needs >= 2 nodes");
  for (Index k = 0; k + 1 < node_count; ++k)
    if (!(nodes[k + 1] > nodes[k]))
      throw ValidationError("node times must be strictly increasing");

  const Index r = basis.count();
  const Index d = dof_count(r, node_count);
  QuadraticFormT<Scalar> form;
  form.hessian = MatX<Scalar>::Zero(d, d);
  form.linear = VecX<Scalar>::Zero(d);
  form.constant = 0;

  using Mat5 = Eigen::Matrix<Scalar, 5, 5>;
  using Vec5 = Eigen::Matrix<Scalar, 5, 1>;
  for (Index i = 0; i < r; ++i) {
    const Scalar lambda = basis.eigenvalues[i];
    const Scalar delta = basis.damping[i];
    const Scalar force = basis.modal_force[i];
    const Regime regime = classify(lambda, delta);
    const Scalar part = particular(lambda, delta, force);
    const Scalar const_residual = lambda * part + force;

    for (Index j = 0; j + 1 < node_count; ++j) {
      const auto map = hermite_map(regime, lambda, delta, nodes[j], nodes[j + 1]);
      const Vec4<Scalar> part_coeffs =
          map.dof_to_coeffs * Vec4<Scalar>(part, 0, part, 0);
      const Scalar half = (nodes[j + 1] - nodes[j]) / 2;

      // Joint integrand: outer product of (dof residual row, affine offset).
      auto integrand = [&](Scalar s) -> Mat5 {
        const Vec4<Scalar> row = force_residual_row(regime, lambda, delta, s);
        Vec5 stacked;
        stacked.template head<4>() = map.dof_to_coeffs.transpose() * row;
        stacked[4] = const_residual - row.dot(part_coeffs);
        return stacked * stacked.transpose();
      };
      const Mat5 moments = integrate(integrand, -half, half);

      const Index slots[4] = {dof_index(i, j, false, node_count),
                              dof_index(i, j, true, node_count),
                              dof_index(i, j + 1, false, node_count),
                              dof_index(i, j + 1, true, node_count)};
      for (int a = 0; a < 4; ++a) {
        for (int b = 0; b < 4; ++b)
          form.hessian(slots[a], slots[b]) += moments(a, b);
        form.linear[slots[a]] += moments(a, 4);
      }
      form.constant += moments(4, 4) / 2;
    }
  }
  return form;
}

// E_C(q): the node constraints act on exactly the Hermite DOF at their
// node, mapped to displacement space through the mode matrix.
template <class Scalar>
QuadraticFormT<Scalar> assemble_EC(const ConstraintSetT<Scalar>& constraints,
                                   const ModalBasisT<Scalar>& basis) {
  validate(constraints, basis.dim());
  const Index node_count = constraints.node_count();
  const Index r = basis.count();
  const Index d = dof_count(r, node_count);
  QuadraticFormT<Scalar> form;
  form.hessian = MatX<Scalar>::Zero(d, d);
  form.linear = VecX<Scalar>::Zero(d);
  form.constant = 0;

  auto accumulate = [&](const MatX<Scalar>& selector, const VecX<Scalar>& target,
                        Scalar weight, Index node, bool velocity) {
    if (weight == 0) return;
    const MatX<Scalar> modal_rows = selector * basis.modes;  // p x r
    const MatX<Scalar> gram = weight * modal_rows.transpose() * modal_rows;
    const VecX<Scalar> pull = weight * modal_rows.transpose() * target;
    for (Index i1 = 0; i1 < r; ++i1) {
      const Index s1 = dof_index(i1, node, velocity, node_count);
      form.linear[s1] -= pull[i1];
      for (Index i2 = 0; i2 < r; ++i2)
        form.hessian(s1, dof_index(i2, node, velocity, node_count)) +=
            gram(i1, i2);
    }
    form.constant += weight / 2 * target.squaredNorm();
  };

  for (Index k = 0; k < node_count; ++k) {
    const auto& c = constraints.at[size_t(k)];
    if (c.has_position())
      accumulate(c.position, c.position_target, constraints.position_weight(k),
                 k, false);
    if (c.has_velocity())
      accumulate(c.velocity, c.velocity_target, constraints.velocity_weight(k),
                 k, true);
  }
  return form;
}

namespace detail {

// Dense symmetric solve with singularity detection; names the mode whose
// DOF block dominates the near-null direction.
template <class Scalar>
VecX<Scalar> solve_dof_system(const MatX<Scalar>& hessian,
                              const VecX<Scalar>& rhs,
                              const ModalBasisT<Scalar>& basis,
                              Index node_count,
                              const std::vector<Index>* slot_to_dof) {
  Eigen::LDLT<MatX<Scalar>> ldlt(hessian);
  const VecX<Scalar> diag = ldlt.vectorD();
  const Scalar dmax = diag.cwiseAbs().maxCoeff();
  if (!(dmax > 0) || diag.cwiseAbs().minCoeff() < Scalar(1e-13) * dmax) {
    Eigen::SelfAdjointEigenSolver<MatX<Scalar>> eig(hessian);
    Index weak = 0;
    eig.eigenvalues().cwiseAbs().minCoeff(&weak);
    const VecX<Scalar> null_dir = eig.eigenvectors().col(weak);
    // Attribute the direction to the mode with the largest block norm.
    VecX<Scalar> by_mode = VecX<Scalar>::Zero(basis.count());
    for (Index s = 0; s < null_dir.size(); ++s) {
      const Index dof = slot_to_dof ? (*slot_to_dof)[size_t(s)] : s;
      by_mode[dof / (2 * node_count)] += null_dir[s] * null_dir[s];
    }
    Index mode = 0;
    by_mode.maxCoeff(&mode);
    std::ostringstream msg;
    msg << "underdetermined: "
        << (basis.rigid[size_t(mode)] ? "rigid mode " : "mode ") << mode
        << " unconstrained";
    throw SolverError(msg.str());
  }
  return ldlt.solve(rhs);
}

}  // namespace detail

// Packages a stacked DOF vector as one wiggly spline per mode.
template <class Scalar>
WigglySolutionT<Scalar> solution_from_dof(const ModalBasisT<Scalar>& basis,
                                          const VecX<Scalar>& nodes,
                                          const VecX<Scalar>& dof) {
  const Index node_count = nodes.size();
  if (dof.size() != dof_count(basis.count(), node_count))
    throw ValidationError("DOF vector does not match basis and nodes");
  WigglySolutionT<Scalar> sol;
  sol.basis = basis;
  sol.nodes = nodes;
  sol.dof = dof;
  sol.splines.reserve(size_t(basis.count()));
  for (Index i = 0; i < basis.count(); ++i) {
    VecX<Scalar> values(node_count), velocities(node_count);
    for (Index k = 0; k < node_count; ++k) {
      values[k] = dof[dof_index(i, k, false, node_count)];
      velocities[k] = dof[dof_index(i, k, true, node_count)];
    }
    sol.splines.push_back(build_spline(basis.eigenvalues[i], basis.damping[i],
                                       basis.modal_force[i], nodes, values,
                                       velocities));
  }
  return sol;
}

// argmin E + E_C over the stacked Hermite DOF; the result is of wiggly
// form and C^1 by construction.
template <class Scalar>
WigglySolutionT<Scalar> solve_sparse(const ModelSystemT<Scalar>& sys,
                                     const ModalBasisT<Scalar>& basis,
                                     const ConstraintSetT<Scalar>& constraints) {
  validate(constraints, sys.dim());
  QuadraticFormT<Scalar> total = assemble_E(basis, constraints.nodes);
  total += assemble_EC(constraints, basis);
  const VecX<Scalar> dof = detail::solve_dof_system(
      total.hessian, VecX<Scalar>(-total.linear), basis,
      constraints.node_count(), nullptr);
  return solution_from_dof(basis, constraints.nodes, dof);
}

// Minimizes E subject to exact interpolation of full keyframes and the two
// boundary velocities: those DOF are axis-aligned in DOF space, so they are
// eliminated and only interior velocities remain free.
template <class Scalar>
WigglySolutionT<Scalar> solve_hard(const ModelSystemT<Scalar>& sys,
                                   const ModalBasisT<Scalar>& basis,
                                   const HardKeyframesT<Scalar>& keyframes) {
  validate(keyframes, sys.dim());
  const Index node_count = keyframes.nodes.size();
  const Index r = basis.count();
  const Index d = dof_count(r, node_count);

  auto project = [&](const VecX<Scalar>& target, const char* what,
                     Index node) -> VecX<Scalar> {
    const VecX<Scalar> w = to_modal(basis, target);
    const Scalar error =
        (from_modal(basis, w) - target).template lpNorm<Eigen::Infinity>();
    const Scalar scale =
        std::max<Scalar>(1, target.template lpNorm<Eigen::Infinity>());
    if (error > Scalar(1e-9) * scale) {
      std::ostringstream msg;
      msg << "unrepresentable " << what << " at node " << node
          << " (outside the retained modal span)";
      throw ValidationError(msg.str());
    }
    return w;
  };

  VecX<Scalar> dof = VecX<Scalar>::Zero(d);
  std::vector<bool> pinned(size_t(d), false);
  for (Index k = 0; k < node_count; ++k) {
    const VecX<Scalar> w = project(keyframes.targets[size_t(k)], "keyframe", k);
    for (Index i = 0; i < r; ++i) {
      dof[dof_index(i, k, false, node_count)] = w[i];
      pinned[size_t(dof_index(i, k, false, node_count))] = true;
    }
  }
  for (const bool end : {false, true}) {
    const Index k = end ? node_count - 1 : 0;
    const VecX<Scalar> w = project(
        end ? keyframes.velocity_end : keyframes.velocity_begin,
        "boundary velocity", k);
    for (Index i = 0; i < r; ++i) {
      dof[dof_index(i, k, true, node_count)] = w[i];
      pinned[size_t(dof_index(i, k, true, node_count))] = true;
    }
  }

  const QuadraticFormT<Scalar> energy = assemble_E(basis, keyframes.nodes);
  std::vector<Index> free_slots;
  for (Index s = 0; s < d; ++s)
    if (!pinned[size_t(s)]) free_slots.push_back(s);

  if (!free_slots.empty()) {
    const Index f = Index(free_slots.size());
    MatX<Scalar> h_ff(f, f);
    VecX<Scalar> rhs(f);
    const VecX<Scalar> full_grad = energy.gradient(dof);  // dof holds pins, zeros elsewhere
    for (Index a = 0; a < f; ++a) {
      rhs[a] = -full_grad[free_slots[size_t(a)]];
      for (Index b = 0; b < f; ++b)
        h_ff(a, b) = energy.hessian(free_slots[size_t(a)], free_slots[size_t(b)]);
    }
    const VecX<Scalar> x = detail::solve_dof_system(h_ff, rhs, basis,
                                                    node_count, &free_slots);
    for (Index a = 0; a < f; ++a) dof[free_slots[size_t(a)]] = x[a];
  }
  return solution_from_dof(basis, keyframes.nodes, dof);
}

// Verification report: exact DOF-space first-order conditions, oracle-based
// full-space variations, per-node per-mode curvature jumps, quartic ODE
// residuals and boundary-slot gradient entries.
template <class Scalar>
struct StationarityReportT {
  Scalar dof_gradient_inf = 0;
  Scalar dof_gradient_scale = 1;
  Scalar max_directional_derivative = 0;
  Scalar probe_scale = 1;
  int probes = 0;
  Scalar boundary_residual_inf = 0;
  Scalar ode_residual_max = 0;
  Scalar ode_residual_scale = 1;
  MatX<Scalar> c2_jumps;                   // (interior nodes) x modes
  std::vector<bool> velocity_constrained;  // per interior node
  Scalar smoothness_scale = 1;
  Scalar max_velocity_free_jump = 0;
  bool smoothness_ok = true;
};

namespace detail {

// Random C^1 perturbation: independent cubic Hermite interpolants per DOF
// over a coarse control grid, sampled on the oracle grid and normalized to
// unit sup norm. Deliberately not representable in the wiggly DOF space.
template <class Scalar>
TrajectoryT<Scalar> random_probe(const VecX<Scalar>& times, Index n,
                                 std::mt19937_64& rng) {
  const Index controls = 7;
  const Scalar t0 = times[0], t1 = times[times.size() - 1];
  const Scalar spacing = (t1 - t0) / Scalar(controls - 1);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  MatX<Scalar> value(controls, n), slope(controls, n);
  for (Index c = 0; c < controls; ++c)
    for (Index j = 0; j < n; ++j) {
      value(c, j) = Scalar(unit(rng));
      slope(c, j) = Scalar(unit(rng)) / spacing;
    }
  TrajectoryT<Scalar> probe;
  probe.times = times;
  probe.displacements.resize(times.size(), n);
  for (Index s = 0; s < times.size(); ++s) {
    const Scalar t = times[s];
    Index c = std::min<Index>(Index((t - t0) / spacing), controls - 2);
    const Scalar local = (t - (t0 + Scalar(c) * spacing)) / spacing;
    const Scalar h00 = (1 + 2 * local) * (1 - local) * (1 - local);
    const Scalar h10 = local * (1 - local) * (1 - local);
    const Scalar h01 = local * local * (3 - 2 * local);
    const Scalar h11 = local * local * (local - 1);
    probe.displacements.row(s) =
        h00 * value.row(c) + h10 * spacing * slope.row(c) +
        h01 * value.row(c + 1) + h11 * spacing * slope.row(c + 1);
  }
  const Scalar sup = probe.displacements.cwiseAbs().maxCoeff();
  if (sup > 0) probe.displacements /= sup;
  return probe;
}

template <class Scalar>
void fill_common_report(StationarityReportT<Scalar>& report,
                        const WigglySolutionT<Scalar>& sol,
                        const QuadraticFormT<Scalar>& total) {
  const VecX<Scalar> grad = total.gradient(sol.dof);
  report.dof_gradient_inf = grad.template lpNorm<Eigen::Infinity>();
  report.dof_gradient_scale =
      1 + (total.hessian * sol.dof).template lpNorm<Eigen::Infinity>() +
      total.linear.template lpNorm<Eigen::Infinity>();

  const Index node_count = sol.nodes.size();
  Scalar boundary = 0;
  for (Index i = 0; i < sol.mode_count(); ++i)
    for (const Index k : {Index(0), node_count - 1})
      for (const bool vel : {false, true})
        boundary = std::max(
            boundary, std::abs(grad[dof_index(i, k, vel, node_count)]));
  report.boundary_residual_inf = boundary;

  for (const auto& spline : sol.splines) {
    const auto ode = ode_residual(spline);
    report.ode_residual_max = std::max(report.ode_residual_max, ode.max_residual);
    report.ode_residual_scale = std::max(report.ode_residual_scale, ode.scale);
  }
}

}  // namespace detail

// First-variation checks of a sparse-constraint solution: the DOF-space
// gradient is exact; the full-space probes discretize the variation with
// the oracle's stencils, so their bias is O(dt^2).
template <class Scalar>
StationarityReportT<Scalar> verify_stationarity(
    const WigglySolutionT<Scalar>& sol, const ModelSystemT<Scalar>& sys,
    const ModalBasisT<Scalar>& basis, const ConstraintSetT<Scalar>& constraints,
    int probes, Scalar h, Scalar dt, unsigned long long seed = 42) {
  StationarityReportT<Scalar> report;
  QuadraticFormT<Scalar> total = assemble_E(basis, constraints.nodes);
  total += assemble_EC(constraints, basis);
  detail::fill_common_report(report, sol, total);

  const auto grid = make_grid(constraints.nodes, dt);
  const TrajectoryT<Scalar> traj = sample_solution(sol, grid.times, false);
  report.probe_scale =
      1 + std::abs(discrete_objective(sys, constraints, traj));
  std::mt19937_64 rng(seed);
  report.probes = probes;
  for (int p = 0; p < probes; ++p) {
    const auto probe = detail::random_probe(grid.times, sys.dim(), rng);
    const Scalar derivative =
        variation_probe(sys, constraints, traj, probe, h);
    report.max_directional_derivative =
        std::max(report.max_directional_derivative, std::abs(derivative));
  }
  return report;
}

// Curvature-jump report. Jumps are asserted against tol*scale only at
// interior nodes that carry no effective velocity constraint; nodes with
// one are reported but not asserted.
template <class Scalar>
StationarityReportT<Scalar> verify_smoothness(
    const WigglySolutionT<Scalar>& sol,
    const std::vector<bool>& velocity_constrained, Scalar tol) {
  const Index node_count = sol.nodes.size();
  const Index interior = node_count - 2;
  const Index r = sol.mode_count();
  StationarityReportT<Scalar> report;
  report.c2_jumps = MatX<Scalar>::Zero(std::max<Index>(interior, 0), r);
  report.velocity_constrained.assign(
      size_t(std::max<Index>(interior, 0)), false);
  for (Index k = 0; k < interior; ++k)
    if (Index(velocity_constrained.size()) > k)
      report.velocity_constrained[size_t(k)] = velocity_constrained[size_t(k)];

  // Scale: the largest curvature magnitude the solution attains.
  Scalar scale = 0;
  for (const auto& spline : sol.splines)
    for (Index j = 0; j < spline.intervals(); ++j) {
      const Scalar mid = (spline.nodes[j] + spline.nodes[j + 1]) / 2;
      const Scalar half = (spline.nodes[j + 1] - spline.nodes[j]) / 2;
      for (int g = 0; g < kGaussOrder; ++g) {
        const Scalar t = mid + half * Scalar(kGaussNodes[g]);
        scale = std::max(scale, std::abs(eval_spline(spline, t, 2)));
      }
    }
  report.smoothness_scale = std::max<Scalar>(scale, Scalar(1e-12));

  for (Index k = 1; k + 1 < node_count; ++k) {
    for (Index i = 0; i < r; ++i) {
      const Scalar jump =
          std::abs(one_sided(sol.splines[size_t(i)], k, 2, Side::Right) -
                   one_sided(sol.splines[size_t(i)], k, 2, Side::Left));
      report.c2_jumps(k - 1, i) = jump;
      if (!report.velocity_constrained[size_t(k - 1)]) {
        report.max_velocity_free_jump =
            std::max(report.max_velocity_free_jump, jump);
        if (jump > tol * report.smoothness_scale) report.smoothness_ok = false;
      }
    }
  }
  return report;
}

template <class Scalar>
StationarityReportT<Scalar> verify_smoothness(
    const WigglySolutionT<Scalar>& sol,
    const ConstraintSetT<Scalar>& constraints, Scalar tol) {
  std::vector<bool> velocity_constrained;
  for (Index k = 1; k + 1 < constraints.node_count(); ++k)
    velocity_constrained.push_back(constraints.at[size_t(k)].has_velocity() &&
                                   constraints.velocity_weight(k) > 0);
  return verify_smoothness(sol, velocity_constrained, tol);
}

// Hard-keyframe solutions never pin interior velocities.
template <class Scalar>
StationarityReportT<Scalar> verify_smoothness(const WigglySolutionT<Scalar>& sol,
                                              Scalar tol) {
  return verify_smoothness(sol, std::vector<bool>{}, tol);
}

// Default least-squares weights: 10^3 times the energy of the rest
// trajectory (floored at one so force-free systems get a usable default).
template <class Scalar>
Scalar default_constraint_weight(const ModalBasisT<Scalar>& basis,
                                 const VecX<Scalar>& nodes) {
  const Scalar span = nodes[nodes.size() - 1] - nodes[0];
  const Scalar rest_energy = span * basis.modal_force.squaredNorm() / 2;
  return Scalar(1e3) * std::max<Scalar>(1, rest_energy);
}

using QuadraticForm = QuadraticFormT<double>;
using StationarityReport = StationarityReportT<double>;

}  // namespace wiggly
