// Keyframe constraint containers: sparse per-node least-squares constraints
// and hard full-state keyframes with boundary velocities.
#pragma once

#include <optional>
#include <vector>

#include "wiggly/errors.hpp"
#include "wiggly/types.hpp"

namespace wiggly {

// Per-node linear constraints A_k u(t_k) = a_k and B_k u'(t_k) = b_k,
// imposed as weighted least squares. Empty matrices mean "no constraint
// of that kind at this node".
template <class Scalar>
struct NodeConstraintT {
  MatX<Scalar> position;         // p_k x n
  VecX<Scalar> position_target;  // p_k
  MatX<Scalar> velocity;         // q_k x n
  VecX<Scalar> velocity_target;  // q_k
  // Documented extension: per-node weight overrides; the global weights
  // apply when unset.
  std::optional<Scalar> weight_position;
  std::optional<Scalar> weight_velocity;

  bool has_position() const { return position.rows() > 0; }
  bool has_velocity() const { return velocity.rows() > 0; }
};

template <class Scalar>
struct ConstraintSetT {
  VecX<Scalar> nodes;                      // t_0 < ... < t_m
  std::vector<NodeConstraintT<Scalar>> at; // one entry per node
  Scalar weight_position = 0;              // c_A >= 0
  Scalar weight_velocity = 0;              // c_B >= 0

  Index node_count() const { return nodes.size(); }
  Scalar position_weight(Index k) const {
    return at[size_t(k)].weight_position.value_or(weight_position);
  }
  Scalar velocity_weight(Index k) const {
    return at[size_t(k)].weight_velocity.value_or(weight_velocity);
  }
};

template <class Scalar>
void validate(const ConstraintSetT<Scalar>& set, Index n) {
  const Index count = set.node_count();
  if (count < 2) throw ValidationError("constraint set needs >= 2 nodes");
  if (Index(set.at.size()) != count)
    throw ValidationError("constraint entries must match the node count");
  for (Index k = 0; k + 1 < count; ++k)
    if (!(set.nodes[k + 1] > set.nodes[k]))
      throw ValidationError("node times must be strictly increasing");
  if (!(set.weight_position >= 0) || !(set.weight_velocity >= 0))
    throw ValidationError("constraint weights must be non-negative");

  bool any = false;
  for (Index k = 0; k < count; ++k) {
    const auto& c = set.at[size_t(k)];
    if (c.has_position()) {
      if (c.position.cols() != n || c.position.rows() > n ||
          c.position_target.size() != c.position.rows())
        throw ValidationError("position constraint dimensions mismatch");
      if (!c.position.allFinite() || !c.position_target.allFinite())
        throw ValidationError("position constraint contains non-finite data");
      any = true;
    }
    if (c.has_velocity()) {
      if (c.velocity.cols() != n || c.velocity.rows() > n ||
          c.velocity_target.size() != c.velocity.rows())
        throw ValidationError("velocity constraint dimensions mismatch");
      if (!c.velocity.allFinite() || !c.velocity_target.allFinite())
        throw ValidationError("velocity constraint contains non-finite data");
      any = true;
    }
  }
  if (!any) throw ValidationError("constraint set is empty");
}

// Full-state keyframes u(t_i) = target_i at every node plus velocities at
// the two boundary nodes.
template <class Scalar>
struct HardKeyframesT {
  VecX<Scalar> nodes;
  std::vector<VecX<Scalar>> targets;  // one n-vector per node
  VecX<Scalar> velocity_begin;
  VecX<Scalar> velocity_end;
};

template <class Scalar>
void validate(const HardKeyframesT<Scalar>& kf, Index n) {
  const Index count = kf.nodes.size();
  if (count < 2) throw ValidationError("hard keyframes need >= 2 nodes");
  for (Index k = 0; k + 1 < count; ++k)
    if (!(kf.nodes[k + 1] > kf.nodes[k]))
      throw ValidationError("node times must be strictly increasing");
  if (Index(kf.targets.size()) != count)
    throw ValidationError("one keyframe target required per node");
  for (const auto& u : kf.targets)
    if (u.size() != n) throw ValidationError("keyframe target dimension mismatch");
  if (kf.velocity_begin.size() != n || kf.velocity_end.size() != n)
    throw ValidationError("boundary velocity dimension mismatch");
}

using NodeConstraint = NodeConstraintT<double>;
using ConstraintSet = ConstraintSetT<double>;
using HardKeyframes = HardKeyframesT<double>;

}  // namespace wiggly
