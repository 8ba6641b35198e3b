// Time-sampled displacement (and optional velocity) data; the exchange
// format between the analytic solvers, the transcription oracle and the CLI.
#pragma once

#include <cstdio>
#include <ostream>
#include <string>

#include "wiggly/errors.hpp"
#include "wiggly/types.hpp"

namespace wiggly {

template <class Scalar>
struct TrajectoryT {
  VecX<Scalar> times;            // strictly increasing
  MatX<Scalar> displacements;    // one row per sample, n columns
  MatX<Scalar> velocities;       // same shape, or 0 x 0 when absent

  Index samples() const { return times.size(); }
  Index dim() const { return displacements.cols(); }
  bool has_velocities() const { return velocities.rows() == times.size(); }
};

namespace detail {
// Full round-trip decimal formatting (17 significant digits).
inline std::string format_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}
}  // namespace detail

// CSV with header t,u0,u1,... and optional v0,v1,... columns.
template <class Scalar>
void write_csv(const TrajectoryT<Scalar>& traj, std::ostream& out) {
  out << "t";
  for (Index j = 0; j < traj.dim(); ++j) out << ",u" << j;
  if (traj.has_velocities())
    for (Index j = 0; j < traj.dim(); ++j) out << ",v" << j;
  out << "\n";
  for (Index i = 0; i < traj.samples(); ++i) {
    out << detail::format_full(double(traj.times[i]));
    for (Index j = 0; j < traj.dim(); ++j)
      out << "," << detail::format_full(double(traj.displacements(i, j)));
    if (traj.has_velocities())
      for (Index j = 0; j < traj.dim(); ++j)
        out << "," << detail::format_full(double(traj.velocities(i, j)));
    out << "\n";
  }
}

using Trajectory = TrajectoryT<double>;

}  // namespace wiggly
