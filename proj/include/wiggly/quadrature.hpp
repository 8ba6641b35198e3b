// 7-point Gauss-Legendre quadrature with adaptive panel doubling.
#pragma once

#include <cmath>
#include <type_traits>

#include "wiggly/types.hpp"

namespace wiggly {

// Nodes and weights on [-1, 1].
inline constexpr int kGaussOrder = 7;
inline constexpr long double kGaussNodes[kGaussOrder] = {
    -0.94910791234275852452618968404785L, -0.74153118559939443986386477328079L,
    -0.40584515137739716690660641207696L, 0.0L,
    0.40584515137739716690660641207696L,  0.74153118559939443986386477328079L,
    0.94910791234275852452618968404785L};
inline constexpr long double kGaussWeights[kGaussOrder] = {
    0.12948496616886969327061143267908L, 0.27970539148927666790146777142378L,
    0.38183005050511894495036977548898L, 0.41795918367346938775510204081633L,
    0.38183005050511894495036977548898L, 0.27970539148927666790146777142378L,
    0.12948496616886969327061143267908L};

namespace detail {

// Forces Eigen expressions into concrete values; passes scalars through.
template <class T>
auto evaluated(const T& x) {
  if constexpr (std::is_arithmetic_v<T>) {
    return x;
  } else {
    return x.eval();
  }
}

template <class T>
auto magnitude(const T& v) {
  if constexpr (std::is_arithmetic_v<T>) {
    return std::abs(v);
  } else {
    return v.cwiseAbs().maxCoeff();
  }
}

}  // namespace detail

// One 7-point panel over [a, b].
template <class Scalar, class F>
auto gauss7(F&& f, Scalar a, Scalar b) {
  const Scalar mid = (a + b) / 2;
  const Scalar half = (b - a) / 2;
  auto acc = detail::evaluated(f(mid + half * Scalar(kGaussNodes[0])) *
                               (half * Scalar(kGaussWeights[0])));
  for (int i = 1; i < kGaussOrder; ++i)
    acc += detail::evaluated(f(mid + half * Scalar(kGaussNodes[i])) *
                             (half * Scalar(kGaussWeights[i])));
  return acc;
}

template <class Scalar, class F>
auto gauss7_panels(F&& f, Scalar a, Scalar b, int panels) {
  const Scalar h = (b - a) / Scalar(panels);
  auto acc = gauss7(f, a, a + h);
  for (int p = 1; p < panels; ++p)
    acc += gauss7(f, a + Scalar(p) * h, a + Scalar(p + 1) * h);
  return acc;
}

// Doubles the panel count until two refinement levels agree to rel_tol
// relative. Handles scalar and Eigen-valued integrands alike.
template <class Scalar, class F>
auto integrate(F&& f, Scalar a, Scalar b, Scalar rel_tol = Scalar(1e-10),
               int max_panels = 512) {
  auto coarse = gauss7_panels(f, a, b, 1);
  for (int panels = 2; panels <= max_panels; panels *= 2) {
    auto fine = gauss7_panels(f, a, b, panels);
    const auto diff = detail::magnitude(detail::evaluated(fine - coarse));
    const auto scale = detail::magnitude(fine) + detail::magnitude(coarse);
    if (diff <= rel_tol * (scale + Scalar(1e-300))) return fine;
    coarse = fine;
  }
  return coarse;
}

}  // namespace wiggly
