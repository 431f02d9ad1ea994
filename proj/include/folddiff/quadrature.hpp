#ifndef FOLDDIFF_QUADRATURE_HPP
#define FOLDDIFF_QUADRATURE_HPP

#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

namespace folddiff {

struct QuadRule {
  std::vector<double> nodes;    // on (-1, 1)
  std::vector<double> weights;
};

// Gauss-Legendre rule of the given order. Roots of the Legendre polynomial
// are found by Newton iteration from the Chebyshev-based initial guesses;
// the recurrence gives P_m and P_m' in one pass.
inline QuadRule gauss_legendre(int order) {
  if (order < 2) throw std::invalid_argument("gauss_legendre: order must be at least 2");
  const std::size_t m = static_cast<std::size_t>(order);
  QuadRule rule;
  rule.nodes.resize(m);
  rule.weights.resize(m);

  const std::size_t half = (m + 1) / 2;
  const double pi = 3.14159265358979323846;
  for (std::size_t k = 0; k < half; ++k) {
    double x = std::cos(pi * (static_cast<double>(k) + 0.75) /
                        (static_cast<double>(m) + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = x;
      for (std::size_t t = 2; t <= m; ++t) {
        const double tt = static_cast<double>(t);
        const double p2 = ((2.0 * tt - 1.0) * x * p1 - (tt - 1.0) * p0) / tt;
        p0 = p1;
        p1 = p2;
      }
      dp = static_cast<double>(m) * (x * p1 - p0) / (x * x - 1.0);
      const double step = p1 / dp;
      x -= step;
      if (std::abs(step) < 1e-15) break;
    }
    rule.nodes[k] = -x;
    rule.nodes[m - 1 - k] = x;
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.weights[k] = w;
    rule.weights[m - 1 - k] = w;
  }
  if (m % 2 == 1) rule.nodes[m / 2] = 0.0;
  return rule;
}

inline double apply_rule(const QuadRule& rule, const std::function<double(double)>& f,
                         double a, double b) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  double sum = 0.0;
  for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
    sum += rule.weights[k] * f(c + h * rule.nodes[k]);
  }
  return h * sum;
}

struct QuadResult {
  double value = 0.0;
  double error = 0.0;   // accumulated whole-vs-halves discrepancy
  int panels = 0;
};

namespace detail {

inline void integrate_panel(const QuadRule& rule, const std::function<double(double)>& f,
                            double a, double b, double tol, int depth, QuadResult& out) {
  const double whole = apply_rule(rule, f, a, b);
  const double mid = 0.5 * (a + b);
  const double halves = apply_rule(rule, f, a, mid) + apply_rule(rule, f, mid, b);
  const double disc = std::abs(whole - halves);
  if (disc <= tol || depth <= 0) {
    out.value += halves;
    out.error += disc;
    out.panels += 1;
    return;
  }
  integrate_panel(rule, f, a, mid, 0.5 * tol, depth - 1, out);
  integrate_panel(rule, f, mid, b, 0.5 * tol, depth - 1, out);
}

}  // namespace detail

// Adaptive Gauss-Legendre integration on [a, b]. A panel is accepted when the
// whole-interval estimate and the two-half estimate agree to the local
// tolerance; otherwise the panel splits and the tolerance is shared between
// the halves. The returned error is the sum of accepted discrepancies, a
// conservative bound for rules this high-order on smooth integrands.
inline QuadResult integrate(const std::function<double(double)>& f, double a, double b,
                            double rel_tol = 1e-10, int order = 128, int max_depth = 16) {
  if (!(b > a)) throw std::invalid_argument("integrate: interval must have b > a");
  if (!(rel_tol > 0.0)) throw std::invalid_argument("integrate: tolerance must be positive");
  const QuadRule rule = gauss_legendre(order);
  const double coarse = std::abs(apply_rule(rule, f, a, b));
  const double scale = coarse > 0.0 ? coarse : 1.0;
  QuadResult out;
  detail::integrate_panel(rule, f, a, b, rel_tol * scale, max_depth, out);
  if (!std::isfinite(out.value)) {
    throw std::runtime_error("integrate: integrand produced a non-finite value");
  }
  return out;
}

}  // namespace folddiff

#endif
