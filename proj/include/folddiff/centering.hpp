#ifndef FOLDDIFF_CENTERING_HPP
#define FOLDDIFF_CENTERING_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace folddiff {

// Shift-equivariant centering functionals g: g(y + z*1) = g(y) + z. Centered
// parameters subtract g of the estimate vector, which removes any distortion
// that is shared by all categories.
enum class CenterKind { none, reference, mean, smoothed_median };

struct CenteringSpec {
  CenterKind kind = CenterKind::none;
  int reference = 0;       // category index when kind == reference
  double epsilon = 0.1;    // smoothing width when kind == smoothed_median

  // Accepted forms: "none", "mean", "ref:<name-or-index>", "smedian:<eps>".
  static CenteringSpec parse(const std::string& text,
                             const std::vector<std::string>& category_names);

  std::string describe() const;
};

inline CenteringSpec CenteringSpec::parse(const std::string& text,
                                          const std::vector<std::string>& category_names) {
  CenteringSpec spec;
  if (text == "none") {
    spec.kind = CenterKind::none;
    return spec;
  }
  if (text == "mean") {
    spec.kind = CenterKind::mean;
    return spec;
  }
  if (text.rfind("smedian", 0) == 0) {
    spec.kind = CenterKind::smoothed_median;
    if (text.size() > 7) {
      if (text[7] != ':') throw std::invalid_argument("centering: malformed '" + text + "'");
      try {
        spec.epsilon = std::stod(text.substr(8));
      } catch (const std::exception&) {
        throw std::invalid_argument("centering: bad epsilon in '" + text + "'");
      }
      if (!(spec.epsilon > 0.0)) {
        throw std::invalid_argument("centering: epsilon must be positive");
      }
    }
    return spec;
  }
  if (text.rfind("ref:", 0) == 0) {
    spec.kind = CenterKind::reference;
    const std::string token = text.substr(4);
    if (token.empty()) throw std::invalid_argument("centering: empty reference");
    for (std::size_t j = 0; j < category_names.size(); ++j) {
      if (category_names[j] == token) {
        spec.reference = static_cast<int>(j);
        return spec;
      }
    }
    try {
      std::size_t used = 0;
      const int idx = std::stoi(token, &used);
      if (used == token.size() && idx >= 0 &&
          (category_names.empty() || idx < static_cast<int>(category_names.size()))) {
        spec.reference = idx;
        return spec;
      }
    } catch (const std::exception&) {
    }
    throw std::invalid_argument("centering: unknown reference category '" + token + "'");
  }
  throw std::invalid_argument("centering: unknown kind '" + text + "'");
}

inline std::string CenteringSpec::describe() const {
  switch (kind) {
    case CenterKind::none: return "none";
    case CenterKind::mean: return "mean";
    case CenterKind::reference: return "ref:" + std::to_string(reference);
    case CenterKind::smoothed_median: return "smedian:" + std::to_string(epsilon);
  }
  return "none";
}

namespace detail {

inline double pseudo_huber_dfirst(double u, double eps) {
  const double t = u / eps;
  return u / std::sqrt(1.0 + t * t);
}

inline double pseudo_huber_dsecond(double u, double eps) {
  const double t = u / eps;
  const double s = 1.0 + t * t;
  return 1.0 / (s * std::sqrt(s));
}

inline double exact_median(Eigen::VectorXd y) {
  std::sort(y.data(), y.data() + y.size());
  const Eigen::Index n = y.size();
  if (n % 2 == 1) return y[n / 2];
  return 0.5 * (y[n / 2 - 1] + y[n / 2]);
}

}  // namespace detail

// Minimizer of sum_j pseudo-Huber(y_j - m). Newton iteration started at the
// exact median, with a bisection safeguard; the score is strictly decreasing
// in m so the bracket [min y, max y] always contains the root.
inline double smoothed_median(const Eigen::VectorXd& y, double eps) {
  if (y.size() == 0) throw std::invalid_argument("smoothed_median: empty input");
  if (!(eps > 0.0)) throw std::invalid_argument("smoothed_median: eps must be positive");
  double lo = y.minCoeff();
  double hi = y.maxCoeff();
  if (lo == hi) return lo;
  double m = detail::exact_median(y);
  const double tol = 1e-12;
  auto score = [&](double mm) {
    double f = 0.0;
    for (Eigen::Index j = 0; j < y.size(); ++j) f += detail::pseudo_huber_dfirst(y[j] - mm, eps);
    return f;
  };
  for (int it = 0; it < 100; ++it) {
    const double f = score(m);
    if (std::fabs(f) <= tol) return m;
    if (f > 0.0) lo = m; else hi = m;
    double h = 0.0;
    for (Eigen::Index j = 0; j < y.size(); ++j) h += detail::pseudo_huber_dsecond(y[j] - m, eps);
    double next = m + f / h;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    m = next;
  }
  // Bisection fallback for pathological spreads.
  for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
    m = 0.5 * (lo + hi);
    const double f = score(m);
    if (std::fabs(f) <= tol) return m;
    if (f > 0.0) lo = m; else hi = m;
  }
  return m;
}

// g evaluated on a full (unmasked) vector y.
inline double center_value(const CenteringSpec& spec, const Eigen::VectorXd& y) {
  switch (spec.kind) {
    case CenterKind::none:
      return 0.0;
    case CenterKind::mean:
      if (y.size() == 0) throw std::invalid_argument("center_value: empty input");
      return y.mean();
    case CenterKind::reference:
      if (spec.reference < 0 || spec.reference >= y.size()) {
        throw std::invalid_argument("center_value: reference index out of range");
      }
      return y[spec.reference];
    case CenterKind::smoothed_median:
      return smoothed_median(y, spec.epsilon);
  }
  return 0.0;
}

// Gradient of g at y. Entries are nonnegative and sum to one for every kind
// except none (all zero), which is what makes the centered one-dimensional
// delta method a plain linear map of the influence functions.
inline Eigen::VectorXd center_gradient(const CenteringSpec& spec, const Eigen::VectorXd& y) {
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(y.size());
  switch (spec.kind) {
    case CenterKind::none:
      break;
    case CenterKind::mean:
      if (y.size() == 0) throw std::invalid_argument("center_gradient: empty input");
      grad.setConstant(1.0 / static_cast<double>(y.size()));
      break;
    case CenterKind::reference:
      if (spec.reference < 0 || spec.reference >= y.size()) {
        throw std::invalid_argument("center_gradient: reference index out of range");
      }
      grad[spec.reference] = 1.0;
      break;
    case CenterKind::smoothed_median: {
      // Implicit differentiation of the score equation at the minimizer.
      const double m = smoothed_median(y, spec.epsilon);
      double total = 0.0;
      for (Eigen::Index j = 0; j < y.size(); ++j) {
        grad[j] = detail::pseudo_huber_dsecond(y[j] - m, spec.epsilon);
        total += grad[j];
      }
      grad /= total;
      break;
    }
  }
  return grad;
}

struct CenteredEstimate {
  Eigen::VectorXd psi;              // centered estimates; NaN where undefined
  Eigen::MatrixXd IF;               // centered influence functions; zero cols where undefined
  std::vector<std::uint8_t> defined;  // per-category definedness after centering
  bool ok = true;                   // false when g itself could not be evaluated
};

// Centers psi and its influence matrix over the estimable categories only.
// Categories with estimable[j] == 0 stay undefined; if g cannot be evaluated
// on the estimable subset (no estimable categories, or a reference category
// that is itself non-estimable) the whole result is flagged undefined.
inline CenteredEstimate apply_centering(const Eigen::VectorXd& psi, const Eigen::MatrixXd& IF,
                                        const CenteringSpec& spec,
                                        const std::vector<std::uint8_t>& estimable) {
  const Eigen::Index J = psi.size();
  if (IF.cols() != J) throw std::invalid_argument("apply_centering: IF column count mismatch");
  if (static_cast<Eigen::Index>(estimable.size()) != J) {
    throw std::invalid_argument("apply_centering: estimable mask size mismatch");
  }
  CenteredEstimate out;
  out.psi = psi;
  out.IF = IF;
  out.defined = estimable;

  if (spec.kind == CenterKind::none) {
    for (Eigen::Index j = 0; j < J; ++j) {
      if (!estimable[static_cast<std::size_t>(j)]) {
        out.psi[j] = std::numeric_limits<double>::quiet_NaN();
        out.IF.col(j).setZero();
      }
    }
    return out;
  }

  std::vector<Eigen::Index> idx;
  for (Eigen::Index j = 0; j < J; ++j) {
    if (estimable[static_cast<std::size_t>(j)]) idx.push_back(j);
  }
  const bool ref_bad = spec.kind == CenterKind::reference &&
                       (spec.reference < 0 || spec.reference >= J ||
                        !estimable[static_cast<std::size_t>(spec.reference)]);
  if (idx.empty() || ref_bad) {
    out.ok = false;
    out.psi.setConstant(std::numeric_limits<double>::quiet_NaN());
    out.IF.setZero();
    std::fill(out.defined.begin(), out.defined.end(), 0);
    return out;
  }

  Eigen::VectorXd sub(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t t = 0; t < idx.size(); ++t) sub[static_cast<Eigen::Index>(t)] = psi[idx[t]];

  CenteringSpec local = spec;
  if (spec.kind == CenterKind::reference) {
    for (std::size_t t = 0; t < idx.size(); ++t) {
      if (idx[t] == spec.reference) local.reference = static_cast<int>(t);
    }
  }
  const double gval = center_value(local, sub);
  const Eigen::VectorXd gsub = center_gradient(local, sub);

  Eigen::VectorXd grad = Eigen::VectorXd::Zero(J);
  for (std::size_t t = 0; t < idx.size(); ++t) grad[idx[t]] = gsub[static_cast<Eigen::Index>(t)];

  const Eigen::VectorXd proj = IF * grad;  // per-row dot with the gradient
  for (Eigen::Index j = 0; j < J; ++j) {
    if (estimable[static_cast<std::size_t>(j)]) {
      out.psi[j] = psi[j] - gval;
      out.IF.col(j) = IF.col(j) - proj;
    } else {
      out.psi[j] = std::numeric_limits<double>::quiet_NaN();
      out.IF.col(j).setZero();
    }
  }
  return out;
}

}  // namespace folddiff

#endif
