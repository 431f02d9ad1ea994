#ifndef FOLDDIFF_DATA_HPP
#define FOLDDIFF_DATA_HPP

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace folddiff {

// Rectangular study data: W holds one nonnegative outcome column per
// category, A is the binary exposure, X the (possibly empty) covariates.
struct Dataset {
  Eigen::MatrixXd W;
  Eigen::VectorXi A;
  Eigen::MatrixXd X;
  std::vector<std::string> sample_ids;
  std::vector<std::string> category_names;
  std::vector<std::string> covariate_names;

  Eigen::Index n() const { return W.rows(); }
  Eigen::Index J() const { return W.cols(); }
  Eigen::Index p() const { return X.cols(); }
};

enum class CategoryReason { ok, all_zero_in_arm0, all_zero_in_arm1, all_zero };

struct CategoryStatus {
  bool estimable = true;
  CategoryReason reason = CategoryReason::ok;
};

inline const char* reason_label(CategoryReason r) {
  switch (r) {
    case CategoryReason::ok: return "ok";
    case CategoryReason::all_zero_in_arm0: return "all_zero_in_arm0";
    case CategoryReason::all_zero_in_arm1: return "all_zero_in_arm1";
    case CategoryReason::all_zero: return "all_zero";
  }
  return "ok";
}

// Structural contract checks; throws on violation.
inline void check_dataset(const Dataset& d) {
  const Eigen::Index n = d.W.rows();
  if (n < 1 || d.W.cols() < 1) throw std::invalid_argument("dataset: empty outcome matrix");
  if (d.A.size() != n) throw std::invalid_argument("dataset: exposure length mismatch");
  if (d.X.rows() != n && d.X.size() != 0) {
    throw std::invalid_argument("dataset: covariate row count mismatch");
  }
  int n1 = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (d.A[i] != 0 && d.A[i] != 1) throw std::invalid_argument("dataset: exposure must be 0/1");
    n1 += d.A[i];
  }
  if (n1 == 0 || n1 == n) throw std::invalid_argument("dataset: both exposure arms must be nonempty");
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d.W.cols(); ++j) {
      const double v = d.W(i, j);
      if (!std::isfinite(v) || v < 0.0) {
        throw std::invalid_argument("dataset: outcomes must be finite and nonnegative");
      }
    }
    for (Eigen::Index k = 0; k < d.X.cols(); ++k) {
      if (!std::isfinite(d.X(i, k))) throw std::invalid_argument("dataset: covariates must be finite");
    }
  }
  if (!d.category_names.empty() &&
      static_cast<Eigen::Index>(d.category_names.size()) != d.W.cols()) {
    throw std::invalid_argument("dataset: category name count mismatch");
  }
}

// A category is non-estimable exactly when its column is identically zero
// within either arm (its arm mean is zero and the log ratio is undefined).
inline std::vector<CategoryStatus> validate(const Dataset& d) {
  check_dataset(d);
  std::vector<CategoryStatus> status(static_cast<std::size_t>(d.J()));
  for (Eigen::Index j = 0; j < d.J(); ++j) {
    bool any0 = false, any1 = false;
    for (Eigen::Index i = 0; i < d.n(); ++i) {
      if (d.W(i, j) > 0.0) {
        if (d.A[i] == 1) any1 = true; else any0 = true;
      }
    }
    CategoryStatus& s = status[static_cast<std::size_t>(j)];
    if (any0 && any1) {
      s = {true, CategoryReason::ok};
    } else if (!any0 && !any1) {
      s = {false, CategoryReason::all_zero};
    } else if (!any0) {
      s = {false, CategoryReason::all_zero_in_arm0};
    } else {
      s = {false, CategoryReason::all_zero_in_arm1};
    }
  }
  return status;
}

inline std::vector<std::uint8_t> estimable_mask(const std::vector<CategoryStatus>& status) {
  std::vector<std::uint8_t> mask(status.size());
  for (std::size_t j = 0; j < status.size(); ++j) mask[j] = status[j].estimable ? 1 : 0;
  return mask;
}

}  // namespace folddiff

#endif
