#ifndef FOLDDIFF_LEARNERS_HPP
#define FOLDDIFF_LEARNERS_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "folddiff/glm.hpp"
#include "folddiff/mathutil.hpp"

namespace folddiff {

enum class TaskKind { regression_nonneg, binary };

enum class LearnerKind {
  sample_mean,
  glm_log,
  glm_log_ridge,
  boosted_stumps,
  logistic_glm,
  logistic_ridge,
  logistic_boosted
};

struct LearnerSpec {
  LearnerKind kind = LearnerKind::sample_mean;
  double lambda = 1.0;     // ridge variants
  int trees = 200;         // boosted variants
  int depth = 2;
  double shrinkage = 0.1;

  std::string name() const;
  // Accepted forms: "sample_mean", "glm_log", "glm_log_ridge[:lambda]",
  // "boost[:T[:D[:eta]]]", "logistic", "logistic_ridge[:lambda]",
  // "logistic_boost[:T[:D[:eta]]]".
  static LearnerSpec parse(const std::string& text);
  bool compatible(TaskKind task) const;
};

inline std::string LearnerSpec::name() const {
  switch (kind) {
    case LearnerKind::sample_mean: return "sample_mean";
    case LearnerKind::glm_log: return "glm_log";
    case LearnerKind::glm_log_ridge: return "glm_log_ridge:" + std::to_string(lambda);
    case LearnerKind::boosted_stumps:
      return "boost:" + std::to_string(trees) + ":" + std::to_string(depth);
    case LearnerKind::logistic_glm: return "logistic";
    case LearnerKind::logistic_ridge: return "logistic_ridge:" + std::to_string(lambda);
    case LearnerKind::logistic_boosted:
      return "logistic_boost:" + std::to_string(trees) + ":" + std::to_string(depth);
  }
  return "sample_mean";
}

inline LearnerSpec LearnerSpec::parse(const std::string& text) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : text) {
    if (c == ':') { parts.push_back(cur); cur.clear(); } else { cur += c; }
  }
  parts.push_back(cur);
  const std::string& head = parts[0];
  LearnerSpec spec;
  auto num = [&](std::size_t idx, double fallback) {
    if (parts.size() <= idx || parts[idx].empty()) return fallback;
    return std::stod(parts[idx]);
  };
  if (head == "sample_mean") {
    spec.kind = LearnerKind::sample_mean;
  } else if (head == "glm_log") {
    spec.kind = LearnerKind::glm_log;
  } else if (head == "glm_log_ridge") {
    spec.kind = LearnerKind::glm_log_ridge;
    spec.lambda = num(1, 1.0);
  } else if (head == "boost") {
    spec.kind = LearnerKind::boosted_stumps;
    spec.trees = static_cast<int>(num(1, 200));
    spec.depth = static_cast<int>(num(2, 2));
    spec.shrinkage = num(3, 0.1);
  } else if (head == "logistic") {
    spec.kind = LearnerKind::logistic_glm;
  } else if (head == "logistic_ridge") {
    spec.kind = LearnerKind::logistic_ridge;
    spec.lambda = num(1, 1.0);
  } else if (head == "logistic_boost") {
    spec.kind = LearnerKind::logistic_boosted;
    spec.trees = static_cast<int>(num(1, 200));
    spec.depth = static_cast<int>(num(2, 2));
    spec.shrinkage = num(3, 0.1);
  } else {
    throw std::invalid_argument("unknown learner '" + text + "'");
  }
  if (spec.lambda < 0.0 || spec.trees < 1 || spec.depth < 1 || spec.shrinkage <= 0.0) {
    throw std::invalid_argument("bad learner hyperparameters in '" + text + "'");
  }
  return spec;
}

inline bool LearnerSpec::compatible(TaskKind task) const {
  const bool binary = kind == LearnerKind::sample_mean || kind == LearnerKind::logistic_glm ||
                      kind == LearnerKind::logistic_ridge || kind == LearnerKind::logistic_boosted;
  const bool regression = kind == LearnerKind::sample_mean || kind == LearnerKind::glm_log ||
                          kind == LearnerKind::glm_log_ridge || kind == LearnerKind::boosted_stumps;
  return task == TaskKind::binary ? binary : regression;
}

struct FittedModel {
  virtual ~FittedModel() = default;
  virtual Eigen::VectorXd predict(const Eigen::MatrixXd& F) const = 0;
};

namespace detail {

struct ConstModel final : FittedModel {
  double value = 0.0;
  Eigen::VectorXd predict(const Eigen::MatrixXd& F) const override {
    return Eigen::VectorXd::Constant(F.rows(), value);
  }
};

// GLM learner with per-column standardization baked into the fit.
struct GlmModel final : FittedModel {
  bool log_link = true;
  Eigen::VectorXd beta;    // on the standardized scale, intercept first
  Eigen::VectorXd center;
  Eigen::VectorXd scale;
  Eigen::VectorXd predict(const Eigen::MatrixXd& F) const override {
    const Eigen::Index n = F.rows();
    Eigen::VectorXd eta = Eigen::VectorXd::Constant(n, beta[0]);
    for (Eigen::Index k = 0; k < F.cols(); ++k) {
      eta += ((F.col(k).array() - center[k]) / scale[k]).matrix() * beta[k + 1];
    }
    Eigen::VectorXd out(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double e = clip(eta[i], -40.0, 40.0);
      out[i] = log_link ? std::exp(e) : expit(e);
    }
    return out;
  }
};

struct TreeNode {
  int feature = -1;      // -1: leaf
  double threshold = 0.0;
  double value = 0.0;
  int left = -1;
  int right = -1;
};

struct Tree {
  std::vector<TreeNode> nodes;

  double predict_row(const Eigen::MatrixXd& F, Eigen::Index i) const {
    int at = 0;
    while (nodes[static_cast<std::size_t>(at)].feature >= 0) {
      const TreeNode& nd = nodes[static_cast<std::size_t>(at)];
      at = (F(i, nd.feature) <= nd.threshold) ? nd.left : nd.right;
    }
    return nodes[static_cast<std::size_t>(at)].value;
  }
};

// Greedy weighted least-squares tree on the residual vector r. Splits are
// exhaustive over feature midpoints; ties resolve to the first candidate so
// the fit is deterministic.
inline int build_tree_node(Tree& tree, const Eigen::MatrixXd& F, const Eigen::VectorXd& r,
                           const Eigen::VectorXd& w, std::vector<int>& idx, int depth_left) {
  double sw = 0.0, swr = 0.0;
  for (int i : idx) {
    sw += w[i];
    swr += w[i] * r[i];
  }
  TreeNode node;
  node.value = (sw > 0.0) ? swr / sw : 0.0;
  const int self = static_cast<int>(tree.nodes.size());
  tree.nodes.push_back(node);
  if (depth_left <= 0 || idx.size() < 2 || F.cols() == 0 || sw <= 0.0) return self;

  int best_f = -1;
  double best_t = 0.0, best_gain = 1e-12;
  std::vector<int> order;
  for (Eigen::Index f = 0; f < F.cols(); ++f) {
    order = idx;
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return F(a, f) < F(b, f); });
    double swl = 0.0, swrl = 0.0;
    for (std::size_t t = 0; t + 1 < order.size(); ++t) {
      const int i = order[t];
      swl += w[i];
      swrl += w[i] * r[i];
      const double v = F(i, f), vn = F(order[t + 1], f);
      if (v == vn || swl <= 0.0 || sw - swl <= 0.0) continue;
      const double swrr = swr - swrl;
      const double gain = swrl * swrl / swl + swrr * swrr / (sw - swl) - swr * swr / sw;
      if (gain > best_gain) {
        best_gain = gain;
        best_f = static_cast<int>(f);
        best_t = 0.5 * (v + vn);
      }
    }
  }
  if (best_f < 0) return self;

  std::vector<int> left, right;
  for (int i : idx) ((F(i, best_f) <= best_t) ? left : right).push_back(i);
  tree.nodes[static_cast<std::size_t>(self)].feature = best_f;
  tree.nodes[static_cast<std::size_t>(self)].threshold = best_t;
  const int l = build_tree_node(tree, F, r, w, left, depth_left - 1);
  const int rr = build_tree_node(tree, F, r, w, right, depth_left - 1);
  tree.nodes[static_cast<std::size_t>(self)].left = l;
  tree.nodes[static_cast<std::size_t>(self)].right = rr;
  return self;
}

struct BoostedModel final : FittedModel {
  bool classification = false;
  double base = 0.0;
  double shrinkage = 0.1;
  std::vector<Tree> trees;

  Eigen::VectorXd predict(const Eigen::MatrixXd& F) const override {
    Eigen::VectorXd score = Eigen::VectorXd::Constant(F.rows(), base);
    for (const Tree& t : trees) {
      for (Eigen::Index i = 0; i < F.rows(); ++i) score[i] += shrinkage * t.predict_row(F, i);
    }
    if (!classification) return score;
    Eigen::VectorXd p(F.rows());
    for (Eigen::Index i = 0; i < F.rows(); ++i) p[i] = expit(score[i]);
    return p;
  }
};

inline std::unique_ptr<FittedModel> fit_boosted(const LearnerSpec& spec, bool classification,
                                                const Eigen::MatrixXd& F, const Eigen::VectorXd& y,
                                                const Eigen::VectorXd& w) {
  auto model = std::make_unique<BoostedModel>();
  model->classification = classification;
  model->shrinkage = spec.shrinkage;
  const double sumw = w.sum();
  const double ybar = (sumw > 0.0) ? y.dot(w) / sumw : 0.0;
  model->base = classification ? logit(clip(ybar, 1e-6, 1.0 - 1e-6)) : ybar;

  const Eigen::Index n = F.rows();
  Eigen::VectorXd score = Eigen::VectorXd::Constant(n, model->base);
  Eigen::VectorXd resid(n);
  std::vector<int> all(static_cast<std::size_t>(n));
  std::iota(all.begin(), all.end(), 0);
  for (int t = 0; t < spec.trees; ++t) {
    for (Eigen::Index i = 0; i < n; ++i) {
      resid[i] = classification ? y[i] - expit(score[i]) : y[i] - score[i];
    }
    Tree tree;
    std::vector<int> idx = all;
    build_tree_node(tree, F, resid, w, idx, spec.depth);
    bool moved = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double step = spec.shrinkage * tree.predict_row(F, i);
      score[i] += step;
      if (step != 0.0) moved = true;
    }
    model->trees.push_back(std::move(tree));
    if (!moved && t > 0) break;  // residuals exhausted
  }
  return model;
}

inline std::unique_ptr<FittedModel> fit_glm_learner(bool log_link, double ridge,
                                                    const Eigen::MatrixXd& F,
                                                    const Eigen::VectorXd& y,
                                                    const Eigen::VectorXd& w) {
  auto model = std::make_unique<GlmModel>();
  model->log_link = log_link;
  const Eigen::Index n = F.rows(), p = F.cols();
  model->center = Eigen::VectorXd::Zero(p);
  model->scale = Eigen::VectorXd::Ones(p);
  const double sumw = w.sum();
  Eigen::MatrixXd design(n, p + 1);
  design.col(0).setOnes();
  for (Eigen::Index k = 0; k < p; ++k) {
    const double mean = F.col(k).dot(w) / sumw;
    double var = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      var += w[i] * (F(i, k) - mean) * (F(i, k) - mean);
    }
    var /= sumw;
    model->center[k] = mean;
    model->scale[k] = (var > 1e-24) ? std::sqrt(var) : 1.0;
    design.col(k + 1) = (F.col(k).array() - mean).matrix() / model->scale[k];
  }
  const GlmFit fit = log_link ? fit_weighted_poisson(design, y, w, Eigen::VectorXd(), ridge)
                              : fit_weighted_logistic(design, y, w, Eigen::VectorXd(), ridge);
  model->beta = fit.coefficients;
  return model;
}

}  // namespace detail

// Fits one candidate learner. Contract violations throw; statistical
// degeneracy (all-zero responses, separation) yields a usable capped fit.
inline std::unique_ptr<FittedModel> fit_learner(const LearnerSpec& spec, TaskKind task,
                                                const Eigen::MatrixXd& F, const Eigen::VectorXd& y,
                                                const Eigen::VectorXd& w) {
  if (!spec.compatible(task)) {
    throw std::invalid_argument("learner '" + spec.name() + "' not valid for this task");
  }
  if (F.rows() != y.size() || F.rows() != w.size()) {
    throw std::invalid_argument("fit_learner: dimension mismatch");
  }
  if (F.rows() == 0 || !(w.sum() > 0.0)) {
    throw std::invalid_argument("fit_learner: no weighted rows");
  }
  switch (spec.kind) {
    case LearnerKind::sample_mean: {
      auto m = std::make_unique<detail::ConstModel>();
      m->value = y.dot(w) / w.sum();
      return m;
    }
    case LearnerKind::glm_log:
      return detail::fit_glm_learner(true, 0.0, F, y, w);
    case LearnerKind::glm_log_ridge:
      return detail::fit_glm_learner(true, spec.lambda, F, y, w);
    case LearnerKind::logistic_glm:
      return detail::fit_glm_learner(false, 0.0, F, y, w);
    case LearnerKind::logistic_ridge:
      return detail::fit_glm_learner(false, spec.lambda, F, y, w);
    case LearnerKind::boosted_stumps:
      return detail::fit_boosted(spec, false, F, y, w);
    case LearnerKind::logistic_boosted:
      return detail::fit_boosted(spec, true, F, y, w);
  }
  throw std::logic_error("fit_learner: unreachable");
}

}  // namespace folddiff

#endif
