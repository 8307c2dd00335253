#include "rsvl/probe.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "rsvl/error.hpp"
#include "rsvl/rng.hpp"
#include "rsvl/zeroshot.hpp"

namespace rsvl {

LabeledFeatures LabeledFeatures::make(EmbeddingMatrix features, std::vector<std::size_t> labels) {
  if (features.rows() != labels.size()) {
    throw Error(ErrorCode::LengthMismatch, std::to_string(features.rows()) + " rows vs " +
                                               std::to_string(labels.size()) + " labels");
  }
  LabeledFeatures lf;
  lf.n_classes = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
  std::vector<bool> seen(lf.n_classes, false);
  for (auto l : labels) seen[l] = true;
  for (std::size_t c = 0; c < lf.n_classes; ++c) {
    if (!seen[c]) throw Error(ErrorCode::Empty, "class " + std::to_string(c) + " has no rows");
  }
  lf.features = std::move(features);
  lf.labels = std::move(labels);
  return lf;
}

LabeledFeatures LabeledFeatures::subset(std::span<const std::size_t> rows) const {
  LabeledFeatures out;
  out.features = features.select_rows(rows);
  out.labels.reserve(rows.size());
  for (auto r : rows) out.labels.push_back(labels[r]);
  out.n_classes = n_classes;
  return out;
}

double LogRegModel::score(std::size_t cls, std::span<const float> x) const {
  double s = bias[cls];
  const double* w = weight.data() + cls * dim;
  for (std::size_t k = 0; k < dim; ++k) s += w[k] * x[k];
  return s;
}

void validate(const ProbeConfig& cfg) {
  if (!(cfg.split_ratio > 0.0 && cfg.split_ratio < 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "split_ratio must lie in (0, 1)");
  }
  if (cfg.shots && *cfg.shots < 1) throw Error(ErrorCode::InvalidConfig, "shots must be >= 1");
  if (!(cfg.l2_strength > 0.0)) throw Error(ErrorCode::InvalidConfig, "l2_strength must be > 0");
}

namespace {

std::vector<std::vector<std::size_t>> members_by_class(std::span<const std::size_t> labels,
                                                       std::size_t n_classes) {
  std::vector<std::vector<std::size_t>> by(n_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) by[labels[i]].push_back(i);
  return by;
}

std::size_t class_count(std::span<const std::size_t> labels) {
  return labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
}

}  // namespace

Split stratified_split(std::span<const std::size_t> labels, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw Error(ErrorCode::InvalidConfig, "ratio must lie in (0, 1)");
  auto by = members_by_class(labels, class_count(labels));
  Rng rng(seed);
  Split s;
  for (std::size_t c = 0; c < by.size(); ++c) {
    auto& m = by[c];
    if (m.empty()) continue;
    if (m.size() < 2) {
      throw Error(ErrorCode::ClassTooSmall,
                  "class " + std::to_string(c) + " has " + std::to_string(m.size()) + " member");
    }
    rng.shuffle(std::span<std::size_t>(m));
    auto n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(m.size())));
    n_train = std::clamp<std::size_t>(n_train, 1, m.size() - 1);
    s.train.insert(s.train.end(), m.begin(), m.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.test.insert(s.test.end(), m.begin() + static_cast<std::ptrdiff_t>(n_train), m.end());
  }
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

std::vector<std::size_t> sample_k_shot_rows(std::span<const std::size_t> labels,
                                            std::size_t n_classes, std::size_t k,
                                            std::uint64_t seed) {
  if (k < 1) throw Error(ErrorCode::InvalidConfig, "k must be >= 1");
  auto by = members_by_class(labels, std::max(n_classes, class_count(labels)));
  Rng rng(seed);
  std::vector<std::size_t> rows;
  for (std::size_t c = 0; c < by.size(); ++c) {
    auto& m = by[c];
    if (m.size() < k) {
      throw Error(ErrorCode::InsufficientShots, "class " + std::to_string(c) + " has " +
                                                    std::to_string(m.size()) + " rows, need " +
                                                    std::to_string(k));
    }
    rng.shuffle(std::span<std::size_t>(m));
    rows.insert(rows.end(), m.begin(), m.begin() + static_cast<std::ptrdiff_t>(k));
  }
  std::sort(rows.begin(), rows.end());
  return rows;
}

LabeledFeatures sample_k_shot(const LabeledFeatures& train, std::size_t k, std::uint64_t seed) {
  auto rows = sample_k_shot_rows(train.labels, train.n_classes, k, seed);
  return train.subset(rows);
}

namespace {

// Parameters packed as [W (C x D) | b (C)].
struct LogRegProblem {
  const LabeledFeatures& data;
  std::size_t classes;
  std::size_t dim;
  double l2_strength;

  std::size_t size() const { return classes * dim + classes; }

  // Objective value; writes the gradient when `grad` is non-empty.
  double eval(std::span<const double> theta, std::span<double> grad) const {
    const std::size_t n = data.features.rows();
    const double inv_n = 1.0 / static_cast<double>(n);
    const double reg = 1.0 / (2.0 * l2_strength * static_cast<double>(n));
    const double* w = theta.data();
    const double* b = theta.data() + classes * dim;
    if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0);

    std::vector<double> logits(classes);
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      auto x = data.features.row(i);
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < classes; ++c) {
        double s = b[c];
        for (std::size_t k = 0; k < dim; ++k) s += w[c * dim + k] * x[k];
        logits[c] = s;
        mx = std::max(mx, s);
      }
      double z = 0.0;
      for (std::size_t c = 0; c < classes; ++c) z += std::exp(logits[c] - mx);
      double lse = mx + std::log(z);
      loss += lse - logits[data.labels[i]];
      if (grad.empty()) continue;
      for (std::size_t c = 0; c < classes; ++c) {
        double r = (std::exp(logits[c] - lse) - (c == data.labels[i] ? 1.0 : 0.0)) * inv_n;
        for (std::size_t k = 0; k < dim; ++k) grad[c * dim + k] += r * x[k];
        grad[classes * dim + c] += r;
      }
    }
    double wsq = 0.0;
    for (std::size_t k = 0; k < classes * dim; ++k) {
      wsq += w[k] * w[k];
      if (!grad.empty()) grad[k] += 2.0 * reg * w[k];
    }
    return loss * inv_n + reg * wsq;
  }
};

double inf_norm(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

LogRegModel unpack(std::span<const double> theta, std::size_t classes, std::size_t dim,
                   double l2_strength) {
  LogRegModel m;
  m.n_classes = classes;
  m.dim = dim;
  m.l2_strength = l2_strength;
  m.weight.assign(theta.begin(), theta.begin() + static_cast<std::ptrdiff_t>(classes * dim));
  m.bias.assign(theta.begin() + static_cast<std::ptrdiff_t>(classes * dim), theta.end());
  return m;
}

}  // namespace

double logreg_objective(const LogRegModel& model, const LabeledFeatures& data) {
  LogRegProblem p{data, model.n_classes, model.dim, model.l2_strength};
  std::vector<double> theta(model.weight);
  theta.insert(theta.end(), model.bias.begin(), model.bias.end());
  return p.eval(theta, {});
}

LogRegFit logreg_fit(const LabeledFeatures& data, const ProbeConfig& cfg) {
  validate(cfg);
  if (data.n_classes < 2) throw Error(ErrorCode::InvalidConfig, "need at least 2 classes");
  if (data.features.rows() < data.n_classes) {
    throw Error(ErrorCode::InvalidConfig, "fewer rows than classes");
  }
  LogRegProblem p{data, data.n_classes, data.features.dim(), cfg.l2_strength};
  const std::size_t n_params = p.size();

  std::vector<double> theta(n_params, 0.0), grad(n_params), trial(n_params),
      trial_grad(n_params);
  double f = p.eval(theta, grad);

  LogRegFit out;
  out.objective_trace.push_back(f);
  double step = 1.0;
  constexpr double kArmijo = 1e-4;
  std::size_t iter = 0;
  double gnorm = inf_norm(grad);
  while (gnorm >= cfg.grad_tol && iter < cfg.max_iter) {
    double g2 = 0.0;
    for (double g : grad) g2 += g * g;

    double t = step;
    double f_trial = 0.0;
    bool accepted = false;
    for (int halvings = 0; halvings < 60; ++halvings) {
      for (std::size_t k = 0; k < n_params; ++k) trial[k] = theta[k] - t * grad[k];
      f_trial = p.eval(trial, trial_grad);
      if (f_trial <= f - kArmijo * t * g2) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) break;  // no descent representable at this precision

    // Barzilai-Borwein guess for the next trial step.
    double sy = 0.0, ss = 0.0;
    for (std::size_t k = 0; k < n_params; ++k) {
      double s = trial[k] - theta[k];
      double y = trial_grad[k] - grad[k];
      sy += s * y;
      ss += s * s;
    }
    step = sy > 0.0 ? std::clamp(ss / sy, 1e-10, 1e10) : 2.0 * t;

    theta.swap(trial);
    grad.swap(trial_grad);
    f = f_trial;
    gnorm = inf_norm(grad);
    out.objective_trace.push_back(f);
    ++iter;
  }
  out.model = unpack(theta, p.classes, p.dim, cfg.l2_strength);
  out.grad_norm = gnorm;
  out.iterations = iter;
  out.converged = gnorm < cfg.grad_tol;
  return out;
}

std::vector<std::size_t> logreg_predict(const LogRegModel& model, const EmbeddingMatrix& x) {
  if (x.dim() != model.dim) {
    throw Error(ErrorCode::ShapeMismatch, "feature dim " + std::to_string(x.dim()) +
                                              " vs model dim " + std::to_string(model.dim));
  }
  std::vector<std::size_t> pred(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto row = x.row(i);
    std::size_t best = 0;
    double best_s = model.score(0, row);
    for (std::size_t c = 1; c < model.n_classes; ++c) {
      double s = model.score(c, row);
      if (s > best_s) {
        best_s = s;
        best = c;
      }
    }
    pred[i] = best;
  }
  return pred;
}

std::vector<std::size_t> knn_classify(const LabeledFeatures& train, const EmbeddingMatrix& queries,
                                      std::size_t k, KnnMetric metric) {
  const std::size_t n = train.features.rows();
  if (k < 1 || k > n) {
    throw Error(ErrorCode::KTooLarge, "k = " + std::to_string(k) + " with " + std::to_string(n) +
                                          " training rows");
  }
  if (queries.dim() != train.features.dim()) {
    throw Error(ErrorCode::DimMismatch, "query dim " + std::to_string(queries.dim()) +
                                            " vs train dim " +
                                            std::to_string(train.features.dim()));
  }
  const EmbeddingMatrix* ref = &train.features;
  const EmbeddingMatrix* qry = &queries;
  EmbeddingMatrix ref_n, qry_n;
  if (metric == KnnMetric::Cosine) {
    ref_n = l2_normalize(train.features);
    qry_n = l2_normalize(queries);
    ref = &ref_n;
    qry = &qry_n;
  }

  std::vector<std::pair<double, std::size_t>> dist(n);
  std::vector<std::size_t> votes(train.n_classes);
  std::vector<std::size_t> pred(queries.rows());
  for (std::size_t q = 0; q < queries.rows(); ++q) {
    auto x = qry->row(q);
    for (std::size_t i = 0; i < n; ++i) {
      auto r = ref->row(i);
      double d = 0.0;
      if (metric == KnnMetric::Cosine) {
        d = 1.0 - dot(x, r);
      } else {
        for (std::size_t j = 0; j < x.size(); ++j) {
          double diff = static_cast<double>(x[j]) - static_cast<double>(r[j]);
          d += diff * diff;
        }
      }
      dist[i] = {d, i};
    }
    // (distance, index) pairs are totally ordered, so the selection is exact.
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
    std::fill(votes.begin(), votes.end(), 0);
    for (std::size_t j = 0; j < k; ++j) ++votes[train.labels[dist[j].second]];
    pred[q] = static_cast<std::size_t>(std::max_element(votes.begin(), votes.end()) - votes.begin());
  }
  return pred;
}

ProbeReport run_probe(const std::string& dataset, const LabeledFeatures& data,
                      const ProbeOptions& opts) {
  validate(opts.config);
  auto split = stratified_split(data.labels, opts.config.split_ratio, opts.config.seed);
  auto train = data.subset(split.train);
  auto test = data.subset(split.test);
  if (opts.config.shots) {
    // A separate stream from the split keeps shot draws stable when the
    // split ratio changes.
    train = sample_k_shot(train, *opts.config.shots, opts.config.seed ^ 0x9e3779b97f4a7c15ULL);
  }

  ProbeReport r;
  r.dataset = dataset;
  r.shots = opts.config.shots;
  r.method = opts.method;
  r.n_train = train.features.rows();
  r.n_test = test.features.rows();

  std::vector<std::size_t> pred;
  if (opts.method == ProbeMethod::Linear) {
    auto fitted = logreg_fit(train, opts.config);
    r.converged = fitted.converged;
    pred = logreg_predict(fitted.model, test.features);
  } else {
    pred = knn_classify(train, test.features, opts.k, opts.metric);
  }
  r.accuracy = top1_accuracy(pred, test.labels);
  return r;
}

}  // namespace rsvl
