#include "rsvl/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include <json.hpp>

#include "rsvl/error.hpp"

namespace rsvl {

ProjectionHead ProjectionHead::zeros(std::size_t in_dim, std::size_t out_dim) {
  ProjectionHead h;
  h.in_dim = in_dim;
  h.out_dim = out_dim;
  h.weight.assign(in_dim * out_dim, 0.0f);
  h.bias.assign(out_dim, 0.0f);
  return h;
}

ProjectionHead ProjectionHead::identity(std::size_t dim) {
  auto h = zeros(dim, dim);
  for (std::size_t i = 0; i < dim; ++i) h.weight[i * dim + i] = 1.0f;
  return h;
}

ProjectionHead ProjectionHead::random(std::size_t in_dim, std::size_t out_dim, Rng& rng) {
  auto h = zeros(in_dim, out_dim);
  double scale = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(in_dim, 1)));
  for (auto& w : h.weight) w = static_cast<float>(rng.normal() * scale);
  return h;
}

bool ProjectionHead::finite() const {
  auto ok = [](float v) { return std::isfinite(v); };
  return std::all_of(weight.begin(), weight.end(), ok) && std::all_of(bias.begin(), bias.end(), ok);
}

EmbeddingMatrix ProjectionHead::weight_matrix() const {
  return EmbeddingMatrix(out_dim, in_dim, weight);
}

EmbeddingMatrix ProjectionHead::bias_matrix() const { return EmbeddingMatrix(1, out_dim, bias); }

ProjectionHead ProjectionHead::from_matrices(const EmbeddingMatrix& weight,
                                             const EmbeddingMatrix& bias) {
  if (bias.rows() != 1 || bias.dim() != weight.rows()) {
    throw Error(ErrorCode::ShapeMismatch, "bias must be 1 x out_dim");
  }
  ProjectionHead h;
  h.out_dim = weight.rows();
  h.in_dim = weight.dim();
  h.weight.assign(weight.data().begin(), weight.data().end());
  h.bias.assign(bias.data().begin(), bias.data().end());
  return h;
}

OptimizerState OptimizerState::for_head(const ProjectionHead& head) {
  OptimizerState s;
  s.m_weight.assign(head.weight.size(), 0.0);
  s.v_weight.assign(head.weight.size(), 0.0);
  s.m_bias.assign(head.bias.size(), 0.0);
  s.v_bias.assign(head.bias.size(), 0.0);
  return s;
}

void validate(const TrainConfig& cfg) {
  if (!(cfg.temperature > 0.0)) {
    throw Error(ErrorCode::NonPositiveTemperature, std::to_string(cfg.temperature));
  }
  auto bad = [](const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); };
  if (!(cfg.crop_scale_min > 0.0 && cfg.crop_scale_min <= cfg.crop_scale_max &&
        cfg.crop_scale_max <= 1.0)) {
    bad("require 0 < crop_scale_min <= crop_scale_max <= 1");
  }
  if (cfg.warmup_epochs >= cfg.epochs) bad("warmup_epochs must be < epochs");
  if (cfg.devices == 0 || cfg.batch_per_device == 0) bad("batch size must be positive");
  if (!(cfg.base_lr_denominator > 0.0)) bad("base_lr_denominator must be positive");
  if (cfg.weight_decay < 0.0) bad("weight_decay must be >= 0");
  if (cfg.embed_dim == 0) bad("embed_dim must be positive");
  if (cfg.input_size <= 0) bad("input_size must be positive");
}

namespace {

void check_batch(const EmbeddingMatrix& images, const EmbeddingMatrix& texts, double temperature) {
  if (!(temperature > 0.0)) {
    throw Error(ErrorCode::NonPositiveTemperature, std::to_string(temperature));
  }
  if (!images.normalized() || !texts.normalized()) {
    throw Error(ErrorCode::NotNormalized, "InfoNCE inputs must be L2-normalized");
  }
  if (images.rows() != texts.rows() || images.rows() == 0 || images.dim() != texts.dim()) {
    throw Error(ErrorCode::ShapeMismatch,
                std::to_string(images.rows()) + "x" + std::to_string(images.dim()) + " vs " +
                    std::to_string(texts.rows()) + "x" + std::to_string(texts.dim()));
  }
}

// Row-wise and column-wise softmax of the logits, plus both loss terms.
struct SoftmaxPass {
  std::size_t n = 0;
  std::vector<double> row_prob;  // softmax over texts for each image
  std::vector<double> col_prob;  // softmax over images for each text
  InfoNceLoss loss;
};

SoftmaxPass softmax_pass(const EmbeddingMatrix& images, const EmbeddingMatrix& texts,
                         double temperature) {
  const std::size_t n = images.rows();
  std::vector<double> logits(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      logits[i * n + j] = dot(images.row(i), texts.row(j)) / temperature;
    }
  }

  SoftmaxPass out;
  out.n = n;
  out.row_prob.resize(n * n);
  out.col_prob.resize(n * n);

  double sum_i2t = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double mx = logits[i * n];
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, logits[i * n + j]);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      double e = std::exp(logits[i * n + j] - mx);
      out.row_prob[i * n + j] = e;
      z += e;
    }
    for (std::size_t j = 0; j < n; ++j) out.row_prob[i * n + j] /= z;
    sum_i2t += std::log(z) + mx - logits[i * n + i];
  }

  double sum_t2i = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    double mx = logits[j];
    for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, logits[i * n + j]);
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double e = std::exp(logits[i * n + j] - mx);
      out.col_prob[i * n + j] = e;
      z += e;
    }
    for (std::size_t i = 0; i < n; ++i) out.col_prob[i * n + j] /= z;
    sum_t2i += std::log(z) + mx - logits[j * n + j];
  }

  out.loss.loss_i2t = sum_i2t / static_cast<double>(n);
  out.loss.loss_t2i = sum_t2i / static_cast<double>(n);
  out.loss.loss = 0.5 * (out.loss.loss_i2t + out.loss.loss_t2i);
  return out;
}

InfoNceGrad grad_from_pass(const SoftmaxPass& pass, const EmbeddingMatrix& images,
                           const EmbeddingMatrix& texts, double temperature) {
  const std::size_t n = pass.n;
  const std::size_t d = images.dim();
  // d(loss)/d(similarity_ij) = (P_ij + Q_ij - 2 [i == j]) / (2 n tau)
  std::vector<double> g(n * n);
  const double scale = 1.0 / (2.0 * static_cast<double>(n) * temperature);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double delta = i == j ? 2.0 : 0.0;
      g[i * n + j] = (pass.row_prob[i * n + j] + pass.col_prob[i * n + j] - delta) * scale;
    }
  }

  std::vector<float> d_img(n * d), d_txt(n * d);
  std::vector<double> acc(d);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      auto t = texts.row(j);
      for (std::size_t k = 0; k < d; ++k) acc[k] += g[i * n + j] * t[k];
    }
    for (std::size_t k = 0; k < d; ++k) d_img[i * d + k] = static_cast<float>(acc[k]);
  }
  for (std::size_t j = 0; j < n; ++j) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      auto v = images.row(i);
      for (std::size_t k = 0; k < d; ++k) acc[k] += g[i * n + j] * v[k];
    }
    for (std::size_t k = 0; k < d; ++k) d_txt[j * d + k] = static_cast<float>(acc[k]);
  }
  return {EmbeddingMatrix(n, d, std::move(d_img)), EmbeddingMatrix(n, d, std::move(d_txt))};
}

}  // namespace

InfoNceLoss info_nce_loss(const EmbeddingMatrix& images, const EmbeddingMatrix& texts,
                          double temperature) {
  check_batch(images, texts, temperature);
  return softmax_pass(images, texts, temperature).loss;
}

InfoNceGrad info_nce_grad(const EmbeddingMatrix& images, const EmbeddingMatrix& texts,
                          double temperature) {
  return info_nce(images, texts, temperature).second;
}

std::pair<InfoNceLoss, InfoNceGrad> info_nce(const EmbeddingMatrix& images,
                                             const EmbeddingMatrix& texts, double temperature) {
  check_batch(images, texts, temperature);
  auto pass = softmax_pass(images, texts, temperature);
  auto grad = grad_from_pass(pass, images, texts, temperature);
  return {pass.loss, std::move(grad)};
}

EmbeddingMatrix project(const EmbeddingMatrix& features, const ProjectionHead& head) {
  if (features.dim() != head.in_dim) {
    throw Error(ErrorCode::ShapeMismatch, "feature dim " + std::to_string(features.dim()) +
                                              " vs head in_dim " + std::to_string(head.in_dim));
  }
  const std::size_t n = features.rows();
  std::vector<float> out(n * head.out_dim);
  for (std::size_t i = 0; i < n; ++i) {
    auto x = features.row(i);
    for (std::size_t o = 0; o < head.out_dim; ++o) {
      std::span<const float> w(head.weight.data() + o * head.in_dim, head.in_dim);
      out[i * head.out_dim + o] = static_cast<float>(dot(w, x) + head.bias[o]);
    }
  }
  return EmbeddingMatrix(n, head.out_dim, std::move(out));
}

EmbeddingMatrix l2_normalize_backward(const EmbeddingMatrix& raw,
                                      const EmbeddingMatrix& grad_normalized) {
  if (raw.rows() != grad_normalized.rows() || raw.dim() != grad_normalized.dim()) {
    throw Error(ErrorCode::ShapeMismatch, "gradient shape differs from input");
  }
  const std::size_t d = raw.dim();
  std::vector<float> out(raw.rows() * d);
  for (std::size_t i = 0; i < raw.rows(); ++i) {
    auto x = raw.row(i);
    auto g = grad_normalized.row(i);
    double nx = norm(x);
    if (!(nx > kZeroNorm)) throw Error(ErrorCode::ZeroRow, "row " + std::to_string(i));
    // dx = (g - y <y, g>) / |x|, with y = x / |x|
    double yg = dot(x, g) / nx;
    for (std::size_t k = 0; k < d; ++k) {
      double y = x[k] / nx;
      out[i * d + k] = static_cast<float>((g[k] - y * yg) / nx);
    }
  }
  return EmbeddingMatrix(raw.rows(), d, std::move(out));
}

HeadGrad project_backward(const EmbeddingMatrix& features, const EmbeddingMatrix& grad_out) {
  if (features.rows() != grad_out.rows()) {
    throw Error(ErrorCode::ShapeMismatch, "row count differs");
  }
  const std::size_t in = features.dim();
  const std::size_t out = grad_out.dim();
  std::vector<double> w(out * in, 0.0), b(out, 0.0);
  for (std::size_t i = 0; i < features.rows(); ++i) {
    auto x = features.row(i);
    auto g = grad_out.row(i);
    for (std::size_t o = 0; o < out; ++o) {
      b[o] += g[o];
      for (std::size_t k = 0; k < in; ++k) w[o * in + k] += static_cast<double>(g[o]) * x[k];
    }
  }
  HeadGrad hg;
  hg.weight.assign(w.begin(), w.end());
  hg.bias.assign(b.begin(), b.end());
  return hg;
}

double effective_lr(const TrainConfig& cfg) {
  return static_cast<double>(cfg.devices) * static_cast<double>(cfg.batch_per_device) *
         cfg.base_lr_numerator / cfg.base_lr_denominator;
}

double cosine_warmup_lr(std::size_t step, std::size_t steps_per_epoch, const TrainConfig& cfg) {
  const std::size_t total = cfg.epochs * steps_per_epoch;
  if (step >= total) {
    throw Error(ErrorCode::StepOutOfRange,
                "step " + std::to_string(step) + " >= " + std::to_string(total));
  }
  const std::size_t warmup = cfg.warmup_epochs * steps_per_epoch;
  const double peak = effective_lr(cfg);
  if (step < warmup) {
    return peak * static_cast<double>(step) / static_cast<double>(warmup);
  }
  double progress = static_cast<double>(step - warmup) / static_cast<double>(total - warmup);
  return 0.5 * peak * (1.0 + std::cos(std::numbers::pi * progress));
}

namespace {

void adamw_update(std::span<float> params, std::span<const float> grads, std::vector<double>& m,
                  std::vector<double>& v, double lr, const TrainConfig& cfg, double bc1,
                  double bc2) {
  for (std::size_t k = 0; k < params.size(); ++k) {
    double p = params[k];
    p -= lr * cfg.weight_decay * p;
    double g = grads[k];
    m[k] = cfg.adam_beta1 * m[k] + (1.0 - cfg.adam_beta1) * g;
    v[k] = cfg.adam_beta2 * v[k] + (1.0 - cfg.adam_beta2) * g * g;
    double m_hat = m[k] / bc1;
    double v_hat = v[k] / bc2;
    p -= lr * m_hat / (std::sqrt(v_hat) + cfg.adam_eps);
    params[k] = static_cast<float>(p);
  }
}

}  // namespace

void adamw_step(ProjectionHead& head, const HeadGrad& grads, OptimizerState& state, double lr,
                const TrainConfig& cfg) {
  if (grads.weight.size() != head.weight.size() || grads.bias.size() != head.bias.size() ||
      state.m_weight.size() != head.weight.size() || state.v_weight.size() != head.weight.size() ||
      state.m_bias.size() != head.bias.size() || state.v_bias.size() != head.bias.size()) {
    throw Error(ErrorCode::ShapeMismatch, "optimizer state / gradient shape differs from head");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(cfg.adam_beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.adam_beta2, t);
  adamw_update(head.weight, grads.weight, state.m_weight, state.v_weight, lr, cfg, bc1, bc2);
  adamw_update(head.bias, grads.bias, state.m_bias, state.v_bias, lr, cfg, bc1, bc2);
}

CropRect random_resized_crop_plan(std::int64_t src, const TrainConfig& cfg, Rng& rng) {
  if (src <= 0) throw Error(ErrorCode::InvalidConfig, "source side must be positive");
  const double s = rng.uniform(cfg.crop_scale_min, cfg.crop_scale_max);
  const double src_d = static_cast<double>(src);
  auto side = static_cast<std::int64_t>(std::llround(src_d * std::sqrt(s)));

  // Rounding may step just outside the scale range; pull back inside when
  // some integer side satisfies it.
  auto area = [&](std::int64_t a) { return static_cast<double>(a) * a / (src_d * src_d); };
  auto lo = static_cast<std::int64_t>(std::floor(src_d * std::sqrt(cfg.crop_scale_min)));
  while (area(lo) < cfg.crop_scale_min) ++lo;
  auto hi = static_cast<std::int64_t>(std::ceil(src_d * std::sqrt(cfg.crop_scale_max)));
  while (hi > 0 && area(hi) > cfg.crop_scale_max) --hi;
  if (lo <= hi) side = std::clamp(side, lo, hi);
  side = std::clamp<std::int64_t>(side, 1, src);

  const auto slack = static_cast<std::uint64_t>(src - side) + 1;
  CropRect r;
  r.w = side;
  r.h = side;
  r.x = static_cast<std::int64_t>(rng.below(slack));
  r.y = static_cast<std::int64_t>(rng.below(slack));
  return r;
}

std::vector<PairIndex> aligned_pairs(std::size_t n) {
  std::vector<PairIndex> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = {i, i};
  return p;
}

FitResult fit(const EmbeddingMatrix& image_features, const EmbeddingMatrix& text_features,
              std::span<const PairIndex> pairs, const TrainConfig& cfg) {
  validate(cfg);
  for (const auto& [img, txt] : pairs) {
    if (img >= image_features.rows() || txt >= text_features.rows()) {
      throw Error(ErrorCode::ShapeMismatch, "pair index out of range");
    }
  }
  const std::size_t batch = cfg.global_batch();
  if (pairs.size() < batch) {
    throw Error(ErrorCode::InvalidConfig, "global batch " + std::to_string(batch) +
                                              " exceeds pair count " +
                                              std::to_string(pairs.size()));
  }

  Rng rng(cfg.seed);
  FitResult result;
  result.image_head = ProjectionHead::random(image_features.dim(), cfg.embed_dim, rng);
  result.text_head = ProjectionHead::random(text_features.dim(), cfg.embed_dim, rng);
  result.steps_per_epoch = pairs.size() / batch;
  result.history.reserve(cfg.epochs * result.steps_per_epoch);

  auto image_state = OptimizerState::for_head(result.image_head);
  auto text_state = OptimizerState::for_head(result.text_head);

  std::vector<PairIndex> order(pairs.begin(), pairs.end());
  std::vector<std::size_t> img_idx(batch), txt_idx(batch);
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(std::span<PairIndex>(order));
    for (std::size_t b = 0; b < result.steps_per_epoch; ++b, ++step) {
      for (std::size_t k = 0; k < batch; ++k) {
        img_idx[k] = order[b * batch + k].first;
        txt_idx[k] = order[b * batch + k].second;
      }
      auto img_x = image_features.select_rows(img_idx);
      auto txt_x = text_features.select_rows(txt_idx);
      auto img_raw = project(img_x, result.image_head);
      auto txt_raw = project(txt_x, result.text_head);
      auto [loss, grad] = info_nce(l2_normalize(img_raw), l2_normalize(txt_raw), cfg.temperature);

      auto img_grad = project_backward(img_x, l2_normalize_backward(img_raw, grad.d_images));
      auto txt_grad = project_backward(txt_x, l2_normalize_backward(txt_raw, grad.d_texts));

      double lr = cosine_warmup_lr(step, result.steps_per_epoch, cfg);
      adamw_step(result.image_head, img_grad, image_state, lr, cfg);
      adamw_step(result.text_head, txt_grad, text_state, lr, cfg);
      if (!result.image_head.finite() || !result.text_head.finite()) {
        throw Error(ErrorCode::InvalidConfig,
                    "non-finite head parameters after step " + std::to_string(step));
      }
      result.history.push_back({step, lr, loss.loss, loss.loss_i2t, loss.loss_t2i});
    }
  }
  return result;
}

void write_history(std::span<const HistoryEntry> history, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw Error(ErrorCode::Io, "cannot open " + path.string() + " for writing");
  for (const auto& h : history) {
    nlohmann::ordered_json j;
    j["step"] = h.step;
    j["lr"] = h.lr;
    j["loss"] = h.loss;
    j["loss_i2t"] = h.loss_i2t;
    j["loss_t2i"] = h.loss_t2i;
    f << j.dump() << '\n';
  }
}

}  // namespace rsvl
