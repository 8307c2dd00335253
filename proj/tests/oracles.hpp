#pragma once

// Independent reference implementations used only by tests. None of these
// call into the library code paths they check.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <random>
#include <utility>
#include <vector>

namespace rsvl::oracle {

using Matrix = std::vector<std::vector<long double>>;

// Symmetric InfoNCE evaluated directly from its definition in long double.
inline long double info_nce(const Matrix& v, const Matrix& t, long double tau) {
  const std::size_t n = v.size();
  Matrix logits(n, std::vector<long double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      long double s = 0;
      for (std::size_t k = 0; k < v[i].size(); ++k) s += v[i][k] * t[j][k];
      logits[i][j] = s / tau;
    }
  long double a = 0, b = 0;
  for (std::size_t i = 0; i < n; ++i) {
    long double z = 0;
    for (std::size_t j = 0; j < n; ++j) z += std::exp(logits[i][j]);
    a += std::log(z) - logits[i][i];
  }
  for (std::size_t j = 0; j < n; ++j) {
    long double z = 0;
    for (std::size_t i = 0; i < n; ++i) z += std::exp(logits[i][j]);
    b += std::log(z) - logits[j][j];
  }
  return (a + b) / (2.0L * n);
}

// Central finite differences of info_nce with respect to every entry.
inline std::pair<Matrix, Matrix> info_nce_fd(Matrix v, Matrix t, long double tau,
                                             long double h) {
  auto grad = [&](Matrix& target) {
    Matrix g(target.size(), std::vector<long double>(target[0].size()));
    for (std::size_t i = 0; i < target.size(); ++i)
      for (std::size_t k = 0; k < target[i].size(); ++k) {
        long double keep = target[i][k];
        target[i][k] = keep + h;
        long double up = info_nce(v, t, tau);
        target[i][k] = keep - h;
        long double down = info_nce(v, t, tau);
        target[i][k] = keep;
        g[i][k] = (up - down) / (2 * h);
      }
    return g;
  };
  Matrix gv = grad(v);
  Matrix gt = grad(t);
  return {gv, gt};
}

// Recall by fully sorting every candidate list.
inline double recall_full_sort(const std::vector<std::vector<float>>& sim,  // [image][text]
                               const std::vector<std::size_t>& image_of, std::size_t k,
                               bool image_to_text) {
  const std::size_t n_img = sim.size();
  const std::size_t n_txt = image_of.size();
  auto sorted = [](std::vector<std::pair<float, std::size_t>> c) {
    std::sort(c.begin(), c.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    return c;
  };
  std::size_t hits = 0;
  if (image_to_text) {
    for (std::size_t i = 0; i < n_img; ++i) {
      std::vector<std::pair<float, std::size_t>> c;
      for (std::size_t j = 0; j < n_txt; ++j) c.push_back({sim[i][j], j});
      c = sorted(c);
      for (std::size_t r = 0; r < std::min(k, c.size()); ++r) {
        if (image_of[c[r].second] == i) {
          ++hits;
          break;
        }
      }
    }
    return 100.0 * hits / n_img;
  }
  for (std::size_t j = 0; j < n_txt; ++j) {
    std::vector<std::pair<float, std::size_t>> c;
    for (std::size_t i = 0; i < n_img; ++i) c.push_back({sim[i][j], i});
    c = sorted(c);
    for (std::size_t r = 0; r < std::min(k, c.size()); ++r) {
      if (c[r].second == image_of[j]) {
        ++hits;
        break;
      }
    }
  }
  return 100.0 * hits / n_txt;
}

// Exhaustive k-NN: sort all (distance, index) pairs per query.
inline std::vector<std::size_t> knn_exhaustive(const std::vector<std::vector<float>>& train,
                                               const std::vector<std::size_t>& labels,
                                               std::size_t n_classes,
                                               const std::vector<std::vector<float>>& queries,
                                               std::size_t k) {
  std::vector<std::size_t> out;
  for (const auto& q : queries) {
    std::vector<std::pair<double, std::size_t>> d;
    for (std::size_t i = 0; i < train.size(); ++i) {
      double s = 0;
      for (std::size_t j = 0; j < q.size(); ++j) {
        double diff = static_cast<double>(q[j]) - static_cast<double>(train[i][j]);
        s += diff * diff;
      }
      d.push_back({s, i});
    }
    std::sort(d.begin(), d.end());
    std::vector<std::size_t> votes(n_classes, 0);
    for (std::size_t r = 0; r < k; ++r) ++votes[labels[d[r].second]];
    std::size_t best = 0;
    for (std::size_t c = 1; c < n_classes; ++c)
      if (votes[c] > votes[best]) best = c;
    out.push_back(best);
  }
  return out;
}

// Multinomial logistic regression by plain fixed-step gradient descent on
// mean cross-entropy + ||W||^2 / (2 C n). Returns W (classes x dim) then b.
struct LogReg {
  std::vector<std::vector<double>> w;
  std::vector<double> b;

  std::size_t predict(const std::vector<float>& x) const {
    std::size_t best = 0;
    double best_s = -1e300;
    for (std::size_t c = 0; c < w.size(); ++c) {
      double s = b[c];
      for (std::size_t k = 0; k < x.size(); ++k) s += w[c][k] * x[k];
      if (s > best_s) {
        best_s = s;
        best = c;
      }
    }
    return best;
  }
};

inline LogReg logreg_plain_gd(const std::vector<std::vector<float>>& x,
                              const std::vector<std::size_t>& y, std::size_t classes, double c_reg,
                              double step, std::size_t iters) {
  const std::size_t n = x.size(), d = x[0].size();
  LogReg m{std::vector<std::vector<double>>(classes, std::vector<double>(d, 0.0)),
           std::vector<double>(classes, 0.0)};
  for (std::size_t it = 0; it < iters; ++it) {
    std::vector<std::vector<double>> gw(classes, std::vector<double>(d, 0.0));
    std::vector<double> gb(classes, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> s(classes);
      double mx = -1e300;
      for (std::size_t c = 0; c < classes; ++c) {
        s[c] = m.b[c];
        for (std::size_t k = 0; k < d; ++k) s[c] += m.w[c][k] * x[i][k];
        mx = std::max(mx, s[c]);
      }
      double z = 0;
      for (double v : s) z += std::exp(v - mx);
      for (std::size_t c = 0; c < classes; ++c) {
        double r = std::exp(s[c] - mx) / z - (c == y[i] ? 1.0 : 0.0);
        for (std::size_t k = 0; k < d; ++k) gw[c][k] += r * x[i][k] / n;
        gb[c] += r / n;
      }
    }
    for (std::size_t c = 0; c < classes; ++c) {
      for (std::size_t k = 0; k < d; ++k) {
        gw[c][k] += m.w[c][k] / (c_reg * n);
        m.w[c][k] -= step * gw[c][k];
      }
      m.b[c] -= step * gb[c];
    }
  }
  return m;
}

// Gaussian blobs around fixed centers; labels cycle through the classes.
inline void make_blobs(std::size_t n, const std::vector<std::pair<double, double>>& centers,
                       double spread, std::uint64_t seed, std::vector<std::vector<float>>& x,
                       std::vector<std::size_t>& y) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> noise(0.0, spread);
  x.clear();
  y.clear();
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t c = i % centers.size();
    x.push_back({static_cast<float>(centers[c].first + noise(gen)),
                 static_cast<float>(centers[c].second + noise(gen))});
    y.push_back(c);
  }
}

}  // namespace rsvl::oracle
