#pragma once

// Independent reference computations used as test oracles. They are
// deliberately written as plain scalar loops over the textbook formulas and
// share no code with the library.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <string>
#include <vector>

namespace oracle {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// W is [(in + H) x 4H] row-major, gate blocks i, f, o, g.
inline void lstm(const std::vector<double>& x, std::vector<double>& h, std::vector<double>& c,
                 const std::vector<double>& W, const std::vector<double>& b) {
  const std::size_t H = h.size();
  const std::size_t in = x.size();
  std::vector<double> nh(H), nc(H);
  for (std::size_t j = 0; j < H; ++j) {
    double pre[4];
    for (std::size_t g = 0; g < 4; ++g) {
      double s = b[g * H + j];
      for (std::size_t r = 0; r < in; ++r) s += x[r] * W[r * 4 * H + g * H + j];
      for (std::size_t r = 0; r < H; ++r) s += h[r] * W[(in + r) * 4 * H + g * H + j];
      pre[g] = s;
    }
    const double i = sigmoid(pre[0]), f = sigmoid(pre[1]), o = sigmoid(pre[2]);
    const double g = std::tanh(pre[3]);
    nc[j] = f * c[j] + i * g;
    nh[j] = o * std::tanh(nc[j]);
  }
  h = nh;
  c = nc;
}

inline void rnn(const std::vector<double>& x, std::vector<double>& h, const std::vector<double>& W,
                const std::vector<double>& b, bool relu) {
  const std::size_t H = h.size();
  const std::size_t in = x.size();
  std::vector<double> nh(H);
  for (std::size_t j = 0; j < H; ++j) {
    double s = b[j];
    for (std::size_t r = 0; r < in; ++r) s += x[r] * W[r * H + j];
    for (std::size_t r = 0; r < H; ++r) s += h[r] * W[(in + r) * H + j];
    nh[j] = relu ? (s > 0 ? s : 0.0) : std::tanh(s);
  }
  h = nh;
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
  }
  const double mx = sx / n, my = sy / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0 || syy == 0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

// Percent accuracy (or F1) of "direction * (a - t) > 0" predictions.
inline double threshold_objective(const std::vector<double>& a, const std::vector<bool>& y, double t, int direction,
                                  bool f1) {
  double tp = 0, fp = 0, fn = 0, tn = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool p = direction > 0 ? a[i] > t : a[i] < t;
    if (p && y[i]) ++tp;
    if (p && !y[i]) ++fp;
    if (!p && y[i]) ++fn;
    if (!p && !y[i]) ++tn;
  }
  if (!f1) return 100.0 * (tp + tn) / static_cast<double>(a.size());
  if (tp == 0) return 0.0;
  const double prec = tp / (tp + fp), rec = tp / (tp + fn);
  return 100.0 * 2 * prec * rec / (prec + rec);
}

// Best objective over every candidate cut and the lowest cut reaching it.
inline std::pair<double, double> best_threshold(const std::vector<double>& a, const std::vector<bool>& y,
                                                int direction, bool f1) {
  std::vector<double> s = a;
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  std::vector<double> cuts{s.front() - 1.0};
  for (std::size_t i = 0; i + 1 < s.size(); ++i) cuts.push_back((s[i] + s[i + 1]) / 2);
  cuts.push_back(s.back() + 1.0);
  double best = -1, at = 0;
  for (double t : cuts) {
    const double v = threshold_objective(a, y, t, direction, f1);
    if (v > best + 1e-9) {  // equal scores may differ in the last bit
      best = v;
      at = t;
    }
  }
  return {best, at};
}

inline double f1(double tp, double fp, double fn) {
  if (tp == 0) return 0.0;
  const double p = tp / (tp + fp), r = tp / (tp + fn);
  return 100.0 * 2 * p * r / (p + r);
}

// Mean and standard error (sample standard deviation over sqrt(n)).
inline std::pair<double, double> mean_se(const std::vector<double>& x) {
  long double s = 0;
  for (double v : x) s += v;
  const long double m = s / x.size();
  long double ss = 0;
  for (double v : x) ss += (v - m) * (v - m);
  const long double sd = x.size() > 1 ? std::sqrt(ss / (x.size() - 1)) : 0.0L;
  return {static_cast<double>(m), static_cast<double>(sd / std::sqrt(static_cast<long double>(x.size())))};
}

// All substrings of length k in [lo, hi].
inline std::map<std::u32string, std::size_t> ngrams(const std::u32string& s, std::size_t lo, std::size_t hi) {
  std::map<std::u32string, std::size_t> out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (std::size_t k = lo; k <= hi && i + k <= s.size(); ++k) ++out[s.substr(i, k)];
  }
  return out;
}

inline double cosine_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0 || bb == 0) return 1.0;
  return 1.0 - ab / std::sqrt(aa * bb);
}

// Average linkage by recomputing every cluster distance from its leaves.
// Returns the merge heights in order.
inline std::vector<double> average_linkage_heights(const std::vector<std::vector<double>>& v) {
  std::vector<std::vector<std::size_t>> clusters;
  for (std::size_t i = 0; i < v.size(); ++i) clusters.push_back({i});
  std::vector<double> heights;
  while (clusters.size() > 1) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t bi = 0, bj = 0;
    for (std::size_t i = 0; i < clusters.size(); ++i) {
      for (std::size_t j = i + 1; j < clusters.size(); ++j) {
        double d = 0;
        for (auto a : clusters[i]) {
          for (auto b : clusters[j]) d += cosine_distance(v[a], v[b]);
        }
        d /= static_cast<double>(clusters[i].size() * clusters[j].size());
        if (d < best) {
          best = d;
          bi = i;
          bj = j;
        }
      }
    }
    heights.push_back(best);
    clusters[bi].insert(clusters[bi].end(), clusters[bj].begin(), clusters[bj].end());
    clusters.erase(clusters.begin() + static_cast<long>(bj));
  }
  return heights;
}

}  // namespace oracle
