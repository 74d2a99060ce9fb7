#pragma once

// Independent reference implementations used as test oracles.

#include <gmpxx.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <random>
#include <variant>
#include <vector>

#include "bintest/attacks.hpp"
#include "bintest/nn.hpp"
#include "bintest/readout.hpp"

namespace oracle {

using bintest::Vector;

// Scalar-by-scalar forward pass that shares no code with Network::forward.
inline Vector reference_forward(const bintest::Network& net, const Vector& x) {
  Vector cur = x;
  for (const bintest::Layer& layer : net.layers()) {
    if (const auto* d = std::get_if<bintest::DenseLayer>(&layer)) {
      Vector next(d->weight.rows(), 0.0);
      for (std::size_t r = 0; r < d->weight.rows(); ++r) {
        double acc = d->bias[r];
        for (std::size_t c = 0; c < d->weight.cols(); ++c) acc += d->weight(r, c) * cur[c];
        next[r] = acc;
      }
      cur = std::move(next);
    } else if (std::holds_alternative<bintest::ReluLayer>(layer)) {
      for (double& v : cur) v = v > 0.0 ? v : 0.0;
    } else if (const auto* q = std::get_if<bintest::QuantizeLayer>(&layer)) {
      const double steps = q->levels - 1;
      for (double& v : cur) {
        double t = (v - q->lo) / (q->hi - q->lo);
        t = t < 0.0 ? 0.0 : (t > 1.0 ? 1.0 : t);
        v = q->lo + std::round(t * steps) / steps * (q->hi - q->lo);
      }
    } else if (const auto* n = std::get_if<bintest::NormalizeLayer>(&layer)) {
      for (std::size_t j = 0; j < cur.size(); ++j) cur[j] = (cur[j] - n->mean[j]) / std::sqrt(n->variance[j] + n->epsilon);
    }
  }
  return cur;
}

inline bintest::Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0 / std::sqrt(static_cast<double>(cols)));
  bintest::Matrix m(rows, cols);
  for (double& v : m.data()) v = g(rng);
  return m;
}

inline Vector random_vector(std::size_t n, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vector v(n);
  for (double& e : v) e = u(rng);
  return v;
}

// Two hidden ReLU layers, optionally behind a frozen normalization layer.
inline bintest::Network random_network(std::size_t in, std::size_t h1, std::size_t h2, std::size_t out,
                                       std::uint64_t seed, bool normalized = false) {
  std::mt19937_64 rng(seed);
  bintest::Network net(in);
  if (normalized) net.add_normalization(random_vector(in, rng, 0.3, 0.7), random_vector(in, rng, 0.05, 0.2));
  net.add_dense(random_matrix(h1, in, rng), random_vector(h1, rng, -0.2, 0.2)).add_relu();
  net.add_dense(random_matrix(h2, h1, rng), random_vector(h2, rng, -0.2, 0.2)).add_relu();
  net.add_dense(random_matrix(out, h2, rng), random_vector(out, rng, -0.2, 0.2));
  return net;
}

// Smallest |pre-activation| feeding any ReLU; finite differences are only
// meaningful away from the kinks.
inline double min_kink_distance(const bintest::Network& net, const Vector& x) {
  bintest::Network::Trace trace;
  net.forward(x, trace);
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < net.layers().size(); ++i)
    if (std::holds_alternative<bintest::ReluLayer>(net.layers()[i]))
      for (double v : trace.inputs[i]) m = std::min(m, std::abs(v));
  return m;
}

// Identity feature extractor with a binary readout w.f + b.
inline bintest::BinarizedModel linear_binarized(Vector w, double b) {
  bintest::BinarizedModel m;
  m.extractor = std::make_shared<bintest::Network>(w.size());
  m.readout.weight = std::move(w);
  m.readout.bias = b;
  return m;
}

// Exact strict linear separability of two point sets over the rationals:
// is there (w, b) with w.p - b >= 1 on positives and w.n - b <= -1 on
// negatives? Phase-one simplex with Bland's rule on GMP rationals.
inline bool exactly_separable(const std::vector<Vector>& negatives, const std::vector<Vector>& positives) {
  const std::size_t d = negatives.empty() ? positives.front().size() : negatives.front().size();
  const std::size_t m = negatives.size() + positives.size();
  // columns: w+ (d), w- (d), b+, b-, surplus (m), artificial (m), rhs
  const std::size_t n_free = 2 * d + 2;
  const std::size_t n_cols = n_free + 2 * m;
  std::vector<std::vector<mpq_class>> t(m, std::vector<mpq_class>(n_cols + 1, 0));
  std::vector<std::size_t> basis(m);
  for (std::size_t i = 0; i < m; ++i) {
    const bool pos = i >= negatives.size();
    const Vector& p = pos ? positives[i - negatives.size()] : negatives[i];
    const int s = pos ? 1 : -1;
    for (std::size_t j = 0; j < d; ++j) {
      t[i][j] = mpq_class(p[j]) * s;
      t[i][d + j] = -mpq_class(p[j]) * s;
    }
    t[i][2 * d] = -s;
    t[i][2 * d + 1] = s;
    t[i][n_free + i] = -1;
    t[i][n_free + m + i] = 1;
    t[i][n_cols] = 1;
    basis[i] = n_free + m + i;
  }
  // reduced costs of "minimise the sum of artificials"
  std::vector<mpq_class> cost(n_cols + 1, 0);
  for (std::size_t j = 0; j <= n_cols; ++j) {
    if (j >= n_free + m && j < n_cols) continue;
    for (std::size_t i = 0; i < m; ++i) cost[j] -= t[i][j];
  }
  for (;;) {
    std::size_t enter = n_cols;
    for (std::size_t j = 0; j < n_cols; ++j)
      if (cost[j] < 0) {
        enter = j;
        break;
      }
    if (enter == n_cols) break;
    std::size_t leave = m;
    mpq_class best;
    for (std::size_t i = 0; i < m; ++i) {
      if (t[i][enter] <= 0) continue;
      const mpq_class ratio = t[i][n_cols] / t[i][enter];
      if (leave == m || ratio < best || (ratio == best && basis[i] < basis[leave])) {
        leave = i;
        best = ratio;
      }
    }
    if (leave == m) break;  // cannot happen: phase one is bounded below
    const mpq_class piv = t[leave][enter];
    for (mpq_class& v : t[leave]) v /= piv;
    for (std::size_t i = 0; i < m; ++i) {
      if (i == leave || t[i][enter] == 0) continue;
      const mpq_class f = t[i][enter];
      for (std::size_t j = 0; j <= n_cols; ++j) t[i][j] -= f * t[leave][j];
    }
    const mpq_class f = cost[enter];
    for (std::size_t j = 0; j <= n_cols; ++j) cost[j] -= f * t[leave][j];
    basis[leave] = enter;
  }
  return cost[n_cols] == 0;
}

}  // namespace oracle
