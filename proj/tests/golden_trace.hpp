#pragma once

// Straight-line transcription of the HELENE step for L = theta^2 / 2 in one
// dimension (batch size 1). Only the Gaussian draws come from the library.

#include <cmath>
#include <cstdint>
#include <vector>

#include "helene/rand_perturb.hpp"

namespace golden {

struct Row {
  double theta, m, h, alpha, grad;
  bool refreshed;
  int clipped;
};

struct Hypers {
  double lr = 0.1, beta1 = 0.9, beta2 = 0.99, gamma = 1.0, floor = 1.0, eps_num = 1e-12;
  double anneal_T = 3.0, eps = 1e-3;
  int k = 2;
};

inline std::vector<Row> trace(double theta, const Hypers& hp, const std::vector<std::uint64_t>& seeds) {
  std::vector<Row> rows;
  double m = 0.0, h = 0.0;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const int t = static_cast<int>(i) + 1;
    const double z = helene::materialize({seeds[i], hp.eps}, 1)[0];
    const double up = theta + hp.eps * z;
    const double down = theta - hp.eps * z;
    const double projected = (0.5 * up * up - 0.5 * down * down) / (2 * hp.eps);
    const double g = projected * z;
    const double alpha = hp.beta1 + (1 - hp.beta1) * std::exp(-t / hp.anneal_T);
    m = hp.beta1 * m + alpha * g;
    const bool refresh = t % hp.k == 1 % hp.k;
    if (refresh) {
      const double hhat = 1.0 * g * g;
      h = hp.beta2 * h + (1 - hp.beta2) * hhat;
    }
    const int clipped = h < hp.floor ? 1 : 0;
    theta = theta - hp.lr * m / (hp.gamma * std::max(h, hp.floor) + hp.eps_num);
    rows.push_back({theta, m, h, alpha, g, refresh, clipped});
  }
  return rows;
}

}  // namespace golden
