#pragma once

// Kernel constraint rewards: the binary-bank CoR ratio, the leverage-weighted
// LCoR average, and the combined policy reward -log D + eta * LCoR.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "ssil/tensor.hpp"

namespace ssil {

// (1 + d/alpha)^(-(alpha+1)/2), strictly decreasing in d for alpha > -1, alpha != 0
inline double tail_kernel(double d, double alpha) {
  return std::pow(1.0 + d / alpha, -(alpha + 1.0) / 2.0);
}

struct LeverageBank {
  std::vector<Vec> states;     // s_T
  std::vector<double> levers;  // l_T, aligned, in [0,1]
  double alpha = 1.0;

  void validate() const {
    if (states.empty() || states.size() != levers.size())
      throw std::invalid_argument("LeverageBank: empty or misaligned");
    if (!(alpha > -1.0) || alpha == 0.0)
      throw std::invalid_argument("LeverageBank: alpha must be > -1 and nonzero");
    for (double l : levers)
      if (!(l >= 0.0 && l <= 1.0)) throw std::invalid_argument("LeverageBank: leverage outside [0,1]");
  }
};

struct BinaryBank {
  std::vector<Vec> expert_states;    // s_E
  std::vector<Vec> negative_states;  // s_N
  double alpha = 1.0;

  void validate() const {
    if (expert_states.empty() || negative_states.empty())
      throw std::invalid_argument("BinaryBank: both sides must be non-empty");
    if (!(alpha > -1.0) || alpha == 0.0)
      throw std::invalid_argument("BinaryBank: alpha must be > -1 and nonzero");
  }
};

inline double sq_l2(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw std::invalid_argument("state dim mismatch");
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

inline double l1(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw std::invalid_argument("state dim mismatch");
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s;
}

// Binary constraint reward: two-kernel ratio over root-mean squared l2 distances.
inline double cor(const Vec& s, const BinaryBank& bank) {
  double de = 0.0;
  for (const Vec& e : bank.expert_states) de += sq_l2(s, e);
  de = std::sqrt(de / static_cast<double>(bank.expert_states.size()));
  double dn = 0.0;
  for (const Vec& n : bank.negative_states) dn += sq_l2(s, n);
  dn = std::sqrt(dn / static_cast<double>(bank.negative_states.size()));
  double ke = tail_kernel(de, bank.alpha);
  double kn = tail_kernel(dn, bank.alpha);
  return ke / (ke + kn);
}

// Leverage constraint reward: kernel-weighted average of bank leverages, l1 distances.
inline double lcor(const Vec& s, const LeverageBank& bank) {
  if (bank.states.empty()) throw std::invalid_argument("lcor: empty bank");
  double num = 0.0, den = 0.0;
  for (size_t j = 0; j < bank.states.size(); ++j) {
    double k = tail_kernel(l1(s, bank.states[j]), bank.alpha);
    num += bank.levers[j] * k;
    den += k;
  }
  return num / den;
}

inline constexpr double kDiscClamp = 1e-6;

inline double clamp_disc(double d) {
  if (d < kDiscClamp) return kDiscClamp;
  if (d > 1.0 - kDiscClamp) return 1.0 - kDiscClamp;
  return d;
}

// r(s,a) = -log D(s,a) + eta * LCoR
inline double policy_reward(double disc_output, double lcor_value, double eta) {
  return -std::log(clamp_disc(disc_output)) + eta * lcor_value;
}

}  // namespace ssil
