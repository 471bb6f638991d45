#pragma once

// Discriminator D(s,a) in (0,1), its adversarial update, and behavior-cloning
// pretraining of a policy mean onto expert actions.

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "ssil/rewards.hpp"
#include "ssil/tensor.hpp"

namespace ssil {

struct Discriminator {
  DenseNet net;  // (state, action) -> sigmoid scalar
  AdamState opt;
  int state_dim = 0;
  int action_dim = 0;
};

inline Discriminator make_discriminator(int state_dim, int action_dim,
                                        const std::vector<int>& hidden, double lr,
                                        std::mt19937_64& rng) {
  Discriminator d;
  d.state_dim = state_dim;
  d.action_dim = action_dim;
  d.net = make_mlp(state_dim + action_dim, hidden, 1, Act::Tanh, Act::Sigmoid, rng);
  d.opt = AdamState(param_count(d.net), lr);
  return d;
}

inline Vec concat_sa(const Vec& s, const Vec& a) {
  Vec x;
  x.reserve(s.size() + a.size());
  x.insert(x.end(), s.begin(), s.end());
  x.insert(x.end(), a.begin(), a.end());
  return x;
}

inline double disc_forward(const Discriminator& d, const Vec& s, const Vec& a) {
  if (static_cast<int>(s.size()) != d.state_dim || static_cast<int>(a.size()) != d.action_dim)
    throw std::invalid_argument("disc_forward: dim mismatch");
  return clamp_disc(forward(d.net, concat_sa(s, a))[0]);
}

struct SaBatch {
  std::vector<Vec> states;
  std::vector<Vec> actions;

  size_t size() const { return states.size(); }
};

// One ascent step on E_policy[log D] + E_expert[log(1-D)]; returns the
// objective value at the pre-update parameters.
inline double disc_update(Discriminator& d, const SaBatch& policy_batch,
                          const SaBatch& expert_batch) {
  if (policy_batch.size() == 0 || expert_batch.size() == 0)
    throw std::invalid_argument("disc_update: empty batch");
  NetGrads g = NetGrads::zeros_like(d.net);
  double objective = 0.0;
  ForwardTrace tr;
  // policy samples pushed toward D -> 1
  for (size_t i = 0; i < policy_batch.size(); ++i) {
    Vec x = concat_sa(policy_batch.states[i], policy_batch.actions[i]);
    forward_trace(d.net, x, tr);
    double o = clamp_disc(tr.output[0]);
    objective += std::log(o) / static_cast<double>(policy_batch.size());
    // minimize the negative objective
    Vec up{-1.0 / (o * static_cast<double>(policy_batch.size()))};
    backward(d.net, tr, up, g);
  }
  // expert samples pushed toward D -> 0
  for (size_t i = 0; i < expert_batch.size(); ++i) {
    Vec x = concat_sa(expert_batch.states[i], expert_batch.actions[i]);
    forward_trace(d.net, x, tr);
    double o = clamp_disc(tr.output[0]);
    objective += std::log(1.0 - o) / static_cast<double>(expert_batch.size());
    Vec up{1.0 / ((1.0 - o) * static_cast<double>(expert_batch.size()))};
    backward(d.net, tr, up, g);
  }
  adam_step(d.opt, d.net, g);
  return objective;
}

// Batch objective without an update; used by gradient checks.
inline double disc_objective(const Discriminator& d, const SaBatch& policy_batch,
                             const SaBatch& expert_batch) {
  double objective = 0.0;
  for (size_t i = 0; i < policy_batch.size(); ++i)
    objective += std::log(disc_forward(d, policy_batch.states[i], policy_batch.actions[i])) /
                 static_cast<double>(policy_batch.size());
  for (size_t i = 0; i < expert_batch.size(); ++i)
    objective += std::log(1.0 - disc_forward(d, expert_batch.states[i], expert_batch.actions[i])) /
                 static_cast<double>(expert_batch.size());
  return objective;
}

}  // namespace ssil
