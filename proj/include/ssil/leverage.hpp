#pragma once

// Leverage estimation: train a VAE / MDN / GPR on labeled expert data, score
// unlabeled states by reconstruction error or predictive uncertainty, and
// normalize the scores into leverage values in [0,1].

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "ssil/demo.hpp"
#include "ssil/rewards.hpp"
#include "ssil/tensor.hpp"

namespace ssil {

// Per-dimension mean/scale computed on expert data, applied to all scored inputs.
struct Standardizer {
  Vec mean;
  Vec scale;

  static Standardizer fit(const std::vector<Vec>& xs) {
    if (xs.empty()) throw std::invalid_argument("Standardizer: empty data");
    size_t d = xs[0].size();
    Standardizer st;
    st.mean.assign(d, 0.0);
    st.scale.assign(d, 0.0);
    for (const Vec& x : xs)
      for (size_t i = 0; i < d; ++i) st.mean[i] += x[i];
    for (double& m : st.mean) m /= static_cast<double>(xs.size());
    for (const Vec& x : xs)
      for (size_t i = 0; i < d; ++i) {
        double c = x[i] - st.mean[i];
        st.scale[i] += c * c;
      }
    for (double& s : st.scale) s = std::max(std::sqrt(s / static_cast<double>(xs.size())), 1e-8);
    return st;
  }

  Vec apply(const Vec& x) const {
    Vec out(x.size());
    for (size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - mean[i]) / scale[i];
    return out;
  }
};

enum class VaeInputMode { Plain, Windowed };

struct VAEModel {
  DenseNet encoder;  // input -> [latent mean, latent log-variance]
  DenseNet decoder;  // latent -> input reconstruction
  int latent_dim = 0;
  VaeInputMode mode = VaeInputMode::Plain;
  Standardizer standardizer;
};

struct VaeConfig {
  int latent_dim = 8;
  std::vector<int> hidden = {64, 64};
  int epochs = 30;
  double lr = 1e-3;
  double kl_weight = 1.0;
};

// Squared-error reconstruction + KL to a unit Gaussian, one sample.
// Accumulates encoder/decoder gradients when grad pointers are given.
inline double vae_sample_loss(const VAEModel& m, const Vec& x_std, const Vec& eps,
                              NetGrads* enc_grads, NetGrads* dec_grads, double kl_weight) {
  int L = m.latent_dim;
  ForwardTrace enc_tr;
  forward_trace(m.encoder, x_std, enc_tr);
  Vec mu(enc_tr.output.begin(), enc_tr.output.begin() + L);
  Vec logvar(enc_tr.output.begin() + L, enc_tr.output.end());
  Vec z(L);
  for (int i = 0; i < L; ++i) z[i] = mu[i] + std::exp(0.5 * logvar[i]) * eps[i];
  ForwardTrace dec_tr;
  forward_trace(m.decoder, z, dec_tr);
  const Vec& xhat = dec_tr.output;

  double recon = 0.0;
  for (size_t i = 0; i < x_std.size(); ++i) {
    double d = xhat[i] - x_std[i];
    recon += d * d;
  }
  double kl = 0.0;
  for (int i = 0; i < L; ++i) kl += 0.5 * (std::exp(logvar[i]) + mu[i] * mu[i] - 1.0 - logvar[i]);
  double loss = recon + kl_weight * kl;

  if (enc_grads && dec_grads) {
    Vec dxhat(xhat.size());
    for (size_t i = 0; i < xhat.size(); ++i) dxhat[i] = 2.0 * (xhat[i] - x_std[i]);
    Vec dz = backward(m.decoder, dec_tr, dxhat, *dec_grads);
    Vec up(2 * L);
    for (int i = 0; i < L; ++i) {
      up[i] = dz[i] + kl_weight * mu[i];                            // d/dmu
      up[L + i] = dz[i] * eps[i] * 0.5 * std::exp(0.5 * logvar[i])  // through z
                  + kl_weight * 0.5 * (std::exp(logvar[i]) - 1.0);  // through KL
    }
    backward(m.encoder, enc_tr, up, *enc_grads);
  }
  return loss;
}

// Deterministic objective through the latent mean; used for progress checks.
inline double vae_objective(const VAEModel& m, const std::vector<Vec>& xs_std) {
  int L = m.latent_dim;
  double total = 0.0;
  for (const Vec& x : xs_std) {
    Vec enc = forward(m.encoder, x);
    Vec mu(enc.begin(), enc.begin() + L);
    Vec logvar(enc.begin() + L, enc.end());
    Vec xhat = forward(m.decoder, mu);
    for (size_t i = 0; i < x.size(); ++i) {
      double d = xhat[i] - x[i];
      total += d * d;
    }
    for (int i = 0; i < L; ++i)
      total += 0.5 * (std::exp(logvar[i]) + mu[i] * mu[i] - 1.0 - logvar[i]);
  }
  return total / static_cast<double>(xs_std.size());
}

inline VAEModel train_vae(const std::vector<Vec>& expert_inputs, const VaeConfig& cfg,
                          std::mt19937_64& rng, VaeInputMode mode = VaeInputMode::Plain) {
  if (expert_inputs.empty()) throw std::invalid_argument("train_vae: no data");
  if (static_cast<int>(expert_inputs.size()) < cfg.latent_dim)
    throw std::invalid_argument("train_vae: fewer states than latent dim");
  int in_dim = static_cast<int>(expert_inputs[0].size());
  VAEModel m;
  m.latent_dim = cfg.latent_dim;
  m.mode = mode;
  m.standardizer = Standardizer::fit(expert_inputs);
  m.encoder = make_mlp(in_dim, cfg.hidden, 2 * cfg.latent_dim, Act::Tanh, Act::Identity, rng);
  m.decoder = make_mlp(cfg.latent_dim, cfg.hidden, in_dim, Act::Tanh, Act::Identity, rng);

  std::vector<Vec> xs;
  xs.reserve(expert_inputs.size());
  for (const Vec& x : expert_inputs) xs.push_back(m.standardizer.apply(x));

  AdamState enc_opt(param_count(m.encoder), cfg.lr);
  AdamState dec_opt(param_count(m.decoder), cfg.lr);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<size_t> order(xs.size());
  std::iota(order.begin(), order.end(), 0);
  const int batch = 32;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (size_t start = 0; start < order.size(); start += batch) {
      size_t end = std::min(order.size(), start + batch);
      NetGrads ge = NetGrads::zeros_like(m.encoder);
      NetGrads gd = NetGrads::zeros_like(m.decoder);
      Vec eps(m.latent_dim);
      for (size_t i = start; i < end; ++i) {
        for (double& e : eps) e = gauss(rng);
        vae_sample_loss(m, xs[order[i]], eps, &ge, &gd, cfg.kl_weight);
      }
      double inv = 1.0 / static_cast<double>(end - start);
      ge.scale(inv);
      gd.scale(inv);
      adam_step(enc_opt, m.encoder, ge);
      adam_step(dec_opt, m.decoder, gd);
    }
  }
  return m;
}

struct ReconstructionErrorSet {
  std::vector<double> errors;  // r_j >= 0, aligned with the scored state list
};

// r_j = ||x_std - decode(encode_mean(x_std))||_2, deterministic through the latent mean.
inline ReconstructionErrorSet reconstruction_errors(const VAEModel& m,
                                                    const std::vector<Vec>& inputs) {
  ReconstructionErrorSet out;
  out.errors.reserve(inputs.size());
  for (const Vec& raw : inputs) {
    if (static_cast<int>(raw.size()) != m.encoder.input_dim())
      throw std::invalid_argument("reconstruction_errors: input dim mismatch");
    Vec x = m.standardizer.apply(raw);
    Vec enc = forward(m.encoder, x);
    Vec mu(enc.begin(), enc.begin() + m.latent_dim);
    Vec xhat = forward(m.decoder, mu);
    double s = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
      double d = x[i] - xhat[i];
      s += d * d;
    }
    out.errors.push_back(std::sqrt(s));
  }
  return out;
}

// l_j = (r_max - r_j) / (r_max - r_min); smallest error -> 1, largest -> 0.
// Degenerate spread (all equal, or a single error) maps everything to 1.
inline std::vector<double> normalize_to_leverage(const std::vector<double>& errors) {
  if (errors.empty()) throw std::invalid_argument("normalize_to_leverage: empty");
  double rmin = *std::min_element(errors.begin(), errors.end());
  double rmax = *std::max_element(errors.begin(), errors.end());
  std::vector<double> out(errors.size(), 1.0);
  if (rmax > rmin) {
    double inv = 1.0 / (rmax - rmin);
    for (size_t j = 0; j < errors.size(); ++j) out[j] = (rmax - errors[j]) * inv;
  }
  return out;
}

// -------- mixture density network --------

struct MDNModel {
  DenseNet trunk;  // state -> [K logits, K*Da means, K*Da log-variances]
  int components = 0;
  int action_dim = 0;
  Standardizer standardizer;
};

struct MdnConfig {
  int components = 5;
  std::vector<int> hidden = {64, 64};
  int epochs = 40;
  double lr = 1e-3;
};

struct MdnOutput {
  std::vector<double> weights;   // softmax over K, sum 1
  std::vector<Vec> means;        // K x Da
  std::vector<Vec> vars;         // K x Da
};

inline MdnOutput mdn_decode(const MDNModel& m, const Vec& raw_out) {
  int K = m.components, Da = m.action_dim;
  MdnOutput o;
  o.weights.resize(K);
  double mx = *std::max_element(raw_out.begin(), raw_out.begin() + K);
  double z = 0.0;
  for (int k = 0; k < K; ++k) {
    o.weights[k] = std::exp(raw_out[k] - mx);
    z += o.weights[k];
  }
  for (double& w : o.weights) w /= z;
  o.means.assign(K, Vec(Da));
  o.vars.assign(K, Vec(Da));
  for (int k = 0; k < K; ++k)
    for (int d = 0; d < Da; ++d) {
      o.means[k][d] = raw_out[K + k * Da + d];
      o.vars[k][d] = std::exp(raw_out[K + K * Da + k * Da + d]);
    }
  return o;
}

// Negative log-likelihood of one (state, action) pair; accumulates gradients
// via mixture responsibilities when grads is non-null.
inline double mdn_nll(const MDNModel& m, const Vec& state, const Vec& action, NetGrads* grads) {
  int K = m.components, Da = m.action_dim;
  if (static_cast<int>(action.size()) != Da) throw std::invalid_argument("mdn_nll: action dim");
  Vec x = m.standardizer.apply(state);
  ForwardTrace tr;
  forward_trace(m.trunk, x, tr);
  MdnOutput o = mdn_decode(m, tr.output);

  // log N_k(a) with diagonal covariance
  std::vector<double> logp(K);
  const double log2pi = std::log(2.0 * M_PI);
  for (int k = 0; k < K; ++k) {
    double lp = 0.0;
    for (int d = 0; d < Da; ++d) {
      double diff = action[d] - o.means[k][d];
      lp += -0.5 * (log2pi + std::log(o.vars[k][d]) + diff * diff / o.vars[k][d]);
    }
    logp[k] = lp;
  }
  double mx = -1e300;
  for (int k = 0; k < K; ++k) mx = std::max(mx, std::log(o.weights[k]) + logp[k]);
  double acc = 0.0;
  for (int k = 0; k < K; ++k) acc += std::exp(std::log(o.weights[k]) + logp[k] - mx);
  double loglik = mx + std::log(acc);

  if (grads) {
    // responsibilities
    std::vector<double> gamma(K);
    for (int k = 0; k < K; ++k) gamma[k] = std::exp(std::log(o.weights[k]) + logp[k] - loglik);
    Vec up(tr.output.size(), 0.0);
    for (int k = 0; k < K; ++k) {
      up[k] = o.weights[k] - gamma[k];  // d(-loglik)/dlogit_k
      for (int d = 0; d < Da; ++d) {
        double diff = action[d] - o.means[k][d];
        up[K + k * Da + d] = -gamma[k] * diff / o.vars[k][d];
        up[K + K * Da + k * Da + d] = gamma[k] * 0.5 * (1.0 - diff * diff / o.vars[k][d]);
      }
    }
    backward(m.trunk, tr, up, *grads);
  }
  return -loglik;
}

inline MDNModel train_mdn(const std::vector<Vec>& states, const std::vector<Vec>& actions,
                          const MdnConfig& cfg, std::mt19937_64& rng) {
  if (states.empty() || states.size() != actions.size())
    throw std::invalid_argument("train_mdn: empty or misaligned data");
  MDNModel m;
  m.components = cfg.components;
  m.action_dim = static_cast<int>(actions[0].size());
  m.standardizer = Standardizer::fit(states);
  int out_dim = cfg.components * (1 + 2 * m.action_dim);
  m.trunk = make_mlp(static_cast<int>(states[0].size()), cfg.hidden, out_dim, Act::Tanh,
                     Act::Identity, rng);

  AdamState opt(param_count(m.trunk), cfg.lr);
  std::vector<size_t> order(states.size());
  std::iota(order.begin(), order.end(), 0);
  const int batch = 32;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (size_t start = 0; start < order.size(); start += batch) {
      size_t end = std::min(order.size(), start + batch);
      NetGrads g = NetGrads::zeros_like(m.trunk);
      for (size_t i = start; i < end; ++i) mdn_nll(m, states[order[i]], actions[order[i]], &g);
      g.scale(1.0 / static_cast<double>(end - start));
      adam_step(opt, m.trunk, g);
    }
  }
  return m;
}

// Aleatoric (mean component variance) plus epistemic (weighted spread of
// component means), summed over action dims. A function of the state only.
inline double mdn_uncertainty(const MDNModel& m, const Vec& state) {
  Vec x = m.standardizer.apply(state);
  MdnOutput o = mdn_decode(m, forward(m.trunk, x));
  int K = m.components, Da = m.action_dim;
  Vec mean_bar(Da, 0.0);
  for (int k = 0; k < K; ++k)
    for (int d = 0; d < Da; ++d) mean_bar[d] += o.weights[k] * o.means[k][d];
  double aleatoric = 0.0, epistemic = 0.0;
  for (int k = 0; k < K; ++k)
    for (int d = 0; d < Da; ++d) {
      aleatoric += o.weights[k] * o.vars[k][d];
      double diff = o.means[k][d] - mean_bar[d];
      epistemic += o.weights[k] * diff * diff;
    }
  return aleatoric + epistemic;
}

// -------- Gaussian process regression --------

struct GPRModel {
  std::vector<Vec> train_x;  // standardized
  std::vector<Vec> train_y;
  double signal_var = 1.0;
  double length_scale = 1.0;
  double noise_var = 1e-2;
  std::vector<Vec> chol;  // lower-triangular factor of K + noise I
  Standardizer standardizer;
};

struct GprConfig {
  double signal_var = 1.0;
  double length_scale = 1.0;
  double noise_var = 1e-2;
  size_t max_points = 1000;  // seeded uniform subsample cap
};

inline double se_kernel(const Vec& a, const Vec& b, double signal_var, double length_scale) {
  return signal_var * std::exp(-0.5 * sq_l2(a, b) / (length_scale * length_scale));
}

// In-place dense Cholesky; returns false on a non-positive pivot.
inline bool cholesky(std::vector<Vec>& a) {
  size_t n = a.size();
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j <= i; ++j) {
      double s = a[i][j];
      for (size_t k = 0; k < j; ++k) s -= a[i][k] * a[j][k];
      if (i == j) {
        if (s <= 0.0) return false;
        a[i][i] = std::sqrt(s);
      } else {
        a[i][j] = s / a[j][j];
      }
    }
    for (size_t j = i + 1; j < n; ++j) a[i][j] = 0.0;
  }
  return true;
}

inline GPRModel fit_gpr(const std::vector<Vec>& states, const std::vector<Vec>& actions,
                        const GprConfig& cfg, std::mt19937_64& rng) {
  if (states.empty() || states.size() != actions.size())
    throw std::invalid_argument("fit_gpr: empty or misaligned data");
  if (!(cfg.noise_var > 0.0)) throw std::invalid_argument("fit_gpr: noise variance must be > 0");
  GPRModel m;
  m.signal_var = cfg.signal_var;
  m.length_scale = cfg.length_scale;
  m.noise_var = cfg.noise_var;
  m.standardizer = Standardizer::fit(states);

  std::vector<size_t> idx(states.size());
  std::iota(idx.begin(), idx.end(), 0);
  if (states.size() > cfg.max_points) {
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(cfg.max_points);
    std::sort(idx.begin(), idx.end());
  }
  for (size_t i : idx) {
    m.train_x.push_back(m.standardizer.apply(states[i]));
    m.train_y.push_back(actions[i]);
  }

  size_t n = m.train_x.size();
  double jitter = 0.0;
  for (int attempt = 0; attempt < 6; ++attempt) {
    std::vector<Vec> k(n, Vec(n));
    for (size_t i = 0; i < n; ++i)
      for (size_t j = 0; j <= i; ++j)
        k[i][j] = k[j][i] = se_kernel(m.train_x[i], m.train_x[j], m.signal_var, m.length_scale);
    for (size_t i = 0; i < n; ++i) k[i][i] += m.noise_var + jitter;
    if (cholesky(k)) {
      m.chol = std::move(k);
      return m;
    }
    jitter = (jitter == 0.0) ? 1e-10 : jitter * 100.0;
  }
  throw std::runtime_error("fit_gpr: covariance not positive-definite even with jitter");
}

// Predictive standard deviation of the latent function at a query state.
inline double gpr_uncertainty(const GPRModel& m, const Vec& state) {
  Vec x = m.standardizer.apply(state);
  size_t n = m.train_x.size();
  Vec ks(n);
  for (size_t i = 0; i < n; ++i) ks[i] = se_kernel(x, m.train_x[i], m.signal_var, m.length_scale);
  // forward-solve L v = k*
  Vec v(n);
  for (size_t i = 0; i < n; ++i) {
    double s = ks[i];
    for (size_t k = 0; k < i; ++k) s -= m.chol[i][k] * v[k];
    v[i] = s / m.chol[i][i];
  }
  double var = m.signal_var;
  for (size_t i = 0; i < n; ++i) var -= v[i] * v[i];
  return std::sqrt(std::max(var, 0.0));
}

// -------- full pipeline: expert-trained scoring of the unlabeled pool --------

enum class LeverageMethod { Vae, WindowVae, Mdn, Gpr };

inline const char* leverage_method_name(LeverageMethod m) {
  switch (m) {
    case LeverageMethod::Vae: return "vae";
    case LeverageMethod::WindowVae: return "windowvae";
    case LeverageMethod::Mdn: return "mdn";
    case LeverageMethod::Gpr: return "gpr";
  }
  return "vae";
}

inline LeverageMethod leverage_method_from_name(const std::string& s) {
  if (s == "vae") return LeverageMethod::Vae;
  if (s == "windowvae") return LeverageMethod::WindowVae;
  if (s == "mdn") return LeverageMethod::Mdn;
  if (s == "gpr") return LeverageMethod::Gpr;
  throw std::invalid_argument("unknown leverage method: " + s);
}

struct LeverageConfig {
  LeverageMethod method = LeverageMethod::Vae;
  int window = 2;  // windowVAE window length
  VaeConfig vae;
  MdnConfig mdn;
  GprConfig gpr;
  double alpha = 1.0;  // kernel sharpness for the resulting bank
  uint64_t seed = 0;
};

struct LeverageResult {
  LeverageBank bank;                         // unlabeled (scored) + expert (leverage 1)
  std::vector<LeverageEntry> unlabeled_entries;  // provenance into the unlabeled set
  std::vector<double> raw_scores;            // error or uncertainty, pre-normalization
};

// Windowed inputs for every state of a trajectory: state t is explained by the
// (s_{t-w+1}..s_t) window; leading states reuse the first full window.
inline std::vector<Vec> per_state_windows(const Trajectory& traj, int w) {
  int len = static_cast<int>(traj.pairs.size());
  std::vector<Vec> wins;
  if (len >= w) {
    wins = window_states(traj, w);
  } else {
    // short trajectory: pad by repeating the first state
    Vec win;
    for (int k = 0; k < w; ++k) {
      int t = std::max(0, len - w + k);
      win.insert(win.end(), traj.pairs[t].state.begin(), traj.pairs[t].state.end());
    }
    wins.assign(1, std::move(win));
  }
  std::vector<Vec> out(len);
  for (int t = 0; t < len; ++t) {
    int j = std::min(std::max(0, t - w + 1), static_cast<int>(wins.size()) - 1);
    out[t] = wins[j];
  }
  return out;
}

inline LeverageResult evaluate_unlabeled(const LeverageConfig& cfg, const DemoSet& expert,
                                         const DemoSet& unlabeled) {
  if (expert.trajectories.empty()) throw std::invalid_argument("evaluate_unlabeled: no expert data");
  std::mt19937_64 rng(cfg.seed);

  PooledStates expert_pool = pool_states(expert, LabelFilter::All);
  PooledStates unlabeled_pool = pool_states(unlabeled, LabelFilter::All);

  LeverageResult res;
  std::vector<double> scores;

  switch (cfg.method) {
    case LeverageMethod::Vae: {
      VAEModel m = train_vae(expert_pool.states, cfg.vae, rng, VaeInputMode::Plain);
      scores = reconstruction_errors(m, unlabeled_pool.states).errors;
      break;
    }
    case LeverageMethod::WindowVae: {
      std::vector<Vec> train_wins;
      for (const auto& t : expert.trajectories) {
        auto wins = per_state_windows(t, cfg.window);
        train_wins.insert(train_wins.end(), wins.begin(), wins.end());
      }
      VAEModel m = train_vae(train_wins, cfg.vae, rng, VaeInputMode::Windowed);
      std::vector<Vec> score_wins;
      for (const auto& t : unlabeled.trajectories) {
        auto wins = per_state_windows(t, cfg.window);
        score_wins.insert(score_wins.end(), wins.begin(), wins.end());
      }
      scores = reconstruction_errors(m, score_wins).errors;
      break;
    }
    case LeverageMethod::Mdn: {
      std::vector<Vec> acts;
      std::vector<Vec> sts;
      for (const auto& t : expert.trajectories)
        for (const auto& p : t.pairs) {
          sts.push_back(p.state);
          acts.push_back(p.action);
        }
      MDNModel m = train_mdn(sts, acts, cfg.mdn, rng);
      scores.reserve(unlabeled_pool.states.size());
      for (const Vec& s : unlabeled_pool.states) scores.push_back(mdn_uncertainty(m, s));
      break;
    }
    case LeverageMethod::Gpr: {
      std::vector<Vec> acts;
      std::vector<Vec> sts;
      for (const auto& t : expert.trajectories)
        for (const auto& p : t.pairs) {
          sts.push_back(p.state);
          acts.push_back(p.action);
        }
      GPRModel m = fit_gpr(sts, acts, cfg.gpr, rng);
      scores.reserve(unlabeled_pool.states.size());
      for (const Vec& s : unlabeled_pool.states) scores.push_back(gpr_uncertainty(m, s));
      break;
    }
  }

  std::vector<double> levers = normalize_to_leverage(scores);

  res.raw_scores = scores;
  res.bank.alpha = cfg.alpha;
  res.bank.states = unlabeled_pool.states;
  res.bank.levers = levers;
  res.unlabeled_entries.reserve(levers.size());
  for (size_t j = 0; j < levers.size(); ++j)
    res.unlabeled_entries.push_back({unlabeled_pool.refs[j], levers[j]});
  // labeled expert states join the bank with leverage exactly 1
  for (const Vec& s : expert_pool.states) {
    res.bank.states.push_back(s);
    res.bank.levers.push_back(1.0);
  }
  res.bank.validate();
  return res;
}

}  // namespace ssil
