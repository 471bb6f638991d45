#pragma once

// Dense numeric primitives: small row-major matrices, feed-forward nets with
// hand-written reverse-mode gradients, forward-mode directional derivatives,
// Adam, and reparameterized Gaussian sampling.

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace ssil {

using Vec = std::vector<double>;

inline bool all_finite(const Vec& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

struct Mat {
  int rows = 0;
  int cols = 0;
  Vec data;  // row-major

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {}

  double& operator()(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
};

// y = W x + b
inline void affine(const Mat& w, const Vec& b, const Vec& x, Vec& y) {
  y.assign(w.rows, 0.0);
  for (int r = 0; r < w.rows; ++r) {
    double acc = b[r];
    const double* wr = &w.data[static_cast<size_t>(r) * w.cols];
    for (int c = 0; c < w.cols; ++c) acc += wr[c] * x[c];
    y[r] = acc;
  }
}

enum class Act { Identity, Tanh, Relu, Sigmoid };

inline const char* act_name(Act a) {
  switch (a) {
    case Act::Identity: return "identity";
    case Act::Tanh: return "tanh";
    case Act::Relu: return "relu";
    case Act::Sigmoid: return "sigmoid";
  }
  return "identity";
}

inline Act act_from_name(const std::string& s) {
  if (s == "identity") return Act::Identity;
  if (s == "tanh") return Act::Tanh;
  if (s == "relu") return Act::Relu;
  if (s == "sigmoid") return Act::Sigmoid;
  throw std::invalid_argument("unknown activation: " + s);
}

inline double act_apply(Act a, double z) {
  switch (a) {
    case Act::Identity: return z;
    case Act::Tanh: return std::tanh(z);
    case Act::Relu: return z > 0.0 ? z : 0.0;
    case Act::Sigmoid: return 1.0 / (1.0 + std::exp(-z));
  }
  return z;
}

// derivative expressed through the pre-activation z
inline double act_deriv(Act a, double z) {
  switch (a) {
    case Act::Identity: return 1.0;
    case Act::Tanh: {
      double t = std::tanh(z);
      return 1.0 - t * t;
    }
    case Act::Relu: return z > 0.0 ? 1.0 : 0.0;
    case Act::Sigmoid: {
      double s = 1.0 / (1.0 + std::exp(-z));
      return s * (1.0 - s);
    }
  }
  return 1.0;
}

struct Layer {
  Mat w;
  Vec b;
  Act act = Act::Identity;
};

struct DenseNet {
  std::vector<Layer> layers;

  int input_dim() const { return layers.empty() ? 0 : layers.front().w.cols; }
  int output_dim() const { return layers.empty() ? 0 : layers.back().w.rows; }
};

// Uniform fan-in scaled init, tanh-friendly.
inline DenseNet make_mlp(int in_dim, const std::vector<int>& hidden, int out_dim,
                         Act hidden_act, Act out_act, std::mt19937_64& rng) {
  DenseNet net;
  std::vector<int> dims;
  dims.push_back(in_dim);
  for (int h : hidden) dims.push_back(h);
  dims.push_back(out_dim);
  for (size_t k = 0; k + 1 < dims.size(); ++k) {
    Layer l;
    l.w = Mat(dims[k + 1], dims[k]);
    l.b.assign(dims[k + 1], 0.0);
    l.act = (k + 2 == dims.size()) ? out_act : hidden_act;
    double scale = std::sqrt(1.0 / dims[k]);
    std::uniform_real_distribution<double> u(-scale, scale);
    for (double& x : l.w.data) x = u(rng);
    net.layers.push_back(std::move(l));
  }
  return net;
}

struct ForwardTrace {
  std::vector<Vec> inputs;   // input to each layer
  std::vector<Vec> preacts;  // W x + b per layer
  Vec output;
};

inline void forward_trace(const DenseNet& net, const Vec& x, ForwardTrace& tr) {
  if (static_cast<int>(x.size()) != net.input_dim())
    throw std::invalid_argument("forward: input dim " + std::to_string(x.size()) +
                                " != net input dim " + std::to_string(net.input_dim()));
  tr.inputs.resize(net.layers.size());
  tr.preacts.resize(net.layers.size());
  Vec cur = x;
  for (size_t k = 0; k < net.layers.size(); ++k) {
    const Layer& l = net.layers[k];
    tr.inputs[k] = cur;
    affine(l.w, l.b, cur, tr.preacts[k]);
    cur.resize(tr.preacts[k].size());
    for (size_t i = 0; i < cur.size(); ++i) cur[i] = act_apply(l.act, tr.preacts[k][i]);
  }
  tr.output = std::move(cur);
}

inline Vec forward(const DenseNet& net, const Vec& x) {
  ForwardTrace tr;
  forward_trace(net, x, tr);
  return tr.output;
}

struct NetGrads {
  std::vector<Mat> dw;
  std::vector<Vec> db;

  static NetGrads zeros_like(const DenseNet& net) {
    NetGrads g;
    for (const Layer& l : net.layers) {
      g.dw.emplace_back(l.w.rows, l.w.cols);
      g.db.emplace_back(l.b.size(), 0.0);
    }
    return g;
  }

  void scale(double c) {
    for (Mat& m : dw)
      for (double& x : m.data) x *= c;
    for (Vec& v : db)
      for (double& x : v) x *= c;
  }
};

// Reverse-mode through a traced forward pass; accumulates into `grads` and
// returns the gradient with respect to the input.
inline Vec backward(const DenseNet& net, const ForwardTrace& tr, const Vec& upstream,
                    NetGrads& grads) {
  if (static_cast<int>(upstream.size()) != net.output_dim())
    throw std::invalid_argument("backward: upstream dim mismatch");
  Vec delta = upstream;
  for (int k = static_cast<int>(net.layers.size()) - 1; k >= 0; --k) {
    const Layer& l = net.layers[k];
    for (size_t i = 0; i < delta.size(); ++i) delta[i] *= act_deriv(l.act, tr.preacts[k][i]);
    const Vec& in = tr.inputs[k];
    Mat& dw = grads.dw[k];
    for (int r = 0; r < l.w.rows; ++r) {
      double d = delta[r];
      grads.db[k][r] += d;
      double* dwr = &dw.data[static_cast<size_t>(r) * dw.cols];
      for (int c = 0; c < l.w.cols; ++c) dwr[c] += d * in[c];
    }
    Vec prev(l.w.cols, 0.0);
    for (int r = 0; r < l.w.rows; ++r) {
      double d = delta[r];
      const double* wr = &l.w.data[static_cast<size_t>(r) * l.w.cols];
      for (int c = 0; c < l.w.cols; ++c) prev[c] += d * wr[c];
    }
    delta = std::move(prev);
  }
  return delta;
}

inline Vec backward(const DenseNet& net, const Vec& x, const Vec& upstream, NetGrads& grads) {
  ForwardTrace tr;
  forward_trace(net, x, tr);
  return backward(net, tr, upstream, grads);
}

// Forward-mode directional derivative of net(x) along a parameter direction.
// Needs a trace of the same input.
inline Vec rop(const DenseNet& net, const ForwardTrace& tr, const NetGrads& dir) {
  Vec ra;  // derivative of the running activation, starts at 0 (input fixed)
  ra.assign(net.input_dim(), 0.0);
  for (size_t k = 0; k < net.layers.size(); ++k) {
    const Layer& l = net.layers[k];
    const Vec& in = tr.inputs[k];
    Vec rpre(l.w.rows, 0.0);
    for (int r = 0; r < l.w.rows; ++r) {
      double acc = dir.db[k][r];
      const double* dwr = &dir.dw[k].data[static_cast<size_t>(r) * l.w.cols];
      const double* wr = &l.w.data[static_cast<size_t>(r) * l.w.cols];
      for (int c = 0; c < l.w.cols; ++c) acc += dwr[c] * in[c] + wr[c] * ra[c];
      rpre[r] = acc;
    }
    ra.resize(rpre.size());
    for (size_t i = 0; i < ra.size(); ++i) ra[i] = act_deriv(l.act, tr.preacts[k][i]) * rpre[i];
  }
  return ra;
}

// -------- flat parameter views --------

inline int param_count(const DenseNet& net) {
  int n = 0;
  for (const Layer& l : net.layers) n += l.w.rows * l.w.cols + static_cast<int>(l.b.size());
  return n;
}

inline void get_flat(const DenseNet& net, Vec& out) {
  out.clear();
  out.reserve(param_count(net));
  for (const Layer& l : net.layers) {
    out.insert(out.end(), l.w.data.begin(), l.w.data.end());
    out.insert(out.end(), l.b.begin(), l.b.end());
  }
}

inline void set_flat(DenseNet& net, const Vec& in) {
  size_t p = 0;
  for (Layer& l : net.layers) {
    for (double& x : l.w.data) x = in[p++];
    for (double& x : l.b) x = in[p++];
  }
  if (p != in.size()) throw std::invalid_argument("set_flat: size mismatch");
}

inline void grads_to_flat(const NetGrads& g, Vec& out) {
  out.clear();
  for (size_t k = 0; k < g.dw.size(); ++k) {
    out.insert(out.end(), g.dw[k].data.begin(), g.dw[k].data.end());
    out.insert(out.end(), g.db[k].begin(), g.db[k].end());
  }
}

inline NetGrads flat_to_grads(const DenseNet& net, const Vec& flat, size_t offset = 0) {
  NetGrads g = NetGrads::zeros_like(net);
  size_t p = offset;
  for (size_t k = 0; k < g.dw.size(); ++k) {
    for (double& x : g.dw[k].data) x = flat[p++];
    for (double& x : g.db[k]) x = flat[p++];
  }
  return g;
}

// -------- Adam --------

struct AdamState {
  Vec m, v;
  long step = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  explicit AdamState(int n = 0, double lr_ = 1e-3) : m(n, 0.0), v(n, 0.0), lr(lr_) {}
};

// In-place Adam update on a flat parameter vector. Refuses non-finite grads.
inline void adam_step(AdamState& st, Vec& params, const Vec& grads) {
  if (params.size() != grads.size() || params.size() != st.m.size())
    throw std::invalid_argument("adam_step: shape mismatch");
  if (!all_finite(grads)) throw std::runtime_error("adam_step: non-finite gradient, step refused");
  ++st.step;
  double b1t = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
  double b2t = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
  for (size_t i = 0; i < params.size(); ++i) {
    st.m[i] = st.beta1 * st.m[i] + (1.0 - st.beta1) * grads[i];
    st.v[i] = st.beta2 * st.v[i] + (1.0 - st.beta2) * grads[i] * grads[i];
    double mhat = st.m[i] / b1t;
    double vhat = st.v[i] / b2t;
    params[i] -= st.lr * mhat / (std::sqrt(vhat) + st.eps);
  }
}

inline void adam_step(AdamState& st, DenseNet& net, const NetGrads& grads) {
  Vec p, g;
  get_flat(net, p);
  grads_to_flat(grads, g);
  adam_step(st, p, g);
  set_flat(net, p);
}

// mean + exp(log_std) * noise, elementwise
inline Vec sample_gaussian(const Vec& mean, const Vec& log_std, const Vec& noise) {
  if (mean.size() != log_std.size() || mean.size() != noise.size())
    throw std::invalid_argument("sample_gaussian: length mismatch");
  Vec out(mean.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = mean[i] + std::exp(log_std[i]) * noise[i];
  return out;
}

// -------- serialization --------

inline nlohmann::json net_to_json(const DenseNet& net) {
  nlohmann::json j;
  j["format"] = "ssil-net";
  j["version"] = 1;
  nlohmann::json layers = nlohmann::json::array();
  for (const Layer& l : net.layers) {
    nlohmann::json jl;
    jl["rows"] = l.w.rows;
    jl["cols"] = l.w.cols;
    jl["act"] = act_name(l.act);
    jl["w"] = l.w.data;  // row-major
    jl["b"] = l.b;
    layers.push_back(std::move(jl));
  }
  j["layers"] = std::move(layers);
  return j;
}

inline DenseNet net_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "ssil-net") throw std::runtime_error("not a net checkpoint");
  if (j.value("version", 0) != 1) throw std::runtime_error("unsupported net checkpoint version");
  DenseNet net;
  for (const auto& jl : j.at("layers")) {
    Layer l;
    l.w = Mat(jl.at("rows").get<int>(), jl.at("cols").get<int>());
    l.w.data = jl.at("w").get<Vec>();
    l.b = jl.at("b").get<Vec>();
    l.act = act_from_name(jl.at("act").get<std::string>());
    if (static_cast<int>(l.w.data.size()) != l.w.rows * l.w.cols ||
        static_cast<int>(l.b.size()) != l.w.rows)
      throw std::runtime_error("corrupt net checkpoint: shape mismatch");
    net.layers.push_back(std::move(l));
  }
  for (size_t k = 0; k + 1 < net.layers.size(); ++k)
    if (net.layers[k].w.rows != net.layers[k + 1].w.cols)
      throw std::runtime_error("corrupt net checkpoint: layer dims do not chain");
  return net;
}

}  // namespace ssil
