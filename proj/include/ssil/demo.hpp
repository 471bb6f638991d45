#pragma once

// Demonstration data model, the .traj / .lev on-disk formats, state windowing
// for the windowed VAE, and labeled/unlabeled state pooling.

#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ssil/tensor.hpp"

namespace ssil {

enum class DemoLabel { Expert, Unlabeled };

struct StateActionPair {
  Vec state;
  Vec action;
};

struct Trajectory {
  std::vector<StateActionPair> pairs;
  DemoLabel label = DemoLabel::Unlabeled;
  std::string source;  // free-text controller tag
  bool terminated = false;
};

struct DemoSet {
  int state_dim = 0;
  int action_dim = 0;
  std::vector<Trajectory> trajectories;

  size_t pair_count() const {
    size_t n = 0;
    for (const auto& t : trajectories) n += t.pairs.size();
    return n;
  }
};

// (trajectory index, time index) provenance for a pooled state
struct StateRef {
  int traj = 0;
  int time = 0;
};

struct PooledStates {
  std::vector<Vec> states;
  std::vector<StateRef> refs;
};

struct LeveragedPair {
  Vec state;
  Vec action;
  double leverage = 1.0;  // in [0,1]
};

namespace detail {

inline std::string fmt_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

}  // namespace detail

// ---- .traj format ----
// #traj v1 ds=<D_s> da=<D_a>
// #trajectory label=<expert|unlabeled> source=<tag> terminated=<0|1>
// <D_s state values> <D_a action values>    (one pair per line)

inline void save_demos(const DemoSet& set, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  out << "#traj v1 ds=" << set.state_dim << " da=" << set.action_dim << "\n";
  for (const auto& t : set.trajectories) {
    out << "#trajectory label=" << (t.label == DemoLabel::Expert ? "expert" : "unlabeled")
        << " source=" << (t.source.empty() ? "unknown" : t.source)
        << " terminated=" << (t.terminated ? 1 : 0) << "\n";
    for (const auto& p : t.pairs) {
      for (size_t i = 0; i < p.state.size(); ++i) {
        if (i) out << ' ';
        out << detail::fmt_double(p.state[i]);
      }
      for (double a : p.action) out << ' ' << detail::fmt_double(a);
      out << "\n";
    }
  }
}

inline DemoSet load_demos(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  DemoSet set;
  std::string line;
  int lineno = 0;
  bool have_schema = false;
  auto fail = [&](const std::string& msg) {
    throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + msg);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line.rfind("#traj ", 0) == 0) {
      int ds = -1, da = -1;
      if (std::sscanf(line.c_str(), "#traj v1 ds=%d da=%d", &ds, &da) != 2)
        fail("bad schema line");
      if (ds <= 0 || da <= 0) fail("non-positive dims in schema");
      set.state_dim = ds;
      set.action_dim = da;
      have_schema = true;
      continue;
    }
    if (line.rfind("#trajectory", 0) == 0) {
      if (!have_schema) fail("trajectory header before schema line");
      Trajectory t;
      std::istringstream ss(line);
      std::string tok;
      ss >> tok;  // #trajectory
      while (ss >> tok) {
        auto eq = tok.find('=');
        if (eq == std::string::npos) fail("malformed trajectory header token: " + tok);
        std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
        if (key == "label") {
          if (val == "expert") t.label = DemoLabel::Expert;
          else if (val == "unlabeled") t.label = DemoLabel::Unlabeled;
          else fail("unknown label: " + val);
        } else if (key == "source") {
          t.source = val;
        } else if (key == "terminated") {
          t.terminated = (val == "1");
        } else {
          fail("unknown trajectory header key: " + key);
        }
      }
      set.trajectories.push_back(std::move(t));
      continue;
    }
    if (!have_schema) fail("data before schema line");
    if (set.trajectories.empty()) fail("data before any trajectory header");
    std::istringstream ss(line);
    StateActionPair p;
    p.state.resize(set.state_dim);
    p.action.resize(set.action_dim);
    for (double& x : p.state)
      if (!(ss >> x)) fail("expected " + std::to_string(set.state_dim + set.action_dim) + " values");
    for (double& x : p.action)
      if (!(ss >> x)) fail("expected " + std::to_string(set.state_dim + set.action_dim) + " values");
    double extra;
    if (ss >> extra) fail("too many values on line");
    if (!all_finite(p.state) || !all_finite(p.action)) fail("non-finite value");
    set.trajectories.back().pairs.push_back(std::move(p));
  }
  if (!have_schema) throw std::runtime_error(path + ": empty or missing schema line");
  for (size_t i = 0; i < set.trajectories.size(); ++i)
    if (set.trajectories[i].pairs.empty())
      throw std::runtime_error(path + ": trajectory " + std::to_string(i) + " is empty");
  if (set.trajectories.empty()) throw std::runtime_error(path + ": no trajectories");
  return set;
}

// Concatenation of w consecutive states in time order; yields len - w + 1 windows.
inline std::vector<Vec> window_states(const Trajectory& traj, int w) {
  if (w < 1) throw std::invalid_argument("window_states: w must be >= 1");
  int len = static_cast<int>(traj.pairs.size());
  if (len < w)
    throw std::invalid_argument("window_states: trajectory length " + std::to_string(len) +
                                " < window " + std::to_string(w));
  std::vector<Vec> out;
  out.reserve(len - w + 1);
  for (int t = 0; t + w <= len; ++t) {
    Vec win;
    for (int k = 0; k < w; ++k)
      win.insert(win.end(), traj.pairs[t + k].state.begin(), traj.pairs[t + k].state.end());
    out.push_back(std::move(win));
  }
  return out;
}

enum class LabelFilter { All, Expert, Unlabeled };

inline PooledStates pool_states(const DemoSet& set, LabelFilter filter) {
  PooledStates out;
  for (int ti = 0; ti < static_cast<int>(set.trajectories.size()); ++ti) {
    const Trajectory& t = set.trajectories[ti];
    bool keep = filter == LabelFilter::All ||
                (filter == LabelFilter::Expert && t.label == DemoLabel::Expert) ||
                (filter == LabelFilter::Unlabeled && t.label == DemoLabel::Unlabeled);
    if (!keep) continue;
    for (int k = 0; k < static_cast<int>(t.pairs.size()); ++k) {
      out.states.push_back(t.pairs[k].state);
      out.refs.push_back({ti, k});
    }
  }
  return out;
}

// ---- .lev format ----
// #lev v1
// <traj_id> <time_idx> <leverage>

struct LeverageEntry {
  StateRef ref;
  double leverage = 1.0;
};

inline void save_leverage(const std::vector<LeverageEntry>& entries, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  out << "#lev v1\n";
  for (const auto& e : entries)
    out << e.ref.traj << ' ' << e.ref.time << ' ' << detail::fmt_double(e.leverage) << "\n";
}

inline std::vector<LeverageEntry> load_leverage(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line) || line != "#lev v1")
    throw std::runtime_error(path + ": missing #lev v1 header");
  std::vector<LeverageEntry> out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    LeverageEntry e;
    if (std::sscanf(line.c_str(), "%d %d %lf", &e.ref.traj, &e.ref.time, &e.leverage) != 3)
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": malformed entry");
    if (!(e.leverage >= 0.0 && e.leverage <= 1.0))
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": leverage outside [0,1]");
    out.push_back(e);
  }
  return out;
}

}  // namespace ssil
