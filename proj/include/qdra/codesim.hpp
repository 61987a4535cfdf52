#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "qdra/errors.hpp"
#include "qdra/rng.hpp"

namespace qdra {

// One shot: detection-event bits in node-major order (b = node*T + t) plus
// the logical-flip label.
struct SyndromeRecord {
  std::vector<std::uint8_t> bits;
  int label = 0;

  bool operator==(const SyndromeRecord&) const = default;
};

struct Dataset {
  int n_s = 4;
  int t = 2;
  std::vector<SyndromeRecord> records;
  std::uint64_t split_seed = 0;

  int bit_len() const { return n_s * t; }

  bool operator==(const Dataset&) const = default;
};

enum class NoiseMode { RepCode, Teacher };

struct NoiseModel {
  NoiseMode mode = NoiseMode::RepCode;
  double p = 0.05;   // per-round data-flip probability
  double q = 0.05;   // measurement-flip probability
  std::uint64_t teacher_seed = 7;

  void validate() const {
    if (!(p >= 0.0 && p <= 0.5) || !(q >= 0.0 && q <= 0.5))
      throw ConfigError("noise probabilities must lie in [0, 0.5]");
  }
};

namespace repcode {

constexpr int kDataBits = 5;   // distance-5 chain
constexpr int kStabilizers = 4;

// Explicit error configuration for T rounds: data flips are round-major
// (round r, data bit i -> bit r*5+i), measurement flips likewise (r*4+i).
struct ErrorConfig {
  std::uint32_t data_flips = 0;
  std::uint32_t meas_flips = 0;
};

// Telescoped detector trace of the phenomenological repetition code.
// Detection event (node i, time r-1) = m_i(r) xor m_i(r-1) on the noisy
// readouts, with m_i(0) = 0. Label = 1 iff any data bit carries a residual
// flip at the end of the run; this statistic is exchangeable over detector
// nodes, which a decoder over a fully connected graph (necessarily
// permutation-invariant) can actually estimate.
inline SyndromeRecord trace(const ErrorConfig& cfg, int t) {
  SyndromeRecord rec;
  rec.bits.assign(static_cast<std::size_t>(kStabilizers) * t, 0);
  std::array<int, kDataBits> data{};
  std::array<int, kStabilizers> prev_readout{};
  for (int r = 0; r < t; ++r) {
    for (int i = 0; i < kDataBits; ++i) {
      if ((cfg.data_flips >> (r * kDataBits + i)) & 1u) data[i] ^= 1;
    }
    for (int i = 0; i < kStabilizers; ++i) {
      int readout = (data[i] ^ data[i + 1]) ^ static_cast<int>((cfg.meas_flips >> (r * kStabilizers + i)) & 1u);
      int det = readout ^ prev_readout[i];
      rec.bits[static_cast<std::size_t>(i) * t + r] = static_cast<std::uint8_t>(det);
      prev_readout[i] = readout;
    }
  }
  rec.label = 0;
  for (int bit : data) rec.label |= bit;
  return rec;
}

inline ErrorConfig sample_config(const NoiseModel& model, int t, Rng& rng) {
  ErrorConfig cfg;
  for (int b = 0; b < kDataBits * t; ++b) {
    if (rng.bernoulli(model.p)) cfg.data_flips |= 1u << b;
  }
  for (int b = 0; b < kStabilizers * t; ++b) {
    if (rng.bernoulli(model.q)) cfg.meas_flips |= 1u << b;
  }
  return cfg;
}

}  // namespace repcode

// Fixed random 2-layer network used by teacher mode: bits -> tanh hidden ->
// scalar score. The output bias is calibrated so the positive rate over
// uniform bit patterns is ~8%.
class TeacherNet {
 public:
  TeacherNet(int n_bits, std::uint64_t seed) : n_bits_(n_bits) {
    Rng rng(derive_seed(seed, "teacher"));
    w1_.assign(static_cast<std::size_t>(n_bits) * kHidden, 0.0);
    b1_.assign(kHidden, 0.0);
    w2_.assign(kHidden, 0.0);
    for (double& v : w1_) v = rng.uniform(-1.0, 1.0);
    for (double& v : b1_) v = rng.uniform(-1.0, 1.0);
    for (double& v : w2_) v = rng.uniform(-1.0, 1.0);
    calibrate_bias(rng);
  }

  double score(const std::vector<std::uint8_t>& bits) const {
    double out = bias_;
    for (int h = 0; h < kHidden; ++h) {
      double a = b1_[h];
      for (int i = 0; i < n_bits_; ++i) {
        if (bits[i]) a += w1_[static_cast<std::size_t>(i) * kHidden + h];
      }
      out += w2_[h] * std::tanh(a);
    }
    return out;
  }

  double posterior(const std::vector<std::uint8_t>& bits) const {
    return 1.0 / (1.0 + std::exp(-score(bits)));
  }

  static constexpr double kTargetRate = 0.08;

 private:
  static constexpr int kHidden = 16;

  // Mean positive rate over uniform patterns, exact when 2^n_bits is small,
  // otherwise a fixed 1e5-pattern sample; bisect on the output bias.
  void calibrate_bias(Rng& rng) {
    std::vector<std::vector<std::uint8_t>> patterns;
    if (n_bits_ <= 16) {
      patterns.reserve(1u << n_bits_);
      for (std::uint32_t x = 0; x < (1u << n_bits_); ++x) {
        std::vector<std::uint8_t> b(n_bits_);
        for (int i = 0; i < n_bits_; ++i) b[i] = (x >> i) & 1u;
        patterns.push_back(std::move(b));
      }
    } else {
      Rng s = rng.stream("calibration");
      for (int k = 0; k < 100000; ++k) {
        std::vector<std::uint8_t> b(n_bits_);
        for (int i = 0; i < n_bits_; ++i) b[i] = s.bernoulli(0.5) ? 1 : 0;
        patterns.push_back(std::move(b));
      }
    }
    auto rate = [&](double bias) {
      bias_ = bias;
      double acc = 0.0;
      for (const auto& b : patterns) acc += posterior(b);
      return acc / patterns.size();
    };
    double lo = -30.0, hi = 30.0;
    for (int it = 0; it < 200; ++it) {
      double mid = 0.5 * (lo + hi);
      (rate(mid) < kTargetRate ? lo : hi) = mid;
    }
    bias_ = 0.5 * (lo + hi);
  }

  int n_bits_;
  std::vector<double> w1_, b1_, w2_;
  double bias_ = 0.0;
};

// Deterministic synthetic dataset. Each record draws from an RNG stream
// derived from (seed, record index), so sharding generation over workers
// cannot change the output.
inline Dataset generate(const NoiseModel& model, int n, std::uint64_t seed, int n_s = 4,
                        int t = 2) {
  model.validate();
  if (n < 1) throw ConfigError("generate requires n >= 1");
  Dataset ds;
  ds.n_s = n_s;
  ds.t = t;
  ds.split_seed = derive_seed(seed, "split");
  ds.records.reserve(n);
  Rng base(derive_seed(seed, "generate"));
  if (model.mode == NoiseMode::RepCode) {
    if (n_s != repcode::kStabilizers) throw ConfigError("rep-code mode fixes n_s = 4");
    for (int k = 0; k < n; ++k) {
      Rng rng = base.stream(static_cast<std::uint64_t>(k));
      ds.records.push_back(repcode::trace(repcode::sample_config(model, t, rng), t));
    }
  } else {
    TeacherNet teacher(n_s * t, model.teacher_seed);
    for (int k = 0; k < n; ++k) {
      Rng rng = base.stream(static_cast<std::uint64_t>(k));
      SyndromeRecord rec;
      rec.bits.resize(static_cast<std::size_t>(n_s) * t);
      for (auto& b : rec.bits) b = rng.bernoulli(0.5) ? 1 : 0;
      rec.label = rng.bernoulli(teacher.posterior(rec.bits)) ? 1 : 0;
      ds.records.push_back(std::move(rec));
    }
  }
  return ds;
}

// Exact joint distribution P(syndrome, label) of the rep-code model,
// from enumerating every error configuration. Index = syndrome bits read
// as an integer in node-major bit order (bit b = node*T + t).
struct BayesTable {
  int t = 2;
  std::vector<std::array<double, 2>> joint;  // [syndrome][label]

  double posterior(std::uint32_t syndrome) const {
    const auto& e = joint[syndrome];
    double z = e[0] + e[1];
    if (z == 0.0) return 0.0;  // unreachable syndrome under this model
    return e[1] / z;
  }

  double posterior(const std::vector<std::uint8_t>& bits) const {
    return posterior(pack(bits));
  }

  static std::uint32_t pack(const std::vector<std::uint8_t>& bits) {
    std::uint32_t s = 0;
    for (std::size_t b = 0; b < bits.size(); ++b) {
      if (bits[b]) s |= 1u << b;
    }
    return s;
  }

  double positive_rate() const {
    double r = 0.0;
    for (const auto& e : joint) r += e[1];
    return r;
  }

  double total_mass() const {
    double z = 0.0;
    for (const auto& e : joint) z += e[0] + e[1];
    return z;
  }

  // Accuracy of the threshold-0.5 posterior classifier under the model.
  double bayes_accuracy() const {
    double acc = 0.0;
    for (const auto& e : joint) acc += std::max(e[0], e[1]);
    return acc;
  }
};

// Enumerates all 2^(5T + 4T) error configurations. Refuses when the
// exponent exceeds the budget.
inline BayesTable bayes_table(const NoiseModel& model, int t, int max_bits = 26) {
  model.validate();
  if (model.mode != NoiseMode::RepCode)
    throw ContractError("bayes_table applies to rep-code mode only");
  int data_bits = repcode::kDataBits * t;
  int meas_bits = repcode::kStabilizers * t;
  if (data_bits + meas_bits > max_bits) {
    throw ConfigError("bayes enumeration needs 2^" + std::to_string(data_bits + meas_bits) +
                      " configurations, over the budget of 2^" + std::to_string(max_bits));
  }
  BayesTable table;
  table.t = t;
  table.joint.assign(1u << (repcode::kStabilizers * t), {0.0, 0.0});

  std::vector<double> pw_data(data_bits + 1), pw_meas(meas_bits + 1);
  for (int k = 0; k <= data_bits; ++k)
    pw_data[k] = std::pow(model.p, k) * std::pow(1.0 - model.p, data_bits - k);
  for (int k = 0; k <= meas_bits; ++k)
    pw_meas[k] = std::pow(model.q, k) * std::pow(1.0 - model.q, meas_bits - k);

  for (std::uint32_t d = 0; d < (1u << data_bits); ++d) {
    double pd = pw_data[std::popcount(d)];
    for (std::uint32_t m = 0; m < (1u << meas_bits); ++m) {
      repcode::ErrorConfig cfg{d, m};
      SyndromeRecord rec = repcode::trace(cfg, t);
      table.joint[BayesTable::pack(rec.bits)][rec.label] += pd * pw_meas[std::popcount(m)];
    }
  }
  return table;
}

// P(label = 1 | syndrome) under the rep-code model.
inline double bayes_oracle(const NoiseModel& model, const std::vector<std::uint8_t>& syndrome,
                           int t, int max_bits = 26) {
  return bayes_table(model, t, max_bits).posterior(syndrome);
}

// ---- train/test split ----

// Deterministic ~80/20 split by hashing the record index with the split
// seed; test iff the hash lands in the bottom fifth of the range.
inline bool is_test_index(std::uint64_t split_seed, std::size_t index) {
  return derive_seed(split_seed, static_cast<std::uint64_t>(index)) < (UINT64_MAX / 5) * 1;
}

struct SplitView {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

inline SplitView split(const Dataset& ds) {
  SplitView view;
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    (is_test_index(ds.split_seed, i) ? view.test : view.train).push_back(i);
  }
  return view;
}

// ---- dataset file format ----
// Header `synd v1 ns=<N_s> t=<T>`, then per record: N_s*T chars of {0,1}
// node-major, one space, the label char.

inline void write_dataset(const Dataset& ds, std::ostream& out) {
  out << "synd v1 ns=" << ds.n_s << " t=" << ds.t << "\n";
  for (const auto& rec : ds.records) {
    for (auto b : rec.bits) out << static_cast<char>('0' + b);
    out << ' ' << static_cast<char>('0' + rec.label) << "\n";
  }
}

inline void write_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open " + path + " for writing");
  write_dataset(ds, out);
  if (!out) throw ParseError("write failure on " + path);
}

inline Dataset read_dataset(std::istream& in, const std::string& origin = "<stream>") {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(origin + ":1: missing header");
  Dataset ds;
  {
    std::istringstream hdr(line);
    std::string magic, version, ns_kv, t_kv;
    hdr >> magic >> version >> ns_kv >> t_kv;
    if (magic != "synd" || version != "v1" || ns_kv.rfind("ns=", 0) != 0 ||
        t_kv.rfind("t=", 0) != 0) {
      throw ParseError(origin + ":1: bad header '" + line + "'");
    }
    try {
      ds.n_s = std::stoi(ns_kv.substr(3));
      ds.t = std::stoi(t_kv.substr(2));
    } catch (const std::exception&) {
      throw ParseError(origin + ":1: non-numeric header fields");
    }
    if (ds.n_s < 1 || ds.t < 1) throw ParseError(origin + ":1: non-positive dimensions");
  }
  std::size_t expect = static_cast<std::size_t>(ds.n_s) * ds.t;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line.size() != expect + 2 || line[expect] != ' ') {
      throw ParseError(origin + ":" + std::to_string(lineno) + ": expected " +
                       std::to_string(expect) + " bits, space, label");
    }
    SyndromeRecord rec;
    rec.bits.reserve(expect);
    for (std::size_t i = 0; i < expect; ++i) {
      char c = line[i];
      if (c != '0' && c != '1')
        throw ParseError(origin + ":" + std::to_string(lineno) + ": non-binary character");
      rec.bits.push_back(static_cast<std::uint8_t>(c - '0'));
    }
    char lc = line[expect + 1];
    if (lc != '0' && lc != '1')
      throw ParseError(origin + ":" + std::to_string(lineno) + ": non-binary label");
    rec.label = lc - '0';
    ds.records.push_back(std::move(rec));
  }
  return ds;
}

inline Dataset read_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  return read_dataset(in, path);
}

// ---- Stim-style "01" detection-event import/export ----

enum class DetectorOrder {
  RoundMajor,  // input detector d -> node = d mod n_s, time = d div n_s
  NodeMajor,   // input detector d -> node = d div T,  time = d mod T
};

inline Dataset import_01(std::istream& dets, std::istream& obs, int n_s, int t,
                         DetectorOrder order = DetectorOrder::RoundMajor,
                         const std::string& origin = "<stream>") {
  Dataset ds;
  ds.n_s = n_s;
  ds.t = t;
  std::size_t expect = static_cast<std::size_t>(n_s) * t;
  std::string dline, oline;
  int lineno = 0;
  while (std::getline(dets, dline)) {
    ++lineno;
    if (!std::getline(obs, oline)) {
      throw ParseError(origin + ": obs file ends at line " + std::to_string(lineno) +
                       " while dets continues");
    }
    if (dline.size() != expect)
      throw ParseError(origin + ":" + std::to_string(lineno) + ": dets line has " +
                       std::to_string(dline.size()) + " characters, expected " +
                       std::to_string(expect));
    if (oline.size() != 1 || (oline[0] != '0' && oline[0] != '1'))
      throw ParseError(origin + ":" + std::to_string(lineno) + ": obs line must be one 0/1");
    SyndromeRecord rec;
    rec.bits.assign(expect, 0);
    for (std::size_t d = 0; d < expect; ++d) {
      char c = dline[d];
      if (c != '0' && c != '1')
        throw ParseError(origin + ":" + std::to_string(lineno) + ": non-binary character in dets");
      int node, time;
      if (order == DetectorOrder::RoundMajor) {
        node = static_cast<int>(d) % n_s;
        time = static_cast<int>(d) / n_s;
      } else {
        node = static_cast<int>(d) / t;
        time = static_cast<int>(d) % t;
      }
      rec.bits[static_cast<std::size_t>(node) * t + time] = static_cast<std::uint8_t>(c - '0');
    }
    rec.label = oline[0] - '0';
    ds.records.push_back(std::move(rec));
  }
  if (std::getline(obs, oline)) {
    throw ParseError(origin + ": dets file ends at line " + std::to_string(lineno) +
                     " while obs continues");
  }
  return ds;
}

inline Dataset import_01(const std::string& dets_path, const std::string& obs_path, int n_s, int t,
                         DetectorOrder order = DetectorOrder::RoundMajor) {
  std::ifstream dets(dets_path), obs(obs_path);
  if (!dets) throw ParseError("cannot open " + dets_path);
  if (!obs) throw ParseError("cannot open " + obs_path);
  return import_01(dets, obs, n_s, t, order, dets_path);
}

inline void export_01(const Dataset& ds, std::ostream& dets, std::ostream& obs,
                      DetectorOrder order = DetectorOrder::RoundMajor) {
  for (const auto& rec : ds.records) {
    std::size_t expect = rec.bits.size();
    for (std::size_t d = 0; d < expect; ++d) {
      int node, time;
      if (order == DetectorOrder::RoundMajor) {
        node = static_cast<int>(d) % ds.n_s;
        time = static_cast<int>(d) / ds.n_s;
      } else {
        node = static_cast<int>(d) / ds.t;
        time = static_cast<int>(d) % ds.t;
      }
      dets << static_cast<char>('0' + rec.bits[static_cast<std::size_t>(node) * ds.t + time]);
    }
    dets << "\n";
    obs << static_cast<char>('0' + rec.label) << "\n";
  }
}

inline void export_01(const Dataset& ds, const std::string& dets_path, const std::string& obs_path,
                      DetectorOrder order = DetectorOrder::RoundMajor) {
  std::ofstream dets(dets_path), obs(obs_path);
  if (!dets) throw ParseError("cannot open " + dets_path + " for writing");
  if (!obs) throw ParseError("cannot open " + obs_path + " for writing");
  export_01(ds, dets, obs, order);
}

}  // namespace qdra
