#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include "qdra/codesim.hpp"

using namespace qdra;
using Catch::Matchers::ContainsSubstring;

namespace {

NoiseModel repcode_model(double p, double q) {
  NoiseModel m;
  m.mode = NoiseMode::RepCode;
  m.p = p;
  m.q = q;
  return m;
}

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name) {
    path = (std::filesystem::temp_directory_path() / name).string();
  }
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("noiseless rep-code data is all-zero with label 0") {
  Dataset ds = generate(repcode_model(0.0, 0.0), 50, 123);
  REQUIRE(ds.records.size() == 50);
  for (const auto& rec : ds.records) {
    CHECK(rec.label == 0);
    for (auto b : rec.bits) CHECK(b == 0);
  }
}

TEST_CASE("single data flip in round 1 fires only (node 0, time 0)") {
  repcode::ErrorConfig cfg;
  cfg.data_flips = 1u;  // data bit 0, round 0
  SyndromeRecord rec = repcode::trace(cfg, 2);
  REQUIRE(rec.bits.size() == 8);
  CHECK(rec.label == 1);
  for (std::size_t b = 0; b < rec.bits.size(); ++b) {
    CHECK(rec.bits[b] == (b == 0 ? 1 : 0));  // b = node*T + t
  }
}

TEST_CASE("interior data flip fires two adjacent nodes at the same round") {
  repcode::ErrorConfig cfg;
  cfg.data_flips = 1u << 2;  // data bit 2, round 0; touches stabilizers 1 and 2
  SyndromeRecord rec = repcode::trace(cfg, 2);
  CHECK(rec.label == 1);
  std::vector<std::uint8_t> expect{0, 0, 1, 0, 1, 0, 0, 0};
  CHECK(rec.bits == expect);
}

TEST_CASE("measurement flip in round 1 fires the node at both rounds, label 0") {
  repcode::ErrorConfig cfg;
  cfg.meas_flips = 1u << 1;  // stabilizer 1, round 0
  SyndromeRecord rec = repcode::trace(cfg, 2);
  CHECK(rec.label == 0);
  std::vector<std::uint8_t> expect{0, 0, 1, 1, 0, 0, 0, 0};
  CHECK(rec.bits == expect);
}

TEST_CASE("generation is deterministic and per-record streams are stable") {
  NoiseModel m = repcode_model(0.05, 0.05);
  Dataset a = generate(m, 500, 42);
  Dataset b = generate(m, 500, 42);
  CHECK(a == b);
  // a longer run shares its prefix with a shorter one
  Dataset c = generate(m, 800, 42);
  for (std::size_t i = 0; i < a.records.size(); ++i) CHECK(c.records[i] == a.records[i]);
  Dataset d = generate(m, 500, 43);
  CHECK(a.records != d.records);
}

TEST_CASE("rep-code trace regenerates bits and label from the same config") {
  Rng rng(99);
  NoiseModel m = repcode_model(0.1, 0.1);
  for (int k = 0; k < 200; ++k) {
    repcode::ErrorConfig cfg = repcode::sample_config(m, 2, rng);
    CHECK(repcode::trace(cfg, 2) == repcode::trace(cfg, 2));
  }
}

TEST_CASE("sampled positive rate matches exhaustive enumeration within 2 pp") {
  NoiseModel m = repcode_model(0.05, 0.05);
  BayesTable table = bayes_table(m, 2);
  Dataset ds = generate(m, 50000, 7);
  double sampled = 0.0;
  for (const auto& rec : ds.records) sampled += rec.label;
  sampled /= ds.records.size();
  CHECK(std::abs(sampled - table.positive_rate()) < 0.02);
}

TEST_CASE("bayes table is an exact probability distribution") {
  BayesTable table = bayes_table(repcode_model(0.05, 0.05), 2);
  CHECK(std::abs(table.total_mass() - 1.0) < 1e-9);
  for (std::uint32_t s = 0; s < table.joint.size(); ++s) {
    double post = table.posterior(s);
    CHECK(post >= 0.0);
    CHECK(post <= 1.0);
  }
}

TEST_CASE("noiseless posterior of the all-zero syndrome is 0") {
  std::vector<std::uint8_t> zero(8, 0);
  CHECK(bayes_oracle(repcode_model(0.0, 0.0), zero, 2) == 0.0);
}

TEST_CASE("all-zero posterior matches a Monte-Carlo estimate within 3 SE") {
  NoiseModel m = repcode_model(0.05, 0.05);
  std::vector<std::uint8_t> zero(8, 0);
  double exact = bayes_oracle(m, zero, 2);

  Rng rng(2024);
  long hits = 0, pos = 0;
  const long n = 1000000;
  for (long k = 0; k < n; ++k) {
    Rng stream = rng.stream(static_cast<std::uint64_t>(k));
    repcode::ErrorConfig cfg = repcode::sample_config(m, 2, stream);
    SyndromeRecord rec = repcode::trace(cfg, 2);
    bool all_zero = true;
    for (auto b : rec.bits) all_zero &= b == 0;
    if (all_zero) {
      ++hits;
      pos += rec.label;
    }
  }
  REQUIRE(hits > 0);
  double mc = static_cast<double>(pos) / hits;
  double se = std::sqrt(mc * (1.0 - mc) / hits);
  CHECK(std::abs(mc - exact) <= 3.0 * std::max(se, 1e-6));
}

TEST_CASE("all-zero syndrome is less suspicious than average") {
  NoiseModel m = repcode_model(0.05, 0.05);
  BayesTable table = bayes_table(m, 2);
  std::vector<std::uint8_t> zero(8, 0);
  CHECK(table.posterior(zero) < table.positive_rate());
}

TEST_CASE("bayes enumeration refuses over-budget settings") {
  CHECK_THROWS_AS(bayes_table(repcode_model(0.05, 0.05), 3), ConfigError);
  CHECK_THROWS_AS(bayes_table(repcode_model(0.05, 0.05), 2, 17), ConfigError);
}

TEST_CASE("invalid noise probabilities are rejected") {
  CHECK_THROWS_AS(generate(repcode_model(0.6, 0.05), 10, 1), ConfigError);
  CHECK_THROWS_AS(generate(repcode_model(0.05, -0.1), 10, 1), ConfigError);
}

TEST_CASE("teacher mode hits the target positive rate approximately") {
  NoiseModel m;
  m.mode = NoiseMode::Teacher;
  m.teacher_seed = 7;
  Dataset ds = generate(m, 20000, 11);
  double rate = 0.0;
  for (const auto& rec : ds.records) rate += rec.label;
  rate /= ds.records.size();
  CHECK(std::abs(rate - TeacherNet::kTargetRate) < 0.02);
}

TEST_CASE("split is a deterministic partition close to 80/20") {
  Dataset ds = generate(repcode_model(0.05, 0.05), 10000, 7);
  SplitView a = split(ds);
  SplitView b = split(ds);
  CHECK(a.train == b.train);
  CHECK(a.test == b.test);
  CHECK(a.train.size() + a.test.size() == ds.records.size());
  double frac = static_cast<double>(a.test.size()) / ds.records.size();
  CHECK(frac > 0.17);
  CHECK(frac < 0.23);
  // disjointness
  std::vector<bool> seen(ds.records.size(), false);
  for (auto i : a.train) seen[i] = true;
  for (auto i : a.test) {
    CHECK_FALSE(seen[i]);
  }
}

TEST_CASE("dataset file round-trips byte-identically") {
  Dataset ds = generate(repcode_model(0.05, 0.05), 2000, 5);
  std::ostringstream first;
  write_dataset(ds, first);
  std::istringstream in(first.str());
  Dataset back = read_dataset(in);
  back.split_seed = ds.split_seed;  // split seed is not part of the file format
  CHECK(back.n_s == ds.n_s);
  CHECK(back.t == ds.t);
  CHECK(back.records == ds.records);
  std::ostringstream second;
  write_dataset(back, second);
  CHECK(first.str() == second.str());
}

TEST_CASE("empty dataset round-trips as header only") {
  Dataset ds;
  std::ostringstream out;
  write_dataset(ds, out);
  CHECK(out.str() == "synd v1 ns=4 t=2\n");
  std::istringstream in(out.str());
  Dataset back = read_dataset(in);
  CHECK(back.records.empty());
  CHECK(back.n_s == 4);
  CHECK(back.t == 2);
}

TEST_CASE("record line '01000000 1' decodes to (node 0, time 1)") {
  std::istringstream in("synd v1 ns=4 t=2\n01000000 1\n");
  Dataset ds = read_dataset(in);
  REQUIRE(ds.records.size() == 1);
  CHECK(ds.records[0].label == 1);
  for (std::size_t b = 0; b < 8; ++b) CHECK(ds.records[0].bits[b] == (b == 1 ? 1 : 0));
}

TEST_CASE("dataset parse errors carry line numbers") {
  {
    std::istringstream in("wrong header\n");
    CHECK_THROWS_WITH(read_dataset(in, "f"), ContainsSubstring("f:1"));
  }
  {
    std::istringstream in("synd v1 ns=4 t=2\n0100 1\n");
    CHECK_THROWS_WITH(read_dataset(in, "f"), ContainsSubstring("f:2"));
  }
  {
    std::istringstream in("synd v1 ns=4 t=2\n01000000 1\n0100000x 0\n");
    CHECK_THROWS_WITH(read_dataset(in, "f"), ContainsSubstring("f:3"));
  }
  {
    std::istringstream in("synd v1 ns=4 t=2\n01000000 2\n");
    CHECK_THROWS_WITH(read_dataset(in, "f"), ContainsSubstring("non-binary label"));
  }
  CHECK_THROWS_AS(read_dataset("/nonexistent/path.synd"), ParseError);
}

TEST_CASE("01 import maps round-major detectors to node-major bits") {
  std::istringstream dets("00000000\n10000000\n");
  std::istringstream obs("0\n1\n");
  Dataset ds = import_01(dets, obs, 4, 2);
  REQUIRE(ds.records.size() == 2);
  CHECK(ds.records[0].label == 0);
  for (auto b : ds.records[0].bits) CHECK(b == 0);
  CHECK(ds.records[1].label == 1);
  // round-major detector 0 = (node 0, time 0) = internal bit 0
  for (std::size_t b = 0; b < 8; ++b) CHECK(ds.records[1].bits[b] == (b == 0 ? 1 : 0));
}

TEST_CASE("01 import respects node-major ordering when asked") {
  std::istringstream dets("01000000\n");
  std::istringstream obs("1\n");
  Dataset ds = import_01(dets, obs, 4, 2, DetectorOrder::NodeMajor);
  // node-major detector 1 = (node 0, time 1) = internal bit 1
  for (std::size_t b = 0; b < 8; ++b) CHECK(ds.records[0].bits[b] == (b == 1 ? 1 : 0));
}

TEST_CASE("01 export then import reproduces the dataset in both orders") {
  Dataset ds = generate(repcode_model(0.08, 0.03), 1000, 17);
  for (DetectorOrder order : {DetectorOrder::RoundMajor, DetectorOrder::NodeMajor}) {
    std::ostringstream dets, obs;
    export_01(ds, dets, obs, order);
    std::istringstream dets_in(dets.str()), obs_in(obs.str());
    Dataset back = import_01(dets_in, obs_in, ds.n_s, ds.t, order);
    CHECK(back.records == ds.records);
  }
}

TEST_CASE("01 import rejects mismatched or malformed files") {
  {
    std::istringstream dets("00000000\n00000000\n");
    std::istringstream obs("0\n");
    CHECK_THROWS_WITH(import_01(dets, obs, 4, 2), ContainsSubstring("obs file ends"));
  }
  {
    std::istringstream dets("00000000\n");
    std::istringstream obs("0\n1\n");
    CHECK_THROWS_WITH(import_01(dets, obs, 4, 2), ContainsSubstring("obs continues"));
  }
  {
    std::istringstream dets("000\n");
    std::istringstream obs("0\n");
    CHECK_THROWS_WITH(import_01(dets, obs, 4, 2), ContainsSubstring("expected 8"));
  }
  {
    std::istringstream dets("0000x000\n");
    std::istringstream obs("0\n");
    CHECK_THROWS_AS(import_01(dets, obs, 4, 2), ParseError);
  }
  {
    std::istringstream dets("00000000\n");
    std::istringstream obs("2\n");
    CHECK_THROWS_AS(import_01(dets, obs, 4, 2), ParseError);
  }
}

TEST_CASE("dataset file path round-trip") {
  TempFile tmp("qdra_test_roundtrip.synd");
  Dataset ds = generate(repcode_model(0.05, 0.05), 300, 3);
  write_dataset(ds, tmp.path);
  Dataset back = read_dataset(tmp.path);
  CHECK(back.records == ds.records);
}
