#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include "qdra/report.hpp"

using namespace qdra;

namespace {

AttackReport fixture_before() {
  AttackReport r;
  r.pool_size = 1000;
  r.successes = 912;
  r.avg_flips = 1.02;
  r.heatmap = {{10, 900}, {20, 5}, {3, 2}, {0, 0}};
  return r;
}

AttackReport fixture_after() {
  AttackReport r;
  r.pool_size = 1000;
  r.successes = 162;
  r.avg_flips = 2.4;
  r.heatmap = {{5, 30}, {10, 40}, {2, 60}, {1, 14}};
  return r;
}

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name) {
    path = (std::filesystem::temp_directory_path() / name).string();
  }
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("asr, totals and argmax") {
  AttackReport r = fixture_before();
  CHECK(r.asr() == 0.912);
  CHECK(r.heatmap_total() == 940);
  CHECK(r.argmax_cell() == std::pair<int, int>{0, 1});
  AttackReport empty;
  CHECK(empty.asr() == 0.0);
}

TEST_CASE("report JSON round-trips including the null avg_flips case") {
  AttackReport r = fixture_before();
  CHECK(report_from_json(report_to_json(r)) == r);

  AttackReport none;
  none.init_heatmap();
  CHECK_FALSE(none.avg_flips.has_value());
  nlohmann::json j = report_to_json(none);
  CHECK(j.at("avg_flips").is_null());
  CHECK(report_from_json(j) == none);
}

TEST_CASE("report JSON rejects inconsistent heatmaps") {
  nlohmann::json j = report_to_json(fixture_before());
  j["heatmap"] = {{1, 2}, {3, 4}};
  CHECK_THROWS_AS(report_from_json(j), ParseError);
  j = report_to_json(fixture_before());
  j["heatmap"] = {{1}, {2}, {3}, {4}};
  CHECK_THROWS_AS(report_from_json(j), ParseError);
}

TEST_CASE("report file round-trip and parse failure paths") {
  TempFile tmp("qdra_test_report.json");
  AttackReport r = fixture_after();
  write_report(r, tmp.path);
  CHECK(read_report(tmp.path) == r);
  {
    std::ofstream out(tmp.path);
    out << "{broken\n";
  }
  CHECK_THROWS_AS(read_report(tmp.path), ParseError);
  CHECK_THROWS_AS(read_report("/nonexistent/report.json"), ParseError);
}

TEST_CASE("heatmap CSV round-trips") {
  AttackReport r = fixture_before();
  std::ostringstream out;
  emit_heatmap_csv(r, out);
  CHECK(out.str() == "10,900\n20,5\n3,2\n0,0\n");
  std::istringstream in(out.str());
  CHECK(parse_heatmap_csv(in) == r.heatmap);

  std::istringstream bad("1,x\n");
  CHECK_THROWS_AS(parse_heatmap_csv(bad), ParseError);
}

TEST_CASE("heatmap SVG carries every count and the axis labels") {
  AttackReport r = fixture_before();
  std::ostringstream out;
  emit_heatmap_svg(r, out);
  std::string svg = out.str();
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("Node") != std::string::npos);
  CHECK(svg.find("Time") != std::string::npos);
  CHECK(svg.find(">900<") != std::string::npos);
  CHECK(svg.find(">20<") != std::string::npos);
  // max cell is darkest: its label renders white on near-black
  CHECK(svg.find("rgb(55,55,55)") != std::string::npos);

  AttackReport zero;
  zero.init_heatmap();
  std::ostringstream zout;
  emit_heatmap_svg(zero, zout);
  CHECK(zout.str().find("rgb(255,255,255)") != std::string::npos);
}

TEST_CASE("curve CSV round-trips at full precision") {
  std::vector<CsvCurveRow> rows;
  for (int e = 1; e <= 10; ++e) {
    rows.push_back({e, 1.0 / (e + 0.123456789012345), 0.5 + 0.01 * e});
  }
  std::ostringstream out;
  emit_curves(rows, out);
  std::istringstream in(out.str());
  std::vector<CsvCurveRow> back = parse_curves(in);
  REQUIRE(back.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(back[i].epoch == rows[i].epoch);
    CHECK(back[i].loss == rows[i].loss);
    CHECK(back[i].test_accuracy == rows[i].test_accuracy);
    CHECK(back[i].epoch == static_cast<int>(i) + 1);
  }
}

TEST_CASE("curve CSV parsing rejects malformed input") {
  std::istringstream bad_header("epoch;loss\n");
  CHECK_THROWS_AS(parse_curves(bad_header), ParseError);
  std::istringstream bad_fields("epoch,loss,test_accuracy\n1,0.5\n");
  CHECK_THROWS_AS(parse_curves(bad_fields), ParseError);
  std::istringstream bad_number("epoch,loss,test_accuracy\n1,zz,0.5\n");
  CHECK_THROWS_AS(parse_curves(bad_number), ParseError);
  std::vector<CsvCurveRow> none;
  std::ostringstream out;
  CHECK_THROWS_AS(emit_curves(none, out), ContractError);
}

TEST_CASE("comparison summarizes the before/after pair") {
  nlohmann::json j = compare_reports(fixture_before(), fixture_after());
  CHECK(j.at("asr_before").get<double>() == 0.912);
  CHECK(j.at("asr_after").get<double>() == 0.162);
  CHECK(std::abs(j.at("ratio").get<double>() - 0.162 / 0.912) < 1e-12);
  CHECK(j.at("argmax_before") == nlohmann::json({0, 1}));
  CHECK(j.at("argmax_after") == nlohmann::json({2, 1}));
  CHECK(j.at("heatmap_delta")[0][1].get<long>() == 30 - 900);

  AttackReport small;
  small.n_s = 2;
  small.init_heatmap();
  CHECK_THROWS_AS(compare_reports(fixture_before(), small), DimError);

  AttackReport nothing;
  nothing.init_heatmap();
  nlohmann::json z = compare_reports(nothing, nothing);
  CHECK(z.at("ratio").get<double>() == 0.0);
}
