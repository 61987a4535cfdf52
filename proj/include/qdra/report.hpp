#pragma once

#include <algorithm>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qdra/errors.hpp"

namespace qdra {

// Aggregate attack outcome over an evaluation pool. The heatmap counts
// flips at each (node, time) cell across successful episodes.
struct AttackReport {
  int n_s = 4;
  int t = 2;
  std::size_t pool_size = 0;
  std::size_t successes = 0;
  std::optional<double> avg_flips;       // successful episodes only
  std::vector<std::vector<long>> heatmap;  // [node][time]

  double asr() const {
    return pool_size == 0 ? 0.0 : static_cast<double>(successes) / pool_size;
  }

  void init_heatmap() { heatmap.assign(n_s, std::vector<long>(t, 0)); }

  long heatmap_total() const {
    long s = 0;
    for (const auto& row : heatmap)
      for (long c : row) s += c;
    return s;
  }

  std::pair<int, int> argmax_cell() const {
    std::pair<int, int> best{0, 0};
    long best_count = -1;
    for (int i = 0; i < n_s; ++i) {
      for (int j = 0; j < t; ++j) {
        if (heatmap[i][j] > best_count) {
          best_count = heatmap[i][j];
          best = {i, j};
        }
      }
    }
    return best;
  }

  bool operator==(const AttackReport&) const = default;
};

// ---- attack report JSON file ----

inline nlohmann::json report_to_json(const AttackReport& r) {
  nlohmann::json j;
  j["ns"] = r.n_s;
  j["t"] = r.t;
  j["pool_size"] = r.pool_size;
  j["successes"] = r.successes;
  j["asr"] = r.asr();
  if (r.avg_flips) {
    j["avg_flips"] = *r.avg_flips;
  } else {
    j["avg_flips"] = nullptr;
  }
  j["heatmap"] = r.heatmap;
  return j;
}

inline AttackReport report_from_json(const nlohmann::json& j) {
  AttackReport r;
  r.n_s = j.at("ns");
  r.t = j.at("t");
  r.pool_size = j.at("pool_size");
  r.successes = j.at("successes");
  if (!j.at("avg_flips").is_null()) r.avg_flips = j.at("avg_flips").get<double>();
  r.heatmap = j.at("heatmap").get<std::vector<std::vector<long>>>();
  if (static_cast<int>(r.heatmap.size()) != r.n_s)
    throw ParseError("report heatmap has wrong row count");
  for (const auto& row : r.heatmap) {
    if (static_cast<int>(row.size()) != r.t) throw ParseError("report heatmap has wrong columns");
  }
  return r;
}

inline void write_report(const AttackReport& r, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open " + path + " for writing");
  out << report_to_json(r).dump(1) << "\n";
}

inline AttackReport read_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  return report_from_json(j);
}

// ---- heatmap CSV + SVG ----

inline void emit_heatmap_csv(const AttackReport& r, std::ostream& out) {
  for (int i = 0; i < r.n_s; ++i) {
    for (int j = 0; j < r.t; ++j) {
      if (j) out << ',';
      out << r.heatmap[i][j];
    }
    out << "\n";
  }
}

inline std::vector<std::vector<long>> parse_heatmap_csv(std::istream& in) {
  std::vector<std::vector<long>> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<long> row;
    std::istringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stol(cell));
      } catch (const std::exception&) {
        throw ParseError("heatmap csv line " + std::to_string(lineno) + ": bad cell '" + cell +
                         "'");
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

// Grid of cells labeled with counts; grayscale intensity linear in count
// relative to the max cell.
inline void emit_heatmap_svg(const AttackReport& r, std::ostream& out) {
  const int cell = 64, margin = 48;
  int width = margin + r.t * cell + 16;
  int height = margin + r.n_s * cell + 16;
  long max_count = 0;
  for (const auto& row : r.heatmap)
    for (long c : row) max_count = std::max(max_count, c);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\">\n";
  out << "<text x=\"" << margin + r.t * cell / 2 << "\" y=\"16\" text-anchor=\"middle\">Time</text>\n";
  out << "<text x=\"14\" y=\"" << margin + r.n_s * cell / 2
      << "\" text-anchor=\"middle\" transform=\"rotate(-90 14 " << margin + r.n_s * cell / 2
      << ")\">Node</text>\n";
  for (int j = 0; j < r.t; ++j) {
    out << "<text x=\"" << margin + j * cell + cell / 2 << "\" y=\"" << margin - 8
        << "\" text-anchor=\"middle\">" << j << "</text>\n";
  }
  for (int i = 0; i < r.n_s; ++i) {
    out << "<text x=\"" << margin - 8 << "\" y=\"" << margin + i * cell + cell / 2 + 4
        << "\" text-anchor=\"end\">" << i << "</text>\n";
  }
  for (int i = 0; i < r.n_s; ++i) {
    for (int j = 0; j < r.t; ++j) {
      long c = r.heatmap[i][j];
      // white at 0, darker with count; label flips to white on dark cells
      int shade = max_count == 0 ? 255 : 255 - static_cast<int>(200.0 * c / max_count);
      out << "<rect x=\"" << margin + j * cell << "\" y=\"" << margin + i * cell << "\" width=\""
          << cell << "\" height=\"" << cell << "\" fill=\"rgb(" << shade << "," << shade << ","
          << shade << ")\" stroke=\"black\"/>\n";
      out << "<text x=\"" << margin + j * cell + cell / 2 << "\" y=\""
          << margin + i * cell + cell / 2 + 4 << "\" text-anchor=\"middle\" fill=\""
          << (shade < 128 ? "white" : "black") << "\">" << c << "</text>\n";
    }
  }
  out << "</svg>\n";
}

inline void emit_heatmap(const AttackReport& r, const std::string& path_csv,
                         const std::string& path_svg) {
  {
    std::ofstream out(path_csv);
    if (!out) throw ParseError("cannot open " + path_csv + " for writing");
    emit_heatmap_csv(r, out);
  }
  std::ofstream out(path_svg);
  if (!out) throw ParseError("cannot open " + path_svg + " for writing");
  emit_heatmap_svg(r, out);
}

// ---- learning-curve CSV ----

struct CsvCurveRow {
  int epoch;
  double loss;
  double test_accuracy;
};

template <typename Rows>
inline void emit_curves(const Rows& rows, std::ostream& out) {
  if (rows.empty()) throw ContractError("emit_curves requires at least one row");
  out << "epoch,loss,test_accuracy\n";
  out.precision(17);
  for (const auto& row : rows) {
    out << row.epoch << ',' << row.loss << ',' << row.test_accuracy << "\n";
  }
}

template <typename Rows>
inline void emit_curves(const Rows& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open " + path + " for writing");
  emit_curves(rows, out);
}

inline std::vector<CsvCurveRow> parse_curves(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "epoch,loss,test_accuracy")
    throw ParseError("curves csv: bad header");
  std::vector<CsvCurveRow> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string a, b, c;
    if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') || !std::getline(ss, c))
      throw ParseError("curves csv line " + std::to_string(lineno) + ": expected 3 fields");
    try {
      rows.push_back({std::stoi(a), std::stod(b), std::stod(c)});
    } catch (const std::exception&) {
      throw ParseError("curves csv line " + std::to_string(lineno) + ": bad number");
    }
  }
  return rows;
}

// ---- before/after comparison ----

inline nlohmann::json compare_reports(const AttackReport& before, const AttackReport& after) {
  if (before.n_s != after.n_s || before.t != after.t)
    throw DimError("compare_reports: heatmap dimensions differ");
  nlohmann::json j;
  j["asr_before"] = before.asr();
  j["asr_after"] = after.asr();
  j["ratio"] = before.asr() == 0.0 ? 0.0 : after.asr() / before.asr();
  auto [bi, bj] = before.argmax_cell();
  auto [ai, aj] = after.argmax_cell();
  j["argmax_before"] = {bi, bj};
  j["argmax_after"] = {ai, aj};
  std::vector<std::vector<long>> delta(before.n_s, std::vector<long>(before.t, 0));
  for (int i = 0; i < before.n_s; ++i)
    for (int k = 0; k < before.t; ++k) delta[i][k] = after.heatmap[i][k] - before.heatmap[i][k];
  j["heatmap_delta"] = delta;
  return j;
}

}  // namespace qdra
