#pragma once

#include <algorithm>
#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "coulomb/geometry.hpp"
#include "coulomb/sampler.hpp"

namespace coulomb::io {

// 64-bit FNV-1a.
inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
  return buf;
}

// Round-trip formatting.
inline std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

struct Metadata {
  std::string config_hash;
  std::uint64_t seed = 0;
};

inline std::string metadata_line(const Metadata& m) {
  return "# config_hash=" + m.config_hash + " seed=" + std::to_string(m.seed);
}

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const Metadata& meta, const std::vector<std::string>& columns)
      : out_(path, std::ios::binary) {
    if (!out_) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out_ << metadata_line(meta) << '\n';
    for (std::size_t k = 0; k < columns.size(); ++k) out_ << (k ? "," : "") << columns[k];
    out_ << '\n';
    width_ = columns.size();
  }

  class Row {
   public:
    explicit Row(CsvWriter& w) : w_(&w) {}
    Row(const Row&) = delete;
    ~Row() {
      w_->out_ << '\n';
    }
    Row& operator<<(double x) { return cell(format_double(x)); }
    Row& operator<<(std::size_t x) { return cell(std::to_string(x)); }
    Row& operator<<(int x) { return cell(std::to_string(x)); }
    Row& operator<<(const std::string& s) { return cell(s); }
    Row& operator<<(const char* s) { return cell(s); }

   private:
    Row& cell(const std::string& s) {
      if (n_++) w_->out_ << ',';
      w_->out_ << s;
      return *this;
    }
    CsvWriter* w_;
    std::size_t n_ = 0;
  };

  Row row() { return Row(*this); }
  std::size_t width() const { return width_; }

 private:
  std::ofstream out_;
  std::size_t width_ = 0;
};

struct CsvTable {
  Metadata meta;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name) const {
    for (std::size_t k = 0; k < columns.size(); ++k)
      if (columns[k] == name) return k;
    throw std::runtime_error("missing column: " + std::string(name));
  }
  double number(std::size_t row, std::size_t col) const { return std::stod(rows.at(row).at(col)); }
};

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

inline Metadata parse_metadata(const std::string& line) {
  Metadata m;
  std::istringstream in(line.substr(1));
  std::string tok;
  while (in >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = tok.substr(0, eq), value = tok.substr(eq + 1);
    if (key == "config_hash") m.config_hash = value;
    if (key == "seed") m.seed = std::stoull(value);
  }
  return m;
}

inline CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  CsvTable t;
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (!header) t.meta = parse_metadata(line);
      continue;
    }
    auto cells = split_csv(line);
    if (!header) {
      t.columns = std::move(cells);
      header = true;
      continue;
    }
    if (cells.size() != t.columns.size())
      throw std::runtime_error(path.string() + ": row has " + std::to_string(cells.size()) + " cells, expected " +
                               std::to_string(t.columns.size()));
    t.rows.push_back(std::move(cells));
  }
  if (!header) throw std::runtime_error(path.string() + ": no header row");
  return t;
}

// ---------------------------------------------------------------- samples

inline const std::vector<std::string>& sample_columns() {
  static const std::vector<std::string> c{"chain", "sweep", "fluctuation", "energy", "points_in_supp"};
  return c;
}

inline void write_samples(const std::filesystem::path& path, const std::vector<ChainOutput>& outputs,
                          const Metadata& meta) {
  CsvWriter w(path, meta, sample_columns());
  for (const auto& o : outputs)
    for (const auto& s : o.samples) w.row() << s.chain << s.sweep << s.fluctuation << s.energy << s.points_in_supp;
}

// Per-chain records, in chain order.
inline std::vector<std::vector<SampleRecord>> read_samples(const std::filesystem::path& path, Metadata* meta = nullptr) {
  const CsvTable t = read_csv(path);
  const std::size_t c = t.column("chain"), s = t.column("sweep"), f = t.column("fluctuation"),
                    e = t.column("energy"), p = t.column("points_in_supp");
  std::vector<std::vector<SampleRecord>> out;
  for (const auto& row : t.rows) {
    SampleRecord r;
    r.chain = std::stoull(row[c]);
    r.sweep = std::stoull(row[s]);
    r.fluctuation = std::stod(row[f]);
    r.energy = std::stod(row[e]);
    r.points_in_supp = std::stoull(row[p]);
    if (r.chain >= out.size()) out.resize(r.chain + 1);
    out[r.chain].push_back(r);
  }
  if (meta) *meta = t.meta;
  return out;
}

inline std::vector<std::vector<double>> fluctuation_series(const std::vector<std::vector<SampleRecord>>& chains) {
  std::vector<std::vector<double>> out;
  for (const auto& c : chains) {
    std::vector<double> v;
    v.reserve(c.size());
    for (const auto& r : c) v.push_back(r.fluctuation);
    out.push_back(std::move(v));
  }
  return out;
}

// ---------------------------------------------------------------- snapshots

inline void write_snapshots(const std::filesystem::path& path, const std::vector<ChainOutput>& outputs,
                            const Metadata& meta) {
  CsvWriter w(path, meta, {"chain", "sweep", "index", "x", "y"});
  for (const auto& o : outputs)
    for (const auto& s : o.snapshots)
      for (std::size_t i = 0; i < s.points.size(); ++i) w.row() << s.chain << s.sweep << i << s.points[i].x << s.points[i].y;
}

// Snapshots from a chain/sweep/index/x/y table, or a single one from a plain x/y table.
inline std::vector<Snapshot> read_snapshots(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  const std::size_t x = t.column("x"), y = t.column("y");
  const bool keyed = std::find(t.columns.begin(), t.columns.end(), "sweep") != t.columns.end();
  std::vector<Snapshot> out;
  for (std::size_t k = 0; k < t.rows.size(); ++k) {
    std::size_t chain = 0, sweep = 0;
    if (keyed) {
      chain = std::stoull(t.rows[k][t.column("chain")]);
      sweep = std::stoull(t.rows[k][t.column("sweep")]);
    }
    if (out.empty() || out.back().chain != chain || out.back().sweep != sweep) out.push_back({chain, sweep, {}});
    out.back().points.push_back({t.number(k, x), t.number(k, y)});
  }
  return out;
}

}  // namespace coulomb::io
