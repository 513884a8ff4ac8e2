#pragma once

// Run reports and benchmark tables.

#include <chrono>
#include <cstdio>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dnrnn/config.hpp"
#include "dnrnn/data.hpp"

namespace dnrnn {

struct RunReport {
  Variant variant = Variant::mcrnn_mla;
  std::string dataset;
  double accuracy = 0.0;       // percent of test rows classified correctly
  double train_seconds = 0.0;  // wall time of the fit call alone
  RunConfig config;
  std::vector<std::string> class_names;
  std::vector<std::vector<std::int64_t>> confusion;  // [true][predicted]
  std::int64_t test_rows = 0;

  std::uint64_t seed() const { return config.train.master_seed; }
};

// Wall time of fn() in seconds; the result is moved out.
template <class Fn>
auto timed(Fn&& fn, double& seconds) {
  const auto start = std::chrono::steady_clock::now();
  auto result = fn();
  seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

inline RunReport make_report(const RunConfig& cfg, const std::string& dataset, const std::vector<int>& predicted,
                             const Matrix& labels, std::vector<std::string> class_names, double train_seconds) {
  const auto truth = class_ids(labels);
  if (truth.size() != predicted.size()) throw Error(ErrorCode::dimension_mismatch, "prediction count != label count");
  const auto k = static_cast<std::size_t>(labels.cols());
  RunReport r;
  r.variant = cfg.variant;
  r.dataset = dataset;
  r.config = cfg;
  r.train_seconds = train_seconds;
  r.class_names = std::move(class_names);
  if (r.class_names.size() != k) {
    r.class_names.clear();
    for (std::size_t c = 0; c < k; ++c) r.class_names.push_back(std::to_string(c));
  }
  r.confusion.assign(k, std::vector<std::int64_t>(k, 0));
  std::int64_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ++r.confusion[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(predicted[i])];
    hits += truth[i] == predicted[i];
  }
  r.test_rows = static_cast<std::int64_t>(truth.size());
  r.accuracy = truth.empty() ? 0.0 : 100.0 * static_cast<double>(hits) / static_cast<double>(truth.size());
  return r;
}

inline nlohmann::json to_json(const RunReport& r) {
  nlohmann::json j;
  j["variant"] = variant_key(r.variant);
  j["dataset"] = r.dataset;
  j["accuracy"] = r.accuracy;
  j["train_seconds"] = r.train_seconds;
  j["seed"] = r.seed();
  j["test_rows"] = r.test_rows;
  j["classes"] = r.class_names;
  j["confusion"] = r.confusion;
  j["config"] = to_json(r.config);
  return j;
}

inline std::string to_text(const RunReport& r) {
  std::ostringstream os;
  os << std::left;
  auto row = [&](const std::string& key, const std::string& value) {
    os << "  " << std::setw(16) << key << value << "\n";
  };
  std::ostringstream acc, secs;
  acc << std::fixed << std::setprecision(2) << r.accuracy;
  secs << std::fixed << std::setprecision(3) << r.train_seconds;
  row("variant", std::string(variant_label(r.variant)));
  row("dataset", r.dataset);
  row("accuracy (%)", acc.str());
  row("train time (s)", secs.str());
  row("seed", std::to_string(r.seed()));
  row("test rows", std::to_string(r.test_rows));
  row("config", to_json(r.config).dump());

  std::size_t w = 6;
  for (const auto& n : r.class_names) w = std::max(w, n.size() + 2);
  for (const auto& line : r.confusion)
    for (auto v : line) w = std::max(w, std::to_string(v).size() + 2);
  os << "  confusion (rows = true class, columns = predicted)\n";
  os << "  " << std::setw(static_cast<int>(w)) << "";
  for (const auto& n : r.class_names) os << std::right << std::setw(static_cast<int>(w)) << n;
  os << "\n";
  for (std::size_t i = 0; i < r.confusion.size(); ++i) {
    os << "  " << std::left << std::setw(static_cast<int>(w)) << r.class_names[i] << std::right;
    for (auto v : r.confusion[i]) os << std::setw(static_cast<int>(w)) << v;
    os << "\n";
  }
  return os.str();
}

// Benchmark table: rows are variants, columns are accuracy per dataset followed by time per dataset.
inline const std::vector<Variant>& bench_variants() {
  static const std::vector<Variant> order{Variant::mcrnn_mla, Variant::mcrnn_mla1, Variant::mcrnn_mla2,
                                          Variant::rnn_mla};
  return order;
}

struct BenchCell {
  std::optional<double> accuracy;
  std::optional<double> seconds;
  std::string error;
};

struct BenchTable {
  std::vector<std::string> datasets;
  std::vector<Variant> variants = bench_variants();
  std::vector<std::vector<BenchCell>> cells;  // [variant][dataset]

  void resize() { cells.assign(variants.size(), std::vector<BenchCell>(datasets.size())); }
};

inline constexpr const char* kMissingCell = "\u2014";  // em dash

inline std::string format_fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

namespace detail {

inline std::vector<std::vector<std::string>> bench_grid(const BenchTable& t) {
  std::vector<std::vector<std::string>> grid;
  std::vector<std::string> header{"Method"};
  for (const auto& d : t.datasets) header.push_back(d + " acc (%)");
  for (const auto& d : t.datasets) header.push_back(d + " time (s)");
  grid.push_back(header);
  for (std::size_t v = 0; v < t.variants.size(); ++v) {
    std::vector<std::string> line{std::string(variant_label(t.variants[v]))};
    for (const auto& c : t.cells[v]) line.push_back(c.accuracy ? format_fixed(*c.accuracy, 2) : kMissingCell);
    for (const auto& c : t.cells[v]) line.push_back(c.seconds ? format_fixed(*c.seconds, 2) : kMissingCell);
    grid.push_back(line);
  }
  return grid;
}

// Display width, counting each UTF-8 code point once.
inline std::size_t display_width(const std::string& s) {
  std::size_t n = 0;
  for (unsigned char c : s) n += (c & 0xC0) != 0x80;
  return n;
}

}  // namespace detail

inline std::string bench_text(const BenchTable& t) {
  const auto grid = detail::bench_grid(t);
  std::vector<std::size_t> width(grid.front().size(), 0);
  for (const auto& line : grid)
    for (std::size_t j = 0; j < line.size(); ++j) width[j] = std::max(width[j], detail::display_width(line[j]));
  std::ostringstream os;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    for (std::size_t j = 0; j < grid[i].size(); ++j) {
      const auto pad = width[j] - detail::display_width(grid[i][j]);
      if (j == 0)
        os << grid[i][j] << std::string(pad, ' ');
      else
        os << "  " << std::string(pad, ' ') << grid[i][j];
    }
    os << "\n";
    if (i == 0) {
      std::size_t total = 0;
      for (auto w : width) total += w + 2;
      os << std::string(total - 2, '-') << "\n";
    }
  }
  bool any_error = false;
  for (std::size_t v = 0; v < t.variants.size(); ++v)
    for (std::size_t d = 0; d < t.datasets.size(); ++d)
      if (!t.cells[v][d].error.empty()) {
        if (!any_error) os << "\nDiagnostics:\n";
        any_error = true;
        os << "  " << variant_label(t.variants[v]) << " on " << t.datasets[d] << ": " << t.cells[v][d].error << "\n";
      }
  return os.str();
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string bench_csv(const BenchTable& t) {
  std::ostringstream os;
  for (const auto& line : detail::bench_grid(t)) {
    for (std::size_t j = 0; j < line.size(); ++j) os << (j ? "," : "") << csv_field(line[j]);
    os << "\n";
  }
  return os.str();
}

}  // namespace dnrnn
