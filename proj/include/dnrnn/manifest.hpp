#pragma once

// Dataset manifests, CSV ingestion and the preprocessing sidecar file.
//
// A manifest lists channel files (or one flat file to be channelized), a label
// file and preprocessing directives. Relative paths resolve against the
// manifest's directory.
//
//   name = "dsa"
//   labels = "labels.csv"          # one column of class ids or names, header row
//   classes = ["walk", "run"]      # optional; fixes class order
//   num_classes = 19               # optional, for integer ids
//   split = 0.6667                 # train fraction (stratified)
//   seed = 7
//   preprocess = "unit"            # none | unit | standardize | zca
//   zca_eps = 1e-5
//
//   [[channel]]                    # repeated; or a single [flat] table
//   name = "torso"
//   path = "torso.csv"             # CSV with header, or an RNMX matrix file
//   rows = 9120                    # optional declared shape
//   cols = 125
//
//   [flat]
//   path = "all.csv"
//   channels = 45
//   layout = "blocked"             # or "interleaved"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dnrnn/binary_io.hpp"
#include "dnrnn/data.hpp"
#include "dnrnn/dataset.hpp"
#include "dnrnn/detail/toml_lite.hpp"
#include "dnrnn/error.hpp"

namespace dnrnn {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

// RFC-4180 reader: quoted fields, doubled quotes, CRLF or LF line ends.
inline CsvTable parse_csv(std::string_view text, const std::string& source = "csv") {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  std::size_t line = 1;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    if (c == '"' && field.empty()) {
      quoted = true;
      field_started = true;
    } else if (c == ',') {
      record.push_back(std::move(field));
      field.clear();
      field_started = true;
    } else if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
      continue;
    } else if (c == '\n') {
      if (field_started || !field.empty() || !record.empty()) {
        record.push_back(std::move(field));
        records.push_back(std::move(record));
      }
      record.clear();
      field.clear();
      field_started = false;
      ++line;
    } else {
      field += c;
      field_started = true;
    }
  }
  if (quoted) throw Error(ErrorCode::format, source + ": unterminated quoted field at line " + std::to_string(line));
  if (field_started || !field.empty() || !record.empty()) {
    record.push_back(std::move(field));
    records.push_back(std::move(record));
  }
  if (records.empty()) throw Error(ErrorCode::format, source + ": empty CSV (a header row is required)");
  CsvTable table;
  table.header = std::move(records.front());
  table.rows.assign(std::make_move_iterator(records.begin() + 1), std::make_move_iterator(records.end()));
  return table;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::optional<double> parse_double(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || p != s.data() + s.size()) return std::nullopt;
  return v;
}

// Numeric CSV with a header row; rows are instances.
inline Matrix load_csv_matrix(const std::string& path) {
  const auto table = parse_csv(read_text_file(path), path);
  const auto cols = table.header.size();
  Matrix m(static_cast<Eigen::Index>(table.rows.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    if (row.size() != cols) {
      std::ostringstream os;
      os << path << ": data row " << i + 1 << " has " << row.size() << " fields, header has " << cols;
      throw Error(ErrorCode::format, os.str());
    }
    for (std::size_t j = 0; j < cols; ++j) {
      const auto v = parse_double(row[j]);
      if (!v || !std::isfinite(*v)) {
        std::ostringstream os;
        os << path << ": non-numeric cell '" << row[j] << "' at data row " << i + 1 << ", column " << j + 1 << " ("
           << table.header[j] << ")";
        throw Error(ErrorCode::format, os.str());
      }
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = *v;
    }
  }
  return m;
}

inline void save_csv_matrix(const Matrix& m, const std::string& path, const std::string& prefix = "f") {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::io, "cannot open " + path + " for writing");
  for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << prefix << j;
  out << "\n";
  out.precision(17);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << m(i, j);
    out << "\n";
  }
}

// CSV by extension, otherwise the RNMX binary container.
inline Matrix load_matrix_file(const std::string& path) {
  const auto ext = std::filesystem::path(path).extension().string();
  if (ext == ".csv" || ext == ".CSV") return load_csv_matrix(path);
  return load_matrix(path);
}

struct ChannelEntry {
  std::string name;
  std::string path;
  std::optional<Eigen::Index> rows;
  std::optional<Eigen::Index> cols;
};

struct FlatEntry {
  std::string path;
  int channels = 1;
  ChannelLayout layout = ChannelLayout::blocked;
  std::optional<Eigen::Index> rows;
  std::optional<Eigen::Index> cols;
};

struct DatasetManifest {
  std::string name;
  std::string base_dir;
  std::vector<ChannelEntry> channels;
  std::optional<FlatEntry> flat;
  std::string labels_path;
  std::vector<std::string> classes;
  std::optional<int> num_classes;
  double split = 2.0 / 3.0;
  std::uint64_t seed = 1;
  Preprocess preprocess = Preprocess::unit;
  double zca_eps = 1e-5;

  std::string resolve(const std::string& p) const {
    const std::filesystem::path path(p);
    if (path.is_absolute() || base_dir.empty()) return p;
    return (std::filesystem::path(base_dir) / path).string();
  }
};

namespace detail {

inline const std::string& require_string(const toml::Table& t, const std::string& key, const std::string& where) {
  auto it = t.find(key);
  if (it == t.end() || !it->second.is_string())
    throw Error(ErrorCode::config, where + ": '" + key + "' must be a string");
  return it->second.string();
}

inline std::optional<Eigen::Index> optional_count(const toml::Table& t, const std::string& key) {
  auto it = t.find(key);
  if (it == t.end()) return std::nullopt;
  if (!it->second.is_integer() || it->second.integer() < 0)
    throw Error(ErrorCode::config, "'" + key + "' must be a non-negative integer");
  return static_cast<Eigen::Index>(it->second.integer());
}

inline void reject_unknown(const toml::Table& t, const std::set<std::string>& known, const std::string& where) {
  std::string list;
  for (const auto& [k, v] : t)
    if (!known.count(k)) list += (list.empty() ? "" : ", ") + k;
  if (!list.empty()) throw Error(ErrorCode::config, where + ": unknown keys: " + list);
}

inline void check_shape(const Matrix& m, std::optional<Eigen::Index> rows, std::optional<Eigen::Index> cols,
                        const std::string& what) {
  if ((rows && *rows != m.rows()) || (cols && *cols != m.cols())) {
    std::ostringstream os;
    os << what << ": declared shape " << (rows ? std::to_string(*rows) : "?") << "x"
       << (cols ? std::to_string(*cols) : "?") << " but file is " << m.rows() << "x" << m.cols();
    throw Error(ErrorCode::dataset, os.str());
  }
}

}  // namespace detail

inline DatasetManifest manifest_from_table(const toml::Table& root, const std::string& base_dir) {
  detail::reject_unknown(root,
                         {"name", "labels", "classes", "num_classes", "split", "seed", "preprocess", "zca_eps", "channel",
                          "flat"},
                         "manifest");
  DatasetManifest m;
  m.base_dir = base_dir;
  if (root.count("name")) m.name = detail::require_string(root, "name", "manifest");
  m.labels_path = detail::require_string(root, "labels", "manifest");
  if (auto it = root.find("classes"); it != root.end()) {
    if (!it->second.is_array()) throw Error(ErrorCode::config, "'classes' must be an array of strings");
    for (const auto& c : it->second.array()) {
      if (!c.is_string()) throw Error(ErrorCode::config, "'classes' must be an array of strings");
      m.classes.push_back(c.string());
    }
  }
  if (auto it = root.find("num_classes"); it != root.end()) {
    if (!it->second.is_integer() || it->second.integer() < 1)
      throw Error(ErrorCode::config, "'num_classes' must be a positive integer");
    m.num_classes = static_cast<int>(it->second.integer());
  }
  if (auto it = root.find("split"); it != root.end()) {
    if (!it->second.is_number()) throw Error(ErrorCode::config, "'split' must be a number");
    m.split = it->second.number();
  }
  if (auto it = root.find("seed"); it != root.end()) {
    if (!it->second.is_integer()) throw Error(ErrorCode::config, "'seed' must be an integer");
    m.seed = static_cast<std::uint64_t>(it->second.integer());
  }
  if (root.count("preprocess")) {
    const auto& key = detail::require_string(root, "preprocess", "manifest");
    auto p = parse_preprocess(key);
    if (!p) throw Error(ErrorCode::config, "unknown preprocess directive '" + key + "'");
    m.preprocess = *p;
  }
  if (auto it = root.find("zca_eps"); it != root.end()) {
    if (!it->second.is_number() || !(it->second.number() > 0.0))
      throw Error(ErrorCode::config, "'zca_eps' must be a positive number");
    m.zca_eps = it->second.number();
  }

  if (auto it = root.find("channel"); it != root.end()) {
    if (!it->second.is_array()) throw Error(ErrorCode::config, "'channel' must be an array of tables ([[channel]])");
    for (const auto& entry : it->second.array()) {
      if (!entry.is_table()) throw Error(ErrorCode::config, "'channel' entries must be tables");
      const auto& t = entry.table();
      detail::reject_unknown(t, {"name", "path", "rows", "cols"}, "channel");
      ChannelEntry ch;
      ch.path = detail::require_string(t, "path", "channel");
      ch.name = t.count("name") ? detail::require_string(t, "name", "channel") : "ch" + std::to_string(m.channels.size());
      ch.rows = detail::optional_count(t, "rows");
      ch.cols = detail::optional_count(t, "cols");
      m.channels.push_back(std::move(ch));
    }
  }
  if (auto it = root.find("flat"); it != root.end()) {
    if (!it->second.is_table()) throw Error(ErrorCode::config, "'flat' must be a table");
    const auto& t = it->second.table();
    detail::reject_unknown(t, {"path", "channels", "layout", "rows", "cols"}, "flat");
    FlatEntry f;
    f.path = detail::require_string(t, "path", "flat");
    if (auto c = detail::optional_count(t, "channels")) f.channels = static_cast<int>(*c);
    if (t.count("layout")) {
      const auto& layout = detail::require_string(t, "layout", "flat");
      if (layout == "blocked")
        f.layout = ChannelLayout::blocked;
      else if (layout == "interleaved")
        f.layout = ChannelLayout::interleaved;
      else
        throw Error(ErrorCode::config, "unknown layout '" + layout + "'");
    }
    f.rows = detail::optional_count(t, "rows");
    f.cols = detail::optional_count(t, "cols");
    m.flat = f;
  }
  if (m.channels.empty() == !m.flat.has_value())
    throw Error(ErrorCode::config, "manifest needs either [[channel]] entries or one [flat] table");
  return m;
}

inline DatasetManifest read_manifest(const std::string& path) {
  const auto dir = std::filesystem::path(path).parent_path().string();
  return manifest_from_table(toml::parse_file(path), dir);
}

// Class ids from a one-column label CSV. With declared class names, cells may
// be names or ids; otherwise all-integer columns are ids and anything else is
// treated as names in sorted order.
inline std::pair<std::vector<int>, std::vector<std::string>> load_labels(const DatasetManifest& m) {
  const auto path = m.resolve(m.labels_path);
  const auto table = parse_csv(read_text_file(path), path);
  if (table.header.size() != 1) throw Error(ErrorCode::format, path + ": label file must have exactly one column");
  std::vector<std::string> cells;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    if (table.rows[i].size() != 1) throw Error(ErrorCode::format, path + ": bad label row " + std::to_string(i + 1));
    cells.push_back(table.rows[i][0]);
  }

  auto as_id = [](const std::string& s) -> std::optional<int> {
    int v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size() || v < 0) return std::nullopt;
    return v;
  };

  std::vector<int> ids;
  std::vector<std::string> names = m.classes;
  if (!names.empty()) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      auto found = std::find(names.begin(), names.end(), cells[i]);
      if (found != names.end()) {
        ids.push_back(static_cast<int>(found - names.begin()));
      } else if (auto id = as_id(cells[i]); id && *id < static_cast<int>(names.size())) {
        ids.push_back(*id);
      } else {
        throw Error(ErrorCode::label_format,
                    path + ": unknown class label '" + cells[i] + "' at row " + std::to_string(i + 1));
      }
    }
    return {ids, names};
  }

  const bool all_ids = std::all_of(cells.begin(), cells.end(), [&](const std::string& s) { return as_id(s).has_value(); });
  if (all_ids) {
    int max_id = -1;
    for (const auto& c : cells) {
      ids.push_back(*as_id(c));
      max_id = std::max(max_id, ids.back());
    }
    const int k = m.num_classes.value_or(max_id + 1);
    for (std::size_t i = 0; i < ids.size(); ++i)
      if (ids[i] >= k)
        throw Error(ErrorCode::label_format,
                    path + ": class id " + cells[i] + " at row " + std::to_string(i + 1) + " >= num_classes");
    for (int c = 0; c < k; ++c) names.push_back(std::to_string(c));
    return {ids, names};
  }

  std::set<std::string> unique(cells.begin(), cells.end());
  names.assign(unique.begin(), unique.end());
  for (const auto& c : cells) ids.push_back(static_cast<int>(std::find(names.begin(), names.end(), c) - names.begin()));
  return {ids, names};
}

// Loads channel and label files without preprocessing.
inline MultiChannelDataset load_raw(const DatasetManifest& m) {
  MultiChannelDataset data;
  if (m.flat) {
    const Matrix flat = load_matrix_file(m.resolve(m.flat->path));
    detail::check_shape(flat, m.flat->rows, m.flat->cols, m.flat->path);
    data.channels = channelize(flat, m.flat->channels, m.flat->layout);
    data.name_channels();
  } else {
    for (const auto& ch : m.channels) {
      Matrix x = load_matrix_file(m.resolve(ch.path));
      detail::check_shape(x, ch.rows, ch.cols, ch.path);
      data.channels.push_back(std::move(x));
      data.channel_names.push_back(ch.name);
    }
  }
  auto [ids, names] = load_labels(m);
  data.labels = one_hot(ids, static_cast<int>(names.size()));
  data.class_names = std::move(names);
  data.meta = m.name.empty() ? m.labels_path : m.name;
  data.validate();
  return data;
}

// Whole-file load with preprocessing statistics fitted on every row.
inline MultiChannelDataset load_manifest(const std::string& path) {
  const auto m = read_manifest(path);
  const auto raw = load_raw(m);
  return Preprocessor::fit(raw, m.preprocess, m.zca_eps).apply(raw);
}

struct PreparedData {
  MultiChannelDataset train;
  MultiChannelDataset test;
  Preprocessor preprocessor;  // fitted on train only
  std::vector<Eigen::Index> train_rows;
  std::vector<Eigen::Index> test_rows;
};

// Stratified split first, then preprocessing fitted on the training rows and
// replayed on the test rows.
inline PreparedData prepare(const DatasetManifest& m) {
  const auto raw = load_raw(m);
  auto split = split_train_test(raw, m.split, m.seed);
  PreparedData out;
  out.preprocessor = Preprocessor::fit(split.train, m.preprocess, m.zca_eps);
  out.train = out.preprocessor.apply(split.train);
  out.test = out.preprocessor.apply(split.test);
  out.train_rows = std::move(split.train_rows);
  out.test_rows = std::move(split.test_rows);
  return out;
}

inline constexpr std::string_view kPreprocessorMagic = "RNMP";
inline constexpr std::uint32_t kPreprocessorFormatVersion = 1;

// Sidecar for a model file: the fitted per-channel preprocessing.
inline void save_preprocessor(const Preprocessor& p, const std::string& path) {
  ByteWriter w;
  w.bytes(kPreprocessorMagic);
  w.u32(kPreprocessorFormatVersion);
  w.u32(static_cast<std::uint32_t>(p.channels.size()));
  for (const auto& t : p.channels) {
    w.u32(static_cast<std::uint32_t>(t.kind));
    w.f64(t.eps);
    w.matrix(t.standardizer.mean);
    w.matrix(t.standardizer.scale);
    w.matrix(t.zca.mean);
    w.matrix(t.zca.whitening);
    w.matrix(t.unit.lo);
    w.matrix(t.unit.hi);
  }
  w.crc_trailer();
  w.write_file(path);
}

inline Preprocessor load_preprocessor(const std::string& path) {
  auto r = ByteReader::from_file(path);
  r.expect_magic(kPreprocessorMagic);
  r.verify_crc_trailer();
  if (r.u32() != kPreprocessorFormatVersion) throw Error(ErrorCode::format, "unsupported preprocessor version");
  Preprocessor p;
  const auto n = r.u32();
  auto vec = [&r] {
    Matrix m = r.matrix();
    return m.size() == 0 ? Vector() : Vector(Eigen::Map<const Vector>(m.data(), m.size()));
  };
  for (std::uint32_t c = 0; c < n; ++c) {
    ChannelTransform t;
    const auto kind = r.u32();
    if (kind > static_cast<std::uint32_t>(Preprocess::zca)) throw Error(ErrorCode::format, "unknown preprocess kind");
    t.kind = static_cast<Preprocess>(kind);
    t.eps = r.f64();
    t.standardizer.mean = vec();
    t.standardizer.scale = vec();
    t.zca.mean = vec();
    t.zca.whitening = r.matrix();
    t.unit.lo = vec();
    t.unit.hi = vec();
    p.channels.push_back(std::move(t));
  }
  if (!r.at_end()) throw Error(ErrorCode::format, "trailing bytes in preprocessor file");
  return p;
}

}  // namespace dnrnn
