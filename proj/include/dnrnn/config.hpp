#pragma once

// Run configuration files:
//
//   variant  = "mcrnn_mla"      # rnn_mla | mcrnn_mla | mcrnn_mla1 | mcrnn_mla2
//   layers   = 2                # optional, defaults to len(widths)
//   widths   = [50, 30]
//   branches = 3
//   seed     = 1
//   threads  = 1
//   pinv_tol = 1e-10
//
//   [cluster]
//   n = 10
//   p = 0.1
//   r = 0.001
//   lambda = 0.01               # or lambda_plus / lambda_minus
//
//   [fista]
//   l1_weight = 1.0
//   max_iter = 200
//   rel_tol = 1e-6
//   lipschitz = 12.5            # optional

#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dnrnn/detail/toml_lite.hpp"
#include "dnrnn/error.hpp"
#include "dnrnn/model.hpp"

namespace dnrnn {

struct RunConfig {
  Variant variant = Variant::mcrnn_mla;
  TrainConfig train;
};

namespace detail {

inline void collect_unknown(const toml::Table& table, const std::set<std::string>& known, const std::string& prefix,
                            std::vector<std::string>& unknown) {
  for (const auto& [key, value] : table)
    if (!known.count(key)) unknown.push_back(prefix + key);
}

inline double get_number(const toml::Table& t, const std::string& key, double fallback) {
  auto it = t.find(key);
  if (it == t.end()) return fallback;
  if (!it->second.is_number()) throw Error(ErrorCode::config, "'" + key + "' must be a number");
  return it->second.number();
}

inline std::int64_t get_integer(const toml::Table& t, const std::string& key, std::int64_t fallback) {
  auto it = t.find(key);
  if (it == t.end()) return fallback;
  if (!it->second.is_integer()) throw Error(ErrorCode::config, "'" + key + "' must be an integer");
  return it->second.integer();
}

}  // namespace detail

// Builds a RunConfig from a parsed table; unknown keys are rejected, listed verbatim.
inline RunConfig run_config_from_table(const toml::Table& root) {
  std::vector<std::string> unknown;
  detail::collect_unknown(root, {"variant", "layers", "widths", "branches", "seed", "threads", "pinv_tol", "cluster", "fista"},
                          "", unknown);
  const toml::Table empty;
  const toml::Table* cluster = &empty;
  const toml::Table* fista = &empty;
  if (auto it = root.find("cluster"); it != root.end()) {
    if (!it->second.is_table()) throw Error(ErrorCode::config, "'cluster' must be a table");
    cluster = &it->second.table();
    detail::collect_unknown(*cluster, {"n", "p", "r", "lambda", "lambda_plus", "lambda_minus"}, "cluster.", unknown);
  }
  if (auto it = root.find("fista"); it != root.end()) {
    if (!it->second.is_table()) throw Error(ErrorCode::config, "'fista' must be a table");
    fista = &it->second.table();
    detail::collect_unknown(*fista, {"l1_weight", "max_iter", "rel_tol", "lipschitz"}, "fista.", unknown);
  }
  if (!unknown.empty()) {
    std::string list;
    for (const auto& k : unknown) list += (list.empty() ? "" : ", ") + k;
    throw Error(ErrorCode::config, "unknown configuration keys: " + list);
  }

  RunConfig cfg;
  if (auto it = root.find("variant"); it != root.end()) {
    if (!it->second.is_string()) throw Error(ErrorCode::config, "'variant' must be a string");
    auto v = parse_variant(it->second.string());
    if (!v) throw Error(ErrorCode::config, "unknown variant '" + it->second.string() + "'");
    cfg.variant = *v;
  }
  auto& t = cfg.train;
  if (auto it = root.find("widths"); it != root.end()) {
    if (!it->second.is_array()) throw Error(ErrorCode::config, "'widths' must be an array of integers");
    t.widths.clear();
    for (const auto& w : it->second.array()) {
      if (!w.is_integer()) throw Error(ErrorCode::config, "'widths' must be an array of integers");
      t.widths.push_back(static_cast<int>(w.integer()));
    }
  }
  t.layers = static_cast<int>(detail::get_integer(root, "layers", static_cast<std::int64_t>(t.widths.size())));
  t.branches = static_cast<int>(detail::get_integer(root, "branches", t.branches));
  t.master_seed = static_cast<std::uint64_t>(detail::get_integer(root, "seed", static_cast<std::int64_t>(t.master_seed)));
  t.threads = static_cast<int>(detail::get_integer(root, "threads", t.threads));
  t.pinv_tol = detail::get_number(root, "pinv_tol", t.pinv_tol);

  const ClusterParams defaults;
  const double lambda = detail::get_number(*cluster, "lambda", defaults.lambda_plus());
  t.cluster = ClusterParams::make(static_cast<int>(detail::get_integer(*cluster, "n", defaults.cells())),
                                  detail::get_number(*cluster, "p", defaults.p()),
                                  detail::get_number(*cluster, "r", defaults.r()),
                                  detail::get_number(*cluster, "lambda_plus", lambda),
                                  detail::get_number(*cluster, "lambda_minus", lambda));

  t.fista.l1_weight = detail::get_number(*fista, "l1_weight", t.fista.l1_weight);
  t.fista.max_iter = static_cast<int>(detail::get_integer(*fista, "max_iter", t.fista.max_iter));
  t.fista.rel_tol = detail::get_number(*fista, "rel_tol", t.fista.rel_tol);
  if (fista->count("lipschitz")) t.fista.lipschitz = detail::get_number(*fista, "lipschitz", 0.0);

  try {
    t.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::config, e.what());
  }
  return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
  return run_config_from_table(toml::parse_file(path));
}

inline std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  std::string s = os.str();
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

// Fully resolved configuration, defaults included, in the config file syntax.
inline std::string to_toml(const RunConfig& cfg) {
  const auto& t = cfg.train;
  std::ostringstream os;
  os << "variant = " << toml::quote(variant_key(cfg.variant)) << "\n";
  os << "layers = " << t.layers << "\n";
  os << "widths = [";
  for (std::size_t i = 0; i < t.widths.size(); ++i) os << (i ? ", " : "") << t.widths[i];
  os << "]\n";
  os << "branches = " << t.branches << "\n";
  os << "seed = " << t.master_seed << "\n";
  os << "threads = " << t.threads << "\n";
  os << "pinv_tol = " << format_double(t.pinv_tol) << "\n\n";
  os << "[cluster]\n";
  os << "n = " << t.cluster.cells() << "\n";
  os << "p = " << format_double(t.cluster.p()) << "\n";
  os << "r = " << format_double(t.cluster.r()) << "\n";
  os << "lambda_plus = " << format_double(t.cluster.lambda_plus()) << "\n";
  os << "lambda_minus = " << format_double(t.cluster.lambda_minus()) << "\n\n";
  os << "[fista]\n";
  os << "l1_weight = " << format_double(t.fista.l1_weight) << "\n";
  os << "max_iter = " << t.fista.max_iter << "\n";
  os << "rel_tol = " << format_double(t.fista.rel_tol) << "\n";
  if (t.fista.lipschitz) os << "lipschitz = " << format_double(*t.fista.lipschitz) << "\n";
  return os.str();
}

inline nlohmann::json to_json(const RunConfig& cfg) {
  const auto& t = cfg.train;
  nlohmann::json j;
  j["variant"] = variant_key(cfg.variant);
  j["layers"] = t.layers;
  j["widths"] = t.widths;
  j["branches"] = t.branches;
  j["seed"] = t.master_seed;
  j["threads"] = t.threads;
  j["pinv_tol"] = t.pinv_tol;
  j["cluster"] = {{"n", t.cluster.cells()},
                  {"p", t.cluster.p()},
                  {"r", t.cluster.r()},
                  {"lambda_plus", t.cluster.lambda_plus()},
                  {"lambda_minus", t.cluster.lambda_minus()}};
  j["fista"] = {{"l1_weight", t.fista.l1_weight}, {"max_iter", t.fista.max_iter}, {"rel_tol", t.fista.rel_tol}};
  if (t.fista.lipschitz) j["fista"]["lipschitz"] = *t.fista.lipschitz;
  return j;
}

}  // namespace dnrnn
