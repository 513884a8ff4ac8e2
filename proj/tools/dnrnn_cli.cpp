// dnrnn: train, evaluate and benchmark the deep cluster-network classifiers,
// sweep the cluster activation, and run the invariant suite.
//
// Exit status: 0 on success, 1 on a runtime failure, 2 on a usage or
// configuration error. Data goes to stdout, diagnostics to stderr.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dnrnn/config.hpp"
#include "dnrnn/manifest.hpp"
#include "dnrnn/model_io.hpp"
#include "dnrnn/report.hpp"
#include "dnrnn/validation.hpp"

namespace fs = std::filesystem;
using namespace dnrnn;

namespace {

constexpr int kUsageError = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Overrides {
  std::string config;
  std::string variant;
  std::int64_t seed = -1;
  int threads = 0;
};

RunConfig resolve_config(const Overrides& o) {
  RunConfig cfg = o.config.empty() ? run_config_from_table({}) : load_run_config(o.config);
  if (!o.variant.empty()) {
    auto v = parse_variant(o.variant);
    if (!v) throw UsageError("unknown variant '" + o.variant + "' (expected rnn_mla, mcrnn_mla, mcrnn_mla1 or mcrnn_mla2)");
    cfg.variant = *v;
  }
  if (o.seed >= 0) cfg.train.master_seed = static_cast<std::uint64_t>(o.seed);
  if (o.threads > 0) cfg.train.threads = o.threads;
  cfg.train.validate();
  return cfg;
}

std::string dataset_id(const DatasetManifest& m, const std::string& path) {
  return m.name.empty() ? fs::path(path).stem().string() : m.name;
}

std::string prep_path(const std::string& model) { return model + ".prep"; }
std::string config_path(const std::string& model) { return model + ".toml"; }

// The training config saved next to a model, when present.
RunConfig config_for_model(const std::string& model_path, const ModelArtifact& model) {
  if (fs::exists(config_path(model_path))) return load_run_config(config_path(model_path));
  RunConfig cfg;
  cfg.variant = model.variant;
  cfg.train.cluster = model.cluster;
  cfg.train.branches = model.branches;
  cfg.train.widths.clear();
  for (const auto& layer : model.stacks.front()) cfg.train.widths.push_back(static_cast<int>(layer.width()));
  cfg.train.widths.push_back(static_cast<int>(model.random_layer ? model.random_layer->cols() : cfg.train.widths.back()));
  cfg.train.layers = static_cast<int>(cfg.train.widths.size());
  return cfg;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::io, "cannot open " + path + " for writing");
  out << text;
}

void print_report(const RunReport& r) {
  std::cout << to_text(r) << to_json(r).dump() << "\n";
}

int cmd_train(const Overrides& o, const std::string& manifest_path, const std::string& out) {
  const auto cfg = resolve_config(o);
  const auto manifest = read_manifest(manifest_path);
  const auto data = prepare(manifest);
  double seconds = 0.0;
  ModelArtifact model;
  try {
    model = timed([&] { return fit(cfg.variant, data.train, cfg.train); }, seconds);
  } catch (const Error& e) {
    throw Error(e.code(), std::string("model: ") + e.what());
  }
  save_model(model, out);
  save_preprocessor(data.preprocessor, prep_path(out));
  write_text(config_path(out), to_toml(cfg));
  std::cerr << "wrote " << out << ", " << prep_path(out) << ", " << config_path(out) << "\n";
  print_report(make_report(cfg, dataset_id(manifest, manifest_path), predict(model, data.test), data.test.labels,
                           data.train.class_names, seconds));
  return 0;
}

struct LoadedModel {
  ModelArtifact model;
  Preprocessor preprocessor;
};

LoadedModel load_with_sidecar(const std::string& model_path) {
  LoadedModel m{load_model(model_path), {}};
  if (!fs::exists(prep_path(model_path)))
    throw Error(ErrorCode::io, "preprocessing sidecar " + prep_path(model_path) + " is missing");
  m.preprocessor = load_preprocessor(prep_path(model_path));
  return m;
}

int cmd_predict(const std::string& model_path, const std::string& manifest_path, const std::string& out, int threads) {
  const auto loaded = load_with_sidecar(model_path);
  const auto data = loaded.preprocessor.apply(load_raw(read_manifest(manifest_path)));
  const auto labels = argmax_rows(forward_scores(loaded.model, data, std::max(threads, 1)));
  std::ostringstream os;
  os << "row,class_id,class\n";
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto k = static_cast<std::size_t>(labels[i]);
    os << i << "," << labels[i] << "," << csv_field(k < data.class_names.size() ? data.class_names[k] : std::to_string(k))
       << "\n";
  }
  if (out.empty())
    std::cout << os.str();
  else
    write_text(out, os.str());
  return 0;
}

int cmd_eval(const std::string& model_path, const std::string& manifest_path, bool all_rows, int threads) {
  const auto loaded = load_with_sidecar(model_path);
  const auto manifest = read_manifest(manifest_path);
  const auto raw = load_raw(manifest);
  const auto rows = all_rows ? raw : split_train_test(raw, manifest.split, manifest.seed).test;
  const auto data = loaded.preprocessor.apply(rows);
  const auto predicted = argmax_rows(forward_scores(loaded.model, data, std::max(threads, 1)));
  print_report(make_report(config_for_model(model_path, loaded.model), dataset_id(manifest, manifest_path), predicted,
                           data.labels, data.class_names, 0.0));
  return 0;
}

int cmd_bench(const Overrides& o, const std::vector<std::string>& manifests, const std::string& out) {
  const auto base = resolve_config(o);
  BenchTable table;
  std::vector<std::optional<PreparedData>> prepared;
  std::vector<std::string> load_errors;
  for (const auto& path : manifests) {
    try {
      const auto m = read_manifest(path);
      table.datasets.push_back(dataset_id(m, path));
      prepared.emplace_back(prepare(m));
      load_errors.emplace_back();
    } catch (const Error& e) {
      if (table.datasets.size() < prepared.size() + 1) table.datasets.push_back(fs::path(path).stem().string());
      prepared.emplace_back();
      load_errors.emplace_back(e.what());
    }
  }
  table.resize();
  for (std::size_t d = 0; d < prepared.size(); ++d) {
    for (std::size_t v = 0; v < table.variants.size(); ++v) {
      auto& cell = table.cells[v][d];
      if (!prepared[d]) {
        cell.error = load_errors[d];
        continue;
      }
      RunConfig cfg = base;
      cfg.variant = table.variants[v];
      try {
        double seconds = 0.0;
        const auto model = timed([&] { return fit(cfg.variant, prepared[d]->train, cfg.train); }, seconds);
        const auto r = make_report(cfg, table.datasets[d], predict(model, prepared[d]->test), prepared[d]->test.labels,
                                   prepared[d]->train.class_names, seconds);
        cell.accuracy = r.accuracy;
        cell.seconds = r.train_seconds;
        std::cerr << variant_label(cfg.variant) << " on " << table.datasets[d] << ": " << format_fixed(r.accuracy, 2)
                  << "% in " << format_fixed(seconds, 2) << " s\n";
      } catch (const std::exception& e) {
        cell.error = e.what();
        std::cerr << variant_label(cfg.variant) << " on " << table.datasets[d] << " failed: " << e.what() << "\n";
      }
    }
  }
  std::cout << bench_text(table);
  std::cout << "config: " << to_json(base).dump() << "\n";
  if (out.empty())
    std::cout << "\n" << bench_csv(table);
  else
    write_text(out, bench_csv(table));
  return 0;
}

struct SimulateArgs {
  std::string config;
  std::optional<int> n;
  std::optional<double> p, r, lambda, lambda_plus, lambda_minus;
  std::vector<double> xs;
  double horizon = 1e6;
  std::int64_t seed = 1;
  std::string out;
};

int cmd_simulate(const SimulateArgs& a) {
  ClusterParams base = a.config.empty() ? ClusterParams{} : load_run_config(a.config).train.cluster;
  const double lambda = a.lambda.value_or(base.lambda_plus());
  ClusterParams params;
  try {
    params = ClusterParams::make(a.n.value_or(base.cells()), a.p.value_or(base.p()), a.r.value_or(base.r()),
                                 a.lambda_plus.value_or(a.lambda ? lambda : base.lambda_plus()),
                                 a.lambda_minus.value_or(a.lambda ? lambda : base.lambda_minus()));
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  std::vector<double> xs = a.xs;
  if (xs.empty())
    for (int i = 0; i <= 10; ++i) xs.push_back(i / 10.0);

  std::ostringstream os;
  os.precision(17);
  os << "x,zeta,fixed_point_q,q_hat,std_err\n";
  std::uint64_t seed = static_cast<std::uint64_t>(a.seed);
  for (double x : xs) {
    const auto z = zeta_eval(params, x);
    const double fp = fixed_point_q(params, x);
    const auto sim = simulate_cluster(params, x, a.horizon, seed++);
    if (z.saturated) std::cerr << "x=" << x << ": zeta saturated at 1\n";
    if (sim.insufficient_statistics) std::cerr << "x=" << x << ": fewer than 100 events, q_hat is unreliable\n";
    os << x << "," << z.q << "," << fp << "," << sim.q_hat << "," << sim.std_err << "\n";
  }
  if (a.out.empty())
    std::cout << os.str();
  else
    write_text(a.out, os.str());
  return 0;
}

int cmd_validate(const std::vector<int>& only, const std::string& dsa) {
  std::vector<validation::CheckResult> results;
  for (int id = 1; id <= 10; ++id) {
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    auto r = validation::run_all({id}, dsa);
    std::cout << r.front().line() << std::endl;
    results.push_back(std::move(r.front()));
  }
  const bool ok = validation::all_gating_passed(results);
  std::cerr << (ok ? "all checks passed\n" : "some checks failed\n");
  return ok ? 0 : 1;
}

int cmd_gen_synth(const SynthSpec& spec, const std::string& dir, double split) {
  fs::create_directories(dir);
  const auto data = gen_synth_blobs(spec);
  std::ostringstream manifest;
  manifest << "name = \"synthetic\"\n"
           << "labels = \"labels.csv\"\n"
           << "split = " << format_double(split) << "\n"
           << "seed = " << spec.seed << "\n"
           << "preprocess = \"unit\"\n";
  for (std::size_t c = 0; c < data.channel_count(); ++c) {
    const auto file = data.channel_names[c] + ".csv";
    save_csv_matrix(data.channels[c], (fs::path(dir) / file).string());
    manifest << "\n[[channel]]\nname = " << toml::quote(data.channel_names[c]) << "\npath = " << toml::quote(file)
             << "\nrows = " << data.rows() << "\ncols = " << data.channels[c].cols() << "\n";
  }
  std::ostringstream labels;
  labels << "label\n";
  for (int id : class_ids(data.labels)) labels << id << "\n";
  write_text((fs::path(dir) / "labels.csv").string(), labels.str());
  write_text((fs::path(dir) / "manifest.toml").string(), manifest.str());
  std::cout << (fs::path(dir) / "manifest.toml").string() << "\n";
  return 0;
}

void add_overrides(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "run configuration (TOML)")->check(CLI::ExistingFile);
  cmd->add_option("--variant", o.variant, "rnn_mla | mcrnn_mla | mcrnn_mla1 | mcrnn_mla2 (overrides config)");
  cmd->add_option("--seed", o.seed, "master seed (overrides config)")->check(CLI::NonNegativeNumber);
  cmd->add_option("--threads", o.threads, "worker threads (overrides config)")->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deep cluster-network classifiers built from random neural network nuclei."};
  app.require_subcommand(1);

  Overrides train_o, bench_o;
  std::string manifest, out, model;
  std::vector<std::string> manifests;
  bool all_rows = false;
  int threads = 1;

  auto* train = app.add_subcommand("train", "fit a model on a manifest's training split and report test accuracy");
  add_overrides(train, train_o);
  train->add_option("--manifest", manifest, "dataset manifest")->required()->check(CLI::ExistingFile);
  train->add_option("--out", out, "model file to write")->required();

  auto* pred = app.add_subcommand("predict", "class predictions for every row of a manifest");
  pred->add_option("--model", model, "model file")->required()->check(CLI::ExistingFile);
  pred->add_option("--manifest", manifest, "dataset manifest")->required()->check(CLI::ExistingFile);
  pred->add_option("--out", out, "CSV file (default stdout)");
  pred->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);

  auto* eval = app.add_subcommand("eval", "accuracy and confusion counts on a manifest's test split");
  eval->add_option("--model", model, "model file")->required()->check(CLI::ExistingFile);
  eval->add_option("--manifest", manifest, "dataset manifest")->required()->check(CLI::ExistingFile);
  eval->add_flag("--all", all_rows, "evaluate every row instead of the test split");
  eval->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);

  auto* bench = app.add_subcommand("bench", "all four variants on each dataset");
  add_overrides(bench, bench_o);
  bench->add_option("--manifest", manifests, "dataset manifest (repeatable)")->required();
  bench->add_option("--out", out, "CSV file (default: appended to stdout)");

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "closed form, fixed point and Monte Carlo activation per x");
  simulate->add_option("--config", sim.config, "take cluster parameters from a run configuration")
      ->check(CLI::ExistingFile);
  simulate->add_option("--n", sim.n, "cells per cluster");
  simulate->add_option("--p", sim.p, "cascade continuation probability");
  simulate->add_option("--r", sim.r, "firing rate");
  simulate->add_option("--lambda", sim.lambda, "external excitatory and inhibitory rate");
  simulate->add_option("--lambda-plus", sim.lambda_plus, "external excitatory rate");
  simulate->add_option("--lambda-minus", sim.lambda_minus, "external inhibitory rate");
  simulate->add_option("--x", sim.xs, "inhibitory inputs (comma separated; default 0,0.1,...,1)")->delimiter(',');
  simulate->add_option("--horizon", sim.horizon, "simulated time per x")->check(CLI::PositiveNumber);
  simulate->add_option("--seed", sim.seed, "first simulation seed")->check(CLI::NonNegativeNumber);
  simulate->add_option("--out", sim.out, "CSV file (default stdout)");

  std::vector<int> only;
  std::string dsa = validation::dsa_manifest_from_env();
  auto* validate = app.add_subcommand("validate", "run the invariant suite");
  validate->add_option("--only", only, "criterion numbers to run")->delimiter(',');
  validate->add_option("--dsa-manifest", dsa, "DSA manifest for the optional reproduction check");

  SynthSpec spec;
  double split = 2.0 / 3.0;
  auto* synth = app.add_subcommand("gen-synth", "write a synthetic Gaussian-blob dataset and its manifest");
  synth->add_option("--out", out, "output directory")->required();
  synth->add_option("--rows", spec.rows, "instances")->check(CLI::PositiveNumber);
  synth->add_option("--channels", spec.channels, "channels")->check(CLI::PositiveNumber);
  synth->add_option("--classes", spec.classes, "classes")->check(CLI::PositiveNumber);
  synth->add_option("--dims", spec.dims, "features per channel")->check(CLI::PositiveNumber);
  synth->add_option("--separation", spec.separation, "distance between class means in noise units")
      ->check(CLI::NonNegativeNumber);
  synth->add_option("--seed", spec.seed, "generator seed");
  synth->add_option("--split", split, "train fraction written to the manifest")->check(CLI::Range(0.0, 1.0));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }

  try {
    if (*train) return cmd_train(train_o, manifest, out);
    if (*pred) return cmd_predict(model, manifest, out, threads);
    if (*eval) return cmd_eval(model, manifest, all_rows, threads);
    if (*bench) return cmd_bench(bench_o, manifests, out);
    if (*simulate) return cmd_simulate(sim);
    if (*validate) return cmd_validate(only, dsa);
    if (*synth) return cmd_gen_synth(spec, out, split);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsageError;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::config ? kUsageError : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
