// Fits each variant on a small synthetic dataset and prints test accuracy.

#include <iostream>

#include "dnrnn/data.hpp"
#include "dnrnn/model.hpp"
#include "dnrnn/report.hpp"

int main() {
  using namespace dnrnn;

  SynthSpec spec;
  spec.rows = 900;
  spec.channels = 3;
  spec.classes = 3;
  spec.dims = 16;
  const auto split = split_train_test(gen_synth_blobs(spec), 2.0 / 3.0, 1);

  RunConfig cfg;
  cfg.train.widths = {40, 60};
  cfg.train.branches = 2;

  for (Variant v : bench_variants()) {
    cfg.variant = v;
    double seconds = 0.0;
    const auto model = timed([&] { return fit(v, split.train, cfg.train); }, seconds);
    const auto report = make_report(cfg, "quickstart", predict(model, split.test), split.test.labels, {}, seconds);
    std::cout << variant_label(v) << ": " << format_fixed(report.accuracy, 2) << "% in "
              << format_fixed(seconds, 3) << " s\n";
  }

  // The cluster activation itself.
  const ClusterParams cluster;
  for (double x : {0.0, 0.1, 0.5, 1.0}) std::cout << "zeta(" << x << ") = " << zeta(cluster, x) << "\n";
}
