// Command-line front end for the dpfl simulator. Everything goes through the
// C API in dpfl.h; this translation unit never touches the C++ core directly.

#include <cstdio>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dpfl.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitInconclusive = 4;

// Exactly the config file vocabulary; every key doubles as a --key override.
const std::vector<std::string>& override_keys() {
  static const std::vector<std::string> keys = {
      "algorithm", "T",         "eps_bar",     "delta_bar",   "mechanism",
      "sigma_scale", "sigma_decay", "rho.c1",  "rho.c2",      "rho.Tc",
      "rho.cap",   "prox.a",    "box.B",       "beta",        "P",
      "seed",      "log_every", "train.images", "train.labels", "agents.dir",
      "test.images", "test.labels", "bias_column", "threads"};
  return keys;
}

struct ConfigHandle {
  dpfl_config* ptr = nullptr;
  ~ConfigHandle() { dpfl_config_free(ptr); }
};

struct RunHandle {
  dpfl_run* ptr = nullptr;
  ~RunHandle() { dpfl_run_free(ptr); }
};

int exit_code_for(dpfl_status status) {
  switch (status) {
    case DPFL_OK: return kExitOk;
    case DPFL_ERROR_CONFIG: return kExitConfig;
    case DPFL_ERROR_DATA: return kExitData;
    case DPFL_ERROR_NUMERIC: return kExitNumeric;
    case DPFL_ERROR_INCONCLUSIVE: return kExitInconclusive;
    case DPFL_ERROR_IO: return kExitData;
    default: return kExitConfig;
  }
}

int fail(dpfl_status status) {
  std::fprintf(stderr, "error: %s\n", dpfl_last_error());
  return exit_code_for(status);
}

// Builds the effective config: file first (if given), then flag overrides.
int build_config(const std::string& config_path,
                 const std::map<std::string, std::string>& overrides, ConfigHandle& out) {
  out.ptr = config_path.empty() ? dpfl_config_create() : dpfl_config_load(config_path.c_str());
  if (out.ptr == nullptr) {
    std::fprintf(stderr, "error: %s\n", dpfl_last_error());
    return kExitConfig;
  }
  for (const auto& [key, value] : overrides) {
    dpfl_status status = dpfl_config_set(out.ptr, key.c_str(), value.c_str());
    if (status != DPFL_OK) return fail(status);
  }
  return kExitOk;
}

std::string stem_with_suffix(const std::string& out, const std::string& suffix) {
  size_t dot = out.find_last_of('.');
  size_t slash = out.find_last_of('/');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash))
    return out + suffix;
  return out.substr(0, dot) + suffix + out.substr(dot);
}

int cmd_run(const std::string& config_path, std::map<std::string, std::string> overrides,
            const std::string& out_path, long repeat) {
  long base_seed = 0;
  {
    ConfigHandle probe;
    int rc = build_config(config_path, overrides, probe);
    if (rc != kExitOk) return rc;
    char buffer[64];
    if (dpfl_config_get(probe.ptr, "seed", buffer, sizeof(buffer)) == DPFL_OK)
      base_seed = std::atol(buffer);
  }

  for (long r = 0; r < repeat; ++r) {
    long seed = base_seed + r;
    overrides["seed"] = std::to_string(seed);
    ConfigHandle config;
    int rc = build_config(config_path, overrides, config);
    if (rc != kExitOk) return rc;

    RunHandle run;
    dpfl_status status = dpfl_run_experiment(config.ptr, &run.ptr);
    if (status != DPFL_OK) return fail(status);

    std::string metrics_path =
        repeat == 1 ? out_path : stem_with_suffix(out_path, "_seed" + std::to_string(seed));
    std::string meta_path = metrics_path + ".meta";
    status = dpfl_run_write_metrics(run.ptr, metrics_path.c_str());
    if (status != DPFL_OK) return fail(status);
    status = dpfl_run_write_metadata(run.ptr, meta_path.c_str());
    if (status != DPFL_OK) return fail(status);

    std::printf("run seed=%ld rows=%ld final_test_error=%.6g composed_eps=%.6g wall=%.2fs\n",
                seed, dpfl_run_metric_count(run.ptr), dpfl_run_final_test_error(run.ptr),
                dpfl_run_composed_epsilon(run.ptr), dpfl_run_wall_time_sec(run.ptr));
    std::printf("  metrics: %s\n  metadata: %s\n", metrics_path.c_str(), meta_path.c_str());
  }
  return kExitOk;
}

int cmd_partition(const std::string& config_path,
                  const std::map<std::string, std::string>& overrides,
                  const std::string& out_dir) {
  ConfigHandle config;
  int rc = build_config(config_path, overrides, config);
  if (rc != kExitOk) return rc;
  long files = 0;
  dpfl_status status = dpfl_partition_to_dir(config.ptr, out_dir.c_str(), &files);
  if (status != DPFL_OK) return fail(status);
  std::printf("partition: wrote %ld agent tables to %s\n", files, out_dir.c_str());
  return kExitOk;
}

int cmd_audit(const std::string& config_path,
              const std::map<std::string, std::string>& overrides, long samples, long bins,
              double slack, double scale_factor, bool identical,
              const std::string& report_path) {
  ConfigHandle config;
  int rc = build_config(config_path, overrides, config);
  if (rc != kExitOk) return rc;

  dpfl_audit_report report;
  dpfl_status status = dpfl_audit_run(config.ptr, samples, bins, slack, scale_factor,
                                      identical ? 1 : 0, &report);
  if (status != DPFL_OK && status != DPFL_ERROR_INCONCLUSIVE) return fail(status);

  const char* verdict = report.inconclusive ? "INCONCLUSIVE"
                        : report.violation  ? "VIOLATION"
                                            : "ok";
  std::printf(
      "dp audit: eps_target=%.6g eps_measured=%.6g slack=%.6g bins=%ld samples=%ld "
      "verdict=%s\n",
      report.eps_target, report.eps_measured, report.slack, report.bins, report.samples,
      verdict);
  if (!report_path.empty()) {
    std::FILE* f = std::fopen(report_path.c_str(), "wb");
    if (f == nullptr) {
      std::fprintf(stderr, "error: cannot write %s\n", report_path.c_str());
      return kExitData;
    }
    std::fprintf(f, "eps_target,eps_measured,slack,bins,samples,violation,inconclusive\n");
    std::fprintf(f, "%.10g,%.10g,%.10g,%ld,%ld,%d,%d\n", report.eps_target,
                 report.eps_measured, report.slack, report.bins, report.samples,
                 report.violation, report.inconclusive);
    std::fclose(f);
  }
  if (report.inconclusive) return kExitInconclusive;
  return report.violation ? kExitConfig : kExitOk;
}

int cmd_sensitivity_check(long instances, long seed) {
  double max_rel_err = 0.0;
  dpfl_status status = dpfl_sensitivity_check(static_cast<unsigned long long>(seed), instances,
                                              &max_rel_err);
  if (status != DPFL_OK) return fail(status);
  std::printf("sensitivity check: %ld instances, max relative error %.3e (tolerance 1e-10)\n",
              instances, max_rel_err);
  return max_rel_err <= 1e-10 ? kExitOk : kExitConfig;
}

int cmd_compose(const std::string& config_path,
                const std::map<std::string, std::string>& overrides) {
  ConfigHandle config;
  int rc = build_config(config_path, overrides, config);
  if (rc != kExitOk) return rc;
  char eps[64] = "1";
  char iters[64] = "0";
  dpfl_config_get(config.ptr, "eps_bar", eps, sizeof(eps));
  dpfl_config_get(config.ptr, "T", iters, sizeof(iters));
  if (eps[0] == '\0' || iters[0] == '\0') {
    std::fprintf(stderr, "error: compose needs eps_bar and T\n");
    return kExitConfig;
  }
  double total = dpfl_compose_epsilon(std::atof(eps), std::atol(iters));
  std::printf("composed privacy budget: %s iterations at eps_bar=%s -> eps_total=%.10g\n",
              iters, eps, total);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dpfl: differentially private federated learning simulator"};
  app.require_subcommand(1);

  std::map<std::string, std::string> overrides;
  auto add_override_flags = [&overrides](CLI::App* cmd) {
    for (const std::string& key : override_keys()) {
      cmd->add_option_function<std::string>(
          "--" + key, [&overrides, key](const std::string& value) { overrides[key] = value; },
          "override config key '" + key + "'");
    }
  };

  std::string config_path;
  std::string out_path = "metrics.csv";
  long repeat = 1;
  CLI::App* run = app.add_subcommand("run", "run an experiment and write metrics");
  run->add_option("--config", config_path, "config file");
  run->add_option("--out", out_path, "metrics output path");
  run->add_option("--repeat", repeat, "repeat with seeds seed..seed+N-1")
      ->check(CLI::PositiveNumber);
  add_override_flags(run);

  std::string partition_dir = "agents";
  CLI::App* partition =
      app.add_subcommand("partition", "split the training set into per-agent tables");
  partition->add_option("--config", config_path, "config file");
  partition->add_option("--out-dir", partition_dir, "output directory");
  add_override_flags(partition);

  long audit_samples = 1000000;
  long audit_bins = 60;
  double audit_slack = 0.1;
  double audit_scale = 1.0;
  bool audit_identical = false;
  std::string audit_report_path;
  CLI::App* audit = app.add_subcommand("audit", "empirical per-iteration privacy audit");
  audit->add_option("--config", config_path, "config file");
  audit->add_option("--samples", audit_samples, "draws per dataset (>= 1e6)");
  audit->add_option("--bins", audit_bins, "histogram bins");
  audit->add_option("--slack", audit_slack, "violation slack on eps");
  audit->add_option("--scale-factor", audit_scale,
                    "multiplier on the calibrated noise scale (0.5 = under-scaled)");
  audit->add_flag("--identical", audit_identical, "audit a D = D' pair");
  audit->add_option("--report", audit_report_path, "write the report as CSV");
  add_override_flags(audit);

  long check_instances = 100;
  long check_seed = 7;
  CLI::App* check = app.add_subcommand(
      "sensitivity-check", "closed-form vs brute-force gradient sensitivity");
  check->add_option("--instances", check_instances, "corpus size")
      ->check(CLI::PositiveNumber);
  check->add_option("--seed", check_seed, "corpus seed");

  CLI::App* compose = app.add_subcommand("compose", "print the composed privacy budget");
  compose->add_option("--config", config_path, "config file");
  add_override_flags(compose);

  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) return cmd_run(config_path, overrides, out_path, repeat);
  if (partition->parsed()) return cmd_partition(config_path, overrides, partition_dir);
  if (audit->parsed())
    return cmd_audit(config_path, overrides, audit_samples, audit_bins, audit_slack,
                     audit_scale, audit_identical, audit_report_path);
  if (check->parsed()) return cmd_sensitivity_check(check_instances, check_seed);
  if (compose->parsed()) return cmd_compose(config_path, overrides);
  return kExitConfig;
}
