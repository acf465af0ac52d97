#include "dpfl.h"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>

#include "dpfl/dataio.hpp"
#include "dpfl/federation.hpp"
#include "dpfl/validation.hpp"

namespace {

thread_local std::string g_last_error;

void set_error(const std::string& message) { g_last_error = message; }

dpfl_status status_from_exception() {
  try {
    throw;
  } catch (const dpfl::numeric_error& e) {
    set_error(e.what());
    return DPFL_ERROR_NUMERIC;
  } catch (const dpfl::parse_error& e) {
    set_error(e.what());
    return DPFL_ERROR_DATA;
  } catch (const dpfl::io_error& e) {
    set_error(e.what());
    return DPFL_ERROR_IO;
  } catch (const dpfl::validation_error& e) {
    set_error(e.what());
    return DPFL_ERROR_CONFIG;
  } catch (const std::exception& e) {
    set_error(e.what());
    return DPFL_ERROR_INVALID;
  }
}

}  // namespace

struct dpfl_config {
  dpfl::ConfigMap map = dpfl::default_config();
};

struct dpfl_run {
  dpfl::LoadedConfig config;
  dpfl::RunResult result;
  double composed_epsilon = 0.0;
  double wall_time_sec = 0.0;
};

extern "C" {

const char* dpfl_version(void) { return "1.0.0"; }

const char* dpfl_last_error(void) { return g_last_error.c_str(); }

dpfl_config* dpfl_config_create(void) { return new dpfl_config(); }

dpfl_config* dpfl_config_load(const char* path) {
  if (path == nullptr) {
    set_error("dpfl_config_load: null path");
    return nullptr;
  }
  try {
    auto* config = new dpfl_config();
    config->map = dpfl::load_config_file(path);
    return config;
  } catch (...) {
    status_from_exception();
    return nullptr;
  }
}

dpfl_status dpfl_config_set(dpfl_config* config, const char* key, const char* value) {
  if (config == nullptr || key == nullptr || value == nullptr) {
    set_error("dpfl_config_set: null argument");
    return DPFL_ERROR_INVALID;
  }
  try {
    dpfl::apply_override(config->map, key, value);
    return DPFL_OK;
  } catch (...) {
    return status_from_exception();
  }
}

dpfl_status dpfl_config_get(const dpfl_config* config, const char* key, char* buffer,
                            size_t buffer_size) {
  if (config == nullptr || key == nullptr || buffer == nullptr || buffer_size == 0) {
    set_error("dpfl_config_get: null argument");
    return DPFL_ERROR_INVALID;
  }
  auto it = config->map.find(key);
  if (it == config->map.end()) {
    set_error(std::string("unknown config key '") + key + "'");
    return DPFL_ERROR_CONFIG;
  }
  std::snprintf(buffer, buffer_size, "%s", it->second.c_str());
  return DPFL_OK;
}

void dpfl_config_free(dpfl_config* config) { delete config; }

dpfl_status dpfl_run_experiment(const dpfl_config* config, dpfl_run** out_run) {
  if (config == nullptr || out_run == nullptr) {
    set_error("dpfl_run_experiment: null argument");
    return DPFL_ERROR_INVALID;
  }
  *out_run = nullptr;
  try {
    auto run = std::make_unique<dpfl_run>();
    run->config = dpfl::build_config(config->map);
    dpfl::ExperimentData data = dpfl::load_experiment_data(run->config);

    auto start = std::chrono::steady_clock::now();
    run->result = dpfl::run_experiment(run->config.run, data.agents,
                                       data.test.rows() > 0 ? &data.test : nullptr);
    auto stop = std::chrono::steady_clock::now();
    run->wall_time_sec = std::chrono::duration<double>(stop - start).count();
    run->composed_epsilon = dpfl::compose_epsilon(run->config.run.privacy.eps_bar,
                                                  run->config.run.iterations);
    *out_run = run.release();
    return DPFL_OK;
  } catch (...) {
    return status_from_exception();
  }
}

long dpfl_run_metric_count(const dpfl_run* run) {
  return run == nullptr ? 0 : static_cast<long>(run->result.metrics.size());
}

dpfl_status dpfl_run_metric_row(const dpfl_run* run, long index, dpfl_metrics_row* out_row) {
  if (run == nullptr || out_row == nullptr) {
    set_error("dpfl_run_metric_row: null argument");
    return DPFL_ERROR_INVALID;
  }
  if (index < 0 || index >= static_cast<long>(run->result.metrics.size())) {
    set_error("dpfl_run_metric_row: index out of range");
    return DPFL_ERROR_INVALID;
  }
  const dpfl::MetricsRecord& r = run->result.metrics[static_cast<size_t>(index)];
  *out_row = dpfl_metrics_row{r.t,         r.test_error, r.avg_noise_mag,
                              r.consensus_violation, r.objective,  r.rho_t,
                              r.prox_t};
  return DPFL_OK;
}

double dpfl_run_final_test_error(const dpfl_run* run) {
  if (run == nullptr || run->result.metrics.empty()) return -1.0;
  return run->result.metrics.back().test_error;
}

double dpfl_run_composed_epsilon(const dpfl_run* run) {
  return run == nullptr ? 0.0 : run->composed_epsilon;
}

double dpfl_run_wall_time_sec(const dpfl_run* run) {
  return run == nullptr ? 0.0 : run->wall_time_sec;
}

dpfl_status dpfl_run_write_metrics(const dpfl_run* run, const char* path) {
  if (run == nullptr || path == nullptr) {
    set_error("dpfl_run_write_metrics: null argument");
    return DPFL_ERROR_INVALID;
  }
  try {
    dpfl::write_metrics(run->result.metrics, path);
    return DPFL_OK;
  } catch (...) {
    return status_from_exception();
  }
}

dpfl_status dpfl_run_write_metadata(const dpfl_run* run, const char* path) {
  if (run == nullptr || path == nullptr) {
    set_error("dpfl_run_write_metadata: null argument");
    return DPFL_ERROR_INVALID;
  }
  try {
    dpfl::write_run_metadata(run->config, run->composed_epsilon, run->wall_time_sec, path);
    return DPFL_OK;
  } catch (...) {
    return status_from_exception();
  }
}

void dpfl_run_free(dpfl_run* run) { delete run; }

dpfl_status dpfl_partition_to_dir(const dpfl_config* config, const char* out_dir,
                                  long* files_written) {
  if (config == nullptr || out_dir == nullptr) {
    set_error("dpfl_partition_to_dir: null argument");
    return DPFL_ERROR_INVALID;
  }
  try {
    dpfl::LoadedConfig loaded = dpfl::build_config(config->map);
    if (loaded.train_images.empty() || loaded.train_labels.empty())
      throw dpfl::validation_error("partition needs train.images and train.labels");
    dpfl::ExperimentData data = dpfl::load_experiment_data(loaded);
    std::filesystem::create_directories(out_dir);
    for (size_t p = 0; p < data.agents.size(); ++p) {
      char name[64];
      std::snprintf(name, sizeof(name), "agent_%04zu.csv", p);
      dpfl::write_agent_table(data.agents[p],
                              (std::filesystem::path(out_dir) / name).string());
    }
    if (files_written != nullptr) *files_written = static_cast<long>(data.agents.size());
    return DPFL_OK;
  } catch (...) {
    return status_from_exception();
  }
}

dpfl_status dpfl_audit_run(const dpfl_config* config, long samples, long bins, double slack,
                           double noise_scale_factor, int identical_datasets,
                           dpfl_audit_report* out_report) {
  if (config == nullptr || out_report == nullptr) {
    set_error("dpfl_audit_run: null argument");
    return DPFL_ERROR_INVALID;
  }
  try {
    dpfl::LoadedConfig loaded = dpfl::build_config(config->map);
    bool trust = dpfl::algorithm_uses_trust_region(loaded.run.algorithm);
    dpfl::DpAuditInstance instance = dpfl::make_audit_instance(loaded.run.seed, trust);
    if (identical_datasets != 0) instance.d_prime = instance.d;

    dpfl::DpAuditConfig audit;
    audit.eps_target = loaded.run.privacy.eps_bar;
    audit.samples = samples;
    audit.bins = bins;
    audit.slack = slack;
    audit.noise_scale_factor = noise_scale_factor;
    audit.seed = loaded.run.seed + 1;

    dpfl::DpAuditReport report = dpfl::empirical_dp_audit(instance, audit);
    *out_report = dpfl_audit_report{report.eps_target,
                                    report.eps_measured,
                                    report.slack,
                                    report.bins,
                                    report.samples,
                                    report.violation ? 1 : 0,
                                    report.inconclusive ? 1 : 0};
    return report.inconclusive ? DPFL_ERROR_INCONCLUSIVE : DPFL_OK;
  } catch (...) {
    return status_from_exception();
  }
}

dpfl_status dpfl_sensitivity_check(unsigned long long seed, long instances,
                                   double* out_max_rel_err) {
  if (out_max_rel_err == nullptr || instances < 1) {
    set_error("dpfl_sensitivity_check: bad arguments");
    return DPFL_ERROR_INVALID;
  }
  try {
    *out_max_rel_err = dpfl::sensitivity_check_max_rel_err(seed, instances);
    return DPFL_OK;
  } catch (...) {
    return status_from_exception();
  }
}

double dpfl_compose_epsilon(double eps_bar, long iterations) {
  if (iterations < 0) return -1.0;
  return dpfl::compose_epsilon(eps_bar, iterations);
}

}  // extern "C"
