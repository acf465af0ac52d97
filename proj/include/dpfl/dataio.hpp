#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "dpfl/federation.hpp"
#include "dpfl/types.hpp"

namespace dpfl {

/// A dataset as ingested: feature rows scaled to [0,1] and class indices.
struct RawDataset {
  Matrix features;
  std::vector<int> labels;
};

/// Parses an IDX3 image stream: big-endian magic 0x00000803, then I, rows,
/// cols (32-bit each), then row-major pixel bytes. Pixels are scaled by 1/255.
Matrix parse_idx_images(std::span<const uint8_t> bytes);

/// Parses an IDX1 label stream: big-endian magic 0x00000801, then I, then I
/// label bytes.
std::vector<int> parse_idx_labels(std::span<const uint8_t> bytes);

RawDataset load_idx_dataset(const std::string& images_path, const std::string& labels_path);

/// Reads a delimited numeric table (comma and/or whitespace separated): first
/// column class index, remaining columns features. Labels are expanded to
/// one-hot rows against num_classes. An empty file yields an empty block.
AgentData load_agent_table(const std::string& path, long num_classes);

/// Writes one agent block back out in load_agent_table's format.
void write_agent_table(const AgentData& data, const std::string& path);

void write_metrics(std::span<const MetricsRecord> records, const std::string& path);
std::vector<MetricsRecord> read_metrics(const std::string& path);

/// Flat `key = value` configuration with `#` comments. Keys are fixed;
/// unknown keys are rejected at parse time.
using ConfigMap = std::map<std::string, std::string>;

ConfigMap default_config();
ConfigMap parse_config_text(const std::string& text);
ConfigMap load_config_file(const std::string& path);

/// Sets one key, validating that the key exists in the schema.
void apply_override(ConfigMap& config, const std::string& key, const std::string& value);

/// A fully validated configuration: the numeric run parameters plus the data
/// paths. `resolved` holds every key with defaults filled in.
struct LoadedConfig {
  RunConfig run;
  std::string train_images;
  std::string train_labels;
  std::string agents_dir;
  std::string test_images;
  std::string test_labels;
  bool bias_column = false;
  ConfigMap resolved;
};

/// Validates values and builds the run configuration. Type mismatches and
/// out-of-range values raise a validation_error naming the key.
LoadedConfig build_config(const ConfigMap& config);

inline LoadedConfig load_config(const std::string& path) {
  return build_config(load_config_file(path));
}

/// Training and test blocks assembled from the configured sources, with
/// run.dims (J, K, I, P) filled in. Homogeneous mode partitions the IDX
/// training set across P agents; heterogeneous mode loads one table per file
/// from agents_dir (sorted by filename). The optional all-ones bias column is
/// appended here.
struct ExperimentData {
  std::vector<AgentData> agents;
  AgentData test;
};

ExperimentData load_experiment_data(LoadedConfig& config);

/// Writes the resolved configuration as a reloadable config file, with the
/// composed privacy budget and wall time recorded as comments.
void write_run_metadata(const LoadedConfig& config, double composed_epsilon,
                        double wall_time_sec, const std::string& path);

}  // namespace dpfl
