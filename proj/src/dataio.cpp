#include "dpfl/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace dpfl {

namespace {

constexpr uint32_t kIdxImagesMagic = 0x00000803;
constexpr uint32_t kIdxLabelsMagic = 0x00000801;

uint32_t read_be32(std::span<const uint8_t> bytes, size_t offset) {
  if (offset + 4 > bytes.size())
    throw parse_error("IDX stream truncated in header at offset " + std::to_string(offset));
  return (static_cast<uint32_t>(bytes[offset]) << 24) |
         (static_cast<uint32_t>(bytes[offset + 1]) << 16) |
         (static_cast<uint32_t>(bytes[offset + 2]) << 8) |
         static_cast<uint32_t>(bytes[offset + 3]);
}

std::vector<uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  return bytes;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

const std::set<std::string>& config_keys() {
  static const std::set<std::string> keys = {
      "algorithm", "T",         "eps_bar",     "delta_bar",   "mechanism",
      "sigma_scale", "sigma_decay", "rho.c1",  "rho.c2",      "rho.Tc",
      "rho.cap",   "prox.a",    "box.B",       "beta",        "P",
      "seed",      "log_every", "train.images", "train.labels", "agents.dir",
      "test.images", "test.labels", "bias_column", "threads"};
  return keys;
}

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_double_value(const std::string& key, const std::string& value) {
  if (value == "inf") return std::numeric_limits<double>::infinity();
  try {
    size_t pos = 0;
    double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw validation_error("config key '" + key + "': '" + value + "' is not a number");
  }
}

long parse_long_value(const std::string& key, const std::string& value) {
  try {
    size_t pos = 0;
    long v = std::stol(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw validation_error("config key '" + key + "': '" + value + "' is not an integer");
  }
}

bool parse_bool_value(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw validation_error("config key '" + key + "': '" + value + "' is not a boolean");
}

Algorithm parse_algorithm(const std::string& value) {
  if (value == "ObjP") return Algorithm::ObjP;
  if (value == "ObjT") return Algorithm::ObjT;
  if (value == "OutP") return Algorithm::OutP;
  if (value == "NonPrivate-Prox") return Algorithm::NonPrivateProx;
  if (value == "NonPrivate-Trust") return Algorithm::NonPrivateTrust;
  throw validation_error("config key 'algorithm': unknown algorithm '" + value + "'");
}

Mechanism parse_mechanism(const std::string& value) {
  if (value == "LaplaceObjective") return Mechanism::LaplaceObjective;
  if (value == "GaussianOutput") return Mechanism::GaussianOutput;
  if (value == "None") return Mechanism::None;
  throw validation_error("config key 'mechanism': unknown mechanism '" + value + "'");
}

void append_bias_column(Matrix& features) {
  Matrix wide(features.rows(), features.cols() + 1);
  for (long i = 0; i < features.rows(); ++i) {
    for (long j = 0; j < features.cols(); ++j) wide(i, j) = features(i, j);
    wide(i, features.cols()) = 1.0;
  }
  features = std::move(wide);
}

}  // namespace

Matrix parse_idx_images(std::span<const uint8_t> bytes) {
  uint32_t magic = read_be32(bytes, 0);
  if (magic != kIdxImagesMagic) {
    std::ostringstream msg;
    msg << "IDX image magic mismatch at offset 0: expected 0x" << std::hex << kIdxImagesMagic
        << ", got 0x" << magic;
    throw parse_error(msg.str());
  }
  uint64_t count = read_be32(bytes, 4);
  uint64_t rows = read_be32(bytes, 8);
  uint64_t cols = read_be32(bytes, 12);
  uint64_t pixels = count * rows * cols;
  if (rows * cols > (1ULL << 24) || pixels > (1ULL << 40))
    throw parse_error("IDX image dimensions overflow sane limits");
  if (bytes.size() != 16 + pixels)
    throw parse_error("IDX image payload truncated: expected " + std::to_string(16 + pixels) +
                      " bytes, got " + std::to_string(bytes.size()));

  Matrix features(static_cast<long>(count), static_cast<long>(rows * cols));
  const uint8_t* src = bytes.data() + 16;
  double* dst = features.data();
  for (uint64_t i = 0; i < pixels; ++i) dst[i] = static_cast<double>(src[i]) / 255.0;
  return features;
}

std::vector<int> parse_idx_labels(std::span<const uint8_t> bytes) {
  uint32_t magic = read_be32(bytes, 0);
  if (magic != kIdxLabelsMagic) {
    std::ostringstream msg;
    msg << "IDX label magic mismatch at offset 0: expected 0x" << std::hex << kIdxLabelsMagic
        << ", got 0x" << magic;
    throw parse_error(msg.str());
  }
  uint64_t count = read_be32(bytes, 4);
  if (bytes.size() != 8 + count)
    throw parse_error("IDX label payload truncated: expected " + std::to_string(8 + count) +
                      " bytes, got " + std::to_string(bytes.size()));
  std::vector<int> labels(count);
  for (uint64_t i = 0; i < count; ++i) labels[i] = static_cast<int>(bytes[8 + i]);
  return labels;
}

RawDataset load_idx_dataset(const std::string& images_path, const std::string& labels_path) {
  RawDataset ds;
  ds.features = parse_idx_images(read_file_bytes(images_path));
  ds.labels = parse_idx_labels(read_file_bytes(labels_path));
  if (ds.features.rows() != static_cast<long>(ds.labels.size()))
    throw validation_error("IDX pair mismatch: " + std::to_string(ds.features.rows()) +
                           " images vs " + std::to_string(ds.labels.size()) + " labels");
  return ds;
}

AgentData load_agent_table(const std::string& path, long num_classes) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open " + path);

  std::vector<std::vector<double>> rows;
  std::string line;
  long line_no = 0;
  long width = -1;
  while (std::getline(in, line)) {
    ++line_no;
    std::string body = trim(line);
    if (body.empty() || body[0] == '#') continue;
    std::replace(body.begin(), body.end(), ',', ' ');
    std::istringstream cells(body);
    std::vector<double> row;
    std::string cell;
    while (cells >> cell) {
      try {
        size_t pos = 0;
        row.push_back(std::stod(cell, &pos));
        if (pos != cell.size()) throw std::invalid_argument("trailing characters");
      } catch (const std::exception&) {
        throw parse_error(path + ":" + std::to_string(line_no) + ": non-numeric cell '" +
                          cell + "'");
      }
    }
    if (row.size() < 2)
      throw parse_error(path + ":" + std::to_string(line_no) +
                        ": row needs a class index and at least one feature");
    if (width < 0) width = static_cast<long>(row.size());
    if (static_cast<long>(row.size()) != width)
      throw parse_error(path + ":" + std::to_string(line_no) + ": ragged row (" +
                        std::to_string(row.size()) + " cells, expected " +
                        std::to_string(width) + ")");
    rows.push_back(std::move(row));
  }

  if (rows.empty()) return AgentData{Matrix(0, 0), Matrix(0, num_classes)};

  Matrix features(static_cast<long>(rows.size()), width - 1);
  std::vector<int> labels(rows.size());
  for (size_t i = 0; i < rows.size(); ++i) {
    double raw = rows[i][0];
    if (raw < 0 || std::floor(raw) != raw)
      throw parse_error(path + ":" + std::to_string(i + 1) + ": class index " +
                        std::to_string(raw) + " is not a nonnegative integer");
    labels[i] = static_cast<int>(raw);
    for (long j = 0; j + 1 < width; ++j)
      features(static_cast<long>(i), j) = rows[i][static_cast<size_t>(j + 1)];
  }
  return make_agent_data(features, labels, num_classes);
}

void write_agent_table(const AgentData& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write " + path);
  for (long i = 0; i < data.rows(); ++i) {
    long cls = 0;
    for (long k = 1; k < data.labels.cols(); ++k)
      if (data.labels(i, k) > data.labels(i, cls)) cls = k;
    out << cls;
    for (long j = 0; j < data.features.cols(); ++j)
      out << ',' << format_double(data.features(i, j));
    out << '\n';
  }
  if (!out) throw io_error("write failed for " + path);
}

void write_metrics(std::span<const MetricsRecord> records, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write " + path);
  out << "t,test_error,avg_noise_mag,consensus_violation,objective,rho_t,prox_t\n";
  for (const MetricsRecord& r : records) {
    out << r.t << ',' << format_double(r.test_error) << ',' << format_double(r.avg_noise_mag)
        << ',' << format_double(r.consensus_violation) << ',' << format_double(r.objective)
        << ',' << format_double(r.rho_t) << ',' << format_double(r.prox_t) << '\n';
  }
  if (!out) throw io_error("write failed for " + path);
}

std::vector<MetricsRecord> read_metrics(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw parse_error(path + ": empty metrics file");
  if (trim(line) != "t,test_error,avg_noise_mag,consensus_violation,objective,rho_t,prox_t")
    throw parse_error(path + ": unexpected metrics header");

  std::vector<MetricsRecord> records;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream cells(line);
    MetricsRecord r;
    if (!(cells >> r.t >> r.test_error >> r.avg_noise_mag >> r.consensus_violation >>
          r.objective >> r.rho_t >> r.prox_t))
      throw parse_error(path + ":" + std::to_string(line_no) + ": malformed metrics row");
    records.push_back(r);
  }
  return records;
}

ConfigMap default_config() {
  return ConfigMap{
      {"algorithm", ""},     {"T", ""},
      {"eps_bar", ""},       {"delta_bar", "1e-6"},
      {"mechanism", ""},     {"sigma_scale", "1"},
      {"sigma_decay", "0.25"}, {"rho.c1", "2"},
      {"rho.c2", "5"},       {"rho.Tc", "10000"},
      {"rho.cap", "1e9"},    {"prox.a", "1"},
      {"box.B", "100"},      {"beta", "1e-6"},
      {"P", "10"},           {"seed", "0"},
      {"log_every", "100"},  {"train.images", ""},
      {"train.labels", ""},  {"agents.dir", ""},
      {"test.images", ""},   {"test.labels", ""},
      {"bias_column", "false"}, {"threads", "0"},
  };
}

ConfigMap parse_config_text(const std::string& text) {
  ConfigMap config = default_config();
  std::istringstream in(text);
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string body = trim(line);
    if (body.empty() || body[0] == '#') continue;
    size_t eq = body.find('=');
    if (eq == std::string::npos)
      throw parse_error("config line " + std::to_string(line_no) + ": expected 'key = value'");
    std::string key = trim(body.substr(0, eq));
    std::string value = trim(body.substr(eq + 1));
    if (config_keys().count(key) == 0)
      throw parse_error("config line " + std::to_string(line_no) + ": unknown key '" + key +
                        "'");
    config[key] = value;
  }
  return config;
}

ConfigMap load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open config " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config_text(text.str());
}

void apply_override(ConfigMap& config, const std::string& key, const std::string& value) {
  if (config_keys().count(key) == 0)
    throw validation_error("unknown config key '" + key + "'");
  config[key] = value;
}

LoadedConfig build_config(const ConfigMap& config) {
  for (const char* required : {"algorithm", "T", "eps_bar"}) {
    auto it = config.find(required);
    if (it == config.end() || it->second.empty())
      throw validation_error(std::string("config key '") + required + "' is required");
  }
  for (const auto& [key, value] : config)
    if (config_keys().count(key) == 0)
      throw validation_error("unknown config key '" + key + "'");

  LoadedConfig out;
  out.resolved = default_config();
  for (const auto& [key, value] : config) out.resolved[key] = value;

  const ConfigMap& c = out.resolved;
  RunConfig& run = out.run;
  run.algorithm = parse_algorithm(c.at("algorithm"));
  run.iterations = parse_long_value("T", c.at("T"));
  if (run.iterations < 0) throw validation_error("config key 'T': must be >= 0");

  run.privacy.eps_bar = parse_double_value("eps_bar", c.at("eps_bar"));
  if (run.privacy.eps_bar <= 0) throw validation_error("config key 'eps_bar': must be > 0");
  run.privacy.delta_bar = parse_double_value("delta_bar", c.at("delta_bar"));
  run.privacy.sigma_scale = parse_double_value("sigma_scale", c.at("sigma_scale"));
  if (run.privacy.sigma_scale < 0)
    throw validation_error("config key 'sigma_scale': must be >= 0");
  run.privacy.sigma_decay = parse_double_value("sigma_decay", c.at("sigma_decay"));
  run.privacy.mechanism = c.at("mechanism").empty() ? default_mechanism(run.algorithm)
                                                    : parse_mechanism(c.at("mechanism"));
  if (run.privacy.mechanism == Mechanism::GaussianOutput &&
      (run.privacy.delta_bar <= 0 || run.privacy.delta_bar >= 1))
    throw validation_error("config key 'delta_bar': must be in (0,1) for GaussianOutput");

  run.schedules.rho.c1 = parse_double_value("rho.c1", c.at("rho.c1"));
  run.schedules.rho.c2 = parse_double_value("rho.c2", c.at("rho.c2"));
  run.schedules.rho.Tc = parse_long_value("rho.Tc", c.at("rho.Tc"));
  run.schedules.rho.cap = parse_double_value("rho.cap", c.at("rho.cap"));
  run.schedules.prox_scale = parse_double_value("prox.a", c.at("prox.a"));
  if (run.schedules.prox_scale <= 0) throw validation_error("config key 'prox.a': must be > 0");

  double box_bound = parse_double_value("box.B", c.at("box.B"));
  if (std::isinf(box_bound)) {
    run.box = FeasibleBox::unbounded();
  } else if (box_bound > 0) {
    run.box = FeasibleBox{box_bound, true};
  } else {
    throw validation_error("config key 'box.B': must be > 0 or inf");
  }

  run.dims.beta = parse_double_value("beta", c.at("beta"));
  if (run.dims.beta < 0) throw validation_error("config key 'beta': must be >= 0");
  run.dims.P = parse_long_value("P", c.at("P"));
  if (run.dims.P < 1) throw validation_error("config key 'P': must be >= 1");

  long seed = parse_long_value("seed", c.at("seed"));
  if (seed < 0) throw validation_error("config key 'seed': must be >= 0");
  run.seed = static_cast<uint64_t>(seed);
  run.log_every = parse_long_value("log_every", c.at("log_every"));
  if (run.log_every < 1) throw validation_error("config key 'log_every': must be >= 1");
  run.threads = static_cast<int>(parse_long_value("threads", c.at("threads")));
  if (run.threads < 0) throw validation_error("config key 'threads': must be >= 0");

  try {
    run.schedules.validate();
    run.privacy.validate();
    RunConfig probe = run;
    probe.dims = ProblemDims{run.dims.P, 0, 0, 0, run.dims.beta};
    probe.validate();
  } catch (const validation_error& e) {
    throw validation_error(std::string("config: ") + e.what());
  }

  out.train_images = c.at("train.images");
  out.train_labels = c.at("train.labels");
  out.agents_dir = c.at("agents.dir");
  out.test_images = c.at("test.images");
  out.test_labels = c.at("test.labels");
  out.bias_column = parse_bool_value("bias_column", c.at("bias_column"));
  return out;
}

ExperimentData load_experiment_data(LoadedConfig& config) {
  ExperimentData data;
  long num_classes = 0;

  if (!config.agents_dir.empty()) {
    // Heterogeneous mode: one table per file, no re-partitioning.
    std::vector<std::string> files;
    for (const auto& entry : std::filesystem::directory_iterator(config.agents_dir))
      if (entry.is_regular_file()) files.push_back(entry.path().string());
    std::sort(files.begin(), files.end());
    if (files.empty())
      throw validation_error("agents.dir '" + config.agents_dir + "' holds no files");

    // First pass pins the global class count and feature width.
    long width = -1;
    long max_label = -1;
    for (const std::string& f : files) {
      std::ifstream in(f);
      if (!in) throw io_error("cannot open " + f);
      std::string line;
      long line_no = 0;
      while (std::getline(in, line)) {
        ++line_no;
        std::string body = trim(line);
        if (body.empty() || body[0] == '#') continue;
        std::replace(body.begin(), body.end(), ',', ' ');
        std::istringstream cells(body);
        double label;
        if (!(cells >> label))
          throw parse_error(f + ":" + std::to_string(line_no) + ": missing class index");
        max_label = std::max(max_label, static_cast<long>(label));
        long cells_in_row = 1;
        double v;
        while (cells >> v) ++cells_in_row;
        if (width < 0) width = cells_in_row;
        if (cells_in_row != width)
          throw parse_error(f + ":" + std::to_string(line_no) + ": ragged row");
      }
    }
    if (max_label < 0) throw validation_error("agents.dir holds no data rows");
    num_classes = max_label + 1;

    for (const std::string& f : files) {
      AgentData agent = load_agent_table(f, num_classes);
      if (config.bias_column && agent.rows() > 0) append_bias_column(agent.features);
      data.agents.push_back(std::move(agent));
    }
    // Agent count comes from the directory itself in heterogeneous mode.
    config.run.dims.P = static_cast<long>(data.agents.size());
  } else {
    if (config.train_images.empty() || config.train_labels.empty())
      throw validation_error("config needs train.images and train.labels (or agents.dir)");
    RawDataset train = load_idx_dataset(config.train_images, config.train_labels);
    int max_label = 0;
    for (int l : train.labels) max_label = std::max(max_label, l);
    num_classes = max_label + 1;
    if (config.bias_column) append_bias_column(train.features);
    AgentData all = make_agent_data(train.features, train.labels, num_classes);
    RngStream partition_stream(config.run.seed, 0xda7a, 0);
    data.agents =
        partition_homogeneous(all.features, all.labels, config.run.dims.P, partition_stream);
  }

  if (!config.test_images.empty() || !config.test_labels.empty()) {
    if (config.test_images.empty() || config.test_labels.empty())
      throw validation_error("config needs both test.images and test.labels");
    RawDataset test = load_idx_dataset(config.test_images, config.test_labels);
    for (int l : test.labels)
      if (l >= num_classes)
        throw validation_error("test label " + std::to_string(l) + " outside [0, " +
                               std::to_string(num_classes) + ")");
    if (config.bias_column) append_bias_column(test.features);
    data.test = make_agent_data(test.features, test.labels, num_classes);
  }

  long total = 0;
  long width = 0;
  for (const AgentData& a : data.agents) {
    total += a.rows();
    if (a.rows() > 0) width = a.features.cols();
  }
  config.run.dims.J = width;
  config.run.dims.K = num_classes;
  config.run.dims.I = total;
  if (data.test.rows() > 0 && data.test.features.cols() != width)
    throw validation_error("test feature width " + std::to_string(data.test.features.cols()) +
                           " does not match training width " + std::to_string(width));
  return data;
}

void write_run_metadata(const LoadedConfig& config, double composed_epsilon,
                        double wall_time_sec, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write " + path);
  out << "# dpfl run metadata: reload with `dpfl run --config <this file>`\n";
  if (config.run.privacy.mechanism == Mechanism::None)
    out << "# composed_epsilon = inf (nonprivate run)\n";
  else
    out << "# composed_epsilon = " << format_double(composed_epsilon) << "\n";
  if (config.run.privacy.mechanism == Mechanism::GaussianOutput)
    out << "# composed_delta = "
        << format_double(config.run.privacy.delta_bar *
                         static_cast<double>(config.run.iterations))
        << "\n";
  out << "# wall_time_sec = " << format_double(wall_time_sec) << "\n";
  for (const auto& [key, value] : config.resolved)
    if (!value.empty()) out << key << " = " << value << "\n";
  if (!out) throw io_error("write failed for " + path);
}

}  // namespace dpfl
