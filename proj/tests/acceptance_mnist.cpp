// Acceptance suite, part 2: full-scale image-classification criteria.
// Needs the four MNIST IDX files under $DPFL_MNIST_DIR (default data/mnist);
// exits 77 (skip) when they are absent. Expect minutes to a few hours of
// compute depending on the machine: 27 runs of 20000 rounds each.

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "dpfl/dataio.hpp"
#include "dpfl/federation.hpp"
#include "dpfl/model.hpp"
#include "support.hpp"

using namespace dpfl;

namespace {

constexpr long kIterations = 20000;
constexpr long kAgents = 10;

int g_failures = 0;

void report(int criterion, const char* name, bool pass, const std::string& detail) {
  std::printf("[%s] criterion %d: %s (%s)\n", pass ? "PASS" : "FAIL", criterion, name,
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

std::string find_file(const std::string& dir, const std::vector<std::string>& names) {
  for (const std::string& name : names) {
    std::string path = dir + "/" + name;
    if (std::filesystem::exists(path)) return path;
  }
  return "";
}

struct RunSpec {
  Algorithm algorithm;
  double eps_bar;
  uint64_t seed;
  double final_test_error = -1.0;
};

class MnistRunner {
 public:
  MnistRunner(RawDataset train, AgentData test) : train_(std::move(train)) {
    test_ = std::move(test);
  }

  void execute(std::vector<RunSpec>& specs) {
    std::atomic<size_t> next{0};
    auto worker = [&] {
      for (;;) {
        size_t index = next.fetch_add(1);
        if (index >= specs.size()) return;
        run_one(specs[index]);
      }
    };
    unsigned hw = std::thread::hardware_concurrency();
    size_t workers = std::min<size_t>(std::max(1u, hw), specs.size());
    std::vector<std::thread> pool;
    for (size_t i = 0; i < workers; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

 private:
  void run_one(RunSpec& spec) {
    // Each seed gets its own shuffle, mirroring `dpfl run --repeat`.
    AgentData all = make_agent_data(train_.features, train_.labels, 10);
    RngStream partition_stream(spec.seed, 0xda7a, 0);
    std::vector<AgentData> agents =
        partition_homogeneous(all.features, all.labels, kAgents, partition_stream);

    RunConfig config;
    config.algorithm = spec.algorithm;
    config.privacy.mechanism = default_mechanism(spec.algorithm);
    config.privacy.eps_bar = spec.eps_bar;
    config.privacy.delta_bar = 1e-6;
    config.privacy.sigma_scale = 1.0;
    config.iterations = kIterations;
    config.schedules.rho = RhoSchedule{2.0, 5.0, 10000, 1e9};
    config.schedules.prox_scale = 1.0;
    config.box = FeasibleBox{100.0, true};
    config.seed = spec.seed;
    config.log_every = 500;
    config.threads = 1;  // run-level parallelism only
    config.dims = ProblemDims{kAgents, train_.features.cols(), 10, train_.features.rows(),
                              1e-6};

    RunResult result = run_experiment(config, agents, &test_);
    spec.final_test_error = result.metrics.back().test_error;
    std::lock_guard<std::mutex> lock(print_mutex_);
    std::printf("  run %-17s eps=%-5.3g seed=%-3llu final test error %.4f\n",
                algorithm_name(spec.algorithm), spec.eps_bar,
                static_cast<unsigned long long>(spec.seed), spec.final_test_error);
    std::fflush(stdout);
  }

  RawDataset train_;
  AgentData test_;
  std::mutex print_mutex_;
};

double mean_error(const std::vector<RunSpec>& specs, Algorithm alg, double eps) {
  double total = 0.0;
  long count = 0;
  for (const RunSpec& s : specs)
    if (s.algorithm == alg && s.eps_bar == eps) {
      total += s.final_test_error;
      ++count;
    }
  return count > 0 ? total / static_cast<double>(count) : -1.0;
}

}  // namespace

int main() {
  const char* env = std::getenv("DPFL_MNIST_DIR");
  std::string dir = env != nullptr && env[0] != '\0' ? env : "data/mnist";

  std::string train_images = find_file(
      dir, {"train-images-idx3-ubyte", "train-images.idx3-ubyte"});
  std::string train_labels = find_file(
      dir, {"train-labels-idx1-ubyte", "train-labels.idx1-ubyte"});
  std::string test_images = find_file(dir, {"t10k-images-idx3-ubyte", "t10k-images.idx3-ubyte"});
  std::string test_labels = find_file(dir, {"t10k-labels-idx1-ubyte", "t10k-labels.idx1-ubyte"});

  if (train_images.empty() || train_labels.empty() || test_images.empty() ||
      test_labels.empty()) {
    std::printf(
        "SKIP: image dataset not found under '%s'.\n"
        "Place the four IDX files (train-images-idx3-ubyte, train-labels-idx1-ubyte,\n"
        "t10k-images-idx3-ubyte, t10k-labels-idx1-ubyte) there, or point DPFL_MNIST_DIR\n"
        "at them, to run criteria 8-11.\n",
        dir.c_str());
    return 77;
  }

  std::printf("acceptance: image-classification suite (dir: %s)\n", dir.c_str());
  RawDataset train = load_idx_dataset(train_images, train_labels);
  RawDataset test_raw = load_idx_dataset(test_images, test_labels);
  AgentData test = make_agent_data(test_raw.features, test_raw.labels, 10);
  std::printf("  loaded %ld training rows, %ld test rows, %ld features\n",
              train.features.rows(), test.rows(), train.features.cols());

  std::vector<RunSpec> specs;
  specs.push_back({Algorithm::NonPrivateTrust, 1.0, 1});             // criterion 8
  specs.push_back({Algorithm::ObjT, 5.0, 1});                        // criterion 9
  for (uint64_t s = 1; s <= 10; ++s) specs.push_back({Algorithm::ObjT, 0.05, s});  // 10, 11
  for (uint64_t s = 1; s <= 5; ++s) specs.push_back({Algorithm::ObjT, 0.1, s});    // 11
  for (uint64_t s = 1; s <= 5; ++s) specs.push_back({Algorithm::OutP, 0.05, s});   // 11
  for (uint64_t s = 1; s <= 5; ++s) specs.push_back({Algorithm::OutP, 0.1, s});    // 11

  MnistRunner runner(std::move(train), std::move(test));
  runner.execute(specs);

  char detail[160];
  double nonprivate = mean_error(specs, Algorithm::NonPrivateTrust, 1.0);
  std::snprintf(detail, sizeof(detail), "test error %.4f, threshold 0.09", nonprivate);
  report(8, "nonprivate accuracy", nonprivate >= 0.0 && nonprivate <= 0.09, detail);

  double objt5 = mean_error(specs, Algorithm::ObjT, 5.0);
  std::snprintf(detail, sizeof(detail), "test error %.4f, threshold 0.10", objt5);
  report(9, "trust-region objective perturbation at eps 5", objt5 >= 0.0 && objt5 <= 0.10,
         detail);

  double objt005 = mean_error(specs, Algorithm::ObjT, 0.05);
  std::snprintf(detail, sizeof(detail), "mean test error %.4f over 10 seeds, threshold 0.16",
                objt005);
  report(10, "trust-region objective perturbation at eps 0.05",
         objt005 >= 0.0 && objt005 <= 0.16, detail);

  double objt01 = mean_error(specs, Algorithm::ObjT, 0.1);
  double outp005 = mean_error(specs, Algorithm::OutP, 0.05);
  double outp01 = mean_error(specs, Algorithm::OutP, 0.1);
  std::snprintf(detail, sizeof(detail),
                "ObjT %.4f vs OutP %.4f at eps 0.05; ObjT %.4f vs OutP %.4f at eps 0.1",
                objt005, outp005, objt01, outp01);
  report(11, "objective beats output perturbation at small eps",
         objt005 < outp005 && objt01 < outp01, detail);

  if (g_failures == 0) {
    std::printf("ACCEPTANCE (image dataset): 4/4 criteria passed\n");
    return 0;
  }
  std::printf("ACCEPTANCE (image dataset): %d criteria FAILED\n", g_failures);
  return 1;
}
