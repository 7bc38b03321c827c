#pragma once

// Class-incremental learning: tasks of consecutive class labels, trained in
// order, with one of four replay strategies between tasks.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bridge/bridge_net.hpp"

namespace bridge {

enum class Scenario : std::uint8_t { StoredRaw, StoredFused, Distilled, None };

const char* to_string(Scenario s);
Scenario parse_scenario(const std::string& s);

struct TaskSequence {
  std::vector<std::vector<std::uint8_t>> classes;
  std::vector<std::vector<std::size_t>> train_idx;
  std::vector<std::vector<std::size_t>> test_idx;
  std::size_t size() const noexcept { return classes.size(); }
};

// Ascending labels, classes_per_task per task. test may be null.
TaskSequence split_tasks(const Dataset& train, const Dataset* test, std::size_t classes_per_task);

struct ContinualOptions {
  Scenario scenario = Scenario::Distilled;
  std::size_t epochs_per_task = 2;
  std::size_t batch = 64;
  AdamConfig adam;
  // Replay items per new item for task t >= 1: ratio * multiplier^(t - 1).
  double replay_ratio = 1.0;
  double replay_multiplier = 1.0;
  DistillOptions distill;
  std::uint64_t seed = 1;
};

struct AccuracyMatrix {
  // a[t][k]: accuracy on task k's test classes after stage t. Entries with
  // k > t are measured on classes not yet trained and flagged in seen.
  std::vector<std::vector<double>> a;
  std::vector<std::vector<bool>> seen;
  // Accuracy over the test samples of all tasks seen so far.
  std::vector<double> overall;
  // Replay payload size after each stage.
  std::vector<std::size_t> buffer_sizes;
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(Scenario kind, std::size_t capacity = 0) : kind_(kind), capacity_(capacity) {}

  Scenario kind() const noexcept { return kind_; }
  std::size_t size() const noexcept;
  std::size_t capacity() const noexcept { return capacity_; }

  // Stores what the scenario keeps from a finished task.
  void store_task(const BridgeNetwork& net, const Dataset& train, std::span<const std::size_t> idx);
  // Distilled: replaces the buffer with a fresh distillation of net.
  void refresh(const BridgeNetwork& net, const DistillOptions& opt, Rng& rng);

  // count replay pairs (image symbols, label symbols) sampled with replacement,
  // generated through net where the scenario requires it.
  std::pair<Matrix<float>, Matrix<float>> sample(const BridgeNetwork& net, const Dataset& train,
                                                 std::size_t count, Rng& rng) const;

 private:
  Scenario kind_;
  std::size_t capacity_;
  std::vector<std::size_t> raw_idx_;
  Matrix<float> fused_;
  DistilledSet distilled_;
  bool distilled_ready_ = false;
};

// Network whose vectorizer is calibrated on the first task only.
BridgeNetwork make_continual_network(const NetConfig& cfg, const FeatureExtractor& fx,
                                     const Dataset& train, const TaskSequence& seq);

AccuracyMatrix run_scenario(BridgeNetwork& net, const Dataset& train, const Dataset& test,
                            const TaskSequence& seq, const ContinualOptions& opt);

struct ForgettingReport {
  double final_overall = 0.0;
  double mean_forgetting = 0.0;
  std::vector<double> per_task;  // max over stages minus final
};

ForgettingReport forgetting_report(const AccuracyMatrix& m);

}  // namespace bridge
