#pragma once

#include <array>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "plenograsp/grasp_features.hpp"

namespace plenograsp {

struct LabeledExample {
  FeatureTensor tensor;
  int label = 0;  // 1 = graspable
  enum class Source { oracle_force_closure, oracle_collision, external };
  Source source = Source::external;
};

struct Classification {
  bool graspable = false;
  double confidence = 0.0;  // probability mass on {graspable}
};

struct TrainConfig {
  int epochs = 20;
  double learning_rate = 0.01;
  int batch_size = 32;
  uint64_t seed = 1;
  bool class_weighted = true;
};

struct EpochLog {
  int epoch = 0;
  double loss = 0.0;
  double accuracy = 0.0;
};

// Pluggable grasp-success classifier over nine-channel feature tensors.
class GraspClassifier {
 public:
  virtual ~GraspClassifier() = default;
  virtual Classification classify(const FeatureTensor& tensor) const = 0;
  virtual void save(const std::filesystem::path& path, uint64_t config_hash = 0) const = 0;
  virtual std::string kind() const = 0;
};

// Reference model: 9ch -> conv(5x5,16) -> avgpool(2) -> conv(5x5,32) ->
// avgpool(2) -> dense(128) -> dense(2) -> softmax, tanh activations, double
// precision. Trained with SGD + momentum 0.9; deterministic under the seed.
class ConvNetClassifier : public GraspClassifier {
 public:
  struct Arch {
    int input_size = 100;
    int conv1_filters = 16;
    int conv2_filters = 32;
    int kernel = 5;
    int pool = 2;
    int dense = 128;
  };

  static ConvNetClassifier train(const std::vector<LabeledExample>& dataset,
                                 const TrainConfig& config, const Arch& arch,
                                 std::vector<EpochLog>* log = nullptr);
  static ConvNetClassifier load(const std::filesystem::path& path);
  // Freshly initialized (or explicitly parameterized) model without training.
  static ConvNetClassifier initialized(const Arch& arch, uint64_t seed);

  Classification classify(const FeatureTensor& tensor) const override;
  // Both softmax outputs: {not graspable, graspable}.
  std::array<double, 2> class_probabilities(const FeatureTensor& tensor) const;
  void save(const std::filesystem::path& path, uint64_t config_hash = 0) const override;
  std::string kind() const override { return "convnet"; }

  // Analytic-vs-central-difference agreement on `n_params` randomly chosen
  // parameters; returns the max relative error and optionally the worst
  // parameter index.
  double gradient_check(const FeatureTensor& tensor, int* worst_index = nullptr,
                        int n_params = 100, uint64_t seed = 17, double step = 1e-4) const;

  const Arch& arch() const { return arch_; }
  const std::vector<double>& parameters() const { return params_; }
  double final_train_accuracy() const { return final_accuracy_; }

 private:
  friend struct ConvNetOps;
  Arch arch_;
  std::vector<double> params_;
  std::vector<double> input_mean_ = std::vector<double>(9, 0.0);
  std::vector<double> input_std_ = std::vector<double>(9, 1.0);
  double final_accuracy_ = 0.0;
  uint64_t train_seed_ = 0;
  int train_epochs_ = 0;
  uint64_t dataset_hash_ = 0;
};

// Logistic regression over pooled channel statistics; a fast stand-in with
// the same interface for integration runs.
class LogisticClassifier : public GraspClassifier {
 public:
  static LogisticClassifier train(const std::vector<LabeledExample>& dataset,
                                  const TrainConfig& config, std::vector<EpochLog>* log = nullptr);
  static LogisticClassifier load(const std::filesystem::path& path);

  Classification classify(const FeatureTensor& tensor) const override;
  void save(const std::filesystem::path& path, uint64_t config_hash = 0) const override;
  std::string kind() const override { return "logistic"; }

 private:
  std::vector<double> weights_;  // 27 pooled features + bias
  std::vector<double> feat_mean_;
  std::vector<double> feat_std_;
};

// Dispatches on the model file's architecture descriptor.
std::unique_ptr<GraspClassifier> load_classifier(const std::filesystem::path& path);

// Dataset directory: tensors (raw float32 + sidecars) plus an index.json with
// labels and sources.
void save_dataset(const std::vector<LabeledExample>& dataset,
                  const std::vector<GraspCandidate>& candidates,
                  const std::filesystem::path& dir, uint64_t config_hash = 0);
std::vector<LabeledExample> load_dataset(const std::filesystem::path& dir);

uint64_t dataset_hash(const std::vector<LabeledExample>& dataset);

}  // namespace plenograsp
