#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "deephash/dataio.hpp"
#include "deephash/network.hpp"
#include "deephash/tensor.hpp"

namespace deephash {

enum class Stage : std::uint8_t { stage1 = 1, stage2 = 2, finetune = 3 };

const char* stage_name(Stage stage);

struct TrainConfig {
  /// Step size. Zero freezes all parameters (useful as a control run).
  double eta = 0.01;
  /// Multiplier applied to eta whenever the windowed loss plateaus.
  double decay = 0.1;
  std::size_t batch_size = 100;
  std::size_t max_epochs = 10;
  /// Iterations per epoch; 0 means ceil(n / batch_size).
  std::size_t iterations_per_epoch = 0;
  /// Random-skipping range: skips are drawn from U{0..skip_max}.
  std::size_t skip_max = 200;
  std::uint64_t seed = 1;
  /// Plateau test: relative improvement of the mean loss over the last
  /// `window` epochs versus the `window` before that falls below `tolerance`.
  std::size_t window = 5;
  double tolerance = 1e-4;
  /// Plateaus tolerated (each one decays eta) before training stops.
  std::size_t max_decays = 3;
  /// Fine-tuning refuses a hash head that never went through pre-training.
  bool require_pretrained_head = false;

  void validate(Stage stage) const;
};

struct EpochRecord {
  Stage stage;
  std::size_t epoch;
  double loss;
  double eta;
};

struct TrainReport {
  std::vector<Stage> stages;
  std::vector<EpochRecord> epochs;
  double wall_seconds = 0.0;

  /// Stages must appear in the order stage1, stage2, finetune.
  void begin_stage(Stage stage);
  void append(const TrainReport& other);

  /// Header "epoch,stage,loss,eta", one row per epoch record.
  std::string to_csv() const;
  void write_csv(const std::filesystem::path& path) const;
};

struct Stage1Result {
  TrainReport report;
  double train_accuracy = 0.0;
};

/// Trains the feature layers plus the softmax classifier by mini-batch SGD
/// on mean cross-entropy.
Stage1Result pretrain_stage1(const LabeledDataset& data, Network& net, const TrainConfig& config);

/// Fraction of samples whose softmax prediction equals their label.
double classification_accuracy(const Network& net, const LabeledDataset& data,
                               std::size_t chunk = 256);

/// Rows z = phi(x) for every image, computed in chunks: [n x dim(z)].
Tensor extract_features(const Network& net, const Tensor& images, std::size_t chunk = 256);

struct Stage2Result {
  Tensor hash_head;            // K x dim(z)
  Tensor classifier_weights;   // classes x K
  Tensor classifier_bias;      // classes
  double train_accuracy = 0.0;
  TrainReport report;
};

/// Initialises the hash head on frozen features with a two-layer shallow
/// network: tanh(W z) feeding a softmax classifier. The classifier is
/// discarded by callers; only W is kept.
Stage2Result pretrain_stage2(const Tensor& features, std::span<const std::int32_t> labels,
                             std::size_t classes, std::size_t bits, const TrainConfig& config,
                             const InitOptions& init = {});

/// Accuracy of the stage-2 shallow classifier on the given features.
double stage2_accuracy(const Stage2Result& result, const Tensor& features,
                       std::span<const std::int32_t> labels);

struct FinetuneResult {
  TrainReport report;
  double best_loss = 0.0;
  std::size_t best_epoch = 0;
};

/// Joint fine-tuning of the feature layers and hash head under the summed
/// pairwise hashing loss. Each iteration runs one forward pass, derives codes,
/// updates W and back-propagates dQ/dz into theta. The network is left at the
/// epoch with the lowest mean batch loss.
FinetuneResult finetune(const LabeledDataset& data, Network& net, const TrainConfig& config);

/// Parameter initialisation strategies compared in the ablation.
enum class Strategy { random_init, pretraining, finetuning };

const char* strategy_name(Strategy strategy);

struct PipelineConfig {
  Strategy strategy = Strategy::finetuning;
  std::size_t bits = 24;
  InitOptions init;
  std::uint64_t seed = 1;
  TrainConfig stage1;
  TrainConfig stage2;
  TrainConfig finetune;
};

struct PipelineResult {
  /// Network after stage 1 (absent for random_init); baselines read its features.
  std::optional<Network> stage1;
  /// Network after stage 2 (absent for random_init).
  std::optional<Network> pretrained;
  /// Final network for the chosen strategy.
  Network final;
  TrainReport report;
  double stage1_accuracy = 0.0;
  double stage2_accuracy = 0.0;
};

/// The network every strategy starts from: `config` with a K-bit hash head,
/// initialised from a sub-stream of `seed`.
Network init_network(NetConfig config, std::size_t bits, std::uint64_t seed,
                     const InitOptions& init = {});

PipelineResult run_pipeline(const NetConfig& net_config, const LabeledDataset& train,
                            const PipelineConfig& config);

}  // namespace deephash
