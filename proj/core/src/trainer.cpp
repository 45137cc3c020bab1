#include "deephash/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "deephash/batcher.hpp"
#include "deephash/errors.hpp"
#include "deephash/hashloss.hpp"
#include "deephash/supervision.hpp"

namespace deephash {

namespace {

using Clock = std::chrono::steady_clock;

// RNG sub-streams, so that each stage draws independently of the others.
constexpr std::uint64_t kBatchStream = 0xba7c;
constexpr std::uint64_t kInitStream = 0x1417;

/// Step-size schedule driven by the windowed plateau test.
class PlateauSchedule {
 public:
  explicit PlateauSchedule(const TrainConfig& config) : config_(config), eta_(config.eta) {}

  double eta() const { return eta_; }

  /// Records an epoch loss. Returns false once training should stop.
  bool observe(double loss) {
    history_.push_back(loss);
    const std::size_t w = config_.window;
    if (w == 0 || history_.size() < 2 * w) return true;
    const auto end = history_.end();
    const double recent = std::accumulate(end - static_cast<std::ptrdiff_t>(w), end, 0.0) / w;
    const double before = std::accumulate(end - static_cast<std::ptrdiff_t>(2 * w),
                                          end - static_cast<std::ptrdiff_t>(w), 0.0) / w;
    const double improvement = (before - recent) / std::max(std::abs(before), 1e-300);
    if (improvement >= config_.tolerance) return true;
    if (decays_ >= config_.max_decays) return false;
    ++decays_;
    eta_ *= config_.decay;
    history_.clear();
    return true;
  }

 private:
  const TrainConfig& config_;
  double eta_;
  std::size_t decays_ = 0;
  std::vector<double> history_;
};

std::size_t iterations_for(const TrainConfig& config, std::size_t n) {
  if (config.iterations_per_epoch > 0) return config.iterations_per_epoch;
  return (n + config.batch_size - 1) / config.batch_size;
}

void check_finite(double loss, Stage stage, std::size_t epoch) {
  if (!std::isfinite(loss)) {
    throw TrainingError(std::string(stage_name(stage)) + " diverged: non-finite loss in epoch " +
                        std::to_string(epoch));
  }
}

// Mean softmax cross-entropy over samples with known labels; returns the
// loss and fills grad (same shape as logits) and the number of correct
// predictions.
double softmax_cross_entropy(const Tensor& logits, std::span<const std::int32_t> labels,
                             Tensor& grad, std::size_t& correct) {
  const std::size_t n = logits.dim(0);
  const std::size_t classes = logits.dim(1);
  grad = Tensor(logits.shape());
  correct = 0;
  std::size_t known = 0;
  for (auto label : labels) known += label != kUnknownLabel;
  if (known == 0) return 0.0;
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] == kUnknownLabel) continue;
    auto row = logits.slice(i);
    const double top = *std::max_element(row.begin(), row.end());
    double denom = 0.0;
    for (double v : row) denom += std::exp(v - top);
    const auto label = static_cast<std::size_t>(labels[i]);
    loss += std::log(denom) - (row[label] - top);
    const auto best = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    correct += best == label;
    auto g = grad.slice(i);
    for (std::size_t c = 0; c < classes; ++c) {
      g[c] = std::exp(row[c] - top) / denom - (c == label ? 1.0 : 0.0);
      g[c] /= static_cast<double>(known);
    }
  }
  return loss / static_cast<double>(known);
}

std::vector<std::size_t> iota_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

Tensor gather_rows(const Tensor& m, std::span<const std::size_t> rows) {
  Tensor out({rows.size(), m.dim(1)});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    auto src = m.slice(rows[r]);
    std::copy(src.begin(), src.end(), out.slice(r).begin());
  }
  return out;
}

struct ShallowForward {
  Tensor hidden;  // tanh(Z W^T)
  Tensor logits;
};

ShallowForward shallow_forward(const Tensor& z, const Tensor& w, const Tensor& v,
                               const Tensor& bias) {
  ShallowForward f;
  f.hidden = map(matmul_nt(z, w), [](double x) { return std::tanh(x); });
  f.logits = matmul_nt(f.hidden, v);
  for (std::size_t i = 0; i < f.logits.dim(0); ++i) {
    auto row = f.logits.slice(i);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += bias[c];
  }
  return f;
}

}  // namespace

const char* stage_name(Stage stage) {
  switch (stage) {
    case Stage::stage1:
      return "stage1";
    case Stage::stage2:
      return "stage2";
    case Stage::finetune:
      return "finetune";
  }
  return "?";
}

const char* strategy_name(Strategy strategy) {
  switch (strategy) {
    case Strategy::random_init:
      return "random-init";
    case Strategy::pretraining:
      return "pre-training";
    case Strategy::finetuning:
      return "fine-tuning";
  }
  return "?";
}

void TrainConfig::validate(Stage stage) const {
  if (!(eta >= 0.0) || !std::isfinite(eta)) throw ConfigError("eta must be a finite value >= 0");
  if (!(decay > 0.0 && decay < 1.0)) throw ConfigError("decay must lie in (0, 1)");
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (stage == Stage::finetune && batch_size < 2) {
    throw ConfigError("fine-tuning needs batches of at least 2 samples to form pairs");
  }
  if (!(tolerance >= 0.0)) throw ConfigError("convergence tolerance must be non-negative");
}

void TrainReport::begin_stage(Stage stage) {
  if (!stages.empty() && static_cast<int>(stage) <= static_cast<int>(stages.back())) {
    throw StateError(std::string("stage ") + stage_name(stage) + " cannot follow " +
                     stage_name(stages.back()));
  }
  stages.push_back(stage);
}

void TrainReport::append(const TrainReport& other) {
  for (auto stage : other.stages) begin_stage(stage);
  epochs.insert(epochs.end(), other.epochs.begin(), other.epochs.end());
  wall_seconds += other.wall_seconds;
}

std::string TrainReport::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "epoch,stage,loss,eta\n";
  for (const auto& e : epochs) {
    os << e.epoch << ',' << stage_name(e.stage) << ',' << e.loss << ',' << e.eta << '\n';
  }
  return os.str();
}

void TrainReport::write_csv(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out << to_csv();
}

Stage1Result pretrain_stage1(const LabeledDataset& data, Network& net, const TrainConfig& config) {
  config.validate(Stage::stage1);
  data.validate();
  if (!net.has_classifier()) throw ConfigError("stage 1 needs a softmax layer in the net config");
  if (net.classes() != data.num_classes) {
    throw ConfigError("softmax width " + std::to_string(net.classes()) +
                      " does not match dataset class count " + std::to_string(data.num_classes));
  }
  const auto start = Clock::now();
  Stage1Result result;
  result.report.begin_stage(Stage::stage1);
  if (config.max_epochs > 0 && data.size() > 0) {
    RandomSkipBatcher batcher(data.size(), std::min(config.batch_size, data.size()),
                              config.skip_max, Rng(config.seed).derive(kBatchStream));
    PlateauSchedule schedule(config);
    const std::size_t iterations = iterations_for(config, data.size());
    for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
      const double eta = schedule.eta();
      double total = 0.0;
      for (std::size_t it = 0; it < iterations; ++it) {
        const auto batch = batcher.next();
        const LabeledDataset part = subset(data, batch);
        const Activations acts = forward(net, part.images);
        const Tensor logits = classifier_logits(net, acts.z);
        Tensor grad_logits;
        std::size_t correct = 0;
        const double loss = softmax_cross_entropy(logits, part.labels, grad_logits, correct);
        check_finite(loss, Stage::stage1, epoch);
        total += loss;
        if (eta == 0.0) continue;
        Layer& head = net.classifier();
        std::vector<Tensor> head_grads;
        const Tensor grad_z =
            layer_backward(head, acts.z, logits, LayerAux{}, grad_logits, head_grads);
        const NetworkGradients grads = backward(net, acts, grad_z);
        for (std::size_t p = 0; p < head.params.size(); ++p) sgd_update(head.params[p], head_grads[p], eta);
        apply_gradients(net, grads, eta);
      }
      const double mean = total / static_cast<double>(iterations);
      result.report.epochs.push_back({Stage::stage1, epoch, mean, eta});
      if (!schedule.observe(mean)) break;
    }
  }
  result.train_accuracy = classification_accuracy(net, data);
  result.report.wall_seconds =
      std::chrono::duration<double>(Clock::now() - start).count();
  return result;
}

double classification_accuracy(const Network& net, const LabeledDataset& data, std::size_t chunk) {
  std::size_t correct = 0;
  std::size_t known = 0;
  for (std::size_t start = 0; start < data.size(); start += chunk) {
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i < std::min(data.size(), start + chunk); ++i) idx.push_back(i);
    const LabeledDataset part = subset(data, idx);
    const Tensor logits = classifier_logits(net, features(net, part.images));
    for (std::size_t i = 0; i < part.size(); ++i) {
      if (part.labels[i] == kUnknownLabel) continue;
      ++known;
      auto row = logits.slice(i);
      const auto best = static_cast<std::int32_t>(std::max_element(row.begin(), row.end()) - row.begin());
      correct += best == part.labels[i];
    }
  }
  return known == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(known);
}

Tensor extract_features(const Network& net, const Tensor& images, std::size_t chunk) {
  if (chunk == 0) throw ConfigError("feature chunk size must be positive");
  const std::size_t n = images.rank() == 0 ? 0 : images.dim(0);
  Tensor out({n, net.feature_dim()});
  const std::size_t per = n == 0 ? 0 : images.size() / n;
  for (std::size_t start = 0; start < n; start += chunk) {
    const std::size_t count = std::min(chunk, n - start);
    Shape shape = images.shape();
    shape[0] = count;
    std::vector<double> values(images.values().begin() + static_cast<std::ptrdiff_t>(start * per),
                               images.values().begin() + static_cast<std::ptrdiff_t>((start + count) * per));
    const Tensor z = features(net, Tensor(shape, std::move(values)));
    std::copy(z.values().begin(), z.values().end(),
              out.values().begin() + static_cast<std::ptrdiff_t>(start * net.feature_dim()));
  }
  return out;
}

Stage2Result pretrain_stage2(const Tensor& features, std::span<const std::int32_t> labels,
                             std::size_t classes, std::size_t bits, const TrainConfig& config,
                             const InitOptions& init) {
  config.validate(Stage::stage2);
  if (bits == 0) throw ConfigError("hash head needs at least one bit");
  if (classes < 2) throw ConfigError("stage 2 needs at least two classes");
  if (features.rank() != 2 || features.dim(0) != labels.size()) {
    throw DimensionError("stage 2 needs one feature row per label");
  }
  const std::size_t n = features.dim(0);
  const std::size_t dim = features.dim(1);
  const auto start = Clock::now();

  Rng rng = Rng(config.seed).derive(kInitStream);
  Stage2Result result;
  result.hash_head = Tensor({bits, dim});
  const double w_std = init.weight_scale / std::sqrt(static_cast<double>(dim));
  for (auto& v : result.hash_head.values()) v = w_std * rng.normal();
  result.classifier_weights = Tensor({classes, bits});
  const double v_std = init.weight_scale / std::sqrt(static_cast<double>(bits));
  for (auto& v : result.classifier_weights.values()) v = v_std * rng.normal();
  result.classifier_bias = Tensor({classes});
  result.report.begin_stage(Stage::stage2);

  if (config.max_epochs > 0 && n > 0) {
    RandomSkipBatcher batcher(n, std::min(config.batch_size, n), config.skip_max,
                              Rng(config.seed).derive(kBatchStream));
    PlateauSchedule schedule(config);
    const std::size_t iterations = iterations_for(config, n);
    for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
      const double eta = schedule.eta();
      double total = 0.0;
      for (std::size_t it = 0; it < iterations; ++it) {
        const auto batch = batcher.next();
        const Tensor z = gather_rows(features, batch);
        std::vector<std::int32_t> y(batch.size());
        for (std::size_t i = 0; i < batch.size(); ++i) y[i] = labels[batch[i]];
        const ShallowForward f =
            shallow_forward(z, result.hash_head, result.classifier_weights, result.classifier_bias);
        Tensor g_logits;
        std::size_t correct = 0;
        const double loss = softmax_cross_entropy(f.logits, y, g_logits, correct);
        check_finite(loss, Stage::stage2, epoch);
        total += loss;
        if (eta == 0.0) continue;
        const Tensor g_v = matmul_tn(g_logits, f.hidden);
        Tensor g_b({classes});
        for (std::size_t i = 0; i < g_logits.dim(0); ++i)
          for (std::size_t c = 0; c < classes; ++c) g_b[c] += g_logits.at(i, c);
        Tensor g_pre = matmul(g_logits, result.classifier_weights);
        for (std::size_t i = 0; i < g_pre.size(); ++i)
          g_pre[i] *= 1.0 - f.hidden[i] * f.hidden[i];
        const Tensor g_w = matmul_tn(g_pre, z);
        sgd_update(result.hash_head, g_w, eta);
        sgd_update(result.classifier_weights, g_v, eta);
        sgd_update(result.classifier_bias, g_b, eta);
      }
      const double mean = total / static_cast<double>(iterations);
      result.report.epochs.push_back({Stage::stage2, epoch, mean, eta});
      if (!schedule.observe(mean)) break;
    }
  }
  result.train_accuracy = stage2_accuracy(result, features, labels);
  result.report.wall_seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return result;
}

double stage2_accuracy(const Stage2Result& result, const Tensor& features,
                       std::span<const std::int32_t> labels) {
  if (features.dim(0) == 0) return 0.0;
  const ShallowForward f = shallow_forward(features, result.hash_head, result.classifier_weights,
                                           result.classifier_bias);
  std::size_t correct = 0;
  std::size_t known = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == kUnknownLabel) continue;
    ++known;
    auto row = f.logits.slice(i);
    correct += static_cast<std::int32_t>(std::max_element(row.begin(), row.end()) - row.begin()) ==
               labels[i];
  }
  return known == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(known);
}

FinetuneResult finetune(const LabeledDataset& data, Network& net, const TrainConfig& config) {
  config.validate(Stage::finetune);
  data.validate();
  if (net.bits() == 0) throw ConfigError("fine-tuning needs a hash head");
  if (config.require_pretrained_head && net.head_state() == HeadState::random) {
    throw StateError("fine-tuning requires a pre-trained hash head, but W is uninitialised");
  }
  if (data.size() < 2) throw ConfigError("fine-tuning needs at least two samples");
  const auto start = Clock::now();

  FinetuneResult result;
  result.report.begin_stage(Stage::finetune);
  if (config.max_epochs == 0) return result;

  RandomSkipBatcher batcher(data.size(), std::min(config.batch_size, data.size()),
                            config.skip_max, Rng(config.seed).derive(kBatchStream));
  PlateauSchedule schedule(config);
  const std::size_t iterations = iterations_for(config, data.size());
  std::optional<Network> best;
  result.best_loss = std::numeric_limits<double>::infinity();

  for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
    const double eta = schedule.eta();
    double total = 0.0;
    for (std::size_t it = 0; it < iterations; ++it) {
      const auto batch = batcher.next();
      const LabeledDataset part = subset(data, batch);
      const Activations acts = forward(net, part.images);
      const std::vector<BitCode> codes = compute_codes(acts.z, net.hash_head());
      const auto pairs = SimilarityOracle(part.labels).batch_pairs(iota_indices(part.size()));
      const BatchLoss loss = accumulate_batch(pairs, acts.z, codes, net.hash_head());
      check_finite(loss.q, Stage::finetune, epoch);
      total += loss.q;
      if (eta == 0.0) continue;
      const NetworkGradients grads = backward(net, acts, loss.grads.grad_z);
      sgd_update(net.hash_head(), loss.grads.grad_w, eta);
      apply_gradients(net, grads, eta);
    }
    const double mean = total / static_cast<double>(iterations);
    result.report.epochs.push_back({Stage::finetune, epoch, mean, eta});
    if (mean < result.best_loss) {
      result.best_loss = mean;
      result.best_epoch = epoch;
      best = net;
    }
    if (!schedule.observe(mean)) break;
  }
  if (best) net = std::move(*best);
  if (config.eta > 0.0) net.set_head_state(HeadState::finetuned);
  result.report.wall_seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return result;
}

Network init_network(NetConfig config, std::size_t bits, std::uint64_t seed,
                     const InitOptions& init) {
  config.set_bits(bits);
  Rng rng = Rng(seed).derive(kInitStream);
  return Network::build(config, rng, init);
}

PipelineResult run_pipeline(const NetConfig& net_config, const LabeledDataset& train,
                            const PipelineConfig& config) {
  Network net = init_network(net_config, config.bits, config.seed, config.init);

  PipelineResult result;
  if (config.strategy != Strategy::random_init) {
    Stage1Result s1 = pretrain_stage1(train, net, config.stage1);
    result.report.append(s1.report);
    result.stage1_accuracy = s1.train_accuracy;
    result.stage1 = net;

    const Tensor z = extract_features(net, train.images);
    Stage2Result s2 = pretrain_stage2(z, train.labels, train.num_classes, config.bits,
                                      config.stage2, config.init);
    result.report.append(s2.report);
    result.stage2_accuracy = s2.train_accuracy;
    net.set_hash_head(std::move(s2.hash_head), HeadState::pretrained);
    result.pretrained = net;
  }
  if (config.strategy != Strategy::pretraining) {
    TrainConfig ft = config.finetune;
    ft.require_pretrained_head = config.strategy == Strategy::finetuning;
    FinetuneResult f = finetune(train, net, ft);
    result.report.append(f.report);
  }
  result.final = std::move(net);
  return result;
}

}  // namespace deephash
