#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "deephash/bitcode.hpp"
#include "deephash/dataio.hpp"
#include "deephash/layers.hpp"
#include "deephash/netconfig.hpp"
#include "deephash/rng.hpp"
#include "deephash/tensor.hpp"

namespace deephash {

/// Where the current hash-head weights came from.
enum class HeadState : std::uint8_t {
  random = 0,     // Gaussian initialisation only
  pretrained = 1, // initialised by hash-head pre-training on frozen features
  finetuned = 2,  // jointly fine-tuned with the feature layers
};

const char* head_state_name(HeadState state);

/// Weight initialisation: zero biases and Gaussian weights with standard
/// deviation weight_scale / sqrt(fan_in).
struct InitOptions {
  double weight_scale = 1.0;
};

/// Feature stack z = phi(x; theta), an optional softmax classifier used only
/// during pre-training, and the hash head W (K x dim(z)) producing
/// b_k = sign(w_k . z).
class Network {
 public:
  Network() = default;

  static Network build(const NetConfig& config, Rng& rng, const InitOptions& init = {});

  const NetConfig& config() const { return config_; }
  /// Per-sample input shape [c, h, w].
  const Shape& input_shape() const { return input_shape_; }
  std::size_t feature_dim() const { return feature_dim_; }
  std::size_t bits() const { return hash_head_.rank() == 2 ? hash_head_.dim(0) : 0; }
  std::size_t classes() const { return config_.classes(); }

  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }

  bool has_classifier() const { return !classifier_.params.empty(); }
  Layer& classifier() { return classifier_; }
  const Layer& classifier() const { return classifier_; }

  const Tensor& hash_head() const { return hash_head_; }
  Tensor& hash_head() { return hash_head_; }
  HeadState head_state() const { return head_state_; }
  void set_head_state(HeadState state) { head_state_ = state; }

  /// Installs new hash-head weights; the shape must be [bits x feature_dim].
  void set_hash_head(Tensor weights, HeadState state);
  /// Gaussian re-initialisation of the hash head with `bits` rows.
  void reset_hash_head(std::size_t bits, Rng& rng, const InitOptions& init = {});

  friend bool operator==(const Network&, const Network&) = default;

 private:
  friend Network assemble_network(NetConfig, std::vector<Layer>, Layer, Tensor, HeadState);

  NetConfig config_;
  Shape input_shape_;
  std::size_t feature_dim_ = 0;
  std::vector<Layer> layers_;
  Layer classifier_;
  Tensor hash_head_;
  HeadState head_state_ = HeadState::random;
};

/// Rebuilds a network from stored parts, validating every parameter shape
/// against the configuration. Used by checkpoint loading.
Network assemble_network(NetConfig config, std::vector<Layer> layers, Layer classifier,
                         Tensor hash_head, HeadState state);

/// Everything forward computes for one batch. outputs[0] is the input batch
/// and outputs[l + 1] the output of feature layer l; z is the last output
/// flattened to [n x dim(z)].
struct Activations {
  std::vector<Tensor> outputs;
  std::vector<LayerAux> aux;
  Tensor z;

  bool empty() const { return outputs.empty(); }
};

Activations forward(const Network& net, const Tensor& batch);

struct NetworkGradients {
  /// One entry per feature layer, aligned with Layer::params.
  std::vector<std::vector<Tensor>> layers;
  Tensor grad_input;
};

/// Back-propagates dQ/dz ([n x dim(z)]) through the feature layers. Throws
/// StateError if `acts` does not hold a forward pass.
NetworkGradients backward(const Network& net, const Activations& acts, const Tensor& grad_z);

/// theta <- theta - eta * grad for every feature-layer parameter block.
void apply_gradients(Network& net, const NetworkGradients& grads, double eta);

/// z = phi(x) for a batch.
Tensor features(const Network& net, const Tensor& batch);

/// Softmax-classifier logits for features z ([n x dim(z)]).
Tensor classifier_logits(const Network& net, const Tensor& z);

/// Hash codes sign(W phi(x)) for a batch.
std::vector<BitCode> encode(const Network& net, const Tensor& batch);

/// Encodes a whole dataset in chunks.
CodeDatabase encode_dataset(const Network& net, const LabeledDataset& data,
                            std::size_t chunk = 256);

}  // namespace deephash
