#include "deephash/network.hpp"

#include <cmath>

#include "deephash/errors.hpp"
#include "deephash/hashloss.hpp"

namespace deephash {

namespace {

void init_params(Layer& layer, Rng& rng, const InitOptions& init) {
  if (layer.params.empty()) return;
  Tensor& weights = layer.params[0];
  const double fan_in = static_cast<double>(weights.dim(1));
  const double stddev = init.weight_scale / std::sqrt(fan_in);
  for (auto& v : weights.values()) v = stddev * rng.normal();
  for (auto& v : layer.params[1].values()) v = 0.0;
}

Tensor gaussian_head(std::size_t bits, std::size_t dim, Rng& rng, const InitOptions& init) {
  Tensor w({bits, dim});
  const double stddev = init.weight_scale / std::sqrt(static_cast<double>(dim));
  for (auto& v : w.values()) v = stddev * rng.normal();
  return w;
}

struct Skeleton {
  Shape input_shape;
  std::vector<Layer> layers;
  std::size_t feature_dim = 0;
  Layer classifier;
};

Skeleton skeleton(const NetConfig& config) {
  Skeleton s;
  const LayerSpec& data = config.data();
  s.input_shape = {data.channels, data.height, data.width};
  Shape shape = s.input_shape;
  for (const auto& spec : config.feature_layers()) {
    s.layers.push_back(make_layer(spec, shape));
    shape = s.layers.back().output_shape;
  }
  s.feature_dim = shape_size(shape);
  if (config.classes() > 0) {
    LayerSpec ip;
    ip.kind = LayerKind::inner_product;
    ip.outputs = config.classes();
    s.classifier = make_layer(ip, {s.feature_dim});
  }
  return s;
}

}  // namespace

const char* head_state_name(HeadState state) {
  switch (state) {
    case HeadState::random:
      return "random";
    case HeadState::pretrained:
      return "pretrained";
    case HeadState::finetuned:
      return "finetuned";
  }
  return "?";
}

Network Network::build(const NetConfig& config, Rng& rng, const InitOptions& init) {
  Skeleton s = skeleton(config);
  for (auto& layer : s.layers) init_params(layer, rng, init);
  init_params(s.classifier, rng, init);
  Tensor head;
  if (config.bits() > 0) head = gaussian_head(config.bits(), s.feature_dim, rng, init);
  return assemble_network(config, std::move(s.layers), std::move(s.classifier), std::move(head),
                          HeadState::random);
}

Network assemble_network(NetConfig config, std::vector<Layer> layers, Layer classifier,
                         Tensor hash_head, HeadState state) {
  Skeleton s = skeleton(config);
  if (layers.size() != s.layers.size()) {
    throw FormatError("expected " + std::to_string(s.layers.size()) + " feature layers, got " +
                      std::to_string(layers.size()));
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (layers[l].spec != s.layers[l].spec || layers[l].params.size() != s.layers[l].params.size()) {
      throw FormatError("feature layer " + std::to_string(l) + " does not match its declaration");
    }
    for (std::size_t p = 0; p < layers[l].params.size(); ++p) {
      if (layers[l].params[p].shape() != s.layers[l].params[p].shape()) {
        throw FormatError("parameter block " + std::to_string(p) + " of layer " +
                          std::to_string(l) + " has shape " +
                          shape_string(layers[l].params[p].shape()) + ", expected " +
                          shape_string(s.layers[l].params[p].shape()));
      }
    }
    s.layers[l].params = std::move(layers[l].params);
  }
  if (classifier.params.size() != s.classifier.params.size()) {
    throw FormatError("classifier head does not match the declared softmax layer");
  }
  for (std::size_t p = 0; p < classifier.params.size(); ++p) {
    if (classifier.params[p].shape() != s.classifier.params[p].shape()) {
      throw FormatError("classifier parameter shape mismatch");
    }
  }
  s.classifier.params = std::move(classifier.params);
  if (config.bits() > 0) {
    if (hash_head.shape() != Shape{config.bits(), s.feature_dim}) {
      throw FormatError("hash head has shape " + shape_string(hash_head.shape()) + ", expected " +
                        shape_string({config.bits(), s.feature_dim}));
    }
  } else if (!hash_head.empty()) {
    throw FormatError("hash head present but no hash-head layer declared");
  }

  Network net;
  net.config_ = std::move(config);
  net.input_shape_ = std::move(s.input_shape);
  net.feature_dim_ = s.feature_dim;
  net.layers_ = std::move(s.layers);
  net.classifier_ = std::move(s.classifier);
  net.hash_head_ = std::move(hash_head);
  net.head_state_ = state;
  return net;
}

void Network::set_hash_head(Tensor weights, HeadState state) {
  if (weights.rank() != 2 || weights.dim(1) != feature_dim_ || weights.dim(0) == 0) {
    throw DimensionError("hash head must be [K x " + std::to_string(feature_dim_) + "], got " +
                         shape_string(weights.shape()));
  }
  config_.set_bits(weights.dim(0));
  hash_head_ = std::move(weights);
  head_state_ = state;
}

void Network::reset_hash_head(std::size_t bits, Rng& rng, const InitOptions& init) {
  if (bits == 0) throw ConfigError("hash head needs at least one bit");
  set_hash_head(gaussian_head(bits, feature_dim_, rng, init), HeadState::random);
}

Activations forward(const Network& net, const Tensor& batch) {
  const Shape& in = net.input_shape();
  if (batch.rank() != in.size() + 1 ||
      !std::equal(in.begin(), in.end(), batch.shape().begin() + 1)) {
    throw DimensionError("network expects samples of shape " + shape_string(in) +
                         ", got batch " + shape_string(batch.shape()));
  }
  Activations acts;
  acts.outputs.reserve(net.layers().size() + 1);
  acts.aux.resize(net.layers().size());
  acts.outputs.push_back(batch);
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    acts.outputs.push_back(layer_forward(net.layers()[l], acts.outputs.back(), acts.aux[l]));
  }
  const std::size_t n = batch.dim(0);
  acts.z = acts.outputs.back().reshaped({n, net.feature_dim()});
  return acts;
}

NetworkGradients backward(const Network& net, const Activations& acts, const Tensor& grad_z) {
  if (acts.empty() || acts.outputs.size() != net.layers().size() + 1) {
    throw StateError("backward requires the activations of a forward pass on this network");
  }
  const std::size_t n = acts.z.dim(0);
  if (grad_z.shape() != acts.z.shape()) {
    throw DimensionError("dQ/dz has shape " + shape_string(grad_z.shape()) + ", expected " +
                         shape_string(acts.z.shape()));
  }
  NetworkGradients grads;
  grads.layers.resize(net.layers().size());
  (void)n;
  Tensor grad = grad_z.reshaped(acts.outputs.back().shape());
  for (std::size_t l = net.layers().size(); l-- > 0;) {
    grad = layer_backward(net.layers()[l], acts.outputs[l], acts.outputs[l + 1], acts.aux[l], grad,
                          grads.layers[l]);
  }
  grads.grad_input = std::move(grad);
  return grads;
}

void apply_gradients(Network& net, const NetworkGradients& grads, double eta) {
  if (grads.layers.size() != net.layers().size()) {
    throw DimensionError("gradient set does not match the network's layers");
  }
  for (std::size_t l = 0; l < grads.layers.size(); ++l) {
    auto& params = net.layers()[l].params;
    if (grads.layers[l].size() != params.size()) {
      throw DimensionError("gradient blocks do not match layer " + std::to_string(l));
    }
    for (std::size_t p = 0; p < params.size(); ++p) sgd_update(params[p], grads.layers[l][p], eta);
  }
}

Tensor features(const Network& net, const Tensor& batch) { return forward(net, batch).z; }

Tensor classifier_logits(const Network& net, const Tensor& z) {
  if (!net.has_classifier()) throw ConfigError("network declares no softmax classifier");
  LayerAux aux;
  return layer_forward(net.classifier(), z, aux);
}

std::vector<BitCode> encode(const Network& net, const Tensor& batch) {
  if (net.bits() == 0) throw ConfigError("network declares no hash head");
  return compute_codes(features(net, batch), net.hash_head());
}

CodeDatabase encode_dataset(const Network& net, const LabeledDataset& data, std::size_t chunk) {
  if (chunk == 0) throw ConfigError("encode chunk size must be positive");
  CodeDatabase db;
  db.bits = net.bits();
  db.labels = data.labels;
  db.codes.reserve(data.size());
  for (std::size_t start = 0; start < data.size(); start += chunk) {
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i < std::min(data.size(), start + chunk); ++i) idx.push_back(i);
    const LabeledDataset part = subset(data, idx);
    for (auto& code : encode(net, part.images)) db.codes.push_back(std::move(code));
  }
  return db;
}

}  // namespace deephash
