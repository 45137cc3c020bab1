#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace deephash {

enum class LayerKind {
  data,
  convolution,
  max_pool,
  avg_pool,
  inner_product,
  relu,
  lrn,
  softmax,
  hash_head,
};

const char* layer_kind_name(LayerKind kind);

/// One declared layer. Only the fields relevant to `kind` are meaningful.
struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  // data
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  // convolution filters, inner-product outputs, softmax classes, hash bits
  std::size_t outputs = 0;
  // convolution / pooling geometry
  std::size_t kernel = 0;
  std::size_t stride = 1;
  std::size_t pad = 0;
  // local response normalisation across channels:
  //   b_c = a_c / (k + alpha/size * sum_{window} a^2)^beta
  std::size_t local_size = 5;
  double alpha = 1e-4;
  double beta = 0.75;
  double k = 1.0;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// Declarative network description, one layer per line:
///
///   version 1
///   data channels=1 height=28 width=28
///   convolution outputs=20 kernel=5 stride=1 pad=0
///   max-pool kernel=2 stride=2
///   inner-product outputs=500
///   relu
///   softmax classes=10
///   hash-head bits=24
///
/// '#' starts a comment. The first layer must be `data`; `softmax` (the
/// pre-training classifier) and `hash-head` are optional and, if present,
/// follow every feature layer.
struct NetConfig {
  int version = 1;
  std::vector<LayerSpec> layers;

  const LayerSpec& data() const;
  /// Feature layers between data and the heads.
  std::vector<LayerSpec> feature_layers() const;
  /// Classes of the softmax head; 0 if absent.
  std::size_t classes() const;
  /// Bits of the hash head; 0 if absent.
  std::size_t bits() const;

  /// Replaces (or appends) the hash-head declaration.
  void set_bits(std::size_t bits);
  void set_classes(std::size_t classes);

  friend bool operator==(const NetConfig&, const NetConfig&) = default;
};

NetConfig parse_net_config(std::string_view text);
NetConfig load_net_config(const std::filesystem::path& path);
std::string format_net_config(const NetConfig& config);

/// The MNIST topology: two conv/max-pool stages, a 500-d inner product and ReLU.
NetConfig mnist_net_config(std::size_t bits = 24);
/// The CIFAR-10 topology with padded convolutions, LRN and mixed pooling.
NetConfig cifar_net_config(std::size_t bits = 24, std::size_t classes = 10);

}  // namespace deephash
