#include "deephash/checkpoint.hpp"

#include "binary_io.hpp"
#include "deephash/errors.hpp"

namespace deephash {

namespace {

constexpr std::string_view kMagic("DHCKPT\0\0", 8);
constexpr std::uint32_t kVersion = 1;

void write_blocks(detail::ByteWriter& w, const std::vector<Tensor>& blocks) {
  w.u32(static_cast<std::uint32_t>(blocks.size()));
  for (const auto& t : blocks) w.tensor(t);
}

std::vector<Tensor> read_blocks(detail::ByteReader& r) {
  const std::uint32_t count = r.u32();
  if (count > 16) throw FormatError("implausible parameter block count at offset " + std::to_string(r.offset()));
  std::vector<Tensor> blocks;
  for (std::uint32_t i = 0; i < count; ++i) blocks.push_back(r.tensor());
  return blocks;
}

}  // namespace

void save_checkpoint(const Network& net, const std::filesystem::path& path) {
  detail::ByteWriter w;
  w.raw(kMagic);
  w.u32(kVersion);
  w.str(format_net_config(net.config()));
  w.u8(static_cast<std::uint8_t>(net.head_state()));
  w.u32(static_cast<std::uint32_t>(net.layers().size()));
  for (const auto& layer : net.layers()) write_blocks(w, layer.params);
  write_blocks(w, net.classifier().params);
  w.tensor(net.hash_head());
  w.finish(path);
}

Network load_checkpoint(const std::filesystem::path& path) {
  detail::ByteReader r(path, kMagic);
  const std::uint32_t version = r.u32();
  if (version != kVersion) {
    throw FormatError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  NetConfig config;
  try {
    config = parse_net_config(r.str());
  } catch (const ConfigError& e) {
    throw FormatError(path.string() + ": embedded net config invalid: " + e.what());
  }
  const std::uint8_t state = r.u8();
  if (state > static_cast<std::uint8_t>(HeadState::finetuned)) {
    throw FormatError(path.string() + ": bad hash-head state at offset " + std::to_string(r.offset() - 1));
  }
  const std::uint32_t n_layers = r.u32();
  const auto specs = config.feature_layers();
  if (n_layers != specs.size()) {
    throw FormatError(path.string() + ": layer count " + std::to_string(n_layers) +
                      " does not match embedded config");
  }
  std::vector<Layer> layers(n_layers);
  for (std::uint32_t l = 0; l < n_layers; ++l) {
    layers[l].spec = specs[l];
    layers[l].params = read_blocks(r);
  }
  Layer classifier;
  classifier.params = read_blocks(r);
  Tensor head = r.tensor();
  if (head.rank() == 0) head = Tensor();
  r.expect_end();
  try {
    return assemble_network(std::move(config), std::move(layers), std::move(classifier),
                            std::move(head), static_cast<HeadState>(state));
  } catch (const DimensionError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace deephash
