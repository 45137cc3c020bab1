#include "deephash/netconfig.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "deephash/errors.hpp"

namespace deephash {

namespace {

struct KindName {
  LayerKind kind;
  const char* name;
};

constexpr KindName kKindNames[] = {
    {LayerKind::data, "data"},
    {LayerKind::convolution, "convolution"},
    {LayerKind::max_pool, "max-pool"},
    {LayerKind::avg_pool, "avg-pool"},
    {LayerKind::inner_product, "inner-product"},
    {LayerKind::relu, "relu"},
    {LayerKind::lrn, "lrn"},
    {LayerKind::softmax, "softmax"},
    {LayerKind::hash_head, "hash-head"},
};

LayerKind kind_from_name(std::string_view name, std::size_t line) {
  for (const auto& kn : kKindNames)
    if (name == kn.name) return kn.kind;
  throw ConfigError("net config line " + std::to_string(line) + ": unknown layer kind '" +
                    std::string(name) + "'");
}

std::size_t parse_count(std::string_view value, std::string_view key, std::size_t line) {
  std::size_t out = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw ConfigError("net config line " + std::to_string(line) + ": bad value for " +
                      std::string(key));
  }
  return out;
}

double parse_real(std::string_view value, std::string_view key, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(std::string(value), &used);
    if (used != value.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("net config line " + std::to_string(line) + ": bad value for " +
                      std::string(key));
  }
}

void require(bool ok, std::size_t line, const std::string& what) {
  if (!ok) throw ConfigError("net config line " + std::to_string(line) + ": " + what);
}

void validate_spec(const LayerSpec& s, std::size_t line) {
  switch (s.kind) {
    case LayerKind::data:
      require(s.channels > 0 && s.height > 0 && s.width > 0, line,
              "data needs positive channels, height and width");
      break;
    case LayerKind::convolution:
      require(s.outputs > 0 && s.kernel > 0 && s.stride > 0, line,
              "convolution needs positive outputs, kernel and stride");
      break;
    case LayerKind::max_pool:
    case LayerKind::avg_pool:
      require(s.kernel > 0 && s.stride > 0, line, "pooling needs positive kernel and stride");
      require(s.pad < s.kernel, line, "pooling pad must be smaller than the kernel");
      break;
    case LayerKind::inner_product:
      require(s.outputs > 0, line, "inner-product needs positive outputs");
      break;
    case LayerKind::lrn:
      require(s.local_size % 2 == 1, line, "lrn size must be odd");
      require(s.k > 0.0 && s.alpha >= 0.0 && s.beta >= 0.0, line, "lrn constants out of range");
      break;
    case LayerKind::softmax:
      require(s.outputs >= 2, line, "softmax needs at least 2 classes");
      break;
    case LayerKind::hash_head:
      require(s.outputs >= 1, line, "hash-head needs at least 1 bit");
      break;
    case LayerKind::relu:
      break;
  }
}

void validate_order(const NetConfig& config) {
  if (config.layers.empty() || config.layers.front().kind != LayerKind::data) {
    throw ConfigError("net config must start with a data layer");
  }
  bool in_heads = false;
  std::size_t softmax = 0;
  std::size_t hash = 0;
  std::size_t features = 0;
  for (std::size_t i = 1; i < config.layers.size(); ++i) {
    const auto kind = config.layers[i].kind;
    if (kind == LayerKind::data) throw ConfigError("only the first layer may be data");
    if (kind == LayerKind::softmax || kind == LayerKind::hash_head) {
      in_heads = true;
      (kind == LayerKind::softmax ? softmax : hash)++;
    } else if (in_heads) {
      throw ConfigError(std::string("feature layer ") + layer_kind_name(kind) +
                        " declared after a head layer");
    } else {
      ++features;
    }
  }
  if (softmax > 1 || hash > 1) throw ConfigError("at most one softmax and one hash-head layer");
  if (features == 0) throw ConfigError("net config declares no feature layers");
}

}  // namespace

const char* layer_kind_name(LayerKind kind) {
  for (const auto& kn : kKindNames)
    if (kn.kind == kind) return kn.name;
  return "?";
}

const LayerSpec& NetConfig::data() const {
  if (layers.empty() || layers.front().kind != LayerKind::data) {
    throw ConfigError("net config has no data layer");
  }
  return layers.front();
}

std::vector<LayerSpec> NetConfig::feature_layers() const {
  std::vector<LayerSpec> out;
  for (std::size_t i = 1; i < layers.size(); ++i) {
    if (layers[i].kind == LayerKind::softmax || layers[i].kind == LayerKind::hash_head) continue;
    out.push_back(layers[i]);
  }
  return out;
}

std::size_t NetConfig::classes() const {
  for (const auto& l : layers)
    if (l.kind == LayerKind::softmax) return l.outputs;
  return 0;
}

std::size_t NetConfig::bits() const {
  for (const auto& l : layers)
    if (l.kind == LayerKind::hash_head) return l.outputs;
  return 0;
}

void NetConfig::set_bits(std::size_t bits) {
  if (bits == 0) throw ConfigError("hash-head needs at least 1 bit");
  for (auto& l : layers) {
    if (l.kind == LayerKind::hash_head) {
      l.outputs = bits;
      return;
    }
  }
  LayerSpec head;
  head.kind = LayerKind::hash_head;
  head.outputs = bits;
  layers.push_back(head);
}

void NetConfig::set_classes(std::size_t classes) {
  if (classes < 2) throw ConfigError("softmax needs at least 2 classes");
  for (auto& l : layers) {
    if (l.kind == LayerKind::softmax) {
      l.outputs = classes;
      return;
    }
  }
  LayerSpec head;
  head.kind = LayerKind::softmax;
  head.outputs = classes;
  // Keep the hash head last.
  auto it = layers.end();
  if (!layers.empty() && layers.back().kind == LayerKind::hash_head) --it;
  layers.insert(it, head);
}

NetConfig parse_net_config(std::string_view text) {
  NetConfig config;
  bool saw_version = false;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    std::istringstream words(raw);
    std::string head;
    if (!(words >> head)) continue;

    if (head == "version") {
      std::string v;
      words >> v;
      const auto version = parse_count(v, "version", line_no);
      if (version != 1) {
        throw ConfigError("net config line " + std::to_string(line_no) +
                          ": unsupported version " + v);
      }
      config.version = 1;
      saw_version = true;
      continue;
    }
    if (!saw_version) throw ConfigError("net config must begin with 'version 1'");

    LayerSpec spec;
    spec.kind = kind_from_name(head, line_no);
    std::string token;
    while (words >> token) {
      const auto eq = token.find('=');
      if (eq == std::string::npos) {
        throw ConfigError("net config line " + std::to_string(line_no) + ": expected key=value, got '" +
                          token + "'");
      }
      const std::string key = token.substr(0, eq);
      const std::string_view value = std::string_view(token).substr(eq + 1);
      if (key == "channels") spec.channels = parse_count(value, key, line_no);
      else if (key == "height") spec.height = parse_count(value, key, line_no);
      else if (key == "width") spec.width = parse_count(value, key, line_no);
      else if (key == "outputs" || key == "classes" || key == "bits")
        spec.outputs = parse_count(value, key, line_no);
      else if (key == "kernel") spec.kernel = parse_count(value, key, line_no);
      else if (key == "stride") spec.stride = parse_count(value, key, line_no);
      else if (key == "pad") spec.pad = parse_count(value, key, line_no);
      else if (key == "size") spec.local_size = parse_count(value, key, line_no);
      else if (key == "alpha") spec.alpha = parse_real(value, key, line_no);
      else if (key == "beta") spec.beta = parse_real(value, key, line_no);
      else if (key == "k") spec.k = parse_real(value, key, line_no);
      else {
        throw ConfigError("net config line " + std::to_string(line_no) + ": unknown key '" + key +
                          "' for " + head);
      }
    }
    validate_spec(spec, line_no);
    config.layers.push_back(spec);
  }
  if (!saw_version) throw ConfigError("net config must begin with 'version 1'");
  validate_order(config);
  return config;
}

NetConfig load_net_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open net config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_net_config(buf.str());
}

std::string format_net_config(const NetConfig& config) {
  std::ostringstream os;
  os << "version " << config.version << '\n';
  os.precision(17);
  for (const auto& s : config.layers) {
    os << layer_kind_name(s.kind);
    switch (s.kind) {
      case LayerKind::data:
        os << " channels=" << s.channels << " height=" << s.height << " width=" << s.width;
        break;
      case LayerKind::convolution:
        os << " outputs=" << s.outputs << " kernel=" << s.kernel << " stride=" << s.stride
           << " pad=" << s.pad;
        break;
      case LayerKind::max_pool:
      case LayerKind::avg_pool:
        os << " kernel=" << s.kernel << " stride=" << s.stride << " pad=" << s.pad;
        break;
      case LayerKind::inner_product:
        os << " outputs=" << s.outputs;
        break;
      case LayerKind::lrn:
        os << " size=" << s.local_size << " alpha=" << s.alpha << " beta=" << s.beta
           << " k=" << s.k;
        break;
      case LayerKind::softmax:
        os << " classes=" << s.outputs;
        break;
      case LayerKind::hash_head:
        os << " bits=" << s.outputs;
        break;
      case LayerKind::relu:
        break;
    }
    os << '\n';
  }
  return os.str();
}

NetConfig mnist_net_config(std::size_t bits) {
  return parse_net_config(
      "version 1\n"
      "data channels=1 height=28 width=28\n"
      "convolution outputs=20 kernel=5 stride=1\n"
      "max-pool kernel=2 stride=2\n"
      "convolution outputs=50 kernel=5 stride=1\n"
      "max-pool kernel=2 stride=2\n"
      "inner-product outputs=500\n"
      "relu\n"
      "softmax classes=10\n"
      "hash-head bits=" +
      std::to_string(bits) + "\n");
}

NetConfig cifar_net_config(std::size_t bits, std::size_t classes) {
  return parse_net_config(
      "version 1\n"
      "data channels=3 height=32 width=32\n"
      "convolution outputs=32 kernel=5 stride=1 pad=2\n"
      "max-pool kernel=3 stride=2\n"
      "relu\n"
      "lrn size=3 alpha=5e-05 beta=0.75 k=1\n"
      "convolution outputs=32 kernel=5 stride=1 pad=2\n"
      "relu\n"
      "avg-pool kernel=3 stride=2\n"
      "lrn size=3 alpha=5e-05 beta=0.75 k=1\n"
      "convolution outputs=64 kernel=5 stride=1 pad=2\n"
      "relu\n"
      "avg-pool kernel=3 stride=2\n"
      "softmax classes=" +
      std::to_string(classes) + "\nhash-head bits=" + std::to_string(bits) + "\n");
}

}  // namespace deephash
