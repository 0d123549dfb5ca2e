#include "segforge/model_zoo.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "binio.hpp"

namespace segforge {

const char* fcn_variant_name(FcnVariant v) {
  switch (v) {
    case FcnVariant::Fcn32s: return "fcn32s";
    case FcnVariant::Fcn16s: return "fcn16s";
    case FcnVariant::Fcn8s: return "fcn8s";
  }
  return "?";
}

std::optional<FcnVariant> fcn_variant_from_name(const std::string& s) {
  if (s == "fcn32s") return FcnVariant::Fcn32s;
  if (s == "fcn16s") return FcnVariant::Fcn16s;
  if (s == "fcn8s") return FcnVariant::Fcn8s;
  return std::nullopt;
}

namespace {

// Box-Muller over mt19937_64. std::normal_distribution is implementation
// defined, this is not.
class NormalSampler {
 public:
  explicit NormalSampler(uint64_t seed) : rng_(seed) {}

  double next() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.141592653589793 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  double uniform() { return static_cast<double>(rng_() >> 11) * (1.0 / 9007199254740992.0); }
  std::mt19937_64 rng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

Tensor init_tensor(std::vector<int64_t> shape, const std::string& name, const InitSpec& init) {
  Tensor t = Tensor::zeros(std::move(shape));
  if (init.mode == InitSpec::Mode::SeededNormal) {
    NormalSampler sampler(detail::fnv1a64(name) ^ init.seed);
    for (float& v : t.f32)
      v = static_cast<float>(init.mean + init.stddev * sampler.next());
  }
  return t;
}

struct NetBuilder {
  Graph& g;
  const InitSpec& init;

  // conv 3x3/1x1 + bias (+ relu). Returns the id producing the layer output.
  NodeId conv(const std::string& name, NodeId x, int64_t kh, int64_t kw, int64_t cin,
              int64_t cout, bool relu) {
    const NodeId w = g.add_const(name + "/weights", init_tensor({kh, kw, cin, cout},
                                                                name + "/weights", init));
    Node conv_node;
    conv_node.kind = OpKind::Conv2D;
    conv_node.name = name;
    conv_node.inputs = {x, w};
    conv_node.attrs["stride"] = int64_t{1};
    const NodeId c = g.add(std::move(conv_node));
    const NodeId result = bias(name, c, cout);
    if (!relu) return result;
    Node r;
    r.kind = OpKind::Relu;
    r.name = name + "/relu";
    r.inputs = {result};
    return g.add(std::move(r));
  }

  NodeId conv_transpose(const std::string& name, NodeId x, int64_t k, int64_t stride,
                        int64_t cin, int64_t cout) {
    const NodeId w = g.add_const(name + "/weights", init_tensor({k, k, cin, cout},
                                                                name + "/weights", init));
    Node n;
    n.kind = OpKind::ConvTranspose2D;
    n.name = name;
    n.inputs = {x, w};
    n.attrs["stride"] = stride;
    const NodeId c = g.add(std::move(n));
    return bias(name, c, cout);
  }

  NodeId bias(const std::string& name, NodeId x, int64_t channels) {
    const NodeId b = g.add_const(name + "/bias", init_tensor({channels}, name + "/bias", init));
    Node n;
    n.kind = OpKind::BiasAdd;
    n.name = name + "/bias_add";
    n.inputs = {x, b};
    return g.add(std::move(n));
  }

  NodeId pool(const std::string& name, NodeId x) {
    Node n;
    n.kind = OpKind::MaxPool2x2;
    n.name = name;
    n.inputs = {x};
    return g.add(std::move(n));
  }

  NodeId add(const std::string& name, NodeId a, NodeId b) {
    Node n;
    n.kind = OpKind::Add;
    n.name = name;
    n.inputs = {a, b};
    return g.add(std::move(n));
  }

  NodeId identity(const std::string& name, NodeId x) {
    Node n;
    n.kind = OpKind::Identity;
    n.name = name;
    n.inputs = {x};
    return g.add(std::move(n));
  }
};

void check_dims(int64_t h, int64_t w, int64_t classes) {
  if (h < 32 || w < 32 || h % 32 != 0 || w % 32 != 0)
    throw std::invalid_argument("input " + std::to_string(h) + "x" + std::to_string(w) +
                                " must be divisible by 32");
  if (classes < 2) throw std::invalid_argument("classes must be >= 2");
}

}  // namespace

Graph build_encoder(int64_t h, int64_t w, int64_t classes, const InitSpec& init) {
  check_dims(h, w, classes);
  Graph g;
  g.name = "fcn_encoder";
  NetBuilder b{g, init};

  Node input;
  input.kind = OpKind::Input;
  input.name = "input";
  input.attrs["shape"] = std::vector<int64_t>{h, w, 3};
  NodeId x = g.add(std::move(input));

  x = b.conv("conv1_1", x, 3, 3, 3, 64, true);
  x = b.conv("conv1_2", x, 3, 3, 64, 64, true);
  x = b.pool("pool1", x);
  x = b.conv("conv2_1", x, 3, 3, 64, 128, true);
  x = b.conv("conv2_2", x, 3, 3, 128, 128, true);
  x = b.pool("pool2", x);
  x = b.conv("conv3_1", x, 3, 3, 128, 256, true);
  x = b.conv("conv3_2", x, 3, 3, 256, 256, true);
  x = b.conv("conv3_3", x, 3, 3, 256, 256, true);
  x = b.pool("pool3", x);
  x = b.conv("conv4_1", x, 3, 3, 256, 512, true);
  x = b.conv("conv4_2", x, 3, 3, 512, 512, true);
  x = b.conv("conv4_3", x, 3, 3, 512, 512, true);
  x = b.pool("pool4", x);
  x = b.conv("conv5_1", x, 3, 3, 512, 512, true);
  x = b.conv("conv5_2", x, 3, 3, 512, 512, true);
  x = b.conv("conv5_3", x, 3, 3, 512, 512, true);
  x = b.pool("pool5", x);
  x = b.conv("conv6", x, 1, 1, 512, 4096, true);
  x = b.conv("conv7", x, 1, 1, 4096, 4096, true);
  x = b.conv("conv1by1", x, 1, 1, 4096, classes, false);
  x = b.identity("score", x);

  g.outputs = {x};
  return g;
}

Graph build_fcn(FcnVariant variant, int64_t h, int64_t w, int64_t classes, const InitSpec& init) {
  Graph g = build_encoder(h, w, classes, init);
  g.name = fcn_variant_name(variant);
  NetBuilder b{g, init};

  const NodeId score = *g.find_by_name("score");
  const NodeId pool4 = *g.find_by_name("pool4");
  const NodeId pool3 = *g.find_by_name("pool3");

  NodeId x = score;
  switch (variant) {
    case FcnVariant::Fcn8s: {
      x = b.conv_transpose("up4", x, 4, 2, classes, 512);
      x = b.add("skip4", x, pool4);
      x = b.conv_transpose("up3", x, 4, 2, 512, 256);
      x = b.add("skip3", x, pool3);
      x = b.conv_transpose("upscore", x, 16, 8, 256, classes);
      break;
    }
    case FcnVariant::Fcn16s: {
      x = b.conv_transpose("up4", x, 4, 2, classes, 512);
      x = b.add("skip4", x, pool4);
      x = b.conv_transpose("upscore", x, 16, 16, 512, classes);
      break;
    }
    case FcnVariant::Fcn32s: {
      x = b.conv_transpose("upscore", x, 32, 32, classes, classes);
      break;
    }
  }
  x = b.identity("output", x);
  g.outputs = {x};
  return g;
}

}  // namespace segforge
