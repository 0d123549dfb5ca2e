#pragma once

// Shared fixtures: deterministic random tensors/graphs and a scratch dir.
// The graph generator emits small valid graphs covering every op kind plus
// the shapes the rewrite passes look for (identity caps, dead branches,
// duplicate constants, const-only cones, conv->bias->relu chains, frozen
// batch norms).

#include <unistd.h>

#include <filesystem>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "segforge/executor.hpp"
#include "segforge/graph.hpp"

namespace testutil {

using namespace segforge;

inline std::filesystem::path scratch_dir() {
  static const std::filesystem::path dir = [] {
    auto p = std::filesystem::temp_directory_path() /
             ("segforge-tests-" + std::to_string(::getpid()));
    std::filesystem::create_directories(p);
    return p;
  }();
  return dir;
}

inline std::string scratch_file(const std::string& name) {
  return (scratch_dir() / name).string();
}

inline Tensor random_tensor(std::vector<int64_t> shape, std::mt19937_64& rng,
                            float lo = -1.0f, float hi = 1.0f) {
  Tensor t = Tensor::zeros(std::move(shape));
  const double span = static_cast<double>(hi) - lo;
  for (float& v : t.f32)
    v = lo + static_cast<float>((rng() >> 11) * (1.0 / 9007199254740992.0) * span);
  return t;
}

struct RandomGraph {
  Graph graph;
  Tensor input;  // feed as {"input", input}
};

// Builds a random valid graph of 4-14 ops over one Input node.
inline RandomGraph random_graph(uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto pick = [&](int64_t n) { return static_cast<int64_t>(rng() % static_cast<uint64_t>(n)); };

  RandomGraph out;
  Graph& g = out.graph;
  g.name = "random_" + std::to_string(seed);

  const int64_t h = 4 + 2 * pick(3);  // 4, 6, 8
  const int64_t w = 4 + 2 * pick(3);
  const int64_t c = 1 + pick(3);
  out.input = random_tensor({h, w, c}, rng);

  Node in;
  in.kind = OpKind::Input;
  in.name = "input";
  in.attrs["shape"] = std::vector<int64_t>{h, w, c};
  const NodeId input_id = g.add(std::move(in));

  struct Value {
    NodeId id;
    std::vector<int64_t> shape;
  };
  std::vector<Value> values{{input_id, {h, w, c}}};
  int name_counter = 0;
  auto fresh = [&](const char* base) { return std::string(base) + std::to_string(name_counter++); };

  auto add_node = [&](OpKind kind, std::vector<NodeId> inputs, AttrMap attrs,
                      std::vector<int64_t> shape, const char* base) {
    Node n;
    n.kind = kind;
    n.name = fresh(base);
    n.inputs = std::move(inputs);
    n.attrs = std::move(attrs);
    const NodeId id = g.add(std::move(n));
    values.push_back({id, shape});
    return id;
  };

  const int ops = 4 + static_cast<int>(pick(11));
  for (int i = 0; i < ops; ++i) {
    const Value& x = values[static_cast<size_t>(pick(static_cast<int64_t>(values.size())))];
    switch (pick(9)) {
      case 0: {  // conv chain, sometimes with bias/relu/batchnorm
        const int64_t k = pick(2) ? 3 : 1;
        const int64_t cout = 1 + pick(4);
        const NodeId wid =
            g.add_const(fresh("w"), random_tensor({k, k, x.shape[2], cout}, rng, -0.5f, 0.5f));
        NodeId cur = add_node(OpKind::Conv2D, {x.id, wid}, {{"stride", int64_t{1}}},
                              {x.shape[0], x.shape[1], cout}, "conv");
        const auto conv_shape = values.back().shape;
        if (pick(2)) {
          const NodeId bid = g.add_const(fresh("b"), random_tensor({cout}, rng, -0.2f, 0.2f));
          cur = add_node(OpKind::BiasAdd, {cur, bid}, {}, conv_shape, "bias");
          if (pick(2)) cur = add_node(OpKind::Relu, {cur}, {}, conv_shape, "relu");
        } else if (pick(2)) {
          const NodeId gm = g.add_const(fresh("gamma"), random_tensor({cout}, rng, 0.5f, 1.5f));
          const NodeId bt = g.add_const(fresh("beta"), random_tensor({cout}, rng, -0.3f, 0.3f));
          const NodeId mn = g.add_const(fresh("mean"), random_tensor({cout}, rng, -0.3f, 0.3f));
          const NodeId vr = g.add_const(fresh("var"), random_tensor({cout}, rng, 0.5f, 1.5f));
          cur = add_node(OpKind::BatchNormFrozen, {cur, gm, bt, mn, vr},
                         {{"epsilon", 1e-5}}, conv_shape, "bn");
        }
        break;
      }
      case 1: {  // transpose conv
        const int64_t s = 1 + pick(2);
        const int64_t k = s + pick(2) * s;  // s or 2s
        const int64_t cout = 1 + pick(3);
        const NodeId wid =
            g.add_const(fresh("w"), random_tensor({k, k, x.shape[2], cout}, rng, -0.5f, 0.5f));
        add_node(OpKind::ConvTranspose2D, {x.id, wid}, {{"stride", s}},
                 {x.shape[0] * s, x.shape[1] * s, cout}, "upconv");
        break;
      }
      case 2:
        add_node(OpKind::Relu, {x.id}, {}, x.shape, "relu");
        break;
      case 3:
        add_node(OpKind::Identity, {x.id}, {}, x.shape, "alias");
        break;
      case 4:
        add_node(OpKind::Softmax, {x.id}, {}, x.shape, "softmax");
        break;
      case 5:
        if (x.shape[0] >= 2 && x.shape[1] >= 2)
          add_node(OpKind::MaxPool2x2, {x.id}, {},
                   {x.shape[0] / 2, x.shape[1] / 2, x.shape[2]}, "pool");
        break;
      case 6: {  // add with a same-shape constant
        const NodeId cid = g.add_const(fresh("c"), random_tensor(x.shape, rng));
        add_node(OpKind::Add, {x.id, cid}, {}, x.shape, "skip");
        break;
      }
      case 7: {  // const-only cone for fold_constants
        const std::vector<int64_t> shape{1 + pick(3), 1 + pick(3), 1 + pick(2)};
        const Tensor payload = random_tensor(shape, rng);
        const NodeId a = g.add_const(fresh("c"), payload);
        const NodeId b = pick(2) ? g.add_const(fresh("c"), payload)  // duplicate for merge
                                 : g.add_const(fresh("c"), random_tensor(shape, rng));
        const NodeId sum = add_node(OpKind::Add, {a, b}, {}, shape, "csum");
        if (pick(2)) add_node(OpKind::Relu, {sum}, {}, shape, "crelu");
        break;
      }
      case 8: {  // downscale resize
        const int64_t oh = 1 + pick(x.shape[0]);
        const int64_t ow = 1 + pick(x.shape[1]);
        add_node(OpKind::ResizeNearest, {x.id}, {{"out_h", oh}, {"out_w", ow}},
                 {oh, ow, x.shape[2]}, "resize");
        break;
      }
    }
  }

  // Dead side branch exercised by strip_unused_nodes.
  if (pick(2)) {
    const NodeId dc = g.add_const(fresh("dead"), random_tensor({2, 2, 1}, rng));
    add_node(OpKind::Relu, {dc}, {}, {2, 2, 1}, "deadrelu");
    values.pop_back();  // keep it out of the live pool
  }

  // Outputs: one or two sinks, occasionally capped by an Identity.
  const auto consumers = consumers_of(g);
  std::vector<NodeId> sinks;
  for (const Value& v : values)
    if (consumers.at(v.id).empty()) sinks.push_back(v.id);
  if (sinks.empty()) sinks.push_back(values.back().id);
  if (pick(2) && sinks.size() > 1) {
    g.outputs = {sinks[0], sinks[1]};
  } else {
    NodeId sink = sinks[0];
    if (pick(2)) {
      Node cap;
      cap.kind = OpKind::Identity;
      cap.name = fresh("out");
      cap.inputs = {sink};
      sink = g.add(std::move(cap));
    }
    g.outputs = {sink};
  }
  return out;
}

// Output tensors in graph-output order (pass rewrites may rename nodes, so
// positional comparison is the stable one).
inline std::vector<Tensor> run_ordered(const Graph& g, const std::map<std::string, Tensor>& inputs,
                                       const ExecOptions& opts = {}) {
  auto by_name = execute(g, inputs, nullptr, opts);
  std::vector<Tensor> ordered;
  for (const NodeId id : g.outputs) ordered.push_back(by_name.at(g.node(id).name));
  return ordered;
}

inline float max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape != b.shape) return std::numeric_limits<float>::infinity();
  float m = 0.0f;
  for (size_t i = 0; i < a.f32.size(); ++i) m = std::max(m, std::abs(a.f32[i] - b.f32[i]));
  return m;
}

}  // namespace testutil
