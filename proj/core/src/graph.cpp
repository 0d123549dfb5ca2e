#include "segforge/graph.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace segforge {

namespace {
constexpr const char* kOpNames[] = {
    "Const",   "Input",    "Conv2D", "ConvTranspose2D", "BiasAdd",
    "Relu",    "MaxPool2x2", "Add",  "Identity",        "Softmax",
    "ArgMax",  "ResizeNearest", "BatchNormFrozen", "FusedConvBiasRelu",
};
constexpr size_t kOpCount = sizeof(kOpNames) / sizeof(kOpNames[0]);
}  // namespace

const char* op_kind_name(OpKind k) {
  const auto i = static_cast<size_t>(k);
  return i < kOpCount ? kOpNames[i] : "Unknown";
}

std::optional<OpKind> op_kind_from_name(const std::string& name) {
  for (size_t i = 0; i < kOpCount; ++i)
    if (name == kOpNames[i]) return static_cast<OpKind>(i);
  return std::nullopt;
}

bool attr_equal(const AttrValue& a, const AttrValue& b) { return a == b; }

int64_t Node::attr_int(const std::string& key) const {
  const auto it = attrs.find(key);
  if (it == attrs.end())
    throw std::runtime_error("node '" + name + "' is missing attribute '" + key + "'");
  if (const auto* v = std::get_if<int64_t>(&it->second)) return *v;
  throw std::runtime_error("node '" + name + "' attribute '" + key + "' is not an integer");
}

int64_t Node::attr_int_or(const std::string& key, int64_t fallback) const {
  const auto it = attrs.find(key);
  if (it == attrs.end()) return fallback;
  if (const auto* v = std::get_if<int64_t>(&it->second)) return *v;
  return fallback;
}

NodeId Graph::add(Node n) {
  if (!nodes.empty()) next_id_ = std::max(next_id_, nodes.rbegin()->first + 1);
  n.id = next_id_++;
  const NodeId id = n.id;
  nodes.emplace(id, std::move(n));
  return id;
}

NodeId Graph::add_const(std::string name, Tensor payload) {
  Node n;
  n.kind = OpKind::Const;
  n.name = std::move(name);
  n.payload = std::move(payload);
  return add(std::move(n));
}

const Node& Graph::node(NodeId id) const {
  const auto it = nodes.find(id);
  if (it == nodes.end())
    throw std::runtime_error("graph '" + name + "' has no node with id " + std::to_string(id));
  return it->second;
}

Node& Graph::node(NodeId id) {
  return const_cast<Node&>(static_cast<const Graph*>(this)->node(id));
}

std::optional<NodeId> Graph::find_by_name(const std::string& node_name) const {
  for (const auto& [id, n] : nodes)
    if (n.name == node_name) return id;
  return std::nullopt;
}

int64_t Graph::payload_bytes() const {
  int64_t total = 0;
  for (const auto& [id, n] : nodes)
    if (n.payload) total += static_cast<int64_t>(n.payload->byte_size());
  return total;
}

bool Graph::operator==(const Graph& other) const {
  if (name != other.name || outputs != other.outputs || nodes.size() != other.nodes.size())
    return false;
  for (auto a = nodes.begin(), b = other.nodes.begin(); a != nodes.end(); ++a, ++b) {
    const Node& x = a->second;
    const Node& y = b->second;
    if (x.id != y.id || x.kind != y.kind || x.name != y.name || x.inputs != y.inputs ||
        x.attrs != y.attrs || x.payload.has_value() != y.payload.has_value())
      return false;
    if (x.payload && !x.payload->same_bits(*y.payload)) return false;
  }
  return true;
}

std::map<NodeId, std::vector<NodeId>> consumers_of(const Graph& g) {
  std::map<NodeId, std::vector<NodeId>> out;
  for (const auto& [id, n] : g.nodes) out[id];  // every node gets an entry
  for (const auto& [id, n] : g.nodes)
    for (NodeId in : n.inputs)
      if (g.has_node(in)) out[in].push_back(id);
  return out;
}

std::vector<Diagnostic> validate(const Graph& g) {
  std::vector<Diagnostic> diags;
  if (g.outputs.empty()) diags.push_back({0, true, "graph has no outputs"});
  for (NodeId out : g.outputs)
    if (!g.has_node(out))
      diags.push_back({out, true, "output references missing node id " + std::to_string(out)});

  std::unordered_map<std::string, NodeId> names;
  for (const auto& [id, n] : g.nodes) {
    for (NodeId in : n.inputs)
      if (!g.has_node(in))
        diags.push_back({id, false, "node '" + n.name + "' references missing node id " +
                                        std::to_string(in)});
    const auto [it, inserted] = names.emplace(n.name, id);
    if (!inserted)
      diags.push_back({id, false, "duplicate node name '" + n.name + "' (also node " +
                                      std::to_string(it->second) + ")"});
    if (n.kind == OpKind::Const && !n.payload)
      diags.push_back({id, false, "Const node '" + n.name + "' has no payload"});
    if (n.kind != OpKind::Const && n.payload)
      diags.push_back({id, false, "non-Const node '" + n.name + "' carries a payload"});
  }

  // Cycle detection via iterative DFS coloring.
  std::unordered_map<NodeId, int> color;  // 0 white, 1 gray, 2 black
  for (const auto& [start, n0] : g.nodes) {
    if (color[start] != 0) continue;
    std::vector<std::pair<NodeId, size_t>> stack{{start, 0}};
    color[start] = 1;
    while (!stack.empty()) {
      auto& [id, idx] = stack.back();
      const Node& n = g.node(id);
      if (idx < n.inputs.size()) {
        const NodeId in = n.inputs[idx++];
        if (!g.has_node(in)) continue;
        if (color[in] == 1) {
          diags.push_back({id, false, "cycle through node '" + n.name + "' and node id " +
                                          std::to_string(in)});
          continue;
        }
        if (color[in] == 0) {
          color[in] = 1;
          stack.push_back({in, 0});
        }
      } else {
        color[id] = 2;
        stack.pop_back();
      }
    }
  }
  return diags;
}

std::vector<NodeId> topo_sort(const Graph& g) {
  std::map<NodeId, size_t> pending;  // unresolved input count
  const auto consumers = consumers_of(g);
  std::set<NodeId> ready;
  for (const auto& [id, n] : g.nodes) {
    size_t count = 0;
    for (NodeId in : n.inputs)
      if (g.has_node(in)) ++count;
    pending[id] = count;
    if (count == 0) ready.insert(id);
  }

  std::vector<NodeId> order;
  order.reserve(g.nodes.size());
  while (!ready.empty()) {
    const NodeId id = *ready.begin();
    ready.erase(ready.begin());
    order.push_back(id);
    for (NodeId c : consumers.at(id))
      if (--pending[c] == 0) ready.insert(c);
  }

  if (order.size() != g.nodes.size()) {
    // Walk the leftover nodes to surface one concrete cycle.
    std::string cycle;
    for (const auto& [id, count] : pending) {
      if (count == 0) continue;
      std::unordered_set<NodeId> seen;
      NodeId cur = id;
      while (seen.insert(cur).second) {
        for (NodeId in : g.node(cur).inputs) {
          if (g.has_node(in) && pending[in] > 0) {
            cur = in;
            break;
          }
        }
      }
      NodeId walk = cur;
      do {
        cycle += "'" + g.node(walk).name + "' -> ";
        for (NodeId in : g.node(walk).inputs) {
          if (g.has_node(in) && pending[in] > 0) {
            walk = in;
            break;
          }
        }
      } while (walk != cur);
      cycle += "'" + g.node(cur).name + "'";
      break;
    }
    throw std::runtime_error("topo_sort: graph contains a cycle: " + cycle);
  }
  return order;
}

namespace {

const TensorSpec& input_of(const Node& n, size_t i, const std::map<NodeId, TensorSpec>& specs) {
  if (i >= n.inputs.size())
    throw std::runtime_error("node '" + n.name + "' (" + op_kind_name(n.kind) +
                             ") is missing input " + std::to_string(i));
  return specs.at(n.inputs[i]);
}

std::vector<int64_t> weight_shape(const Node& n, size_t i,
                                  const std::map<NodeId, TensorSpec>& specs) {
  const TensorSpec& w = input_of(n, i, specs);
  if (w.shape.size() != 4)
    throw std::runtime_error("node '" + n.name + "': weights must be rank 4 KHxKWxCinxCout, got " +
                             shape_to_string(w.shape));
  return w.shape;
}

}  // namespace

std::map<NodeId, TensorSpec> infer_shapes(const Graph& g, const TensorSpec& input_spec) {
  std::map<NodeId, TensorSpec> specs;
  for (const NodeId id : topo_sort(g)) {
    const Node& n = g.node(id);
    TensorSpec spec;
    switch (n.kind) {
      case OpKind::Const:
        if (!n.payload) throw std::runtime_error("Const node '" + n.name + "' has no payload");
        spec.shape = n.payload->shape;
        spec.dtype = n.payload->dtype;
        break;
      case OpKind::Input: {
        if (!input_spec.shape.empty()) {
          spec = input_spec;
        } else {
          const auto it = n.attrs.find("shape");
          if (it == n.attrs.end() || !std::holds_alternative<std::vector<int64_t>>(it->second))
            throw std::runtime_error("Input node '" + n.name +
                                     "' has no shape attr and no input_spec was given");
          spec.shape = std::get<std::vector<int64_t>>(it->second);
        }
        break;
      }
      case OpKind::Conv2D:
      case OpKind::FusedConvBiasRelu: {
        const TensorSpec& x = input_of(n, 0, specs);
        const auto w = weight_shape(n, 1, specs);
        if (x.shape.size() != 3)
          throw std::runtime_error("node '" + n.name + "': conv input must be rank 3, got " +
                                   shape_to_string(x.shape));
        if (w[2] != x.shape[2])
          throw std::runtime_error("node '" + n.name + "': weight Cin " + std::to_string(w[2]) +
                                   " != input channels " + std::to_string(x.shape[2]));
        const int64_t stride = n.attr_int_or("stride", 1);
        if (stride != 1)
          throw std::runtime_error("node '" + n.name +
                                   "': only stride-1 same-padding Conv2D is supported");
        spec.shape = {x.shape[0], x.shape[1], w[3]};
        break;
      }
      case OpKind::ConvTranspose2D: {
        const TensorSpec& x = input_of(n, 0, specs);
        const auto w = weight_shape(n, 1, specs);
        if (x.shape.size() != 3)
          throw std::runtime_error("node '" + n.name + "': input must be rank 3");
        if (w[2] != x.shape[2])
          throw std::runtime_error("node '" + n.name + "': weight Cin " + std::to_string(w[2]) +
                                   " != input channels " + std::to_string(x.shape[2]));
        const int64_t stride = n.attr_int("stride");
        if (stride < 1) throw std::runtime_error("node '" + n.name + "': stride must be >= 1");
        spec.shape = {x.shape[0] * stride, x.shape[1] * stride, w[3]};
        break;
      }
      case OpKind::BiasAdd: {
        const TensorSpec& x = input_of(n, 0, specs);
        const TensorSpec& b = input_of(n, 1, specs);
        if (b.elem_count() != x.shape.back())
          throw std::runtime_error("node '" + n.name + "': bias length " +
                                   std::to_string(b.elem_count()) + " != channels " +
                                   std::to_string(x.shape.back()));
        spec = x;
        break;
      }
      case OpKind::Relu:
      case OpKind::Identity:
      case OpKind::Softmax:
        spec = input_of(n, 0, specs);
        break;
      case OpKind::BatchNormFrozen:
        spec = input_of(n, 0, specs);
        break;
      case OpKind::MaxPool2x2: {
        const TensorSpec& x = input_of(n, 0, specs);
        if (x.shape.size() != 3)
          throw std::runtime_error("node '" + n.name + "': input must be rank 3");
        spec.shape = {x.shape[0] / 2, x.shape[1] / 2, x.shape[2]};
        break;
      }
      case OpKind::Add: {
        const TensorSpec& a = input_of(n, 0, specs);
        const TensorSpec& b = input_of(n, 1, specs);
        if (a.shape != b.shape)
          throw std::runtime_error("node '" + n.name + "': Add operand shapes differ, " +
                                   shape_to_string(a.shape) + " vs " + shape_to_string(b.shape));
        spec = a;
        break;
      }
      case OpKind::ArgMax: {
        const TensorSpec& x = input_of(n, 0, specs);
        if (x.shape.size() != 3)
          throw std::runtime_error("node '" + n.name + "': input must be rank 3");
        spec.shape = {x.shape[0], x.shape[1], 1};
        break;
      }
      case OpKind::ResizeNearest: {
        const TensorSpec& x = input_of(n, 0, specs);
        if (x.shape.size() != 3)
          throw std::runtime_error("node '" + n.name + "': input must be rank 3");
        spec.shape = {n.attr_int("out_h"), n.attr_int("out_w"), x.shape[2]};
        break;
      }
    }
    specs.emplace(id, std::move(spec));
  }
  return specs;
}

}  // namespace segforge
