#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "segforge/tensor.hpp"

namespace segforge {

using NodeId = uint32_t;

enum class OpKind : uint8_t {
  Const = 0,
  Input = 1,
  Conv2D = 2,
  ConvTranspose2D = 3,
  BiasAdd = 4,
  Relu = 5,
  MaxPool2x2 = 6,
  Add = 7,
  Identity = 8,
  Softmax = 9,
  ArgMax = 10,
  ResizeNearest = 11,
  BatchNormFrozen = 12,
  FusedConvBiasRelu = 13,
};

const char* op_kind_name(OpKind k);
std::optional<OpKind> op_kind_from_name(const std::string& name);
inline bool is_conv_like(OpKind k) {
  return k == OpKind::Conv2D || k == OpKind::ConvTranspose2D || k == OpKind::FusedConvBiasRelu;
}

// Scalar / list attribute value. Attr maps are ordered so serialization is
// deterministic.
using AttrValue = std::variant<int64_t, double, std::vector<int64_t>>;
using AttrMap = std::map<std::string, AttrValue>;

bool attr_equal(const AttrValue& a, const AttrValue& b);

struct Node {
  NodeId id = 0;
  OpKind kind = OpKind::Const;
  std::string name;
  std::vector<NodeId> inputs;
  AttrMap attrs;
  std::optional<Tensor> payload;  // Const nodes only

  int64_t attr_int(const std::string& key) const;
  int64_t attr_int_or(const std::string& key, int64_t fallback) const;
  bool has_attr(const std::string& key) const { return attrs.count(key) != 0; }
};

struct TensorSpec {
  std::vector<int64_t> shape;
  DType dtype = DType::Float32;

  int64_t elem_count() const { return shape_elem_count(shape); }
  int64_t byte_size() const {
    return elem_count() * static_cast<int64_t>(dtype_size(dtype));
  }
  bool operator==(const TensorSpec&) const = default;
};

// Dataflow graph. Value semantics: passes take a Graph and return a new one.
struct Graph {
  std::string name;
  std::map<NodeId, Node> nodes;  // keyed and iterated by ascending id
  std::vector<NodeId> outputs;

  NodeId add(Node n);  // assigns the next free id, returns it
  NodeId add_const(std::string name, Tensor payload);

  const Node& node(NodeId id) const;
  Node& node(NodeId id);
  bool has_node(NodeId id) const { return nodes.count(id) != 0; }
  std::optional<NodeId> find_by_name(const std::string& name) const;

  // Total Const payload bytes; the quantity Table-7-style size accounting
  // tracks across passes.
  int64_t payload_bytes() const;

  bool operator==(const Graph& other) const;

 private:
  NodeId next_id_ = 0;
};

struct Diagnostic {
  NodeId node_id = 0;  // 0 may also be a real node; `graph_level` disambiguates
  bool graph_level = false;
  std::string reason;
};

// Structural validation: non-empty outputs, resolvable input references,
// acyclicity, unique names, Const <=> payload. Returns an empty list iff the
// graph is well formed.
std::vector<Diagnostic> validate(const Graph& g);

// Deterministic topological order (Kahn, ties broken by ascending id).
// Throws std::runtime_error naming one cycle if the graph is cyclic.
std::vector<NodeId> topo_sort(const Graph& g);

// Per-node output specs. `input_spec` applies to every Input node when its
// shape is non-empty; otherwise Input nodes fall back to their "shape" attr.
std::map<NodeId, TensorSpec> infer_shapes(const Graph& g, const TensorSpec& input_spec = {});

// Consumer map: node id -> ids of nodes that list it as an input.
std::map<NodeId, std::vector<NodeId>> consumers_of(const Graph& g);

}  // namespace segforge
