#include "segforge/passes.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "binio.hpp"
#include "segforge/executor.hpp"

namespace segforge {

namespace {

PassReport make_report(const std::string& name, const Graph& before, const Graph& after,
                       int64_t rewrites, std::string notes = "") {
  PassReport r;
  r.pass = name;
  r.nodes_before = static_cast<int64_t>(before.nodes.size());
  r.nodes_after = static_cast<int64_t>(after.nodes.size());
  r.payload_bytes_before = before.payload_bytes();
  r.payload_bytes_after = after.payload_bytes();
  r.rewrites = rewrites;
  r.notes = std::move(notes);
  return r;
}

// Rewrites every input reference and output entry through `remap`.
void remap_references(Graph& g, const std::unordered_map<NodeId, NodeId>& remap) {
  auto resolve = [&](NodeId id) {
    NodeId cur = id;
    auto it = remap.find(cur);
    while (it != remap.end()) {
      cur = it->second;
      it = remap.find(cur);
    }
    return cur;
  };
  for (auto& [id, n] : g.nodes)
    for (NodeId& in : n.inputs) in = resolve(in);
  for (NodeId& out : g.outputs) out = resolve(out);
}

std::set<NodeId> reachable_from_outputs(const Graph& g) {
  std::set<NodeId> live;
  std::vector<NodeId> stack(g.outputs.begin(), g.outputs.end());
  while (!stack.empty()) {
    const NodeId id = stack.back();
    stack.pop_back();
    if (!g.has_node(id) || !live.insert(id).second) continue;
    for (NodeId in : g.node(id).inputs) stack.push_back(in);
  }
  return live;
}

}  // namespace

PassResult add_default_attributes(const Graph& g) {
  Graph out = g;
  int64_t rewrites = 0;
  for (auto& [id, n] : out.nodes) {
    if (!is_conv_like(n.kind)) continue;
    if (!n.has_attr("stride")) {
      n.attrs["stride"] = int64_t{1};
      ++rewrites;
    }
    if (!n.has_attr("padding")) {
      n.attrs["padding"] = int64_t{0};  // 0 = same
      ++rewrites;
    }
  }
  return {std::move(out), make_report("add_default_attributes", g, out, rewrites)};
}

PassResult strip_unused_nodes(const Graph& g) {
  const std::set<NodeId> live = reachable_from_outputs(g);
  Graph out = g;
  int64_t removed = 0;
  for (auto it = out.nodes.begin(); it != out.nodes.end();) {
    if (live.count(it->first) == 0) {
      it = out.nodes.erase(it);
      ++removed;
    } else {
      ++it;
    }
  }
  return {std::move(out), make_report("strip_unused_nodes", g, out, removed)};
}

PassResult remove_identity_nodes(const Graph& g) {
  Graph out = g;
  std::unordered_map<NodeId, NodeId> remap;
  int64_t removed = 0;
  for (auto it = out.nodes.begin(); it != out.nodes.end();) {
    const Node& n = it->second;
    if (n.kind == OpKind::Identity && n.inputs.size() == 1) {
      remap[n.id] = n.inputs[0];
      it = out.nodes.erase(it);
      ++removed;
    } else {
      ++it;
    }
  }
  remap_references(out, remap);
  return {std::move(out), make_report("remove_identity_nodes", g, out, removed)};
}

namespace {

std::string node_signature(const Node& n) {
  detail::ByteWriter w;
  w.u8(static_cast<uint8_t>(n.kind));
  w.u32(static_cast<uint32_t>(n.inputs.size()));
  for (NodeId in : n.inputs) w.u32(in);
  w.u32(static_cast<uint32_t>(n.attrs.size()));
  for (const auto& [key, value] : n.attrs) {
    w.str(key);
    if (const auto* i = std::get_if<int64_t>(&value)) {
      w.u8(0);
      w.i64(*i);
    } else if (const auto* d = std::get_if<double>(&value)) {
      w.u8(1);
      w.f64(*d);
    } else {
      const auto& list = std::get<std::vector<int64_t>>(value);
      w.u8(2);
      w.u32(static_cast<uint32_t>(list.size()));
      for (int64_t v : list) w.i64(v);
    }
  }
  if (n.payload) {
    const Tensor& t = *n.payload;
    w.u8(1);
    w.u8(static_cast<uint8_t>(t.dtype));
    w.u32(static_cast<uint32_t>(t.shape.size()));
    for (int64_t d : t.shape) w.i64(d);
    if (t.dtype == DType::Quant8) {
      w.f32(t.quant.scale);
      w.f32(t.quant.minimum);
      w.bytes(t.q8.data(), t.q8.size());
    } else {
      w.bytes(t.f32.data(), t.f32.size() * sizeof(float));
    }
  } else {
    w.u8(0);
  }
  return w.data();
}

}  // namespace

PassResult merge_duplicate_nodes(const Graph& g) {
  Graph out = g;
  int64_t merges = 0;
  bool changed = true;
  while (changed) {
    changed = false;
    std::unordered_map<std::string, NodeId> seen;
    std::unordered_map<NodeId, NodeId> remap;
    for (const auto& [id, n] : out.nodes) {
      if (n.kind == OpKind::Input) continue;  // inputs are addressed by name
      const auto [it, inserted] = seen.emplace(node_signature(n), id);
      if (!inserted) remap[id] = it->second;
    }
    if (!remap.empty()) {
      for (const auto& [dup, keep] : remap) out.nodes.erase(dup);
      remap_references(out, remap);
      merges += static_cast<int64_t>(remap.size());
      changed = true;
    }
  }
  return {std::move(out), make_report("merge_duplicate_nodes", g, out, merges)};
}

PassResult fold_constants(const Graph& g) {
  // A node is const-evaluable when it is a Const or every input is.
  std::set<NodeId> evaluable;
  for (const NodeId id : topo_sort(g)) {
    const Node& n = g.node(id);
    if (n.kind == OpKind::Const) {
      evaluable.insert(id);
      continue;
    }
    if (n.kind == OpKind::Input || n.inputs.empty()) continue;
    bool all = true;
    for (NodeId in : n.inputs)
      if (evaluable.count(in) == 0) all = false;
    if (all) evaluable.insert(id);
  }

  const auto consumers = consumers_of(g);
  std::set<NodeId> output_set(g.outputs.begin(), g.outputs.end());
  std::vector<NodeId> frontier;  // non-Const evaluable nodes worth materializing
  for (const NodeId id : evaluable) {
    const Node& n = g.node(id);
    if (n.kind == OpKind::Const) continue;
    bool wanted = output_set.count(id) != 0;
    for (NodeId c : consumers.at(id))
      if (evaluable.count(c) == 0) wanted = true;
    if (wanted) frontier.push_back(id);
  }

  Graph out = g;
  int64_t folds = 0;
  std::string notes;
  for (const NodeId id : frontier) {
    // Evaluate the ancestor cone of this frontier node in isolation.
    Graph sub;
    sub.name = "fold";
    std::vector<NodeId> stack{id};
    std::set<NodeId> cone;
    while (!stack.empty()) {
      const NodeId cur = stack.back();
      stack.pop_back();
      if (!cone.insert(cur).second) continue;
      for (NodeId in : g.node(cur).inputs) stack.push_back(in);
    }
    for (const NodeId c : cone) sub.nodes.emplace(c, g.node(c));
    sub.outputs = {id};
    try {
      auto results = execute(sub, {});
      Node& target = out.node(id);
      target.kind = OpKind::Const;
      target.inputs.clear();
      target.attrs.clear();
      target.payload = std::move(results.at(g.node(id).name));
      ++folds;
    } catch (const std::exception& e) {
      notes += std::string("skipped '") + g.node(id).name + "': " + e.what() + "; ";
    }
  }

  // Interior nodes of folded cones are now dead; drop the ones that became
  // unreachable but stay within the evaluable set.
  if (folds > 0) {
    const std::set<NodeId> live = reachable_from_outputs(out);
    for (auto it = out.nodes.begin(); it != out.nodes.end();) {
      if (live.count(it->first) == 0 && evaluable.count(it->first) != 0)
        it = out.nodes.erase(it);
      else
        ++it;
    }
  }
  return {std::move(out), make_report("fold_constants", g, out, folds, std::move(notes))};
}

PassResult fold_batch_norms(const Graph& g) {
  Graph out = g;
  const auto consumers = consumers_of(g);
  std::set<NodeId> output_set(g.outputs.begin(), g.outputs.end());
  int64_t folds = 0;
  std::string notes;

  auto single_consumer = [&](NodeId id) -> std::optional<NodeId> {
    const auto& c = consumers.at(id);
    if (c.size() != 1 || output_set.count(id)) return std::nullopt;
    return c[0];
  };
  auto const_payload = [&](NodeId id) -> const Tensor* {
    const Node& n = out.node(id);
    return n.kind == OpKind::Const && n.payload && n.payload->dtype == DType::Float32
               ? &*n.payload
               : nullptr;
  };

  std::vector<NodeId> bn_ids;
  for (const auto& [id, n] : g.nodes)
    if (n.kind == OpKind::BatchNormFrozen) bn_ids.push_back(id);

  std::unordered_map<NodeId, NodeId> remap;
  std::set<NodeId> dead;
  for (const NodeId bn_id : bn_ids) {
    const Node& bn = out.node(bn_id);
    if (bn.inputs.size() != 5) {
      notes += "'" + bn.name + "' malformed; ";
      continue;
    }
    // Locate the producing convolution: either directly or through BiasAdd.
    NodeId conv_id = bn.inputs[0];
    NodeId biasadd_id = 0;
    bool has_biasadd = false;
    if (out.node(conv_id).kind == OpKind::BiasAdd) {
      biasadd_id = conv_id;
      has_biasadd = true;
      conv_id = out.node(biasadd_id).inputs.at(0);
    }
    if (out.node(conv_id).kind != OpKind::Conv2D) {
      notes += "'" + bn.name + "' not preceded by Conv2D; ";
      continue;
    }
    // The chain must be exclusive so folding cannot change other consumers.
    if (single_consumer(conv_id) != std::optional<NodeId>(has_biasadd ? biasadd_id : bn_id) ||
        (has_biasadd && single_consumer(biasadd_id) != std::optional<NodeId>(bn_id))) {
      notes += "'" + bn.name + "' producer has other consumers; ";
      continue;
    }

    const Tensor* w = const_payload(out.node(conv_id).inputs.at(1));
    const Tensor* gamma = const_payload(bn.inputs[1]);
    const Tensor* beta = const_payload(bn.inputs[2]);
    const Tensor* mean = const_payload(bn.inputs[3]);
    const Tensor* var = const_payload(bn.inputs[4]);
    const Tensor* bias =
        has_biasadd ? const_payload(out.node(biasadd_id).inputs.at(1)) : nullptr;
    if (!w || !gamma || !beta || !mean || !var || (has_biasadd && !bias)) {
      notes += "'" + bn.name + "' parameters are not float Consts; ";
      continue;
    }
    const int64_t cout = w->shape[3];
    if (gamma->elem_count() != cout) {
      notes += "'" + bn.name + "' channel mismatch; ";
      continue;
    }

    double eps = 0.0;
    if (const auto it = bn.attrs.find("epsilon"); it != bn.attrs.end())
      eps = std::get<double>(it->second);

    // Same float math as the executor kernel so outputs stay within 1e-5.
    std::vector<float> scale(static_cast<size_t>(cout)), shift(static_cast<size_t>(cout));
    for (int64_t c = 0; c < cout; ++c) {
      const float inv =
          1.0f / std::sqrt(var->f32[static_cast<size_t>(c)] + static_cast<float>(eps));
      scale[static_cast<size_t>(c)] = gamma->f32[static_cast<size_t>(c)] * inv;
      shift[static_cast<size_t>(c)] = beta->f32[static_cast<size_t>(c)] -
                                      mean->f32[static_cast<size_t>(c)] *
                                          scale[static_cast<size_t>(c)];
    }

    Tensor folded_w = *w;
    const int64_t per_co = w->elem_count() / cout;
    for (int64_t i = 0; i < per_co; ++i)
      for (int64_t c = 0; c < cout; ++c)
        folded_w.f32[static_cast<size_t>(i * cout + c)] *= scale[static_cast<size_t>(c)];
    out.node(out.node(conv_id).inputs.at(1)).payload = std::move(folded_w);

    NodeId tail = conv_id;
    if (has_biasadd) {
      Tensor folded_b = *bias;
      for (int64_t c = 0; c < cout; ++c)
        folded_b.f32[static_cast<size_t>(c)] =
            (bias->f32[static_cast<size_t>(c)] - mean->f32[static_cast<size_t>(c)]) *
                scale[static_cast<size_t>(c)] +
            beta->f32[static_cast<size_t>(c)];
      out.node(out.node(biasadd_id).inputs.at(1)).payload = std::move(folded_b);
      tail = biasadd_id;
    } else {
      Tensor shift_b = Tensor::zeros({cout});
      shift_b.f32.assign(shift.begin(), shift.end());
      const NodeId b_const = out.add_const(bn.name + "/folded_bias", std::move(shift_b));
      Node ba;
      ba.kind = OpKind::BiasAdd;
      ba.name = bn.name + "/folded";
      ba.inputs = {conv_id, b_const};
      tail = out.add(std::move(ba));
    }

    // Splice the BatchNormFrozen node and retire its parameter Consts.
    remap[bn_id] = tail;
    dead.insert(bn_id);
    for (size_t i = 1; i < 5; ++i) {
      const NodeId param = bn.inputs[i];
      if (consumers.at(param).size() == 1) dead.insert(param);
    }
    ++folds;
  }

  for (const NodeId id : dead) out.nodes.erase(id);
  remap_references(out, remap);
  return {std::move(out), make_report("fold_batch_norms", g, out, folds, std::move(notes))};
}

PassResult fuse_resize_and_conv(const Graph& g) {
  int64_t matches = 0;
  for (const auto& [id, n] : g.nodes)
    if (n.kind == OpKind::Conv2D && !n.inputs.empty() &&
        g.has_node(n.inputs[0]) && g.node(n.inputs[0]).kind == OpKind::ResizeNearest)
      ++matches;
  Graph out = g;
  std::ostringstream notes;
  notes << matches << " ResizeNearest->Conv2D adjacencies; detector only, no rewrite";
  return {std::move(out), make_report("fuse_resize_and_conv", g, out, 0, notes.str())};
}

PassResult fuse_conv_bias_relu(const Graph& g) {
  Graph out = g;
  const auto consumers = consumers_of(g);
  std::set<NodeId> output_set(g.outputs.begin(), g.outputs.end());
  int64_t fusions = 0;
  std::unordered_map<NodeId, NodeId> remap;

  auto sole_consumer = [&](NodeId id) -> std::optional<NodeId> {
    const auto& c = consumers.at(id);
    if (c.size() != 1 || output_set.count(id)) return std::nullopt;
    return c[0];
  };

  std::vector<NodeId> convs;
  for (const auto& [id, n] : g.nodes)
    if (n.kind == OpKind::Conv2D) convs.push_back(id);

  for (const NodeId conv_id : convs) {
    const auto ba_id = sole_consumer(conv_id);
    if (!ba_id || g.node(*ba_id).kind != OpKind::BiasAdd ||
        g.node(*ba_id).inputs.at(0) != conv_id)
      continue;
    const NodeId bias_const = g.node(*ba_id).inputs.at(1);

    bool relu = false;
    NodeId tail = *ba_id;
    if (const auto relu_id = sole_consumer(*ba_id);
        relu_id && g.node(*relu_id).kind == OpKind::Relu) {
      relu = true;
      tail = *relu_id;
    }

    Node& fused = out.node(conv_id);
    fused.kind = OpKind::FusedConvBiasRelu;
    fused.inputs.push_back(bias_const);
    fused.attrs["relu"] = static_cast<int64_t>(relu);
    out.nodes.erase(*ba_id);
    if (relu) out.nodes.erase(tail);
    remap[tail] = conv_id;
    if (relu) remap[*ba_id] = conv_id;
    ++fusions;
  }

  remap_references(out, remap);
  return {std::move(out), make_report("fuse_conv_bias_relu", g, out, fusions)};
}

PassResult quantize_weights(const Graph& g, int64_t min_elements) {
  Graph out = g;
  int64_t converted = 0;
  for (auto& [id, n] : out.nodes) {
    if (n.kind != OpKind::Const || !n.payload || n.payload->dtype != DType::Float32) continue;
    const Tensor& t = *n.payload;
    if (t.elem_count() < min_elements) continue;

    float lo = t.f32[0], hi = t.f32[0];
    for (const float v : t.f32) {
      if (!std::isfinite(v))
        throw std::runtime_error("quantize_weights: non-finite value in Const '" + n.name + "'");
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    const float scale = (hi - lo) / 255.0f;

    Tensor q;
    q.shape = t.shape;
    q.dtype = DType::Quant8;
    q.quant = {scale, lo};
    q.q8.resize(t.f32.size());
    if (scale > 0.0f) {
      const double inv = 1.0 / static_cast<double>(scale);
      for (size_t i = 0; i < t.f32.size(); ++i) {
        const long v = std::lround((static_cast<double>(t.f32[i]) - lo) * inv);
        q.q8[i] = static_cast<uint8_t>(v < 0 ? 0 : (v > 255 ? 255 : v));
      }
    }
    n.payload = std::move(q);
    ++converted;
  }
  std::ostringstream notes;
  notes << converted << " Const tensors quantized (threshold " << min_elements << " elements)";
  return {std::move(out), make_report("quantize_weights", g, out, converted, notes.str())};
}

Graph dequantize_weights(const Graph& g) {
  Graph out = g;
  for (auto& [id, n] : out.nodes) {
    if (n.kind != OpKind::Const || !n.payload || n.payload->dtype != DType::Quant8) continue;
    const Tensor& t = *n.payload;
    Tensor f = Tensor::zeros(t.shape);
    for (size_t i = 0; i < t.q8.size(); ++i) f.f32[i] = t.quant.dequant(t.q8[i]);
    n.payload = std::move(f);
  }
  return out;
}

PassResult sort_by_execution_order(const Graph& g) {
  const auto order = topo_sort(g);
  std::unordered_map<NodeId, NodeId> remap;
  for (size_t i = 0; i < order.size(); ++i) remap[order[i]] = static_cast<NodeId>(i);

  Graph out;
  out.name = g.name;
  int64_t moved = 0;
  for (size_t i = 0; i < order.size(); ++i) {
    Node n = g.node(order[i]);
    if (n.id != static_cast<NodeId>(i)) ++moved;
    n.id = static_cast<NodeId>(i);
    for (NodeId& in : n.inputs) in = remap.at(in);
    out.nodes.emplace(n.id, std::move(n));
  }
  out.outputs = g.outputs;
  for (NodeId& id : out.outputs) id = remap.at(id);
  return {std::move(out), make_report("sort_by_execution_order", g, out, moved)};
}

const std::vector<std::string>& pass_names() {
  static const std::vector<std::string> names = {
      "add_default_attributes", "strip_unused_nodes", "remove_identity_nodes",
      "merge_duplicate_nodes",  "fold_constants",     "fold_batch_norms",
      "fuse_resize_and_conv",   "fuse_conv_bias_relu", "quantize_weights",
      "sort_by_execution_order", "all",
  };
  return names;
}

const std::vector<std::string>& all_passes_preset() {
  static const std::vector<std::string> preset = {
      "add_default_attributes", "fold_constants",   "fold_batch_norms",
      "fuse_resize_and_conv",   "quantize_weights", "strip_unused_nodes",
      "sort_by_execution_order", "remove_identity_nodes", "merge_duplicate_nodes",
  };
  return preset;
}

std::pair<Graph, std::vector<PassReport>> run_pipeline(const Graph& g,
                                                       const std::vector<std::string>& passes) {
  std::vector<std::string> expanded;
  for (const std::string& p : passes) {
    if (p == "all")
      expanded.insert(expanded.end(), all_passes_preset().begin(), all_passes_preset().end());
    else
      expanded.push_back(p);
  }

  Graph cur = g;
  std::vector<PassReport> reports;
  for (const std::string& p : expanded) {
    PassResult result = [&]() -> PassResult {
      if (p == "add_default_attributes") return add_default_attributes(cur);
      if (p == "strip_unused_nodes") return strip_unused_nodes(cur);
      if (p == "remove_identity_nodes") return remove_identity_nodes(cur);
      if (p == "merge_duplicate_nodes") return merge_duplicate_nodes(cur);
      if (p == "fold_constants") return fold_constants(cur);
      if (p == "fold_batch_norms") return fold_batch_norms(cur);
      if (p == "fuse_resize_and_conv") return fuse_resize_and_conv(cur);
      if (p == "fuse_conv_bias_relu") return fuse_conv_bias_relu(cur);
      if (p == "quantize_weights") return quantize_weights(cur);
      if (p == "sort_by_execution_order") return sort_by_execution_order(cur);
      std::string valid;
      for (const std::string& name : pass_names()) valid += (valid.empty() ? "" : ", ") + name;
      throw std::invalid_argument("unknown pass '" + p + "'; valid passes: " + valid);
    }();
    cur = std::move(result.first);
    reports.push_back(std::move(result.second));
  }
  return {std::move(cur), std::move(reports)};
}

std::string format_pass_report(const PassReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-24s nodes %5lld -> %5lld  payload %12lld -> %12lld  rewrites %4lld",
                r.pass.c_str(), static_cast<long long>(r.nodes_before),
                static_cast<long long>(r.nodes_after),
                static_cast<long long>(r.payload_bytes_before),
                static_cast<long long>(r.payload_bytes_after),
                static_cast<long long>(r.rewrites));
  std::string s(buf);
  if (!r.notes.empty()) s += "  [" + r.notes + "]";
  return s;
}

}  // namespace segforge
