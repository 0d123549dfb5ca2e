#pragma once

#include <string>
#include <utility>
#include <vector>

#include "segforge/graph.hpp"

namespace segforge {

struct PassReport {
  std::string pass;
  int64_t nodes_before = 0;
  int64_t nodes_after = 0;
  int64_t payload_bytes_before = 0;
  int64_t payload_bytes_after = 0;
  int64_t rewrites = 0;
  std::string notes;
};

using PassResult = std::pair<Graph, PassReport>;

// Fills missing stride/padding attributes on conv-like nodes (stride 1, same
// padding). The only pass allowed to grow the serialized graph.
PassResult add_default_attributes(const Graph& g);

// Drops every node not reverse-reachable from the outputs.
PassResult strip_unused_nodes(const Graph& g);

// Splices Identity nodes out, rewiring consumers and outputs.
PassResult remove_identity_nodes(const Graph& g);

// Merges nodes identical in (kind, attrs, inputs, payload bits); Input nodes
// are exempt since they are addressed by name.
PassResult merge_duplicate_nodes(const Graph& g);

// Replaces every maximal constant-only subgraph with one Const holding its
// executor-evaluated value. Evaluation failures skip that subgraph and leave
// a note rather than failing the pass.
PassResult fold_constants(const Graph& g);

// Collapses Conv2D[->BiasAdd]->BatchNormFrozen into the convolution:
// w' = w * gamma / sqrt(var + eps), b' = (b - mean) * gamma / sqrt(var + eps)
// + beta. Non-matching BatchNormFrozen nodes are left in place with a note.
PassResult fold_batch_norms(const Graph& g);

// Detector only: counts ResizeNearest->Conv2D adjacencies in the notes and
// performs no rewrite.
PassResult fuse_resize_and_conv(const Graph& g);

// Replaces Conv2D->BiasAdd[->Relu] chains with FusedConvBiasRelu. The fused
// kernel applies the same three steps in the same order, so outputs are
// bitwise unchanged.
PassResult fuse_conv_bias_relu(const Graph& g);

// Converts float32 Const payloads with at least `min_elements` elements to
// quant8 with scale = (max - min) / 255 and minimum = min. Errors on
// non-finite weights, naming the node.
PassResult quantize_weights(const Graph& g, int64_t min_elements = 1024);

// Expands every quant8 Const back to float32 (minimum + scale * q).
Graph dequantize_weights(const Graph& g);

// Renumbers node ids into deterministic topological order.
PassResult sort_by_execution_order(const Graph& g);

// Valid pass names for pipelines/CLI, including the "all" preset.
const std::vector<std::string>& pass_names();
// The "all" preset: the transform catalog in table order.
const std::vector<std::string>& all_passes_preset();

std::pair<Graph, std::vector<PassReport>> run_pipeline(const Graph& g,
                                                       const std::vector<std::string>& passes);

std::string format_pass_report(const PassReport& r);

}  // namespace segforge
