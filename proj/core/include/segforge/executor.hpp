#pragma once

#include <map>
#include <string>
#include <vector>

#include "segforge/graph.hpp"

namespace segforge {

enum class ConvKernel { Direct = 0, Im2col = 1 };
const char* conv_kernel_name(ConvKernel k);

// Per-node kernel selection for conv-like nodes (Conv2D, ConvTranspose2D,
// FusedConvBiasRelu). Nodes absent from the map run the Direct kernel.
struct KernelChoice {
  std::map<NodeId, ConvKernel> choice;
};

struct ExecOptions {
  int threads = 1;          // row-level parallelism inside conv kernels
  bool check_finite = true; // scan every node output for NaN/Inf
};

// Reference interpreter. Inputs are matched to Input nodes by node name;
// outputs are keyed by output node name. Quant8 Const payloads are
// dequantized on the fly. Results are bitwise independent of `threads`.
std::map<std::string, Tensor> execute(const Graph& g, const std::map<std::string, Tensor>& inputs,
                                      const KernelChoice* choice = nullptr,
                                      const ExecOptions& opts = {});

// Times Direct vs Im2col per conv-like node on its inferred input shape and
// picks the kernel with the lower median over `repeats` runs. Both kernels
// are first checked against each other (max abs diff <= 1e-6).
KernelChoice autotune(const Graph& g, const TensorSpec& input_spec, int repeats);

struct PlanEntry {
  NodeId id = 0;
  int64_t offset = 0;  // byte offset into the arena
  int64_t size = 0;    // byte size
  int64_t first_def = 0;
  int64_t last_use = 0;  // schedule steps; inclusive interval
};

// Liveness-based arena assignment for activation tensors; Const parameters
// stay resident outside the arena. Greedy first-fit by decreasing size.
struct MemoryPlan {
  std::vector<PlanEntry> entries;
  int64_t arena_size = 0;
  int64_t total_tensor_bytes = 0;  // sum of entry sizes (no reuse)

  const PlanEntry& entry(NodeId id) const;
  void check_invariants() const;  // throws std::logic_error on overlap violations
};

MemoryPlan plan_memory(const Graph& g, const TensorSpec& input_spec = {});

// Executes with every activation placed at its planned arena offset. Used to
// demonstrate the plan is sound: results must be bitwise equal to execute().
std::map<std::string, Tensor> execute_with_plan(const Graph& g,
                                                const std::map<std::string, Tensor>& inputs,
                                                const MemoryPlan& plan,
                                                const KernelChoice* choice = nullptr,
                                                const ExecOptions& opts = {});

}  // namespace segforge
