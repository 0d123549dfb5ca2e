#pragma once

#include <string>
#include <vector>

#include "segforge/graph.hpp"

namespace segforge {

struct MemoryRow {
  std::string name;
  int64_t act_elems = 0;   // per image
  int64_t act_bytes = 0;   // x batch
  int64_t params = 0;      // weight + bias element count
  int64_t param_bytes = 0; // params x 4 (float32 accounting)
};

struct MemoryReport {
  std::vector<MemoryRow> rows;
  int64_t act_bytes_total = 0;
  int64_t param_bytes_total = 0;
  int batch = 1;

  std::string to_text() const;  // aligned table, MiB and decimal MB both labeled
  std::string to_csv() const;   // name,act_elems,act_bytes,params,param_bytes
};

// Static per-layer accounting over inferred shapes. One row per layer head
// (conv-like, pool, add, softmax, argmax, resize); BiasAdd/Relu directly after
// a convolution fold into its row, which keeps rows aligned with the usual
// layer tables. Input and Const nodes produce no rows. Activation bytes are
// elements x 4 x batch; parameter bytes are count x 4 regardless of dtype.
MemoryReport estimate_memory(const Graph& g, const TensorSpec& input_spec, int batch);

struct BatchRecommendation {
  int64_t per_image_bytes = 0;
  int64_t max_batch = 0;
  std::string note;
};

// per_image = activations * fwd_bwd_factor + parameters * optimizer_factor;
// max_batch = floor(budget / per_image). Factors default to a forward+backward
// pass (2) and Adam state (4).
BatchRecommendation recommend_batch(const MemoryReport& report, int64_t budget_bytes,
                                    double fwd_bwd_factor = 2.0, double optimizer_factor = 4.0);

}  // namespace segforge
