#include "segforge/analysis.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace segforge {

namespace {

bool folds_into_producer(const Graph& g, const Node& n) {
  if (n.inputs.empty()) return false;
  if (n.kind != OpKind::BiasAdd && n.kind != OpKind::Relu) return false;
  const Node& producer = g.node(n.inputs[0]);
  if (is_conv_like(producer.kind)) return true;
  // Relu after a BiasAdd that itself folds.
  return n.kind == OpKind::Relu && folds_into_producer(g, producer);
}

// Walks BiasAdd/Relu chains back to the conv-like layer head.
NodeId layer_head(const Graph& g, NodeId id) {
  const Node& n = g.node(id);
  if ((n.kind == OpKind::BiasAdd || n.kind == OpKind::Relu) && folds_into_producer(g, n))
    return layer_head(g, n.inputs[0]);
  return id;
}

}  // namespace

MemoryReport estimate_memory(const Graph& g, const TensorSpec& input_spec, int batch) {
  if (batch < 1) throw std::invalid_argument("estimate_memory: batch must be >= 1");
  const auto specs = infer_shapes(g, input_spec);

  MemoryReport report;
  report.batch = batch;
  std::map<NodeId, size_t> row_of;

  for (const NodeId id : topo_sort(g)) {
    const Node& n = g.node(id);
    if (n.kind == OpKind::Const || n.kind == OpKind::Input || n.kind == OpKind::Identity)
      continue;
    if (folds_into_producer(g, n)) {
      // Fold this node's parameters into the head row; activations count once.
      const NodeId head = layer_head(g, id);
      const auto it = row_of.find(head);
      if (it != row_of.end() && n.kind == OpKind::BiasAdd)
        report.rows[it->second].params += g.node(n.inputs[1]).payload->elem_count();
      continue;
    }

    MemoryRow row;
    row.name = n.name;
    row.act_elems = specs.at(id).elem_count();
    row.act_bytes = row.act_elems * 4 * batch;
    if (is_conv_like(n.kind)) {
      row.params += g.node(n.inputs[1]).payload->elem_count();  // weights
      if (n.kind == OpKind::FusedConvBiasRelu)
        row.params += g.node(n.inputs[2]).payload->elem_count();  // bias
    } else if (n.kind == OpKind::BiasAdd) {
      row.params += g.node(n.inputs[1]).payload->elem_count();
    } else if (n.kind == OpKind::BatchNormFrozen) {
      for (size_t i = 1; i < n.inputs.size(); ++i)
        row.params += g.node(n.inputs[i]).payload->elem_count();
    }
    row_of[id] = report.rows.size();
    report.rows.push_back(std::move(row));
  }

  for (MemoryRow& row : report.rows) {
    row.param_bytes = row.params * 4;
    report.act_bytes_total += row.act_bytes;
    report.param_bytes_total += row.param_bytes;
  }
  return report;
}

namespace {
std::string mib(int64_t bytes) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", static_cast<double>(bytes) / (1024.0 * 1024.0));
  return buf;
}
std::string mb(int64_t bytes) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", static_cast<double>(bytes) / 1e6);
  return buf;
}
}  // namespace

std::string MemoryReport::to_text() const {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof(line), "%-20s %14s %14s %12s %14s\n", "layer", "act_elems",
                "act_bytes", "params", "param_bytes");
  os << line;
  for (const MemoryRow& r : rows) {
    std::snprintf(line, sizeof(line), "%-20s %14lld %14lld %12lld %14lld\n", r.name.c_str(),
                  static_cast<long long>(r.act_elems), static_cast<long long>(r.act_bytes),
                  static_cast<long long>(r.params), static_cast<long long>(r.param_bytes));
    os << line;
  }
  os << "batch " << batch << "\n";
  os << "activation total: " << act_bytes_total << " bytes = " << mib(act_bytes_total)
     << " MiB = " << mb(act_bytes_total) << " MB\n";
  os << "parameter  total: " << param_bytes_total << " bytes = " << mib(param_bytes_total)
     << " MiB = " << mb(param_bytes_total) << " MB\n";
  return os.str();
}

std::string MemoryReport::to_csv() const {
  std::ostringstream os;
  os << "name,act_elems,act_bytes,params,param_bytes\n";
  for (const MemoryRow& r : rows)
    os << r.name << "," << r.act_elems << "," << r.act_bytes << "," << r.params << ","
       << r.param_bytes << "\n";
  os << "total," << "," << act_bytes_total << "," << "," << param_bytes_total << "\n";
  return os.str();
}

BatchRecommendation recommend_batch(const MemoryReport& report, int64_t budget_bytes,
                                    double fwd_bwd_factor, double optimizer_factor) {
  if (budget_bytes <= 0) throw std::invalid_argument("recommend_batch: budget must be > 0");
  BatchRecommendation rec;
  const double per_image = static_cast<double>(report.act_bytes_total) / report.batch * fwd_bwd_factor +
                           static_cast<double>(report.param_bytes_total) * optimizer_factor;
  rec.per_image_bytes = static_cast<int64_t>(per_image);
  rec.max_batch = static_cast<int64_t>(static_cast<double>(budget_bytes) / per_image);
  if (rec.max_batch == 0)
    rec.note = "per-image footprint exceeds the budget; nothing fits";
  return rec;
}

}  // namespace segforge
