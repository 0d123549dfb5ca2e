#include "segforge/executor.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <random>
#include <stdexcept>

#include "kernels.hpp"

namespace segforge {

const char* conv_kernel_name(ConvKernel k) { return k == ConvKernel::Direct ? "direct" : "im2col"; }

namespace {

Tensor dequantize_tensor(const Tensor& t) {
  if (t.dtype == DType::Float32) return t;
  Tensor out = Tensor::zeros(t.shape);
  for (size_t i = 0; i < t.q8.size(); ++i) out.f32[i] = t.quant.dequant(t.q8[i]);
  return out;
}

ConvKernel kernel_for(const KernelChoice* choice, NodeId id) {
  if (!choice) return ConvKernel::Direct;
  const auto it = choice->choice.find(id);
  return it == choice->choice.end() ? ConvKernel::Direct : it->second;
}

Tensor run_conv(const Tensor& x, const Tensor& w, ConvKernel k, int threads) {
  return k == ConvKernel::Direct ? kernels::conv2d_direct(x, w, threads)
                                 : kernels::conv2d_im2col(x, w, threads);
}

Tensor run_conv_transpose(const Tensor& x, const Tensor& w, int stride, ConvKernel k,
                          int threads) {
  return k == ConvKernel::Direct ? kernels::conv_transpose2d_direct(x, w, stride, threads)
                                 : kernels::conv_transpose2d_im2col(x, w, stride, threads);
}

void check_finite(const Tensor& t, const Node& n) {
  for (float v : t.f32)
    if (!std::isfinite(v))
      throw std::runtime_error("node " + std::to_string(n.id) + " '" + n.name +
                               "' produced a non-finite value");
}

// Evaluates one node given already-evaluated input tensors.
Tensor eval_node(const Node& n, const std::vector<const Tensor*>& in, const KernelChoice* choice,
                 const ExecOptions& opts) {
  auto need = [&](size_t i) -> const Tensor& {
    if (i >= in.size())
      throw std::runtime_error("node '" + n.name + "' is missing input " + std::to_string(i));
    return *in[i];
  };
  switch (n.kind) {
    case OpKind::Const:
      return dequantize_tensor(*n.payload);
    case OpKind::Input:
      throw std::logic_error("eval_node called on Input");
    case OpKind::Conv2D:
      return run_conv(need(0), need(1), kernel_for(choice, n.id), opts.threads);
    case OpKind::ConvTranspose2D:
      return run_conv_transpose(need(0), need(1), static_cast<int>(n.attr_int("stride")),
                                kernel_for(choice, n.id), opts.threads);
    case OpKind::FusedConvBiasRelu: {
      Tensor y = run_conv(need(0), need(1), kernel_for(choice, n.id), opts.threads);
      y = kernels::bias_add(y, need(2));
      if (n.attr_int_or("relu", 0) != 0) y = kernels::relu(y);
      return y;
    }
    case OpKind::BiasAdd:
      return kernels::bias_add(need(0), need(1));
    case OpKind::Relu:
      return kernels::relu(need(0));
    case OpKind::MaxPool2x2:
      return kernels::maxpool2x2(need(0));
    case OpKind::Add:
      return kernels::add(need(0), need(1));
    case OpKind::Identity:
      return need(0);
    case OpKind::Softmax:
      return kernels::softmax_channels(need(0));
    case OpKind::ArgMax:
      return argmax_channels(need(0));
    case OpKind::ResizeNearest:
      return resize_nearest(need(0), n.attr_int("out_h"), n.attr_int("out_w"));
    case OpKind::BatchNormFrozen: {
      double eps = 0.0;
      if (const auto it = n.attrs.find("epsilon"); it != n.attrs.end())
        eps = std::get<double>(it->second);
      return kernels::batchnorm_frozen(need(0), need(1), need(2), need(3), need(4), eps);
    }
  }
  throw std::logic_error("unhandled op kind");
}

}  // namespace

std::map<std::string, Tensor> execute(const Graph& g, const std::map<std::string, Tensor>& inputs,
                                      const KernelChoice* choice, const ExecOptions& opts) {
  std::map<NodeId, Tensor> env;
  for (const NodeId id : topo_sort(g)) {
    const Node& n = g.node(id);
    Tensor result;
    if (n.kind == OpKind::Input) {
      const auto it = inputs.find(n.name);
      if (it == inputs.end())
        throw std::runtime_error("missing input tensor for Input node '" + n.name + "'");
      result = it->second;
    } else {
      std::vector<const Tensor*> in;
      in.reserve(n.inputs.size());
      for (NodeId i : n.inputs) in.push_back(&env.at(i));
      result = eval_node(n, in, choice, opts);
    }
    if (opts.check_finite && result.dtype == DType::Float32) check_finite(result, n);
    env.emplace(id, std::move(result));
  }

  std::map<std::string, Tensor> out;
  for (const NodeId id : g.outputs) out[g.node(id).name] = env.at(id);
  return out;
}

KernelChoice autotune(const Graph& g, const TensorSpec& input_spec, int repeats) {
  if (repeats < 3) throw std::invalid_argument("autotune: repeats must be >= 3");
  const auto specs = infer_shapes(g, input_spec);

  KernelChoice out;
  std::mt19937_64 rng(0x5eedf00dULL);
  const ExecOptions opts{.threads = 1, .check_finite = false};

  for (const auto& [id, n] : g.nodes) {
    if (!is_conv_like(n.kind)) continue;

    // Representative input for this node's inferred shape; real weights.
    const TensorSpec& xs = specs.at(n.inputs.at(0));
    Tensor x = Tensor::zeros(xs.shape);
    for (float& v : x.f32)
      v = static_cast<float>((rng() >> 11) * (1.0 / 9007199254740992.0));  // [0,1)
    const Tensor w = dequantize_tensor(*g.node(n.inputs.at(1)).payload);
    const int stride =
        n.kind == OpKind::ConvTranspose2D ? static_cast<int>(n.attr_int("stride")) : 1;

    auto run = [&](ConvKernel k) {
      return n.kind == OpKind::ConvTranspose2D
                 ? run_conv_transpose(x, w, stride, k, opts.threads)
                 : run_conv(x, w, k, opts.threads);
    };

    // Correctness gate before any timing.
    const Tensor yd = run(ConvKernel::Direct);
    const Tensor yi = run(ConvKernel::Im2col);
    float max_diff = 0.0f;
    for (size_t i = 0; i < yd.f32.size(); ++i)
      max_diff = std::max(max_diff, std::abs(yd.f32[i] - yi.f32[i]));
    if (max_diff > 1e-6f)
      throw std::runtime_error("autotune: kernel disagreement " + std::to_string(max_diff) +
                               " on node '" + n.name + "'");

    auto median_ms = [&](ConvKernel k) {
      std::vector<double> ms;
      ms.reserve(static_cast<size_t>(repeats));
      for (int r = 0; r < repeats; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        const Tensor y = run(k);
        const auto t1 = std::chrono::steady_clock::now();
        ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count() +
                     0.0 * static_cast<double>(y.f32.empty()));
      }
      std::sort(ms.begin(), ms.end());
      return ms[ms.size() / 2];
    };

    out.choice[id] = median_ms(ConvKernel::Direct) <= median_ms(ConvKernel::Im2col)
                         ? ConvKernel::Direct
                         : ConvKernel::Im2col;
  }
  return out;
}

const PlanEntry& MemoryPlan::entry(NodeId id) const {
  for (const PlanEntry& e : entries)
    if (e.id == id) return e;
  throw std::runtime_error("memory plan has no entry for node id " + std::to_string(id));
}

void MemoryPlan::check_invariants() const {
  int64_t total = 0;
  for (const PlanEntry& e : entries) {
    total += e.size;
    if (e.offset + e.size > arena_size)
      throw std::logic_error("plan entry exceeds arena size");
  }
  if (arena_size > total && !entries.empty())
    throw std::logic_error("arena size exceeds sum of tensor sizes");
  for (size_t i = 0; i < entries.size(); ++i) {
    for (size_t j = i + 1; j < entries.size(); ++j) {
      const PlanEntry& a = entries[i];
      const PlanEntry& b = entries[j];
      const bool live_overlap = a.first_def <= b.last_use && b.first_def <= a.last_use;
      const bool mem_overlap = a.offset < b.offset + b.size && b.offset < a.offset + a.size;
      if (live_overlap && mem_overlap && a.size > 0 && b.size > 0)
        throw std::logic_error("plan places concurrently live tensors " + std::to_string(a.id) +
                               " and " + std::to_string(b.id) + " in overlapping ranges");
    }
  }
}

MemoryPlan plan_memory(const Graph& g, const TensorSpec& input_spec) {
  const auto specs = infer_shapes(g, input_spec);
  const auto schedule = topo_sort(g);
  std::map<NodeId, int64_t> step;
  for (size_t i = 0; i < schedule.size(); ++i) step[schedule[i]] = static_cast<int64_t>(i);

  MemoryPlan plan;
  std::map<NodeId, PlanEntry> pending;
  for (const NodeId id : schedule) {
    const Node& n = g.node(id);
    if (n.kind == OpKind::Const) continue;  // parameters stay resident
    PlanEntry e;
    e.id = id;
    e.size = specs.at(id).byte_size();
    e.first_def = step[id];
    e.last_use = step[id];
    pending[id] = e;
  }
  for (const auto& [id, n] : g.nodes)
    for (NodeId in : n.inputs)
      if (pending.count(in)) pending[in].last_use = std::max(pending[in].last_use, step[id]);
  for (const NodeId out : g.outputs)
    if (pending.count(out)) pending[out].last_use = static_cast<int64_t>(schedule.size());

  // First-fit with decreasing size; ties broken by id for determinism.
  std::vector<PlanEntry> order;
  order.reserve(pending.size());
  for (const auto& [id, e] : pending) order.push_back(e);
  std::sort(order.begin(), order.end(), [](const PlanEntry& a, const PlanEntry& b) {
    return a.size != b.size ? a.size > b.size : a.id < b.id;
  });

  std::vector<PlanEntry> placed;
  for (PlanEntry e : order) {
    std::vector<const PlanEntry*> conflicts;
    for (const PlanEntry& p : placed)
      if (p.first_def <= e.last_use && e.first_def <= p.last_use) conflicts.push_back(&p);
    std::sort(conflicts.begin(), conflicts.end(),
              [](const PlanEntry* a, const PlanEntry* b) { return a->offset < b->offset; });
    int64_t offset = 0;
    for (const PlanEntry* c : conflicts) {
      if (offset + e.size <= c->offset) break;
      offset = std::max(offset, c->offset + c->size);
    }
    e.offset = offset;
    placed.push_back(e);
    plan.arena_size = std::max(plan.arena_size, offset + e.size);
    plan.total_tensor_bytes += e.size;
  }

  std::sort(placed.begin(), placed.end(),
            [](const PlanEntry& a, const PlanEntry& b) { return a.id < b.id; });
  plan.entries = std::move(placed);
  plan.check_invariants();
  return plan;
}

std::map<std::string, Tensor> execute_with_plan(const Graph& g,
                                                const std::map<std::string, Tensor>& inputs,
                                                const MemoryPlan& plan,
                                                const KernelChoice* choice,
                                                const ExecOptions& opts) {
  const auto specs = infer_shapes(g, {});
  std::vector<uint8_t> arena(static_cast<size_t>(plan.arena_size));

  auto load = [&](NodeId id) {
    const Node& n = g.node(id);
    if (n.kind == OpKind::Const) return dequantize_tensor(*n.payload);
    const PlanEntry& e = plan.entry(id);
    const TensorSpec& s = specs.at(id);
    Tensor t = Tensor::zeros(s.shape);
    std::memcpy(t.f32.data(), arena.data() + e.offset, static_cast<size_t>(e.size));
    return t;
  };
  auto store = [&](NodeId id, const Tensor& t) {
    const PlanEntry& e = plan.entry(id);
    if (static_cast<int64_t>(t.byte_size()) != e.size)
      throw std::logic_error("planned size mismatch on node id " + std::to_string(id));
    std::memcpy(arena.data() + e.offset, t.f32.data(), static_cast<size_t>(e.size));
  };

  for (const NodeId id : topo_sort(g)) {
    const Node& n = g.node(id);
    if (n.kind == OpKind::Const) continue;
    Tensor result;
    if (n.kind == OpKind::Input) {
      const auto it = inputs.find(n.name);
      if (it == inputs.end())
        throw std::runtime_error("missing input tensor for Input node '" + n.name + "'");
      result = it->second;
    } else {
      std::vector<Tensor> owned;
      owned.reserve(n.inputs.size());
      for (NodeId i : n.inputs) owned.push_back(load(i));
      std::vector<const Tensor*> in;
      for (const Tensor& t : owned) in.push_back(&t);
      result = eval_node(n, in, choice, opts);
    }
    if (opts.check_finite && result.dtype == DType::Float32) check_finite(result, n);
    store(id, result);
  }

  std::map<std::string, Tensor> out;
  for (const NodeId id : g.outputs) out[g.node(id).name] = load(id);
  return out;
}

}  // namespace segforge
