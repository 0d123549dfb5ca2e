#include <doctest.h>


#include <set>
#include "segforge/graph.hpp"
#include "segforge/model_zoo.hpp"
#include "test_helpers.hpp"

using namespace segforge;

TEST_SUITE_BEGIN("graph");

namespace {
Graph chain_graph() {
  // c (id 2) listed logically after b (id 1) after a (id 0), built in reverse
  // wiring order below where needed.
  Graph g;
  g.name = "chain";
  const NodeId a = g.add_const("a", Tensor::from_values({2, 2, 1}, {1, 2, 3, 4}));
  Node rb;
  rb.kind = OpKind::Relu;
  rb.name = "b";
  rb.inputs = {a};
  const NodeId b = g.add(std::move(rb));
  Node rc;
  rc.kind = OpKind::Identity;
  rc.name = "c";
  rc.inputs = {b};
  g.outputs = {g.add(std::move(rc))};
  return g;
}
}  // namespace

TEST_CASE("validate flags an empty graph") {
  Graph g;
  const auto diags = validate(g);
  REQUIRE(diags.size() == 1);
  CHECK(diags[0].reason == "graph has no outputs");
}

TEST_CASE("validate names missing input ids") {
  Graph g;
  Node n;
  n.kind = OpKind::Relu;
  n.name = "r";
  n.inputs = {99};
  g.outputs = {g.add(std::move(n))};
  const auto diags = validate(g);
  REQUIRE(!diags.empty());
  bool found = false;
  for (const auto& d : diags) found = found || d.reason.find("99") != std::string::npos;
  CHECK(found);
}

TEST_CASE("validate catches payload mismatches and duplicate names") {
  Graph g;
  Node c;
  c.kind = OpKind::Const;
  c.name = "x";
  const NodeId cid = g.add(std::move(c));  // Const without payload
  Node r;
  r.kind = OpKind::Relu;
  r.name = "x";  // duplicate name
  r.inputs = {cid};
  g.outputs = {g.add(std::move(r))};
  const auto diags = validate(g);
  CHECK(diags.size() == 2);
}

TEST_CASE("well-formed FCN-8s validates cleanly") {
  const Graph g = build_fcn(FcnVariant::Fcn8s, 64, 128, 35, {InitSpec::Mode::Zeros});
  CHECK(validate(g).empty());
}

TEST_CASE("topo_sort of a single Const is that id") {
  Graph g;
  const NodeId a = g.add_const("a", Tensor::zeros({1}));
  g.outputs = {a};
  CHECK(topo_sort(g) == std::vector<NodeId>{a});
}

TEST_CASE("topo_sort orders a chain ahead of its consumers") {
  const Graph g = chain_graph();
  const auto order = topo_sort(g);
  REQUIRE(order.size() == 3);
  std::map<NodeId, size_t> pos;
  for (size_t i = 0; i < order.size(); ++i) pos[order[i]] = i;
  for (const auto& [id, n] : g.nodes)
    for (const NodeId in : n.inputs) CHECK(pos.at(in) < pos.at(id));
}

TEST_CASE("topo_sort is a permutation with ascending-id tie-break") {
  const auto rg = testutil::random_graph(42);
  const auto order = topo_sort(rg.graph);
  CHECK(order.size() == rg.graph.nodes.size());
  std::set<NodeId> seen(order.begin(), order.end());
  CHECK(seen.size() == order.size());
}

TEST_CASE("topo_sort reports a concrete cycle") {
  Graph g;
  Node a;
  a.kind = OpKind::Relu;
  a.name = "a";
  const NodeId ida = g.add(std::move(a));
  Node b;
  b.kind = OpKind::Relu;
  b.name = "b";
  b.inputs = {ida};
  const NodeId idb = g.add(std::move(b));
  g.node(ida).inputs = {idb};
  g.outputs = {idb};
  CHECK_THROWS_WITH_AS(topo_sort(g), doctest::Contains("cycle"), std::runtime_error);
}

TEST_CASE("shape inference matches the encoder layer table") {
  const Graph g = build_encoder(256, 512, 35, {InitSpec::Mode::Zeros});
  const auto specs = infer_shapes(g);
  auto shape_of = [&](const char* name) { return specs.at(*g.find_by_name(name)).shape; };
  CHECK(shape_of("conv1_1") == std::vector<int64_t>{256, 512, 64});
  CHECK(shape_of("pool1") == std::vector<int64_t>{128, 256, 64});
  CHECK(shape_of("pool4") == std::vector<int64_t>{16, 32, 512});
  CHECK(shape_of("pool5") == std::vector<int64_t>{8, 16, 512});
  CHECK(shape_of("conv6") == std::vector<int64_t>{8, 16, 4096});
  CHECK(shape_of("score") == std::vector<int64_t>{8, 16, 35});
}

TEST_CASE("transpose conv stride 2 doubles spatial dims") {
  Graph g;
  Node in;
  in.kind = OpKind::Input;
  in.name = "input";
  in.attrs["shape"] = std::vector<int64_t>{8, 16, 35};
  const NodeId x = g.add(std::move(in));
  const NodeId w = g.add_const("w", Tensor::zeros({4, 4, 35, 512}));
  Node up;
  up.kind = OpKind::ConvTranspose2D;
  up.name = "up";
  up.inputs = {x, w};
  up.attrs["stride"] = int64_t{2};
  const NodeId uid = g.add(std::move(up));
  g.outputs = {uid};
  const auto specs = infer_shapes(g);
  CHECK(specs.at(uid).shape == std::vector<int64_t>{16, 32, 512});
}

TEST_CASE("Add shape mismatch errors name both specs") {
  Graph g;
  const NodeId a = g.add_const("a", Tensor::zeros({2, 2, 1}));
  const NodeId b = g.add_const("b", Tensor::zeros({2, 3, 1}));
  Node add;
  add.kind = OpKind::Add;
  add.name = "sum";
  add.inputs = {a, b};
  g.outputs = {g.add(std::move(add))};
  CHECK_THROWS_WITH_AS(infer_shapes(g), doctest::Contains("[2x2x1]"), std::runtime_error);
}

TEST_CASE("infer_shapes is deterministic on FCN graphs") {
  const Graph g = build_fcn(FcnVariant::Fcn16s, 64, 128, 35, {InitSpec::Mode::Zeros});
  const auto a = infer_shapes(g);
  const auto b = infer_shapes(g);
  CHECK(a == b);
  CHECK(a.at(g.outputs[0]).shape == std::vector<int64_t>{64, 128, 35});
}

TEST_SUITE_END();
