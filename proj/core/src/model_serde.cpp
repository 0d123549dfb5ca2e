#include "segforge/model_serde.hpp"

#include <stdexcept>

#include "binio.hpp"

namespace segforge {

namespace {

constexpr char kMagic[4] = {'S', 'G', 'F', 'M'};
constexpr uint16_t kVersion = 1;

void write_attr(detail::ByteWriter& w, const std::string& key, const AttrValue& value) {
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

std::pair<std::string, AttrValue> read_attr(detail::ByteReader& r) {
  std::string key = r.str();
  const uint8_t tag = r.u8();
  switch (tag) {
    case 0: return {std::move(key), AttrValue(r.i64())};
    case 1: return {std::move(key), AttrValue(r.f64())};
    case 2: {
      std::vector<int64_t> list(r.u32());
      for (int64_t& v : list) v = r.i64();
      return {std::move(key), AttrValue(std::move(list))};
    }
    default:
      r.fail("unknown attribute tag " + std::to_string(tag));
  }
}

}  // namespace

std::string encode_model(const Graph& g) {
  detail::ByteWriter header;
  header.bytes(kMagic, 4);
  header.u16(kVersion);
  header.str(g.name);

  detail::ByteWriter nodes;
  nodes.u32(static_cast<uint32_t>(g.nodes.size()));
  nodes.u32(static_cast<uint32_t>(g.outputs.size()));
  for (NodeId out : g.outputs) nodes.u32(out);
  for (const auto& [id, n] : g.nodes) {
    nodes.u32(n.id);
    nodes.u8(static_cast<uint8_t>(n.kind));
    nodes.str(n.name);
    nodes.u32(static_cast<uint32_t>(n.inputs.size()));
    for (NodeId in : n.inputs) nodes.u32(in);
    nodes.u32(static_cast<uint32_t>(n.attrs.size()));
    for (const auto& [key, value] : n.attrs) write_attr(nodes, key, value);
    nodes.u8(n.payload ? 1 : 0);
  }

  detail::ByteWriter blobs;
  for (const auto& [id, n] : g.nodes) {
    if (!n.payload) continue;
    const Tensor& t = *n.payload;
    blobs.u32(n.id);
    blobs.u8(static_cast<uint8_t>(t.dtype));
    blobs.u8(static_cast<uint8_t>(t.rank()));
    for (int64_t d : t.shape) blobs.u32(static_cast<uint32_t>(d));
    if (t.dtype == DType::Quant8) {
      blobs.f32(t.quant.scale);
      blobs.f32(t.quant.minimum);
      blobs.bytes(t.q8.data(), t.q8.size());
    } else {
      blobs.bytes(t.f32.data(), t.f32.size() * sizeof(float));
    }
  }

  detail::ByteWriter file;
  file.bytes(header.data().data(), header.size());
  file.u32(static_cast<uint32_t>(nodes.size()));
  file.bytes(nodes.data().data(), nodes.size());
  file.u32(detail::crc32(nodes.data().data(), nodes.size()));
  file.u64(blobs.size());
  file.bytes(blobs.data().data(), blobs.size());
  file.u32(detail::crc32(blobs.data().data(), blobs.size()));
  return file.data();
}

namespace {

struct SectionSpans {
  std::string name;
  size_t node_begin = 0, node_size = 0;
  size_t blob_begin = 0, blob_size = 0;
};

SectionSpans parse_sections(detail::ByteReader& r, const std::string& bytes, bool verify) {
  SectionSpans s;
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("model: magic mismatch (want SGFM)");
  const uint16_t version = r.u16();
  if (version != kVersion)
    throw std::runtime_error("model: version mismatch, file has " + std::to_string(version) +
                             ", reader supports " + std::to_string(kVersion));
  s.name = r.str();

  const uint32_t node_size = r.u32();
  s.node_begin = r.pos();
  s.node_size = node_size;
  r.skip(node_size);
  const uint32_t node_crc = r.u32();
  if (verify && node_crc != detail::crc32(bytes.data() + s.node_begin, s.node_size))
    throw std::runtime_error("model: checksum failure in node section");

  const uint64_t blob_size = r.u64();
  s.blob_begin = r.pos();
  s.blob_size = blob_size;
  r.skip(blob_size);
  const uint32_t blob_crc = r.u32();
  if (verify && blob_crc != detail::crc32(bytes.data() + s.blob_begin, s.blob_size))
    throw std::runtime_error("model: checksum failure in blob section");
  if (!r.at_end()) r.fail("trailing bytes after blob section");
  return s;
}

}  // namespace

Graph decode_model(const std::string& bytes, const std::string& what) {
  detail::ByteReader file(reinterpret_cast<const uint8_t*>(bytes.data()), bytes.size(), what);
  const SectionSpans sections = parse_sections(file, bytes, /*verify=*/true);

  Graph g;
  g.name = sections.name;

  detail::ByteReader nodes(reinterpret_cast<const uint8_t*>(bytes.data()) + sections.node_begin,
                           sections.node_size, what + " (node section)");
  const uint32_t node_count = nodes.u32();
  const uint32_t output_count = nodes.u32();
  g.outputs.resize(output_count);
  for (NodeId& out : g.outputs) out = nodes.u32();
  std::vector<NodeId> with_payload;
  for (uint32_t i = 0; i < node_count; ++i) {
    Node n;
    n.id = nodes.u32();
    const uint8_t kind = nodes.u8();
    if (kind > static_cast<uint8_t>(OpKind::FusedConvBiasRelu))
      nodes.fail("unknown op kind code " + std::to_string(kind));
    n.kind = static_cast<OpKind>(kind);
    n.name = nodes.str();
    n.inputs.resize(nodes.u32());
    for (NodeId& in : n.inputs) in = nodes.u32();
    const uint32_t attr_count = nodes.u32();
    for (uint32_t a = 0; a < attr_count; ++a) n.attrs.insert(read_attr(nodes));
    if (nodes.u8() != 0) with_payload.push_back(n.id);
    const NodeId id = n.id;
    if (!g.nodes.emplace(id, std::move(n)).second)
      nodes.fail("duplicate node id " + std::to_string(id));
  }
  if (!nodes.at_end()) nodes.fail("trailing bytes in node section");

  detail::ByteReader blobs(reinterpret_cast<const uint8_t*>(bytes.data()) + sections.blob_begin,
                           sections.blob_size, what + " (blob section)");
  for (const NodeId expect : with_payload) {
    const uint32_t id = blobs.u32();
    if (id != expect)
      blobs.fail("blob order mismatch, expected node " + std::to_string(expect) + " saw " +
                 std::to_string(id));
    Tensor t;
    const uint8_t dtype = blobs.u8();
    if (dtype > 1) blobs.fail("unknown dtype code " + std::to_string(dtype));
    t.dtype = static_cast<DType>(dtype);
    t.shape.resize(blobs.u8());
    for (int64_t& d : t.shape) d = blobs.u32();
    const size_t n = static_cast<size_t>(t.elem_count());
    if (t.dtype == DType::Quant8) {
      t.quant.scale = blobs.f32();
      t.quant.minimum = blobs.f32();
      t.q8.resize(n);
      blobs.bytes(t.q8.data(), n);
    } else {
      t.f32.resize(n);
      blobs.bytes(t.f32.data(), n * sizeof(float));
    }
    g.nodes.at(id).payload = std::move(t);
  }
  if (!blobs.at_end()) blobs.fail("trailing bytes in blob section");
  return g;
}

int64_t save_model(const Graph& g, const std::string& path) {
  const std::string bytes = encode_model(g);
  detail::write_file(path, bytes);
  return static_cast<int64_t>(bytes.size());
}

Graph load_model(const std::string& path) {
  return decode_model(detail::read_file(path), path);
}

ModelSize model_size_of_bytes(const std::string& bytes, const std::string& what) {
  detail::ByteReader file(reinterpret_cast<const uint8_t*>(bytes.data()), bytes.size(), what);
  const SectionSpans sections = parse_sections(file, bytes, /*verify=*/true);

  // Walk the blob section tallying raw element-buffer spans.
  detail::ByteReader blobs(reinterpret_cast<const uint8_t*>(bytes.data()) + sections.blob_begin,
                           sections.blob_size, what + " (blob section)");
  int64_t payload = 0;
  while (!blobs.at_end()) {
    blobs.u32();  // node id
    const uint8_t dtype = blobs.u8();
    if (dtype > 1) blobs.fail("unknown dtype code " + std::to_string(dtype));
    const uint8_t rank = blobs.u8();
    int64_t elems = 1;
    for (uint8_t i = 0; i < rank; ++i) elems *= blobs.u32();
    size_t span = static_cast<size_t>(elems) * (dtype == 0 ? 4 : 1);
    if (dtype == 1) blobs.skip(8);  // scale + minimum
    blobs.skip(span);
    payload += static_cast<int64_t>(span);
  }

  ModelSize size;
  size.total_bytes = static_cast<int64_t>(bytes.size());
  size.payload_bytes = payload;
  size.structure_bytes = size.total_bytes - payload;
  return size;
}

ModelSize model_size(const std::string& path) {
  return model_size_of_bytes(detail::read_file(path), path);
}

}  // namespace segforge
