#pragma once

#include <cstdint>
#include <string>

#include "segforge/graph.hpp"

namespace segforge {

// Binary model file (.sgm): magic "SGFM", version u16 = 1, little-endian,
// length-prefixed strings, one CRC32 per section (node table, blob section).
// Node table is sorted by id, so identical graphs serialize to identical
// bytes. See docs/FORMAT.md for the full layout.
std::string encode_model(const Graph& g);
Graph decode_model(const std::string& bytes, const std::string& what = "model");

// Returns the number of bytes written.
int64_t save_model(const Graph& g, const std::string& path);
Graph load_model(const std::string& path);

struct ModelSize {
  int64_t total_bytes = 0;
  int64_t payload_bytes = 0;    // raw Const element buffers
  int64_t structure_bytes = 0;  // everything else; total = payload + structure
};

ModelSize model_size(const std::string& path);
ModelSize model_size_of_bytes(const std::string& bytes, const std::string& what = "model");

}  // namespace segforge
