#pragma once

#include <cstdint>
#include <string>

#include "segforge/graph.hpp"

namespace segforge {

enum class FcnVariant { Fcn32s, Fcn16s, Fcn8s };
const char* fcn_variant_name(FcnVariant v);
std::optional<FcnVariant> fcn_variant_from_name(const std::string& s);

// Weight initialization. SeededNormal is reproducible: the same seed yields
// bitwise-identical payloads, and every tensor derives its own stream from
// (seed, tensor name) so the encoder weights are shared across variants.
struct InitSpec {
  enum class Mode { Zeros, SeededNormal };
  Mode mode = Mode::SeededNormal;
  double mean = 0.0;
  double stddev = 0.01;
  uint64_t seed = 0;
};

// Modified VGG16 encoder: 13 3x3 convolutions in five blocks separated by
// 2x2 max pools, then three 1x1 convolutions (4096, 4096, classes filters).
// Every convolution is followed by BiasAdd and Relu except the final scoring
// convolution (BiasAdd only, capped by an Identity named "score"). Named
// taps: "pool3", "pool4", "score". Requires h and w divisible by 32.
Graph build_encoder(int64_t h, int64_t w, int64_t classes, const InitSpec& init);

// Encoder plus decoder. All decoders consume the "score" tap; skip
// connections add the raw pool4/pool3 tensors (the upsample filter counts
// match the pool channel counts, so operands agree without projections).
//   Fcn8s : up4 (4x4, stride 2, 512) + pool4 skip; up3 (4x4, stride 2, 256)
//           + pool3 skip; final 16x16 stride-8 transpose conv to `classes`.
//   Fcn16s: up4 (4x4, stride 2, 512) + pool4 skip; final 16x16 stride-16
//           transpose conv to `classes`.
//   Fcn32s: single 32x32 stride-32 transpose conv to `classes`.
// The last node is an Identity named "output" with shape h x w x classes.
Graph build_fcn(FcnVariant variant, int64_t h, int64_t w, int64_t classes, const InitSpec& init);

}  // namespace segforge
