#include "kernels.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <thread>
#include <vector>

namespace segforge::kernels {

namespace {

void check_conv_args(const Tensor& x, const Tensor& w, const char* op) {
  if (x.rank() != 3)
    throw std::runtime_error(std::string(op) + ": input must be rank 3, got " +
                             shape_to_string(x.shape));
  if (w.rank() != 4)
    throw std::runtime_error(std::string(op) + ": weights must be rank 4, got " +
                             shape_to_string(w.shape));
  if (w.shape[2] != x.shape[2])
    throw std::runtime_error(std::string(op) + ": weight Cin " + std::to_string(w.shape[2]) +
                             " != input channels " + std::to_string(x.shape[2]));
  if (x.dtype != DType::Float32 || w.dtype != DType::Float32)
    throw std::runtime_error(std::string(op) + ": float32 tensors required");
}

// Runs fn(row_begin, row_end) across `threads` workers covering [0, rows).
void parallel_rows(int64_t rows, int threads, const std::function<void(int64_t, int64_t)>& fn) {
  if (threads <= 1 || rows <= 1) {
    fn(0, rows);
    return;
  }
  const int n = static_cast<int>(std::min<int64_t>(threads, rows));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(n));
  const int64_t chunk = (rows + n - 1) / n;
  for (int t = 0; t < n; ++t) {
    const int64_t lo = t * chunk;
    const int64_t hi = std::min(rows, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back(fn, lo, hi);
  }
  for (auto& th : pool) th.join();
}

}  // namespace

Tensor conv2d_direct(const Tensor& x, const Tensor& w, int threads) {
  check_conv_args(x, w, "conv2d");
  const int64_t h = x.shape[0], wd = x.shape[1], cin = x.shape[2];
  const int64_t kh = w.shape[0], kw = w.shape[1], cout = w.shape[3];
  const int64_t pad_y = (kh - 1) / 2, pad_x = (kw - 1) / 2;

  Tensor y = Tensor::zeros({h, wd, cout});
  const float* xp = x.f32.data();
  const float* wp = w.f32.data();
  float* yp = y.f32.data();

  parallel_rows(h, threads, [&](int64_t row_lo, int64_t row_hi) {
    for (int64_t oy = row_lo; oy < row_hi; ++oy) {
      for (int64_t ox = 0; ox < wd; ++ox) {
        float* ycell = yp + (oy * wd + ox) * cout;
        for (int64_t ky = 0; ky < kh; ++ky) {
          const int64_t iy = oy + ky - pad_y;
          if (iy < 0 || iy >= h) continue;
          for (int64_t kx = 0; kx < kw; ++kx) {
            const int64_t ix = ox + kx - pad_x;
            if (ix < 0 || ix >= wd) continue;
            const float* xcell = xp + (iy * wd + ix) * cin;
            const float* wcell = wp + (ky * kw + kx) * cin * cout;
            for (int64_t ci = 0; ci < cin; ++ci) {
              const float xv = xcell[ci];
              const float* wrow = wcell + ci * cout;
              for (int64_t co = 0; co < cout; ++co) ycell[co] += xv * wrow[co];
            }
          }
        }
      }
    }
  });
  return y;
}

Tensor conv2d_im2col(const Tensor& x, const Tensor& w, int threads) {
  check_conv_args(x, w, "conv2d");
  const int64_t h = x.shape[0], wd = x.shape[1], cin = x.shape[2];
  const int64_t kh = w.shape[0], kw = w.shape[1], cout = w.shape[3];
  const int64_t pad_y = (kh - 1) / 2, pad_x = (kw - 1) / 2;
  const int64_t k = kh * kw * cin;

  // Patch matrix: one row per output pixel, zero-filled at the borders.
  std::vector<float> patches(static_cast<size_t>(h * wd * k), 0.0f);
  const float* xp = x.f32.data();
  for (int64_t oy = 0; oy < h; ++oy) {
    for (int64_t ox = 0; ox < wd; ++ox) {
      float* row = patches.data() + (oy * wd + ox) * k;
      for (int64_t ky = 0; ky < kh; ++ky) {
        const int64_t iy = oy + ky - pad_y;
        if (iy < 0 || iy >= h) continue;
        for (int64_t kx = 0; kx < kw; ++kx) {
          const int64_t ix = ox + kx - pad_x;
          if (ix < 0 || ix >= wd) continue;
          std::copy_n(xp + (iy * wd + ix) * cin, cin, row + (ky * kw + kx) * cin);
        }
      }
    }
  }

  Tensor y = Tensor::zeros({h, wd, cout});
  const float* wp = w.f32.data();  // already k x cout row-major
  float* yp = y.f32.data();
  const int64_t rows = h * wd;
  parallel_rows(rows, threads, [&](int64_t lo, int64_t hi) {
    for (int64_t p = lo; p < hi; ++p) {
      const float* prow = patches.data() + p * k;
      float* yrow = yp + p * cout;
      for (int64_t kk = 0; kk < k; ++kk) {
        const float pv = prow[kk];
        if (pv == 0.0f) continue;  // skipping exact zeros preserves the sum bit for bit
        const float* wrow = wp + kk * cout;
        for (int64_t co = 0; co < cout; ++co) yrow[co] += pv * wrow[co];
      }
    }
  });
  return y;
}

namespace {

void check_transpose_args(const Tensor& x, const Tensor& w, int stride) {
  check_conv_args(x, w, "conv_transpose2d");
  if (stride < 1) throw std::runtime_error("conv_transpose2d: stride must be >= 1");
  if (w.shape[0] < stride || w.shape[1] < stride)
    throw std::runtime_error("conv_transpose2d: kernel " + std::to_string(w.shape[0]) + "x" +
                             std::to_string(w.shape[1]) + " smaller than stride " +
                             std::to_string(stride));
}

}  // namespace

Tensor conv_transpose2d_direct(const Tensor& x, const Tensor& w, int stride, int threads) {
  check_transpose_args(x, w, stride);
  const int64_t h = x.shape[0], wd = x.shape[1], cin = x.shape[2];
  const int64_t kh = w.shape[0], kw = w.shape[1], cout = w.shape[3];
  const int64_t s = stride;
  const int64_t out_h = h * s, out_w = wd * s;
  const int64_t pad_y = (kh - s) / 2, pad_x = (kw - s) / 2;

  Tensor y = Tensor::zeros({out_h, out_w, cout});
  const float* xp = x.f32.data();
  const float* wp = w.f32.data();
  float* yp = y.f32.data();

  parallel_rows(out_h, threads, [&](int64_t row_lo, int64_t row_hi) {
    for (int64_t oy = row_lo; oy < row_hi; ++oy) {
      for (int64_t ox = 0; ox < out_w; ++ox) {
        float* ycell = yp + (oy * out_w + ox) * cout;
        for (int64_t ky = 0; ky < kh; ++ky) {
          const int64_t ny = oy + pad_y - ky;
          if (ny < 0 || ny % s != 0) continue;
          const int64_t iy = ny / s;
          if (iy >= h) continue;
          for (int64_t kx = 0; kx < kw; ++kx) {
            const int64_t nx = ox + pad_x - kx;
            if (nx < 0 || nx % s != 0) continue;
            const int64_t ix = nx / s;
            if (ix >= wd) continue;
            const float* xcell = xp + (iy * wd + ix) * cin;
            const float* wcell = wp + (ky * kw + kx) * cin * cout;
            for (int64_t ci = 0; ci < cin; ++ci) {
              const float xv = xcell[ci];
              const float* wrow = wcell + ci * cout;
              for (int64_t co = 0; co < cout; ++co) ycell[co] += xv * wrow[co];
            }
          }
        }
      }
    }
  });
  return y;
}

Tensor conv_transpose2d_im2col(const Tensor& x, const Tensor& w, int stride, int threads) {
  check_transpose_args(x, w, stride);
  const int64_t h = x.shape[0], wd = x.shape[1], cin = x.shape[2];
  const int64_t kh = w.shape[0], kw = w.shape[1], cout = w.shape[3];
  const int64_t s = stride;
  const int64_t out_h = h * s, out_w = wd * s;
  const int64_t pad_y = (kh - s) / 2, pad_x = (kw - s) / 2;

  // Equivalent stride-1 correlation over the zero-dilated input with a
  // spatially flipped kernel. zBuf(oy + m) for m in [0, k) must reach every
  // contribution, so the dilated image is framed with (k-1-pad) leading and
  // (pad+s-1) trailing zeros.
  const int64_t lead_y = kh - 1 - pad_y, lead_x = kw - 1 - pad_x;
  const int64_t zh = lead_y + (h - 1) * s + 1 + (pad_y + s - 1);
  const int64_t zw = lead_x + (wd - 1) * s + 1 + (pad_x + s - 1);
  std::vector<float> z(static_cast<size_t>(zh * zw * cin), 0.0f);
  const float* xp = x.f32.data();
  for (int64_t iy = 0; iy < h; ++iy)
    for (int64_t ix = 0; ix < wd; ++ix)
      std::copy_n(xp + (iy * wd + ix) * cin, cin,
                  z.data() + ((lead_y + iy * s) * zw + (lead_x + ix * s)) * cin);

  // Flipped weights, flattened k x cout.
  const int64_t k = kh * kw * cin;
  std::vector<float> wf(static_cast<size_t>(k * cout));
  const float* wp = w.f32.data();
  for (int64_t my = 0; my < kh; ++my)
    for (int64_t mx = 0; mx < kw; ++mx)
      std::copy_n(wp + ((kh - 1 - my) * kw + (kw - 1 - mx)) * cin * cout, cin * cout,
                  wf.data() + (my * kw + mx) * cin * cout);

  Tensor y = Tensor::zeros({out_h, out_w, cout});
  float* yp = y.f32.data();
  parallel_rows(out_h, threads, [&](int64_t row_lo, int64_t row_hi) {
    std::vector<float> patch(static_cast<size_t>(k));
    for (int64_t oy = row_lo; oy < row_hi; ++oy) {
      for (int64_t ox = 0; ox < out_w; ++ox) {
        for (int64_t my = 0; my < kh; ++my)
          std::copy_n(z.data() + ((oy + my) * zw + ox) * cin, kw * cin,
                      patch.data() + my * kw * cin);
        float* yrow = yp + (oy * out_w + ox) * cout;
        for (int64_t kk = 0; kk < k; ++kk) {
          const float pv = patch[static_cast<size_t>(kk)];
          if (pv == 0.0f) continue;
          const float* wrow = wf.data() + kk * cout;
          for (int64_t co = 0; co < cout; ++co) yrow[co] += pv * wrow[co];
        }
      }
    }
  });
  return y;
}

Tensor bias_add(const Tensor& x, const Tensor& bias) {
  const int64_t ch = x.shape.back();
  if (bias.elem_count() != ch)
    throw std::runtime_error("bias_add: bias length " + std::to_string(bias.elem_count()) +
                             " != channels " + std::to_string(ch));
  Tensor y = x;
  const float* bp = bias.f32.data();
  const int64_t n = y.elem_count();
  for (int64_t i = 0; i < n; ++i) y.f32[static_cast<size_t>(i)] += bp[i % ch];
  return y;
}

Tensor relu(const Tensor& x) {
  Tensor y = x;
  for (float& v : y.f32) v = v > 0.0f ? v : 0.0f;
  return y;
}

Tensor maxpool2x2(const Tensor& x) {
  if (x.rank() != 3) throw std::runtime_error("maxpool2x2: input must be rank 3");
  const int64_t h = x.shape[0], w = x.shape[1], ch = x.shape[2];
  const int64_t oh = h / 2, ow = w / 2;
  Tensor y = Tensor::zeros({oh, ow, ch});
  for (int64_t i = 0; i < oh; ++i) {
    for (int64_t j = 0; j < ow; ++j) {
      for (int64_t c = 0; c < ch; ++c) {
        const float a = x.at(2 * i, 2 * j, c);
        const float b = x.at(2 * i, 2 * j + 1, c);
        const float d = x.at(2 * i + 1, 2 * j, c);
        const float e = x.at(2 * i + 1, 2 * j + 1, c);
        y.at(i, j, c) = std::max(std::max(a, b), std::max(d, e));
      }
    }
  }
  return y;
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape != b.shape)
    throw std::runtime_error("add: operand shapes differ, " + shape_to_string(a.shape) + " vs " +
                             shape_to_string(b.shape));
  Tensor y = a;
  for (size_t i = 0; i < y.f32.size(); ++i) y.f32[i] += b.f32[i];
  return y;
}

Tensor softmax_channels(const Tensor& x) {
  if (x.rank() != 3) throw std::runtime_error("softmax: input must be rank 3");
  const int64_t h = x.shape[0], w = x.shape[1], ch = x.shape[2];
  Tensor y = Tensor::zeros({h, w, ch});
  for (int64_t i = 0; i < h; ++i) {
    for (int64_t j = 0; j < w; ++j) {
      float m = x.at(i, j, 0);
      for (int64_t c = 1; c < ch; ++c) m = std::max(m, x.at(i, j, c));
      float sum = 0.0f;
      for (int64_t c = 0; c < ch; ++c) {
        const float e = std::exp(x.at(i, j, c) - m);
        y.at(i, j, c) = e;
        sum += e;
      }
      for (int64_t c = 0; c < ch; ++c) y.at(i, j, c) /= sum;
    }
  }
  return y;
}

Tensor batchnorm_frozen(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                        const Tensor& mean, const Tensor& var, double epsilon) {
  const int64_t ch = x.shape.back();
  for (const Tensor* t : {&gamma, &beta, &mean, &var})
    if (t->elem_count() != ch)
      throw std::runtime_error("batchnorm: parameter length != channels " + std::to_string(ch));
  Tensor y = x;
  std::vector<float> scale(static_cast<size_t>(ch)), shift(static_cast<size_t>(ch));
  for (int64_t c = 0; c < ch; ++c) {
    const float inv = 1.0f / std::sqrt(var.f32[static_cast<size_t>(c)] +
                                       static_cast<float>(epsilon));
    scale[static_cast<size_t>(c)] = gamma.f32[static_cast<size_t>(c)] * inv;
    shift[static_cast<size_t>(c)] = beta.f32[static_cast<size_t>(c)] -
                                    mean.f32[static_cast<size_t>(c)] * scale[static_cast<size_t>(c)];
  }
  const int64_t n = y.elem_count();
  for (int64_t i = 0; i < n; ++i) {
    const size_t c = static_cast<size_t>(i % ch);
    y.f32[static_cast<size_t>(i)] = y.f32[static_cast<size_t>(i)] * scale[c] + shift[c];
  }
  return y;
}

}  // namespace segforge::kernels
