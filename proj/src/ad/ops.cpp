#include "camda/ad/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <string>

namespace camda::ad {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;
template <typename T>
using StridedMap = Eigen::Map<RowMat<T>, 0, Eigen::OuterStride<>>;
template <typename T>
using ConstStridedMap = Eigen::Map<const RowMat<T>, 0, Eigen::OuterStride<>>;

template <typename T>
bool any_requires_grad(std::initializer_list<const Tensor<T>*> inputs) {
  if (!grad_enabled()) return false;
  for (const Tensor<T>* t : inputs) {
    if (t->defined() && t->requires_grad()) return true;
  }
  return false;
}

template <typename T>
NodePtr<T> new_output(Shape shape, bool requires_grad) {
  auto out = std::make_shared<Node<T>>();
  out->shape = shape;
  out->value.assign(shape.numel(), T(0));
  out->requires_grad = requires_grad;
  return out;
}

template <typename T>
Tensor<T> finish(const char* op, const NodePtr<T>& out, typename Tape<T>::BackwardFn fn) {
  if (checked_mode()) {
    for (T v : out->value) {
      if (!std::isfinite(v)) {
        throw NumericError(std::string(op) + ": non-finite value in output of shape " +
                           out->shape.str());
      }
    }
  }
  if (out->requires_grad) Tape<T>::active().record(out, std::move(fn));
  return Tensor<T>(out);
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ShapeError(message);
}

void require_same_shape(const Shape& a, const Shape& b, const char* op) {
  require(a == b, std::string(op) + ": shape mismatch " + a.str() + " vs " + b.str());
}

int reflect_index(int i, int extent) {
  if (extent == 1) return 0;
  const int period = 2 * (extent - 1);
  i %= period;
  if (i < 0) i += period;
  return i < extent ? i : period - i;
}

// For each output position o and kernel tap k, the source index along one
// axis, or -1 for zero padding. Laid out as [o * kernel + k].
std::vector<int> axis_map(int in, int out, int kernel, int stride, int padding, PadMode mode) {
  std::vector<int> map(static_cast<std::size_t>(out) * kernel);
  for (int o = 0; o < out; ++o) {
    for (int k = 0; k < kernel; ++k) {
      int i = o * stride - padding + k;
      if (i < 0 || i >= in) {
        i = mode == PadMode::Reflect ? reflect_index(i, in) : -1;
      }
      map[static_cast<std::size_t>(o) * kernel + k] = i;
    }
  }
  return map;
}

struct ConvGeometry {
  int channels;
  int in_h, in_w;
  int out_h, out_w;
  int kernel;
  std::vector<int> hmap, wmap;
  // For each kernel column, the output range [lo, hi) over which wmap is
  // src = ow + shift, so the gather is a contiguous copy.
  std::vector<int> span_lo, span_hi, span_shift;

  std::size_t rows() const { return static_cast<std::size_t>(channels) * kernel * kernel; }
  std::size_t cols() const { return static_cast<std::size_t>(out_h) * out_w; }
};

// cols (C*k*k x rows*OW) gathered from one image plane stack (C x H x W)
// for output rows [oh0, oh1).
template <typename T>
void im2col(const T* image, const ConvGeometry& g, T* cols, int oh0, int oh1) {
  const int k = g.kernel;
  const std::size_t width = static_cast<std::size_t>(oh1 - oh0) * g.out_w;
  for (int c = 0; c < g.channels; ++c) {
    const T* plane = image + static_cast<std::size_t>(c) * g.in_h * g.in_w;
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        T* row = cols + ((static_cast<std::size_t>(c) * k + ki) * k + kj) * width;
        for (int oh = oh0; oh < oh1; ++oh) {
          const int ih = g.hmap[static_cast<std::size_t>(oh) * k + ki];
          T* dst = row + static_cast<std::size_t>(oh - oh0) * g.out_w;
          if (ih < 0) {
            std::fill(dst, dst + g.out_w, T(0));
            continue;
          }
          const T* src = plane + static_cast<std::size_t>(ih) * g.in_w;
          const int lo = g.span_lo[kj], hi = g.span_hi[kj];
          for (int ow = 0; ow < lo; ++ow) {
            const int iw = g.wmap[static_cast<std::size_t>(ow) * k + kj];
            dst[ow] = iw < 0 ? T(0) : src[iw];
          }
          std::copy(src + lo + g.span_shift[kj], src + hi + g.span_shift[kj], dst + lo);
          for (int ow = hi; ow < g.out_w; ++ow) {
            const int iw = g.wmap[static_cast<std::size_t>(ow) * k + kj];
            dst[ow] = iw < 0 ? T(0) : src[iw];
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-adds cols back into the image plane stack.
template <typename T>
void col2im(const T* cols, const ConvGeometry& g, T* image, int oh0, int oh1) {
  const int k = g.kernel;
  const std::size_t width = static_cast<std::size_t>(oh1 - oh0) * g.out_w;
  for (int c = 0; c < g.channels; ++c) {
    T* plane = image + static_cast<std::size_t>(c) * g.in_h * g.in_w;
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        const T* row = cols + ((static_cast<std::size_t>(c) * k + ki) * k + kj) * width;
        for (int oh = oh0; oh < oh1; ++oh) {
          const int ih = g.hmap[static_cast<std::size_t>(oh) * k + ki];
          if (ih < 0) continue;
          const T* src = row + static_cast<std::size_t>(oh - oh0) * g.out_w;
          T* dst = plane + static_cast<std::size_t>(ih) * g.in_w;
          const int lo = g.span_lo[kj], hi = g.span_hi[kj];
          for (int ow = 0; ow < lo; ++ow) {
            const int iw = g.wmap[static_cast<std::size_t>(ow) * k + kj];
            if (iw >= 0) dst[iw] += src[ow];
          }
          T* shifted = dst + g.span_shift[kj];
          for (int ow = lo; ow < hi; ++ow) shifted[ow] += src[ow];
          for (int ow = hi; ow < g.out_w; ++ow) {
            const int iw = g.wmap[static_cast<std::size_t>(ow) * k + kj];
            if (iw >= 0) dst[iw] += src[ow];
          }
        }
      }
    }
  }
}

ConvGeometry make_geometry(int channels, int in_h, int in_w, int kernel, int stride, int padding,
                           PadMode mode) {
  ConvGeometry g;
  g.channels = channels;
  g.in_h = in_h;
  g.in_w = in_w;
  g.kernel = kernel;
  g.out_h = conv_output_size(in_h, kernel, stride, padding);
  g.out_w = conv_output_size(in_w, kernel, stride, padding);
  g.hmap = axis_map(in_h, g.out_h, kernel, stride, padding, mode);
  g.wmap = axis_map(in_w, g.out_w, kernel, stride, padding, mode);
  g.span_lo.assign(kernel, 0);
  g.span_hi.assign(kernel, 0);
  g.span_shift.assign(kernel, 0);
  if (stride == 1) {
    for (int kj = 0; kj < kernel; ++kj) {
      const int shift = kj - padding;
      int lo = 0;
      while (lo < g.out_w && lo + shift < 0) ++lo;
      int hi = lo;
      while (hi < g.out_w && hi + shift < in_w) ++hi;
      g.span_lo[kj] = lo;
      g.span_hi[kj] = hi;
      g.span_shift[kj] = shift;
    }
  }
  return g;
}

// Output rows per im2col band, sized so one band of cols stays cache resident.
template <typename T>
int band_rows(const ConvGeometry& g) {
  constexpr std::size_t budget = 256 * 1024;
  constexpr std::size_t min_width = 256;
  const std::size_t w = std::max(g.out_w, 1);
  const std::size_t per_row = g.rows() * w * sizeof(T);
  const std::size_t rows = std::max(budget / std::max<std::size_t>(per_row, 1), (min_width + w - 1) / w);
  return static_cast<int>(std::clamp<std::size_t>(rows, 1, static_cast<std::size_t>(g.out_h)));
}

bool is_pointwise(const ConvGeometry& g, int stride, int padding) {
  return g.kernel == 1 && stride == 1 && padding == 0;
}

}  // namespace

int conv_output_size(int in, int kernel, int stride, int padding) {
  const int span = in + 2 * padding - kernel;
  if (span < 0) return 0;
  return span / stride + 1;
}

int conv_transpose_output_size(int in, int kernel, int stride, int padding, int output_padding) {
  return (in - 1) * stride - 2 * padding + kernel + output_padding;
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                 Conv2dOptions options) {
  const Shape& xs = input.shape();
  const Shape& ws = weight.shape();
  require(options.stride >= 1, "conv2d: stride must be >= 1");
  require(options.padding >= 0, "conv2d: padding must be >= 0");
  require(ws.h == ws.w, "conv2d: kernel must be square, got " + ws.str());
  require(xs.c == ws.c, "conv2d: input channels " + std::to_string(xs.c) +
                            " do not match weight " + ws.str());
  if (bias.defined()) {
    require(bias.numel() == static_cast<std::size_t>(ws.n),
            "conv2d: bias length does not match output channels");
  }
  if (options.pad_mode == PadMode::Reflect) {
    require(options.padding < xs.h && options.padding < xs.w,
            "conv2d: reflect padding must be smaller than the input extent");
  }
  auto geom = std::make_shared<ConvGeometry>(make_geometry(
      xs.c, xs.h, xs.w, ws.h, options.stride, options.padding, options.pad_mode));
  require(geom->out_h >= 1 && geom->out_w >= 1,
          "conv2d: non-positive output size for input " + xs.str() + " and kernel " +
              std::to_string(ws.h));

  const int cout = ws.n;
  const Shape out_shape{xs.n, cout, geom->out_h, geom->out_w};
  auto out = new_output<T>(out_shape, any_requires_grad<T>({&input, &weight, &bias}));
  const bool pointwise = is_pointwise(*geom, options.stride, options.padding);

  const std::size_t K = geom->rows();
  const std::size_t P = geom->cols();
  const int band = pointwise ? geom->out_h : band_rows<T>(*geom);
  Buffer<T> cols(pointwise ? 0 : K * band * geom->out_w);
  ConstMatMap<T> w(weight.data().data(), cout, K);
  const std::size_t in_stride = static_cast<std::size_t>(xs.c) * xs.h * xs.w;
  for (int n = 0; n < xs.n; ++n) {
    const T* x = input.data().data() + n * in_stride;
    T* yn = out->value.data() + n * cout * P;
    if (pointwise) {
      MatMap<T>(yn, cout, P).noalias() = w * ConstMatMap<T>(x, K, P);
    } else {
      for (int oh0 = 0; oh0 < geom->out_h; oh0 += band) {
        const int oh1 = std::min(geom->out_h, oh0 + band);
        const std::size_t p0 = static_cast<std::size_t>(oh0) * geom->out_w;
        const std::size_t width = static_cast<std::size_t>(oh1 - oh0) * geom->out_w;
        im2col(x, *geom, cols.data(), oh0, oh1);
        StridedMap<T>(yn + p0, cout, width, Eigen::OuterStride<>(P)).noalias() =
            w * ConstMatMap<T>(cols.data(), K, width);
      }
    }
    if (bias.defined()) {
      MatMap<T> y(yn, cout, P);
      for (int o = 0; o < cout; ++o) y.row(o).array() += bias.data()[o];
    }
  }

  NodePtr<T> xn = input.ptr(), wn = weight.ptr(), bn = bias.defined() ? bias.ptr() : nullptr;
  return finish<T>("conv2d", out, [xn, wn, bn, geom, pointwise, band, cout, in_stride](Node<T>& o) {
    const std::size_t K = geom->rows();
    const std::size_t P = geom->cols();
    const int batch = xn->shape.n;
    const std::size_t cap = pointwise ? 0 : K * band * geom->out_w;
    Buffer<T> cols(wn->requires_grad ? cap : 0);
    Buffer<T> dcols(xn->requires_grad ? cap : 0);
    ConstMatMap<T> w(wn->value.data(), cout, K);
    for (int n = 0; n < batch; ++n) {
      const T* gy = o.grad.data() + n * cout * P;
      const T* x = xn->value.data() + n * in_stride;
      if (pointwise) {
        ConstMatMap<T> dy(gy, cout, P);
        if (wn->requires_grad) {
          MatMap<T>(wn->ensure_grad().data(), cout, K).noalias() +=
              dy * ConstMatMap<T>(x, K, P).transpose();
        }
        if (xn->requires_grad) {
          MatMap<T>(xn->ensure_grad().data() + n * in_stride, K, P).noalias() += w.transpose() * dy;
        }
      } else {
        for (int oh0 = 0; oh0 < geom->out_h; oh0 += band) {
          const int oh1 = std::min(geom->out_h, oh0 + band);
          const std::size_t p0 = static_cast<std::size_t>(oh0) * geom->out_w;
          const std::size_t width = static_cast<std::size_t>(oh1 - oh0) * geom->out_w;
          ConstStridedMap<T> dy(gy + p0, cout, width, Eigen::OuterStride<>(P));
          if (wn->requires_grad) {
            im2col(x, *geom, cols.data(), oh0, oh1);
            MatMap<T>(wn->ensure_grad().data(), cout, K).noalias() +=
                dy * ConstMatMap<T>(cols.data(), K, width).transpose();
          }
          if (xn->requires_grad) {
            MatMap<T>(dcols.data(), K, width).noalias() = w.transpose() * dy;
            col2im(dcols.data(), *geom, xn->ensure_grad().data() + n * in_stride, oh0, oh1);
          }
        }
      }
      if (bn && bn->requires_grad) {
        ConstMatMap<T> dy(gy, cout, P);
        auto& db = bn->ensure_grad();
        for (int c = 0; c < cout; ++c) db[c] += dy.row(c).sum();
      }
    }
  });
}

template <typename T>
Tensor<T> conv_transpose2d(const Tensor<T>& input, const Tensor<T>& weight,
                           const Tensor<T>& bias, ConvTranspose2dOptions options) {
  const Shape& xs = input.shape();
  const Shape& ws = weight.shape();
  require(options.stride >= 1, "conv_transpose2d: stride must be >= 1");
  require(options.padding >= 0 && options.output_padding >= 0,
          "conv_transpose2d: padding must be >= 0");
  require(options.output_padding < options.stride,
          "conv_transpose2d: output_padding must be smaller than stride");
  require(ws.h == ws.w, "conv_transpose2d: kernel must be square, got " + ws.str());
  require(xs.c == ws.n, "conv_transpose2d: input channels " + std::to_string(xs.c) +
                            " do not match weight " + ws.str());
  const int cout = ws.c;
  if (bias.defined()) {
    require(bias.numel() == static_cast<std::size_t>(cout),
            "conv_transpose2d: bias length does not match output channels");
  }
  const int k = ws.h;
  const int oh = conv_transpose_output_size(xs.h, k, options.stride, options.padding,
                                            options.output_padding);
  const int ow = conv_transpose_output_size(xs.w, k, options.stride, options.padding,
                                            options.output_padding);
  require(oh >= 1 && ow >= 1, "conv_transpose2d: non-positive output size");
  // The output plays the role of a conv2d input that yields `input`.
  auto geom = std::make_shared<ConvGeometry>(
      make_geometry(cout, oh, ow, k, options.stride, options.padding, PadMode::Zero));
  require(geom->out_h == xs.h && geom->out_w == xs.w,
          "conv_transpose2d: inconsistent geometry");

  const Shape out_shape{xs.n, cout, oh, ow};
  auto out = new_output<T>(out_shape, any_requires_grad<T>({&input, &weight, &bias}));
  const std::size_t K = geom->rows();  // cout * k * k
  const std::size_t P = geom->cols();  // in_h * in_w
  const int cin = xs.c;
  const std::size_t out_stride = static_cast<std::size_t>(cout) * oh * ow;
  const int band = band_rows<T>(*geom);
  Buffer<T> cols(K * band * geom->out_w);
  ConstMatMap<T> w(weight.data().data(), cin, K);
  for (int n = 0; n < xs.n; ++n) {
    const T* xp = input.data().data() + n * cin * P;
    T* y = out->value.data() + n * out_stride;
    for (int r0 = 0; r0 < geom->out_h; r0 += band) {
      const int r1 = std::min(geom->out_h, r0 + band);
      const std::size_t p0 = static_cast<std::size_t>(r0) * geom->out_w;
      const std::size_t width = static_cast<std::size_t>(r1 - r0) * geom->out_w;
      ConstStridedMap<T> x(xp + p0, cin, width, Eigen::OuterStride<>(P));
      MatMap<T>(cols.data(), K, width).noalias() = w.transpose() * x;
      col2im(cols.data(), *geom, y, r0, r1);
    }
    if (bias.defined()) {
      const std::size_t plane = static_cast<std::size_t>(oh) * ow;
      for (int c = 0; c < cout; ++c) {
        std::for_each(y + c * plane, y + (c + 1) * plane, [&](T& v) { v += bias.data()[c]; });
      }
    }
  }

  NodePtr<T> xn = input.ptr(), wn = weight.ptr(), bn = bias.defined() ? bias.ptr() : nullptr;
  return finish<T>("conv_transpose2d", out,
                   [xn, wn, bn, geom, band, cin, cout, out_stride](Node<T>& o) {
    const std::size_t K = geom->rows();
    const std::size_t P = geom->cols();
    Buffer<T> cols(K * band * geom->out_w);
    ConstMatMap<T> w(wn->value.data(), cin, K);
    const std::size_t plane = static_cast<std::size_t>(geom->in_h) * geom->in_w;
    for (int n = 0; n < xn->shape.n; ++n) {
      const T* dy = o.grad.data() + n * out_stride;
      for (int r0 = 0; r0 < geom->out_h; r0 += band) {
        const int r1 = std::min(geom->out_h, r0 + band);
        const std::size_t p0 = static_cast<std::size_t>(r0) * geom->out_w;
        const std::size_t width = static_cast<std::size_t>(r1 - r0) * geom->out_w;
        im2col(dy, *geom, cols.data(), r0, r1);
        ConstMatMap<T> dcols(cols.data(), K, width);
        if (xn->requires_grad) {
          StridedMap<T>(xn->ensure_grad().data() + n * cin * P + p0, cin, width,
                        Eigen::OuterStride<>(P)).noalias() += w * dcols;
        }
        if (wn->requires_grad) {
          ConstStridedMap<T> x(xn->value.data() + n * cin * P + p0, cin, width,
                               Eigen::OuterStride<>(P));
          MatMap<T>(wn->ensure_grad().data(), cin, K).noalias() += x * dcols.transpose();
        }
      }
      if (bn && bn->requires_grad) {
        auto& db = bn->ensure_grad();
        for (int c = 0; c < cout; ++c) {
          T acc = 0;
          for (std::size_t i = 0; i < plane; ++i) acc += dy[c * plane + i];
          db[c] += acc;
        }
      }
    }
  });
}

namespace {

// Shared normalization kernel. Each group is a set of (start, count) runs
// of contiguous elements that share one mean/variance.
template <typename T>
struct NormGroups {
  int groups;
  int runs_per_group;
  std::size_t run_length;
  std::size_t run_stride_in_group;  // distance between successive runs of one group
  std::size_t group_offset;         // distance between the first runs of successive groups

  std::size_t count() const { return static_cast<std::size_t>(runs_per_group) * run_length; }
  std::size_t start(int g, int r) const { return g * group_offset + r * run_stride_in_group; }
};

template <typename T>
NormGroups<T> channel_groups(const Shape& s) {
  return {s.c, s.n, s.plane(), static_cast<std::size_t>(s.c) * s.plane(), s.plane()};
}

template <typename T>
NormGroups<T> plane_groups(const Shape& s) {
  return {s.n * s.c, 1, s.plane(), 0, s.plane()};
}

template <typename T>
void group_moments(const Buffer<T>& x, const NormGroups<T>& g, int group, double& mean,
                   double& var) {
  double acc = 0;
  for (int r = 0; r < g.runs_per_group; ++r) {
    const T* p = x.data() + g.start(group, r);
    for (std::size_t i = 0; i < g.run_length; ++i) acc += p[i];
  }
  mean = acc / static_cast<double>(g.count());
  double sq = 0;
  for (int r = 0; r < g.runs_per_group; ++r) {
    const T* p = x.data() + g.start(group, r);
    for (std::size_t i = 0; i < g.run_length; ++i) {
      const double d = p[i] - mean;
      sq += d * d;
    }
  }
  var = sq / static_cast<double>(g.count());
}

// Backward through xhat = (x - mu) / sqrt(var + eps) with batch statistics.
template <typename T>
void normalize_backward(const Buffer<T>& dxhat, const Buffer<T>& xhat,
                        const Buffer<T>& inv_std, const NormGroups<T>& g, Buffer<T>& dx) {
  for (int group = 0; group < g.groups; ++group) {
    double sum_d = 0;
    double sum_dx = 0;
    for (int r = 0; r < g.runs_per_group; ++r) {
      const std::size_t s = g.start(group, r);
      for (std::size_t i = 0; i < g.run_length; ++i) {
        sum_d += dxhat[s + i];
        sum_dx += static_cast<double>(dxhat[s + i]) * xhat[s + i];
      }
    }
    const double m = static_cast<double>(g.count());
    const double is = inv_std[group];
    for (int r = 0; r < g.runs_per_group; ++r) {
      const std::size_t s = g.start(group, r);
      for (std::size_t i = 0; i < g.run_length; ++i) {
        dx[s + i] += static_cast<T>(is * (dxhat[s + i] - sum_d / m - xhat[s + i] * sum_dx / m));
      }
    }
  }
}

}  // namespace

template <typename T>
Tensor<T> batch_norm(const Tensor<T>& input, const Tensor<T>& gamma, const Tensor<T>& beta,
                     RunningStats<T>& stats, BatchNormOptions options) {
  const Shape& s = input.shape();
  require(gamma.numel() == static_cast<std::size_t>(s.c) &&
              beta.numel() == static_cast<std::size_t>(s.c),
          "batch_norm: gamma/beta length must equal channel count " + std::to_string(s.c));
  require(stats.mean.size() == static_cast<std::size_t>(s.c) &&
              stats.var.size() == static_cast<std::size_t>(s.c),
          "batch_norm: running statistics do not match channel count");
  const bool train = options.mode == NormMode::Train;
  const auto groups = channel_groups<T>(s);
  if (train) {
    require(groups.count() >= 2, "batch_norm: need at least 2 values per channel in train mode");
  }

  auto out = new_output<T>(s, any_requires_grad<T>({&input, &gamma, &beta}));
  auto xhat = std::make_shared<Buffer<T>>(s.numel());
  auto inv_std = std::make_shared<Buffer<T>>(s.c);
  const auto& x = input.node().value;
  for (int c = 0; c < s.c; ++c) {
    double mu, var;
    if (train) {
      group_moments(x, groups, c, mu, var);
      const double m = static_cast<double>(groups.count());
      stats.mean[c] = static_cast<T>((1 - options.momentum) * stats.mean[c] + options.momentum * mu);
      stats.var[c] = static_cast<T>((1 - options.momentum) * stats.var[c] +
                                    options.momentum * var * m / (m - 1));
    } else {
      mu = stats.mean[c];
      var = stats.var[c];
    }
    const double denom = var + options.eps;
    if (!(denom > 0)) {
      throw NumericError("batch_norm: degenerate normalization (zero variance with eps=0) in channel " +
                         std::to_string(c));
    }
    const double is = 1.0 / std::sqrt(denom);
    (*inv_std)[c] = static_cast<T>(is);
    const double gm = gamma.data()[c];
    const double bt = beta.data()[c];
    for (int r = 0; r < groups.runs_per_group; ++r) {
      const std::size_t st = groups.start(c, r);
      for (std::size_t i = 0; i < groups.run_length; ++i) {
        const double xh = (x[st + i] - mu) * is;
        (*xhat)[st + i] = static_cast<T>(xh);
        out->value[st + i] = static_cast<T>(gm * xh + bt);
      }
    }
  }

  NodePtr<T> xn = input.ptr(), gn = gamma.ptr(), bn = beta.ptr();
  return finish<T>("batch_norm", out, [xn, gn, bn, xhat, inv_std, groups, train](Node<T>& o) {
    const int channels = xn->shape.c;
    if (gn->requires_grad || bn->requires_grad) {
      for (int c = 0; c < channels; ++c) {
        double dg = 0, db = 0;
        for (int r = 0; r < groups.runs_per_group; ++r) {
          const std::size_t st = groups.start(c, r);
          for (std::size_t i = 0; i < groups.run_length; ++i) {
            dg += static_cast<double>(o.grad[st + i]) * (*xhat)[st + i];
            db += o.grad[st + i];
          }
        }
        if (gn->requires_grad) gn->ensure_grad()[c] += static_cast<T>(dg);
        if (bn->requires_grad) bn->ensure_grad()[c] += static_cast<T>(db);
      }
    }
    if (!xn->requires_grad) return;
    Buffer<T> dxhat(o.grad.size());
    for (int c = 0; c < channels; ++c) {
      const T gm = gn->value[c];
      for (int r = 0; r < groups.runs_per_group; ++r) {
        const std::size_t st = groups.start(c, r);
        for (std::size_t i = 0; i < groups.run_length; ++i) dxhat[st + i] = o.grad[st + i] * gm;
      }
    }
    auto& dx = xn->ensure_grad();
    if (train) {
      normalize_backward(dxhat, *xhat, *inv_std, groups, dx);
    } else {
      for (int c = 0; c < channels; ++c) {
        for (int r = 0; r < groups.runs_per_group; ++r) {
          const std::size_t st = groups.start(c, r);
          for (std::size_t i = 0; i < groups.run_length; ++i) {
            dx[st + i] += dxhat[st + i] * (*inv_std)[c];
          }
        }
      }
    }
  });
}

template <typename T>
Tensor<T> instance_norm(const Tensor<T>& input, double eps) {
  const Shape& s = input.shape();
  const auto groups = plane_groups<T>(s);
  require(groups.count() >= 2, "instance_norm: need at least 2 values per plane");
  auto out = new_output<T>(s, any_requires_grad<T>({&input}));
  auto inv_std = std::make_shared<Buffer<T>>(groups.groups);
  const auto& x = input.node().value;
  for (int g = 0; g < groups.groups; ++g) {
    double mu, var;
    group_moments(x, groups, g, mu, var);
    const double denom = var + eps;
    if (!(denom > 0)) {
      throw NumericError("instance_norm: degenerate normalization (zero variance with eps=0)");
    }
    const double is = 1.0 / std::sqrt(denom);
    (*inv_std)[g] = static_cast<T>(is);
    const std::size_t st = groups.start(g, 0);
    for (std::size_t i = 0; i < groups.run_length; ++i) {
      out->value[st + i] = static_cast<T>((x[st + i] - mu) * is);
    }
  }
  NodePtr<T> xn = input.ptr();
  return finish<T>("instance_norm", out, [xn, inv_std, groups](Node<T>& o) {
    normalize_backward(o.grad, o.value, *inv_std, groups, xn->ensure_grad());
  });
}

namespace {

template <typename T, typename Fwd, typename Deriv>
Tensor<T> unary(const char* op, const Tensor<T>& input, Fwd fwd, Deriv deriv) {
  auto out = new_output<T>(input.shape(), any_requires_grad<T>({&input}));
  const auto& x = input.node().value;
  for (std::size_t i = 0; i < x.size(); ++i) out->value[i] = fwd(x[i]);
  NodePtr<T> xn = input.ptr();
  return finish<T>(op, out, [xn, deriv](Node<T>& o) {
    auto& dx = xn->ensure_grad();
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += o.grad[i] * deriv(xn->value[i], o.value[i]);
  });
}

}  // namespace

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& input, double slope) {
  const T a = static_cast<T>(slope);
  return unary<T>(
      "leaky_relu", input, [a](T x) { return x >= 0 ? x : a * x; },
      [a](T x, T) { return x >= 0 ? T(1) : a; });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& input) {
  return unary<T>(
      "relu", input, [](T x) { return x > 0 ? x : T(0); },
      [](T x, T) { return x >= 0 ? T(1) : T(0); });
}

template <typename T>
Tensor<T> tanh(const Tensor<T>& input) {
  return unary<T>(
      "tanh", input, [](T x) { return std::tanh(x); }, [](T, T y) { return T(1) - y * y; });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a.shape(), b.shape(), "add");
  auto out = new_output<T>(a.shape(), any_requires_grad<T>({&a, &b}));
  for (std::size_t i = 0; i < out->value.size(); ++i) out->value[i] = a.data()[i] + b.data()[i];
  NodePtr<T> an = a.ptr(), bn = b.ptr();
  return finish<T>("add", out, [an, bn](Node<T>& o) {
    for (Node<T>* n : {an.get(), bn.get()}) {
      if (!n->requires_grad) continue;
      auto& d = n->ensure_grad();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += o.grad[i];
    }
  });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a.shape(), b.shape(), "sub");
  auto out = new_output<T>(a.shape(), any_requires_grad<T>({&a, &b}));
  for (std::size_t i = 0; i < out->value.size(); ++i) out->value[i] = a.data()[i] - b.data()[i];
  NodePtr<T> an = a.ptr(), bn = b.ptr();
  return finish<T>("sub", out, [an, bn](Node<T>& o) {
    if (an->requires_grad) {
      auto& d = an->ensure_grad();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += o.grad[i];
    }
    if (bn->requires_grad) {
      auto& d = bn->ensure_grad();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] -= o.grad[i];
    }
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a.shape(), b.shape(), "mul");
  auto out = new_output<T>(a.shape(), any_requires_grad<T>({&a, &b}));
  for (std::size_t i = 0; i < out->value.size(); ++i) out->value[i] = a.data()[i] * b.data()[i];
  NodePtr<T> an = a.ptr(), bn = b.ptr();
  return finish<T>("mul", out, [an, bn](Node<T>& o) {
    if (an->requires_grad) {
      auto& d = an->ensure_grad();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += o.grad[i] * bn->value[i];
    }
    if (bn->requires_grad) {
      auto& d = bn->ensure_grad();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += o.grad[i] * an->value[i];
    }
  });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, double factor) {
  const T f = static_cast<T>(factor);
  return unary<T>(
      "scale", a, [f](T x) { return f * x; }, [f](T, T) { return f; });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  auto out = new_output<T>(Shape{}, any_requires_grad<T>({&a}));
  double acc = 0;
  for (T v : a.data()) acc += v;
  out->value[0] = static_cast<T>(acc);
  NodePtr<T> an = a.ptr();
  return finish<T>("sum", out, [an](Node<T>& o) {
    auto& d = an->ensure_grad();
    for (auto& v : d) v += o.grad[0];
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
  require(a.numel() > 0, "mean: empty tensor");
  auto out = new_output<T>(Shape{}, any_requires_grad<T>({&a}));
  double acc = 0;
  for (T v : a.data()) acc += v;
  const double n = static_cast<double>(a.numel());
  out->value[0] = static_cast<T>(acc / n);
  NodePtr<T> an = a.ptr();
  return finish<T>("mean", out, [an, n](Node<T>& o) {
    auto& d = an->ensure_grad();
    const T g = static_cast<T>(o.grad[0] / n);
    for (auto& v : d) v += g;
  });
}

namespace {

template <typename T, typename Fwd, typename Deriv>
Tensor<T> pairwise_loss(const char* op, const Tensor<T>& a, const Tensor<T>& b, Fwd fwd,
                        Deriv deriv) {
  require_same_shape(a.shape(), b.shape(), op);
  require(a.numel() > 0, std::string(op) + ": empty tensor");
  auto out = new_output<T>(Shape{}, any_requires_grad<T>({&a, &b}));
  double acc = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) acc += fwd(double(a.data()[i]) - b.data()[i]);
  const double n = static_cast<double>(a.numel());
  out->value[0] = static_cast<T>(acc / n);
  NodePtr<T> an = a.ptr(), bn = b.ptr();
  return finish<T>(op, out, [an, bn, n, deriv](Node<T>& o) {
    const double g = o.grad[0] / n;
    const std::size_t count = an->value.size();
    if (an->requires_grad) {
      auto& d = an->ensure_grad();
      for (std::size_t i = 0; i < count; ++i) {
        d[i] += static_cast<T>(g * deriv(double(an->value[i]) - bn->value[i]));
      }
    }
    if (bn->requires_grad) {
      auto& d = bn->ensure_grad();
      for (std::size_t i = 0; i < count; ++i) {
        d[i] -= static_cast<T>(g * deriv(double(an->value[i]) - bn->value[i]));
      }
    }
  });
}

}  // namespace

template <typename T>
Tensor<T> mse_loss(const Tensor<T>& a, const Tensor<T>& b) {
  return pairwise_loss<T>(
      "mse_loss", a, b, [](double d) { return d * d; }, [](double d) { return 2 * d; });
}

template <typename T>
Tensor<T> l1_loss(const Tensor<T>& a, const Tensor<T>& b) {
  return pairwise_loss<T>(
      "l1_loss", a, b, [](double d) { return std::abs(d); },
      [](double d) { return d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0); });
}

template <typename T>
Tensor<T> avg_pool2d(const Tensor<T>& input, int kernel) {
  const Shape& s = input.shape();
  require(kernel >= 1 && s.h % kernel == 0 && s.w % kernel == 0,
          "avg_pool2d: spatial extent " + s.str() + " not divisible by " + std::to_string(kernel));
  const Shape os{s.n, s.c, s.h / kernel, s.w / kernel};
  auto out = new_output<T>(os, any_requires_grad<T>({&input}));
  const T inv = T(1) / static_cast<T>(kernel * kernel);
  const std::size_t planes = static_cast<std::size_t>(s.n) * s.c;
  const auto& x = input.node().value;
  for (std::size_t p = 0; p < planes; ++p) {
    const T* src = x.data() + p * s.plane();
    T* dst = out->value.data() + p * os.plane();
    for (int i = 0; i < s.h; ++i) {
      for (int j = 0; j < s.w; ++j) dst[(i / kernel) * os.w + j / kernel] += src[i * s.w + j] * inv;
    }
  }
  NodePtr<T> xn = input.ptr();
  return finish<T>("avg_pool2d", out, [xn, kernel, planes, inv](Node<T>& o) {
    const Shape& s = xn->shape;
    const Shape& os = o.shape;
    auto& dx = xn->ensure_grad();
    for (std::size_t p = 0; p < planes; ++p) {
      const T* g = o.grad.data() + p * os.plane();
      T* d = dx.data() + p * s.plane();
      for (int i = 0; i < s.h; ++i) {
        for (int j = 0; j < s.w; ++j) d[i * s.w + j] += g[(i / kernel) * os.w + j / kernel] * inv;
      }
    }
  });
}

template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& input) {
  const Shape& s = input.shape();
  require(s.plane() > 0, "global_avg_pool: empty spatial extent");
  auto out = new_output<T>(Shape{s.n, s.c, 1, 1}, any_requires_grad<T>({&input}));
  const std::size_t planes = static_cast<std::size_t>(s.n) * s.c;
  const double area = static_cast<double>(s.plane());
  const auto& x = input.node().value;
  for (std::size_t p = 0; p < planes; ++p) {
    double acc = 0;
    for (std::size_t i = 0; i < s.plane(); ++i) acc += x[p * s.plane() + i];
    out->value[p] = static_cast<T>(acc / area);
  }
  NodePtr<T> xn = input.ptr();
  return finish<T>("global_avg_pool", out, [xn, planes, area](Node<T>& o) {
    const std::size_t plane = xn->shape.plane();
    auto& dx = xn->ensure_grad();
    for (std::size_t p = 0; p < planes; ++p) {
      const T g = static_cast<T>(o.grad[p] / area);
      for (std::size_t i = 0; i < plane; ++i) dx[p * plane + i] += g;
    }
  });
}

template <typename T>
Tensor<T> softmax_cross_entropy(const Tensor<T>& logits, const std::vector<int>& labels) {
  const Shape& s = logits.shape();
  require(s.h == 1 && s.w == 1, "softmax_cross_entropy: logits must be (N,C,1,1), got " + s.str());
  require(labels.size() == static_cast<std::size_t>(s.n),
          "softmax_cross_entropy: label count does not match batch");
  auto out = new_output<T>(Shape{}, any_requires_grad<T>({&logits}));
  auto probs = std::make_shared<Buffer<T>>(s.numel());
  double total = 0;
  for (int n = 0; n < s.n; ++n) {
    const int label = labels[n];
    require(label >= 0 && label < s.c, "softmax_cross_entropy: label out of range");
    const T* z = logits.data().data() + n * s.c;
    const double zmax = *std::max_element(z, z + s.c);
    double denom = 0;
    for (int c = 0; c < s.c; ++c) denom += std::exp(z[c] - zmax);
    for (int c = 0; c < s.c; ++c) {
      (*probs)[n * s.c + c] = static_cast<T>(std::exp(z[c] - zmax) / denom);
    }
    total += std::log(denom) + zmax - z[label];
  }
  out->value[0] = static_cast<T>(total / s.n);
  NodePtr<T> zn = logits.ptr();
  return finish<T>("softmax_cross_entropy", out, [zn, probs, labels](Node<T>& o) {
    const Shape& s = zn->shape;
    auto& dz = zn->ensure_grad();
    const double g = o.grad[0] / s.n;
    for (int n = 0; n < s.n; ++n) {
      for (int c = 0; c < s.c; ++c) {
        const double target = c == labels[n] ? 1.0 : 0.0;
        dz[n * s.c + c] += static_cast<T>(g * ((*probs)[n * s.c + c] - target));
      }
    }
  });
}

template <typename T>
Tensor<T> crop(const Tensor<T>& input, int top, int left, int height, int width) {
  const Shape& s = input.shape();
  require(top >= 0 && left >= 0 && height >= 1 && width >= 1 && top + height <= s.h &&
              left + width <= s.w,
          "crop: window out of bounds for " + s.str());
  const Shape os{s.n, s.c, height, width};
  auto out = new_output<T>(os, any_requires_grad<T>({&input}));
  const std::size_t planes = static_cast<std::size_t>(s.n) * s.c;
  for (std::size_t p = 0; p < planes; ++p) {
    for (int i = 0; i < height; ++i) {
      const T* src = input.data().data() + p * s.plane() + (top + i) * s.w + left;
      std::copy(src, src + width, out->value.data() + p * os.plane() + i * width);
    }
  }
  NodePtr<T> xn = input.ptr();
  return finish<T>("crop", out, [xn, top, left, planes](Node<T>& o) {
    const Shape& s = xn->shape;
    const Shape& os = o.shape;
    auto& dx = xn->ensure_grad();
    for (std::size_t p = 0; p < planes; ++p) {
      for (int i = 0; i < os.h; ++i) {
        const T* g = o.grad.data() + p * os.plane() + i * os.w;
        T* d = dx.data() + p * s.plane() + (top + i) * s.w + left;
        for (int j = 0; j < os.w; ++j) d[j] += g[j];
      }
    }
  });
}

#define CAMDA_INSTANTIATE_OPS(T)                                                                 \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, Conv2dOptions); \
  template Tensor<T> conv_transpose2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,       \
                                      ConvTranspose2dOptions);                                   \
  template Tensor<T> batch_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,             \
                                RunningStats<T>&, BatchNormOptions);                             \
  template Tensor<T> instance_norm(const Tensor<T>&, double);                                    \
  template Tensor<T> leaky_relu(const Tensor<T>&, double);                                       \
  template Tensor<T> relu(const Tensor<T>&);                                                     \
  template Tensor<T> tanh(const Tensor<T>&);                                                     \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                    \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                    \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                    \
  template Tensor<T> scale(const Tensor<T>&, double);                                            \
  template Tensor<T> sum(const Tensor<T>&);                                                      \
  template Tensor<T> mean(const Tensor<T>&);                                                     \
  template Tensor<T> mse_loss(const Tensor<T>&, const Tensor<T>&);                               \
  template Tensor<T> l1_loss(const Tensor<T>&, const Tensor<T>&);                                \
  template Tensor<T> avg_pool2d(const Tensor<T>&, int);                                          \
  template Tensor<T> global_avg_pool(const Tensor<T>&);                                          \
  template Tensor<T> softmax_cross_entropy(const Tensor<T>&, const std::vector<int>&);           \
  template Tensor<T> crop(const Tensor<T>&, int, int, int, int);

CAMDA_INSTANTIATE_OPS(float)
CAMDA_INSTANTIATE_OPS(double)

}  // namespace camda::ad
