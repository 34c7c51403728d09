#include "gnlab/tensor.hpp"

#include <cmath>
#include <sstream>

#include "gnlab/simd/kernels.hpp"

namespace gnlab {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {

void check_dims(const Shape& shape) {
  for (std::size_t d : shape) {
    if (d == 0) throw DimensionError("zero-sized dimension in shape " + shape_to_string(shape));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) +
                         " vs " + shape_to_string(b.shape()));
  }
}

}  // namespace

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
  check_dims(shape_);
  data_.assign(shape_numel(shape_), 0.0);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  check_dims(shape_);
  if (data_.size() != shape_numel(shape_)) {
    throw DimensionError("data length " + std::to_string(data_.size()) + " does not match shape " +
                         shape_to_string(shape_));
  }
}

Tensor Tensor::scalar(double value) { return Tensor(Shape{}, {value}); }

Tensor Tensor::full(Shape shape, double value) {
  Tensor t(std::move(shape));
  for (double& x : t.data_) x = value;
  return t;
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t({n, n});
  for (std::size_t i = 0; i < n; ++i) t.data_[i * n + i] = 1.0;
  return t;
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("ragged matrix literal");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({r, c}, std::move(data));
}

std::size_t Tensor::rows() const {
  if (rank() != 2) throw DimensionError("expected a matrix, got shape " + shape_to_string(shape_));
  return shape_[0];
}

std::size_t Tensor::cols() const {
  if (rank() != 2) throw DimensionError("expected a matrix, got shape " + shape_to_string(shape_));
  return shape_[1];
}

double Tensor::item() const {
  if (data_.size() != 1) {
    throw DimensionError("item() on tensor of shape " + shape_to_string(shape_));
  }
  return data_[0];
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_numel(shape) != numel()) {
    throw DimensionError("cannot reshape " + shape_to_string(shape_) + " to " +
                         shape_to_string(shape));
  }
  return Tensor(std::move(shape), data_);
}

bool Tensor::all_finite() const {
  for (double x : data_) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

std::size_t ConvGeometry::out_height() const { return (height + 2 * pad - kernel_h) / stride + 1; }
std::size_t ConvGeometry::out_width() const { return (width + 2 * pad - kernel_w) / stride + 1; }

void ConvGeometry::validate() const {
  if (channels == 0 || height == 0 || width == 0 || kernel_h == 0 || kernel_w == 0 || stride == 0) {
    throw DimensionError("convolution geometry has a zero dimension");
  }
  if (kernel_h > height + 2 * pad || kernel_w > width + 2 * pad) {
    throw DimensionError("kernel " + std::to_string(kernel_h) + "x" + std::to_string(kernel_w) +
                         " larger than padded input " + std::to_string(height + 2 * pad) + "x" +
                         std::to_string(width + 2 * pad));
  }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows()) {
    throw DimensionError("matmul: incompatible shapes " + shape_to_string(a.shape()) + " and " +
                         shape_to_string(b.shape()));
  }
  Tensor c({a.rows(), b.cols()});
  simd::active().matmul(a.ptr(), b.ptr(), c.ptr(), a.rows(), a.cols(), b.cols());
  return c;
}

Tensor transpose(const Tensor& a) {
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  Tensor t({n, m});
  const double* src = a.ptr();
  double* dst = t.ptr();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) dst[j * m + i] = src[i * n + j];
  }
  return t;
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor out(a.shape());
  simd::active().add(a.ptr(), b.ptr(), out.ptr(), a.numel());
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  Tensor out(a.shape());
  simd::active().sub(a.ptr(), b.ptr(), out.ptr(), a.numel());
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  Tensor out(a.shape());
  simd::active().mul(a.ptr(), b.ptr(), out.ptr(), a.numel());
  return out;
}

Tensor scale(const Tensor& a, double c) {
  Tensor out(a.shape());
  simd::active().scale(a.ptr(), c, out.ptr(), a.numel());
  return out;
}

double sum(const Tensor& a) {
  double s = 0.0;
  for (double x : a.data()) s += x;
  return s;
}

double l2_norm(const Tensor& v) {
  double s = 0.0;
  for (double x : v.data()) s += x * x;
  return std::sqrt(s);
}

Tensor im2col(const Tensor& x, const ConvGeometry& g) {
  g.validate();
  if (x.numel() != g.image_size()) {
    throw DimensionError("im2col: input " + shape_to_string(x.shape()) + " does not hold " +
                         std::to_string(g.channels) + "x" + std::to_string(g.height) + "x" +
                         std::to_string(g.width));
  }
  const std::size_t ho = g.out_height();
  const std::size_t wo = g.out_width();
  Tensor cols({g.patch_size(), ho * wo});
  const double* src = x.ptr();
  double* dst = cols.ptr();
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t ki = 0; ki < g.kernel_h; ++ki) {
      for (std::size_t kj = 0; kj < g.kernel_w; ++kj) {
        const std::size_t row = (c * g.kernel_h + ki) * g.kernel_w + kj;
        double* out = dst + row * ho * wo;
        for (std::size_t oi = 0; oi < ho; ++oi) {
          const std::ptrdiff_t ii = static_cast<std::ptrdiff_t>(oi * g.stride + ki) -
                                    static_cast<std::ptrdiff_t>(g.pad);
          for (std::size_t oj = 0; oj < wo; ++oj) {
            const std::ptrdiff_t jj = static_cast<std::ptrdiff_t>(oj * g.stride + kj) -
                                      static_cast<std::ptrdiff_t>(g.pad);
            const bool inside = ii >= 0 && jj >= 0 && ii < static_cast<std::ptrdiff_t>(g.height) &&
                                jj < static_cast<std::ptrdiff_t>(g.width);
            out[oi * wo + oj] = inside ? src[(c * g.height + ii) * g.width + jj] : 0.0;
          }
        }
      }
    }
  }
  return cols;
}

Tensor col2im(const Tensor& cols, const ConvGeometry& g) {
  g.validate();
  const std::size_t ho = g.out_height();
  const std::size_t wo = g.out_width();
  if (cols.numel() != g.patch_size() * ho * wo) {
    throw DimensionError("col2im: columns " + shape_to_string(cols.shape()) +
                         " do not match geometry");
  }
  Tensor x({g.channels, g.height, g.width});
  const double* src = cols.ptr();
  double* dst = x.ptr();
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t ki = 0; ki < g.kernel_h; ++ki) {
      for (std::size_t kj = 0; kj < g.kernel_w; ++kj) {
        const std::size_t row = (c * g.kernel_h + ki) * g.kernel_w + kj;
        const double* in = src + row * ho * wo;
        for (std::size_t oi = 0; oi < ho; ++oi) {
          const std::ptrdiff_t ii = static_cast<std::ptrdiff_t>(oi * g.stride + ki) -
                                    static_cast<std::ptrdiff_t>(g.pad);
          if (ii < 0 || ii >= static_cast<std::ptrdiff_t>(g.height)) continue;
          for (std::size_t oj = 0; oj < wo; ++oj) {
            const std::ptrdiff_t jj = static_cast<std::ptrdiff_t>(oj * g.stride + kj) -
                                      static_cast<std::ptrdiff_t>(g.pad);
            if (jj < 0 || jj >= static_cast<std::ptrdiff_t>(g.width)) continue;
            dst[(c * g.height + ii) * g.width + jj] += in[oi * wo + oj];
          }
        }
      }
    }
  }
  return x;
}

}  // namespace gnlab
