#include "revsum/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "revsum/errors.hpp"

namespace revsum {

namespace {

using detail::Node;

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " +
                     shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

// Grad buffer of parent `i`, or nullptr when that input is untracked.
double* parent_grad(Node& self, std::size_t i) {
  auto& parent = *self.parents[i];
  if (!parent.requires_grad) return nullptr;
  return parent.ensure_grad().data();
}

void check_axis(const Tensor& x, std::size_t axis, const char* op) {
  if (axis >= x.rank()) {
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) +
                     " invalid for " + shape_string(x.shape()));
  }
}

// View of a rank-1 or rank-2 tensor as (outer, axis, inner) extents.
struct AxisLayout {
  std::size_t outer;
  std::size_t extent;
  std::size_t inner;
};

AxisLayout layout_for(const Shape& shape, std::size_t axis) {
  AxisLayout l{1, shape[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) l.outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) l.inner *= shape[i];
  return l;
}

template <typename Forward, typename Derivative>
Tensor unary(const Tensor& x, Forward f, Derivative df) {
  std::vector<double> out(x.size());
  auto in = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(in[i]);
  return Tensor::make_result(
      x.shape(), std::move(out), {x}, [df](Node& self) {
        double* gx = parent_grad(self, 0);
        if (!gx) return;
        const auto& xin = self.parents[0]->values;
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
          gx[i] += self.grad[i] * df(xin[i], self.values[i]);
        }
      });
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (b.rank() != 2 || (a.rank() != 1 && a.rank() != 2)) {
    throw ShapeError("matmul: unsupported ranks " + shape_string(a.shape()) +
                     " x " + shape_string(b.shape()));
  }
  const bool vec = a.rank() == 1;
  const std::size_t m = vec ? 1 : a.dim(0);
  const std::size_t k = vec ? a.dim(0) : a.dim(1);
  const std::size_t n = b.dim(1);
  if (b.dim(0) != k) {
    throw ShapeError("matmul: inner dimensions differ " +
                     shape_string(a.shape()) + " x " +
                     shape_string(b.shape()));
  }
  std::vector<double> out(m * n, 0.0);
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < m; ++i) {
    double* orow = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = bv.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
    }
  }
  Shape shape = vec ? Shape{n} : Shape{m, n};
  return Tensor::make_result(
      std::move(shape), std::move(out), {a, b}, [m, k, n](Node& self) {
        const double* g = self.grad.data();
        const auto& av = self.parents[0]->values;
        const auto& bv = self.parents[1]->values;
        if (double* ga = parent_grad(self, 0)) {
          // dA = dC * B^T
          for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t p = 0; p < k; ++p) {
              const double* brow = bv.data() + p * n;
              const double* grow = g + i * n;
              double acc = 0.0;
              for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
              ga[i * k + p] += acc;
            }
          }
        }
        if (double* gb = parent_grad(self, 1)) {
          // dB = A^T * dC
          for (std::size_t i = 0; i < m; ++i) {
            const double* grow = g + i * n;
            for (std::size_t p = 0; p < k; ++p) {
              const double aip = av[i * k + p];
              if (aip == 0.0) continue;
              double* gbrow = gb + p * n;
              for (std::size_t j = 0; j < n; ++j) gbrow[j] += aip * grow[j];
            }
          }
        }
      });
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) {
    throw ShapeError("transpose: expected a matrix, got " +
                     shape_string(a.shape()));
  }
  const std::size_t r = a.dim(0), c = a.dim(1);
  std::vector<double> out(r * c);
  auto av = a.values();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = av[i * c + j];
  return Tensor::make_result({c, r}, std::move(out), {a}, [r, c](Node& self) {
    double* ga = parent_grad(self, 0);
    if (!ga) return;
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += self.grad[j * r + i];
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.size());
  auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    for (std::size_t p = 0; p < 2; ++p) {
      if (double* g = parent_grad(self, p)) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
      }
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.size());
  auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    if (double* g = parent_grad(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    }
    if (double* g = parent_grad(self, 1)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.size());
  auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    const auto& av = self.parents[0]->values;
    const auto& bv = self.parents[1]->values;
    if (double* g = parent_grad(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * bv[i];
    }
    if (double* g = parent_grad(self, 1)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * av[i];
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  return unary(
      a, [factor](double x) { return factor * x; },
      [factor](double, double) { return factor; });
}

Tensor tanh(const Tensor& x) {
  return unary(
      x, [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x,
      [](double v) {
        if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor exp(const Tensor& x) {
  return unary(
      x, [](double v) { return std::exp(v); },
      [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
  return unary(
      x, [](double v) { return std::log(v); },
      [](double v, double) { return 1.0 / v; });
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  check_axis(x, axis, "softmax");
  const auto l = layout_for(x.shape(), axis);
  std::vector<double> out(x.size());
  auto xv = x.values();
  for (std::size_t o = 0; o < l.outer; ++o) {
    for (std::size_t in = 0; in < l.inner; ++in) {
      const std::size_t base = o * l.extent * l.inner + in;
      double mx = -INFINITY;
      for (std::size_t t = 0; t < l.extent; ++t)
        mx = std::max(mx, xv[base + t * l.inner]);
      double total = 0.0;
      for (std::size_t t = 0; t < l.extent; ++t) {
        const double e = std::exp(xv[base + t * l.inner] - mx);
        out[base + t * l.inner] = e;
        total += e;
      }
      for (std::size_t t = 0; t < l.extent; ++t) out[base + t * l.inner] /= total;
    }
  }
  return Tensor::make_result(x.shape(), std::move(out), {x}, [l](Node& self) {
    double* gx = parent_grad(self, 0);
    if (!gx) return;
    const auto& y = self.values;
    const auto& g = self.grad;
    for (std::size_t o = 0; o < l.outer; ++o) {
      for (std::size_t in = 0; in < l.inner; ++in) {
        const std::size_t base = o * l.extent * l.inner + in;
        double dot = 0.0;
        for (std::size_t t = 0; t < l.extent; ++t) {
          const std::size_t idx = base + t * l.inner;
          dot += g[idx] * y[idx];
        }
        for (std::size_t t = 0; t < l.extent; ++t) {
          const std::size_t idx = base + t * l.inner;
          gx[idx] += y[idx] * (g[idx] - dot);
        }
      }
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps) {
  if (x.rank() != 2 || gain.rank() != 1 || bias.rank() != 1 ||
      gain.dim(0) != x.dim(1) || bias.dim(0) != x.dim(1) || x.dim(1) == 0) {
    throw ShapeError("layer_norm: incompatible shapes " +
                     shape_string(x.shape()) + ", gain " +
                     shape_string(gain.shape()) + ", bias " +
                     shape_string(bias.shape()));
  }
  const std::size_t n = x.dim(0), d = x.dim(1);
  std::vector<double> normalized(n * d), inv_std(n), out(n * d);
  auto xv = x.values(), gv = gain.values(), bv = bias.values();
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = xv.data() + i * d;
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) mean += row[j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mean) * (row[j] - mean);
    var /= static_cast<double>(d);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      const double xhat = (row[j] - mean) * inv_std[i];
      normalized[i * d + j] = xhat;
      out[i * d + j] = xhat * gv[j] + bv[j];
    }
  }
  return Tensor::make_result(
      x.shape(), std::move(out), {x, gain, bias},
      [n, d, normalized = std::move(normalized),
       inv_std = std::move(inv_std)](Node& self) {
        const auto& g = self.grad;
        const auto& gv = self.parents[1]->values;
        double* gx = parent_grad(self, 0);
        double* ggain = parent_grad(self, 1);
        double* gbias = parent_grad(self, 2);
        std::vector<double> dxhat(d);
        for (std::size_t i = 0; i < n; ++i) {
          const double* xh = normalized.data() + i * d;
          const double* gr = g.data() + i * d;
          if (ggain)
            for (std::size_t j = 0; j < d; ++j) ggain[j] += gr[j] * xh[j];
          if (gbias)
            for (std::size_t j = 0; j < d; ++j) gbias[j] += gr[j];
          if (!gx) continue;
          double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
          for (std::size_t j = 0; j < d; ++j) {
            dxhat[j] = gr[j] * gv[j];
            mean_dxhat += dxhat[j];
            mean_dxhat_xhat += dxhat[j] * xh[j];
          }
          mean_dxhat /= static_cast<double>(d);
          mean_dxhat_xhat /= static_cast<double>(d);
          for (std::size_t j = 0; j < d; ++j) {
            gx[i * d + j] +=
                inv_std[i] * (dxhat[j] - mean_dxhat - xh[j] * mean_dxhat_xhat);
          }
        }
      });
}

Tensor average_pool(const Tensor& h) {
  if (h.rank() != 2) {
    throw ShapeError("average_pool: expected a matrix, got " +
                     shape_string(h.shape()));
  }
  const std::size_t n = h.dim(0), d = h.dim(1);
  if (n == 0) throw EmptySequenceError("average_pool: empty sequence");
  std::vector<double> out(d, 0.0);
  auto hv = h.values();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) out[j] += hv[i * d + j];
  const double inv = 1.0 / static_cast<double>(n);
  for (auto& v : out) v *= inv;
  return Tensor::make_result({d}, std::move(out), {h}, [n, d, inv](Node& self) {
    double* gh = parent_grad(self, 0);
    if (!gh) return;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) gh[i * d + j] += self.grad[j] * inv;
  });
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.values()) total += v;
  return Tensor::make_result({}, {total}, {x}, [](Node& self) {
    double* gx = parent_grad(self, 0);
    if (!gx) return;
    const double g = self.grad[0];
    const std::size_t n = self.parents[0]->values.size();
    for (std::size_t i = 0; i < n; ++i) gx[i] += g;
  });
}

Tensor concat(const Tensor& a, const Tensor& b, std::size_t axis) {
  const Tensor parts[] = {a, b};
  return concat(std::span<const Tensor>(parts), axis);
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& first = parts[0].shape();
  if (axis >= first.size()) {
    throw ShapeError("concat: axis " + std::to_string(axis) + " invalid for " +
                     shape_string(first));
  }
  Shape shape = first;
  shape[axis] = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i)
      if (i != axis && s[i] != first[i]) ok = false;
    if (!ok) {
      throw ShapeError("concat: shape mismatch " + shape_string(first) +
                       " vs " + shape_string(s));
    }
    shape[axis] += s[axis];
  }
  const auto l = layout_for(shape, axis);
  std::vector<double> out(shape_size(shape));
  std::vector<std::size_t> offsets;
  std::vector<std::size_t> extents;
  std::size_t offset = 0;
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  for (const auto& p : parts) {
    const std::size_t ext = p.shape()[axis];
    auto pv = p.values();
    for (std::size_t o = 0; o < l.outer; ++o) {
      std::copy_n(pv.data() + o * ext * l.inner, ext * l.inner,
                  out.data() + (o * l.extent + offset) * l.inner);
    }
    offsets.push_back(offset);
    extents.push_back(ext);
    offset += ext;
  }
  return Tensor::make_result(
      std::move(shape), std::move(out), std::move(inputs),
      [l, offsets = std::move(offsets), extents = std::move(extents)](Node& self) {
        for (std::size_t p = 0; p < offsets.size(); ++p) {
          double* gp = parent_grad(self, p);
          if (!gp) continue;
          const std::size_t ext = extents[p];
          for (std::size_t o = 0; o < l.outer; ++o) {
            const double* src =
                self.grad.data() + (o * l.extent + offsets[p]) * l.inner;
            double* dst = gp + o * ext * l.inner;
            for (std::size_t i = 0; i < ext * l.inner; ++i) dst[i] += src[i];
          }
        }
      });
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin,
             std::size_t end) {
  check_axis(x, axis, "slice");
  if (begin > end || end > x.dim(axis)) {
    throw ShapeError("slice: range [" + std::to_string(begin) + ", " +
                     std::to_string(end) + ") invalid for " +
                     shape_string(x.shape()));
  }
  const auto l = layout_for(x.shape(), axis);
  Shape shape = x.shape();
  shape[axis] = end - begin;
  const std::size_t ext = end - begin;
  std::vector<double> out(shape_size(shape));
  auto xv = x.values();
  for (std::size_t o = 0; o < l.outer; ++o) {
    std::copy_n(xv.data() + (o * l.extent + begin) * l.inner, ext * l.inner,
                out.data() + o * ext * l.inner);
  }
  return Tensor::make_result(
      std::move(shape), std::move(out), {x}, [l, begin, ext](Node& self) {
        double* gx = parent_grad(self, 0);
        if (!gx) return;
        for (std::size_t o = 0; o < l.outer; ++o) {
          const double* src = self.grad.data() + o * ext * l.inner;
          double* dst = gx + (o * l.extent + begin) * l.inner;
          for (std::size_t i = 0; i < ext * l.inner; ++i) dst[i] += src[i];
        }
      });
}

Tensor row(const Tensor& x, std::size_t index) {
  if (x.rank() != 2 || index >= x.dim(0)) {
    throw ShapeError("row: index " + std::to_string(index) + " invalid for " +
                     shape_string(x.shape()));
  }
  const std::size_t d = x.dim(1);
  auto xv = x.values();
  std::vector<double> out(xv.begin() + index * d, xv.begin() + (index + 1) * d);
  return Tensor::make_result({d}, std::move(out), {x}, [index, d](Node& self) {
    double* gx = parent_grad(self, 0);
    if (!gx) return;
    for (std::size_t j = 0; j < d; ++j) gx[index * d + j] += self.grad[j];
  });
}

Tensor stack_rows(std::span<const Tensor> rows) {
  if (rows.empty()) throw ShapeError("stack_rows: no rows");
  const std::size_t d = rows[0].size();
  std::vector<double> out;
  out.reserve(rows.size() * d);
  for (const auto& r : rows) {
    if (r.rank() != 1 || r.size() != d) {
      throw ShapeError("stack_rows: row shape " + shape_string(r.shape()) +
                       " differs from [" + std::to_string(d) + "]");
    }
    out.insert(out.end(), r.values().begin(), r.values().end());
  }
  const std::size_t n = rows.size();
  return Tensor::make_result(
      {n, d}, std::move(out), std::vector<Tensor>(rows.begin(), rows.end()),
      [n, d](Node& self) {
        for (std::size_t i = 0; i < n; ++i) {
          double* g = parent_grad(self, i);
          if (!g) continue;
          for (std::size_t j = 0; j < d; ++j) g[j] += self.grad[i * d + j];
        }
      });
}

Tensor repeat_rows(const Tensor& v, std::size_t n) {
  if (v.rank() != 1) {
    throw ShapeError("repeat_rows: expected a vector, got " +
                     shape_string(v.shape()));
  }
  const std::size_t d = v.dim(0);
  std::vector<double> out(n * d);
  for (std::size_t i = 0; i < n; ++i)
    std::copy(v.values().begin(), v.values().end(), out.begin() + i * d);
  return Tensor::make_result({n, d}, std::move(out), {v}, [n, d](Node& self) {
    double* gv = parent_grad(self, 0);
    if (!gv) return;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) gv[j] += self.grad[i * d + j];
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_size(shape) != x.size()) {
    throw ShapeError("reshape: " + shape_string(x.shape()) + " to " +
                     shape_string(shape));
  }
  std::vector<double> out(x.values().begin(), x.values().end());
  return Tensor::make_result(std::move(shape), std::move(out), {x}, [](Node& self) {
    double* gx = parent_grad(self, 0);
    if (!gx) return;
    for (std::size_t i = 0; i < self.grad.size(); ++i) gx[i] += self.grad[i];
  });
}

Tensor dropout(const Tensor& x, double rate, bool training, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ConfigError("dropout rate must lie in [0, 1), got " +
                      std::to_string(rate));
  }
  if (!training || rate == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - rate);
  std::vector<double> mask(x.size());
  for (auto& m : mask) m = uniform01(rng) < rate ? 0.0 : keep_scale;
  std::vector<double> out(x.size());
  auto xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * mask[i];
  return Tensor::make_result(
      x.shape(), std::move(out), {x}, [mask = std::move(mask)](Node& self) {
        double* gx = parent_grad(self, 0);
        if (!gx) return;
        for (std::size_t i = 0; i < mask.size(); ++i) gx[i] += self.grad[i] * mask[i];
      });
}

Tensor embedding_lookup(const Tensor& table, std::span<const int> ids) {
  if (table.rank() != 2) {
    throw ShapeError("embedding_lookup: table must be a matrix, got " +
                     shape_string(table.shape()));
  }
  const std::size_t vocab = table.dim(0), width = table.dim(1);
  std::vector<double> out(ids.size() * width);
  auto tv = table.values();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= vocab) {
      throw IndexError("embedding_lookup: id " + std::to_string(ids[i]) +
                       " out of range for vocabulary of " +
                       std::to_string(vocab));
    }
    std::copy_n(tv.data() + static_cast<std::size_t>(ids[i]) * width, width,
                out.data() + i * width);
  }
  std::vector<int> kept(ids.begin(), ids.end());
  return Tensor::make_result(
      {ids.size(), width}, std::move(out), {table},
      [width, kept = std::move(kept)](Node& self) {
        double* gt = parent_grad(self, 0);
        if (!gt) return;
        for (std::size_t i = 0; i < kept.size(); ++i) {
          double* dst = gt + static_cast<std::size_t>(kept[i]) * width;
          for (std::size_t j = 0; j < width; ++j) dst[j] += self.grad[i * width + j];
        }
      });
}

Tensor cross_entropy(const Tensor& p, std::size_t target) {
  if (p.rank() != 1) {
    throw ShapeError("cross_entropy: expected a probability vector, got " +
                     shape_string(p.shape()));
  }
  if (target >= p.size()) {
    throw IndexError("cross_entropy: class " + std::to_string(target) +
                     " out of range for " + std::to_string(p.size()) +
                     " classes");
  }
  const double py = p[target];
  return Tensor::make_result({}, {-std::log(py)}, {p}, [target](Node& self) {
    double* gp = parent_grad(self, 0);
    if (!gp) return;
    gp[target] -= self.grad[0] / self.parents[0]->values[target];
  });
}

}  // namespace revsum
