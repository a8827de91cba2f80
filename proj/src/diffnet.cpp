#include "ldc/diffnet.hpp"

#include <cmath>

#include "ldc/bytes.hpp"
#include "ldc/rng.hpp"

namespace ldc {

std::size_t Net::param_count() const {
  std::size_t n = 0;
  for (const Layer& l : layers) n += l.w.size() + l.b.size();
  return n;
}

GradBundle GradBundle::zeros_like(const Net& net) {
  GradBundle g;
  for (const Layer& l : net.layers) {
    g.dw.emplace_back(l.out_dim(), l.in_dim());
    g.db.emplace_back(l.out_dim(), 0.0);
  }
  return g;
}

void GradBundle::accumulate(const GradBundle& other, double factor) {
  if (other.dw.size() != dw.size()) fail(Err::DimensionMismatch, "grad bundle layer count");
  for (std::size_t k = 0; k < dw.size(); ++k) {
    if (!dw[k].same_shape(other.dw[k])) fail(Err::DimensionMismatch, "grad bundle shape");
    kern::axpy(factor, other.dw[k].data(), dw[k].data(), dw[k].size());
    kern::axpy(factor, other.db[k].data(), db[k].data(), db[k].size());
  }
}

void GradBundle::scale(double factor) {
  for (auto& m : dw) m *= factor;
  for (auto& v : db) kern::scale(factor, v.data(), v.size());
}

double GradBundle::max_abs() const {
  double m = 0.0;
  for (const auto& w : dw)
    for (std::size_t i = 0; i < w.size(); ++i) m = std::max(m, std::fabs(w.data()[i]));
  for (const auto& b : db)
    for (double v : b) m = std::max(m, std::fabs(v));
  return m;
}

Matrix forward(const Net& net, const Matrix& x, ForwardCache* cache) {
  if (net.layers.empty()) fail(Err::BadSpec, "forward: empty net");
  if (x.cols() != net.in_dim()) fail(Err::DimensionMismatch, "forward: input width");
  if (!x.all_finite()) fail(Err::NonFinite, "forward: non-finite input");
  if (net.residual && net.in_dim() != net.out_dim())
    fail(Err::BadSpec, "forward: residual needs equal in/out dims");

  const std::size_t n = x.rows();
  if (cache) {
    cache->input = x;
    cache->pre.clear();
  }

  Matrix cur = x;
  for (const Layer& l : net.layers) {
    const std::size_t out = l.out_dim();
    Matrix z(n, out);
    for (std::size_t i = 0; i < n; ++i) {
      double* zi = z.row(i);
      for (std::size_t o = 0; o < out; ++o)
        zi[o] = l.b[o] + kern::dot(l.w.row(o), cur.row(i), l.in_dim());
    }
    if (cache) cache->pre.push_back(z);
    if (l.act == Activation::Relu) kern::relu(z.data(), z.data(), z.size());
    cur = std::move(z);
  }
  if (net.residual) cur += x;
  return cur;
}

Vector forward(const Net& net, const Vector& x) {
  Matrix m(1, x.size());
  for (std::size_t j = 0; j < x.size(); ++j) m(0, j) = x[j];
  Matrix out = forward(net, m);
  return Vector(out.row(0), out.row(0) + out.cols());
}

BackwardResult backward(const Net& net, const ForwardCache& cache, const Matrix& upstream) {
  const std::size_t n = cache.input.rows();
  if (cache.pre.size() != net.layers.size()) fail(Err::StaleCache, "backward: layer count");
  if (upstream.rows() != n || upstream.cols() != net.out_dim())
    fail(Err::StaleCache, "backward: upstream shape");
  for (std::size_t k = 0; k < net.layers.size(); ++k)
    if (cache.pre[k].rows() != n || cache.pre[k].cols() != net.layers[k].out_dim())
      fail(Err::StaleCache, "backward: cached shape");

  BackwardResult r;
  r.grads = GradBundle::zeros_like(net);

  Matrix g = upstream;  // gradient wrt the post-activation of the current layer
  for (std::size_t k = net.layers.size(); k-- > 0;) {
    const Layer& l = net.layers[k];
    // post-activation grad -> pre-activation grad
    if (l.act == Activation::Relu)
      kern::relu_mask(cache.pre[k].data(), g.data(), g.size());

    // layer input is the previous layer's post-activation
    Matrix below;
    const Matrix* in;
    if (k == 0) {
      in = &cache.input;
    } else {
      below = cache.pre[k - 1];
      if (net.layers[k - 1].act == Activation::Relu)
        kern::relu(below.data(), below.data(), below.size());
      in = &below;
    }

    Matrix& dw = r.grads.dw[k];
    Vector& db = r.grads.db[k];
    for (std::size_t i = 0; i < n; ++i) {
      const double* gi = g.row(i);
      const double* xi = in->row(i);
      for (std::size_t o = 0; o < l.out_dim(); ++o) {
        kern::axpy(gi[o], xi, dw.row(o), l.in_dim());
        db[o] += gi[o];
      }
    }

    // g_next = g * W (n x in)
    Matrix gx(n, l.in_dim());
    for (std::size_t i = 0; i < n; ++i) {
      const double* gi = g.row(i);
      for (std::size_t o = 0; o < l.out_dim(); ++o)
        kern::axpy(gi[o], l.w.row(o), gx.row(i), l.in_dim());
    }
    g = std::move(gx);
  }

  if (net.residual) g += upstream;
  r.input_grad = std::move(g);
  return r;
}

Net sgd_step(Net net, const GradBundle& grads, double lr) {
  if (lr <= 0) fail(Err::BadSpec, "sgd_step: lr must be positive");
  if (grads.dw.size() != net.layers.size()) fail(Err::DimensionMismatch, "sgd_step: layer count");
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    Layer& l = net.layers[k];
    if (!l.w.same_shape(grads.dw[k]) || l.b.size() != grads.db[k].size())
      fail(Err::DimensionMismatch, "sgd_step: shape");
    kern::axpy(-lr, grads.dw[k].data(), l.w.data(), l.w.size());
    kern::axpy(-lr, grads.db[k].data(), l.b.data(), l.b.size());
  }
  return net;
}

Net init_net(const std::vector<std::size_t>& sizes, InitScheme scheme, std::uint64_t seed,
             bool residual) {
  if (sizes.size() < 2) fail(Err::BadSpec, "init_net: need at least input and output sizes");
  for (std::size_t s : sizes)
    if (s == 0) fail(Err::BadSpec, "init_net: zero layer size");
  if (residual && sizes.front() != sizes.back())
    fail(Err::BadSpec, "init_net: residual needs equal in/out sizes");

  Rng rng(seed);
  Net net;
  net.residual = residual;
  for (std::size_t k = 0; k + 1 < sizes.size(); ++k) {
    const std::size_t fan_in = sizes[k];
    const std::size_t fan_out = sizes[k + 1];
    const double stddev = scheme == InitScheme::He
                              ? std::sqrt(2.0 / double(fan_in))
                              : std::sqrt(2.0 / double(fan_in + fan_out));
    Layer l;
    l.w = Matrix(fan_out, fan_in);
    for (std::size_t i = 0; i < l.w.size(); ++i) l.w.data()[i] = stddev * rng.normal();
    l.b.assign(fan_out, 0.0);
    l.act = (k + 2 < sizes.size()) ? Activation::Relu : Activation::Identity;
    net.layers.push_back(std::move(l));
  }
  return net;
}

void serialize_net(const Net& net, ByteWriter& out) {
  out.magic("LDCN");
  out.u32(1);
  out.u8(net.residual ? 1 : 0);
  out.u32(std::uint32_t(net.layers.size()));
  for (const Layer& l : net.layers) {
    out.u32(std::uint32_t(l.out_dim()));
    out.u32(std::uint32_t(l.in_dim()));
    out.u8(std::uint8_t(l.act));
    for (std::size_t i = 0; i < l.w.size(); ++i) out.f64(l.w.data()[i]);
    for (double v : l.b) out.f64(v);
  }
}

std::vector<std::uint8_t> serialize_net(const Net& net) {
  ByteWriter w;
  serialize_net(net, w);
  return w.take();
}

Net deserialize_net(ByteReader& in) {
  in.expect_magic("LDCN");
  const std::uint32_t version = in.u32();
  if (version != 1) fail(Err::BadMagic, "net blob version " + std::to_string(version));
  Net net;
  net.residual = in.u8() != 0;
  const std::uint32_t n_layers = in.u32();
  for (std::uint32_t k = 0; k < n_layers; ++k) {
    const std::uint32_t out = in.u32();
    const std::uint32_t in_dim = in.u32();
    const std::uint8_t act = in.u8();
    if (act > 1) fail(Err::BadMagic, "net blob activation code");
    Layer l;
    l.w = Matrix(out, in_dim);
    for (std::size_t i = 0; i < l.w.size(); ++i) l.w.data()[i] = in.f64();
    l.b.resize(out);
    for (auto& v : l.b) v = in.f64();
    l.act = Activation(act);
    net.layers.push_back(std::move(l));
  }
  if (net.layers.empty()) fail(Err::BadMagic, "net blob has no layers");
  return net;
}

Net deserialize_net(const std::vector<std::uint8_t>& blob) {
  ByteReader r(blob);
  Net net = deserialize_net(r);
  if (!r.done()) fail(Err::TruncatedFile, "net blob has trailing bytes");
  return net;
}

}  // namespace ldc
