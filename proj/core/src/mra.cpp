#include "fgrasp/mra.hpp"

#include <cmath>
#include <numbers>

#include "fgrasp/error.hpp"
#include "fgrasp/parallel.hpp"
#include "fgrasp/rng.hpp"

namespace fgrasp::mra {

namespace {

constexpr double kInvSqrt2Pi = 0.39894228040143267794;

double gelu(double z) { return 0.5 * z * (1.0 + std::erf(z / std::numbers::sqrt2)); }

double gelu_grad(double z) {
  const double phi_big = 0.5 * (1.0 + std::erf(z / std::numbers::sqrt2));
  const double phi_small = kInvSqrt2Pi * std::exp(-0.5 * z * z);
  return phi_big + z * phi_small;
}

// Row-wise layer norm; records the normalized rows and inverse stddevs.
Eigen::MatrixXd layer_norm(const Eigen::MatrixXd& x, const Eigen::VectorXd& gain,
                           const Eigen::VectorXd& bias, Eigen::MatrixXd& xhat,
                           Eigen::VectorXd& inv_std) {
  const Eigen::Index rows = x.rows(), cols = x.cols();
  xhat.resize(rows, cols);
  inv_std.resize(rows);
  Eigen::MatrixXd y(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const double mean = x.row(r).mean();
    const double var = (x.row(r).array() - mean).square().mean();
    const double is = 1.0 / std::sqrt(var + kLayerNormEps);
    inv_std[r] = is;
    xhat.row(r) = ((x.row(r).array() - mean) * is).matrix();
    y.row(r) = xhat.row(r).cwiseProduct(gain.transpose()) + bias.transpose();
  }
  return y;
}

// dL/dx of layer_norm given dL/dy; accumulates the gain/bias gradients.
Eigen::MatrixXd layer_norm_backward(const Eigen::MatrixXd& dy, const Eigen::MatrixXd& xhat,
                                    const Eigen::VectorXd& inv_std, const Eigen::VectorXd& gain,
                                    Eigen::VectorXd& dgain, Eigen::VectorXd& dbias) {
  const Eigen::Index rows = dy.rows(), cols = dy.cols();
  Eigen::MatrixXd dx(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    dgain += dy.row(r).cwiseProduct(xhat.row(r)).transpose();
    dbias += dy.row(r).transpose();
    const Eigen::RowVectorXd dxhat = dy.row(r).cwiseProduct(gain.transpose());
    const double mean_dxhat = dxhat.mean();
    const double mean_dxhat_xhat = dxhat.cwiseProduct(xhat.row(r)).mean();
    dx.row(r) = ((dxhat.array() - mean_dxhat - xhat.row(r).array() * mean_dxhat_xhat) *
                 inv_std[r])
                    .matrix();
  }
  return dx;
}

// Row-wise softmax with max-subtraction (attention rows).
Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& s) {
  Eigen::MatrixXd p(s.rows(), s.cols());
  for (Eigen::Index r = 0; r < s.rows(); ++r) {
    const Eigen::ArrayXd e = (s.row(r).transpose().array() - s.row(r).maxCoeff()).exp();
    p.row(r) = (e / e.sum()).matrix().transpose();
  }
  return p;
}

void add_params(MraParams& into, const MraParams& other) {
  into.w_query += other.w_query;
  into.b_query += other.b_query;
  into.w_key += other.w_key;
  into.b_key += other.b_key;
  into.w_value += other.w_value;
  into.b_value += other.b_value;
  into.w_out += other.w_out;
  into.b_out += other.b_out;
  into.w_ff1 += other.w_ff1;
  into.b_ff1 += other.b_ff1;
  into.w_ff2 += other.w_ff2;
  into.b_ff2 += other.b_ff2;
  into.ln1_gain += other.ln1_gain;
  into.ln1_bias += other.ln1_bias;
  into.ln2_gain += other.ln2_gain;
  into.ln2_bias += other.ln2_bias;
  into.fusion_w += other.fusion_w;
}

}  // namespace

void MraParams::validate() const {
  const int c = channels();
  const int ff = ff_dim();
  if (c < 1 || ff < 1) throw ValidationError("attention dimensions must be positive");
  if (heads < 1 || c % heads != 0)
    throw ValidationError("channel count must be a positive multiple of the head count");
  const auto square = [c](const Eigen::MatrixXd& m) { return m.rows() == c && m.cols() == c; };
  if (!square(w_query) || !square(w_key) || !square(w_value) || !square(w_out) ||
      !square(fusion_w) || w_ff1.rows() != c || w_ff2.cols() != c || w_ff2.rows() != ff ||
      b_query.size() != c || b_key.size() != c || b_value.size() != c || b_out.size() != c ||
      b_ff1.size() != ff || b_ff2.size() != c || ln1_gain.size() != c ||
      ln1_bias.size() != c || ln2_gain.size() != c || ln2_bias.size() != c)
    throw ValidationError("attention parameter shapes are inconsistent");
  for (auto* self = const_cast<MraParams*>(this); double* p : self->scalar_pointers()) {
    if (!std::isfinite(*p)) throw ValidationError("attention parameters must be finite");
  }
}

std::vector<double*> MraParams::scalar_pointers() {
  std::vector<double*> out;
  const auto push = [&out](auto& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) out.push_back(m.data() + i);
  };
  push(w_query);
  push(b_query);
  push(w_key);
  push(b_key);
  push(w_value);
  push(b_value);
  push(w_out);
  push(b_out);
  push(w_ff1);
  push(b_ff1);
  push(w_ff2);
  push(b_ff2);
  push(ln1_gain);
  push(ln1_bias);
  push(ln2_gain);
  push(ln2_bias);
  push(fusion_w);
  return out;
}

MraParams MraParams::zeros_like() const {
  MraParams z = *this;
  for (double* p : z.scalar_pointers()) *p = 0.0;
  return z;
}

MraParams init_params(int channels, int ff_dim, int heads, std::uint64_t seed) {
  if (channels < 1 || ff_dim < 1) throw ValidationError("attention dimensions must be positive");
  if (heads < 1 || channels % heads != 0)
    throw ValidationError("channel count must be a positive multiple of the head count");
  Rng rng(seed);
  const auto fill_matrix = [&rng](Eigen::MatrixXd& m, int rows, int cols) {
    m.resize(rows, cols);
    const double scale = 1.0 / std::sqrt(static_cast<double>(rows));
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-1.0, 1.0) * scale;
  };
  const auto fill_bias = [&rng](Eigen::VectorXd& b, int n) {
    b.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) b[i] = rng.uniform(-0.05, 0.05);
  };
  MraParams p;
  p.heads = heads;
  fill_matrix(p.w_query, channels, channels);
  fill_bias(p.b_query, channels);
  fill_matrix(p.w_key, channels, channels);
  fill_bias(p.b_key, channels);
  fill_matrix(p.w_value, channels, channels);
  fill_bias(p.b_value, channels);
  fill_matrix(p.w_out, channels, channels);
  fill_bias(p.b_out, channels);
  fill_matrix(p.w_ff1, channels, ff_dim);
  fill_bias(p.b_ff1, ff_dim);
  fill_matrix(p.w_ff2, ff_dim, channels);
  fill_bias(p.b_ff2, channels);
  p.ln1_gain = Eigen::VectorXd::Ones(channels);
  p.ln1_bias = Eigen::VectorXd::Zero(channels);
  p.ln2_gain = Eigen::VectorXd::Ones(channels);
  p.ln2_bias = Eigen::VectorXd::Zero(channels);
  fill_matrix(p.fusion_w, channels, channels);
  return p;
}

Eigen::MatrixXd softmax_over_groups(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd w(logits.rows(), logits.cols());
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    const Eigen::ArrayXd e = (logits.col(c).array() - logits.col(c).maxCoeff()).exp();
    w.col(c) = (e / e.sum()).matrix();
  }
  return w;
}

MraResult mra_forward(const grouping::MultiRangeFeatures& x, const MraParams& params,
                      int threads) {
  params.validate();
  const std::size_t g_count = x.groups, m_count = x.seeds, c_count = x.channels;
  if (g_count < 1 || m_count < 1)
    throw ValidationError("attention input needs at least one range and one seed");
  if (c_count != static_cast<std::size_t>(params.channels()))
    throw ValidationError("attention input channels do not match the parameters");
  if (x.values.size() != g_count * m_count * c_count)
    throw ValidationError("attention input tensor has inconsistent size");

  const int h_count = params.heads;
  const Eigen::Index dh = static_cast<Eigen::Index>(c_count) / h_count;
  const double attn_scale = 1.0 / std::sqrt(static_cast<double>(dh));

  MraResult result;
  result.output.resize(static_cast<Eigen::Index>(m_count), static_cast<Eigen::Index>(c_count));
  result.encoded.resize(m_count);
  result.weights.resize(m_count);
  result.tape.consumed = false;
  result.tape.params = params;
  result.tape.groups = g_count;
  result.tape.seeds = m_count;
  result.tape.channels = c_count;
  result.tape.cache.resize(m_count);

  parallel_for(m_count, threads, [&](std::size_t m) {
    MraTape::SeedCache& tape = result.tape.cache[m];
    const Eigen::Index gi = static_cast<Eigen::Index>(g_count);
    const Eigen::Index ci = static_cast<Eigen::Index>(c_count);

    tape.x.resize(gi, ci);
    for (std::size_t g = 0; g < g_count; ++g)
      for (std::size_t c = 0; c < c_count; ++c)
        tape.x(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(c)) = x.at(g, m, c);

    tape.q = (tape.x * params.w_query).rowwise() + params.b_query.transpose();
    tape.k = (tape.x * params.w_key).rowwise() + params.b_key.transpose();
    tape.v = (tape.x * params.w_value).rowwise() + params.b_value.transpose();

    tape.attn.resize(static_cast<std::size_t>(h_count));
    tape.concat.resize(gi, ci);
    for (int h = 0; h < h_count; ++h) {
      const Eigen::Index col0 = h * dh;
      const Eigen::MatrixXd scores =
          tape.q.middleCols(col0, dh) * tape.k.middleCols(col0, dh).transpose() * attn_scale;
      tape.attn[static_cast<std::size_t>(h)] = softmax_rows(scores);
      tape.concat.middleCols(col0, dh) =
          tape.attn[static_cast<std::size_t>(h)] * tape.v.middleCols(col0, dh);
    }

    const Eigen::MatrixXd mha =
        (tape.concat * params.w_out).rowwise() + params.b_out.transpose();
    tape.y1 = layer_norm(tape.x + mha, params.ln1_gain, params.ln1_bias, tape.xhat1,
                         tape.inv_std1);

    tape.z1 = (tape.y1 * params.w_ff1).rowwise() + params.b_ff1.transpose();
    tape.u = tape.z1.unaryExpr([](double z) { return gelu(z); });
    const Eigen::MatrixXd ffn = (tape.u * params.w_ff2).rowwise() + params.b_ff2.transpose();
    tape.f = layer_norm(tape.y1 + ffn, params.ln2_gain, params.ln2_bias, tape.xhat2,
                        tape.inv_std2);

    tape.w = softmax_over_groups(tape.f * params.fusion_w);
    result.output.row(static_cast<Eigen::Index>(m)) =
        tape.f.cwiseProduct(tape.w).colwise().sum();
    result.encoded[m] = tape.f;
    result.weights[m] = tape.w;
  });
  return result;
}

MraGradients mra_backward(const Eigen::MatrixXd& d_output, MraTape& tape, int threads) {
  if (tape.consumed) throw ValidationError("attention tape was already consumed");
  tape.consumed = true;
  if (d_output.rows() != static_cast<Eigen::Index>(tape.seeds) ||
      d_output.cols() != static_cast<Eigen::Index>(tape.channels))
    throw ValidationError("output gradient shape does not match the tape");

  const MraParams& p = tape.params;
  const std::size_t g_count = tape.groups, m_count = tape.seeds, c_count = tape.channels;
  const int h_count = p.heads;
  const Eigen::Index dh = static_cast<Eigen::Index>(c_count) / h_count;
  const double attn_scale = 1.0 / std::sqrt(static_cast<double>(dh));

  MraGradients grads;
  grads.x.assign(g_count * m_count * c_count, 0.0);
  grads.params = p.zeros_like();

  // Per-seed parameter gradients, reduced in seed order afterwards so the
  // result is bitwise independent of the thread count.
  std::vector<MraParams> partial(m_count, grads.params);

  parallel_for(m_count, threads, [&](std::size_t m) {
    const MraTape::SeedCache& c = tape.cache[m];
    MraParams& dp = partial[m];
    const Eigen::RowVectorXd d_out = d_output.row(static_cast<Eigen::Index>(m));

    // fusion: O = sum_g F .* w, w = column softmax of F * fusion_w
    Eigen::MatrixXd df = (c.w.array().rowwise() * d_out.array()).matrix();
    Eigen::MatrixXd dw = (c.f.array().rowwise() * d_out.array()).matrix();
    Eigen::MatrixXd dlogits(c.w.rows(), c.w.cols());
    for (Eigen::Index col = 0; col < dlogits.cols(); ++col) {
      const double dot = c.w.col(col).dot(dw.col(col));
      dlogits.col(col) = c.w.col(col).cwiseProduct((dw.col(col).array() - dot).matrix());
    }
    df += dlogits * p.fusion_w.transpose();
    dp.fusion_w += c.f.transpose() * dlogits;

    // second sub-layer: F = LN2(Y1 + FFN(Y1))
    const Eigen::MatrixXd dr2 =
        layer_norm_backward(df, c.xhat2, c.inv_std2, p.ln2_gain, dp.ln2_gain, dp.ln2_bias);
    Eigen::MatrixXd dy1 = dr2;
    const Eigen::MatrixXd du = dr2 * p.w_ff2.transpose();
    dp.w_ff2 += c.u.transpose() * dr2;
    dp.b_ff2 += dr2.colwise().sum().transpose();
    const Eigen::MatrixXd dz1 =
        du.cwiseProduct(c.z1.unaryExpr([](double z) { return gelu_grad(z); }));
    dy1 += dz1 * p.w_ff1.transpose();
    dp.w_ff1 += c.y1.transpose() * dz1;
    dp.b_ff1 += dz1.colwise().sum().transpose();

    // first sub-layer: Y1 = LN1(X + MHA(X))
    const Eigen::MatrixXd dr1 =
        layer_norm_backward(dy1, c.xhat1, c.inv_std1, p.ln1_gain, dp.ln1_gain, dp.ln1_bias);
    Eigen::MatrixXd dx = dr1;
    const Eigen::MatrixXd dconcat = dr1 * p.w_out.transpose();
    dp.w_out += c.concat.transpose() * dr1;
    dp.b_out += dr1.colwise().sum().transpose();

    Eigen::MatrixXd dq = Eigen::MatrixXd::Zero(c.q.rows(), c.q.cols());
    Eigen::MatrixXd dk = Eigen::MatrixXd::Zero(c.k.rows(), c.k.cols());
    Eigen::MatrixXd dv = Eigen::MatrixXd::Zero(c.v.rows(), c.v.cols());
    for (int h = 0; h < h_count; ++h) {
      const Eigen::Index col0 = h * dh;
      const Eigen::MatrixXd& attn = c.attn[static_cast<std::size_t>(h)];
      const Eigen::MatrixXd da = dconcat.middleCols(col0, dh);
      const Eigen::MatrixXd dattn = da * c.v.middleCols(col0, dh).transpose();
      dv.middleCols(col0, dh) += attn.transpose() * da;
      Eigen::MatrixXd dscores(attn.rows(), attn.cols());
      for (Eigen::Index r = 0; r < attn.rows(); ++r) {
        const double dot = dattn.row(r).dot(attn.row(r));
        dscores.row(r) = attn.row(r).cwiseProduct((dattn.row(r).array() - dot).matrix());
      }
      dq.middleCols(col0, dh) += dscores * c.k.middleCols(col0, dh) * attn_scale;
      dk.middleCols(col0, dh) += dscores.transpose() * c.q.middleCols(col0, dh) * attn_scale;
    }

    dx += dq * p.w_query.transpose();
    dp.w_query += c.x.transpose() * dq;
    dp.b_query += dq.colwise().sum().transpose();
    dx += dk * p.w_key.transpose();
    dp.w_key += c.x.transpose() * dk;
    dp.b_key += dk.colwise().sum().transpose();
    dx += dv * p.w_value.transpose();
    dp.w_value += c.x.transpose() * dv;
    dp.b_value += dv.colwise().sum().transpose();

    for (std::size_t g = 0; g < g_count; ++g)
      for (std::size_t ch = 0; ch < c_count; ++ch)
        grads.x[(g * m_count + m) * c_count + ch] =
            dx(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(ch));
  });

  for (const MraParams& dp : partial) add_params(grads.params, dp);
  return grads;
}

}  // namespace fgrasp::mra
