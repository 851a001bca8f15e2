#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <vector>

#include "fgrasp/grouping.hpp"

namespace fgrasp::mra {

inline constexpr double kLayerNormEps = 1e-5;

// One post-norm transformer encoder layer plus the adaptive fusion
// projection. All projections right-multiply row sequences: for a G x C
// sequence X, queries are X * w_query with b_query added to every row.
struct MraParams {
  int heads = 4;
  Eigen::MatrixXd w_query, w_key, w_value, w_out;          // C x C
  Eigen::VectorXd b_query, b_key, b_value, b_out;          // C
  Eigen::MatrixXd w_ff1;                                   // C x C_ff
  Eigen::VectorXd b_ff1;                                   // C_ff
  Eigen::MatrixXd w_ff2;                                   // C_ff x C
  Eigen::VectorXd b_ff2;                                   // C
  Eigen::VectorXd ln1_gain, ln1_bias, ln2_gain, ln2_bias;  // C
  Eigen::MatrixXd fusion_w;                                // C x C

  int channels() const { return static_cast<int>(w_query.rows()); }
  int ff_dim() const { return static_cast<int>(w_ff1.cols()); }
  void validate() const;

  // Every parameter scalar in a fixed order (each matrix in Eigen's
  // column-major storage order): w_query, b_query, w_key, b_key, w_value,
  // b_value, w_out, b_out, w_ff1, b_ff1, w_ff2, b_ff2, ln1_gain, ln1_bias,
  // ln2_gain, ln2_bias, fusion_w. Gradient checks walk this list.
  std::vector<double*> scalar_pointers();
  MraParams zeros_like() const;
};

// Deterministic initialization: matrix entries uniform in [-1, 1] scaled
// by 1/sqrt(fan-in), small uniform biases, layer-norm gains 1 / biases 0.
MraParams init_params(int channels, int ff_dim, int heads, std::uint64_t seed);

// Intermediates of one forward call, consumed by the matching backward.
struct MraTape {
  bool consumed = true;
  MraParams params;
  std::size_t groups = 0, seeds = 0, channels = 0;
  struct SeedCache {
    Eigen::MatrixXd x;                  // G x C input sequence
    Eigen::MatrixXd q, k, v;            // G x C projected sequences
    std::vector<Eigen::MatrixXd> attn;  // per head: G x G row-softmax
    Eigen::MatrixXd concat;             // G x C merged head outputs
    Eigen::MatrixXd xhat1;              // G x C normalized (pre-gain)
    Eigen::VectorXd inv_std1;           // G
    Eigen::MatrixXd y1;                 // G x C first sub-layer output
    Eigen::MatrixXd z1;                 // G x C_ff pre-activation
    Eigen::MatrixXd u;                  // G x C_ff GELU output
    Eigen::MatrixXd xhat2;              // G x C
    Eigen::VectorXd inv_std2;           // G
    Eigen::MatrixXd f;                  // G x C encoded sequence
    Eigen::MatrixXd w;                  // G x C fusion weights
  };
  std::vector<SeedCache> cache;
};

struct MraResult {
  Eigen::MatrixXd output;                // M x C fused features
  std::vector<Eigen::MatrixXd> encoded;  // per seed: G x C
  std::vector<Eigen::MatrixXd> weights;  // per seed: G x C, each column a simplex
  MraTape tape;
};

// Multi-range attention over the range axis, independently per seed. For
// the seed's G x C sequence X:
//   Q = X Wq + bq,  K = X Wk + bk,  V = X Wv + bv            (per row)
//   per head h (Dh = C/H columns): S = Q_h K_h^T / sqrt(Dh),
//   P = softmax of S over keys (rows of S, max-subtracted), A_h = P V_h
//   Y1 = LayerNorm_1(X + concat(A) Wo + bo)
//   F  = LayerNorm_2(Y1 + GELU(Y1 W1 + b1) W2 + b2)
// LayerNorm is per row with population variance, epsilon kLayerNormEps,
// then gain/bias; GELU is the erf form 0.5 z (1 + erf(z/sqrt(2))).
// Fusion: logits L = F fusion_w, weights w = softmax of L over the range
// axis per channel (max-subtracted), output row = sum_g F_g .* w_g.
MraResult mra_forward(const grouping::MultiRangeFeatures& x, const MraParams& params,
                      int threads = 0);

struct MraGradients {
  std::vector<double> x;  // same G x M x C layout as the input tensor
  MraParams params;       // gradient for every parameter
};

// Exact reverse-mode gradients of mra_forward. Consumes the tape; calling
// it twice on the same tape is an error.
MraGradients mra_backward(const Eigen::MatrixXd& d_output, MraTape& tape, int threads = 0);

// Column-wise softmax over the group axis with max-subtraction, exactly as
// used for the fusion weights. logits: G x C.
Eigen::MatrixXd softmax_over_groups(const Eigen::MatrixXd& logits);

}  // namespace fgrasp::mra
