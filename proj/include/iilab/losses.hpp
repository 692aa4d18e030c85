#pragma once

#include "iilab/encoders.hpp"
#include "iilab/tape.hpp"
#include "iilab/tensor.hpp"

namespace iilab {

struct LossWeights {
    double alpha1 = 0.5, alpha2 = 0.5;  // inter row/column CE weights
    double beta1 = 0.5, beta2 = 0.5;    // intra per-modality weights
    double gamma1 = 1.0, gamma2 = 3.0;  // inter/intra mix
    // Row/column weights of the general (unsimplified) intra form. The
    // similarity matrices are symmetric, so the simplified per-row form is
    // computed and these stay documentation-only.
    double delta1 = 0.5, delta2 = 0.5;

    void validate() const;
};

// The learnable logit scale n_t: logits = e^{n_t} * S. After each optimizer
// step e^{n_t} is clamped to [e^-1, 100].
inline constexpr double kTempMin = -1.0;
double temp_max();  // ln(100)
double clamp_temperature(double n_t);

struct LossBreakdown {
    NodeId inter = -1;
    NodeId intra_v = -1;
    NodeId intra_m = -1;
    NodeId total = -1;
    double inter_value = 0.0;
    double intra_v_value = 0.0;
    double intra_m_value = 0.0;
    double total_value = 0.0;
};

// Symmetric temperature-scaled cross entropy over the pairwise cosine
// matrix with diagonal targets: alpha1 weights the row direction (video ->
// music), alpha2 the column direction.
NodeId inter_loss(Tape& tape, NodeId v_emb, NodeId m_emb, NodeId n_t, const LossWeights& w);

// Pairwise cosine matrix of pre-encoder temporal means; constant, no
// gradient path (inputs are frozen features).
Tensor intra_sim_pre(const Tensor& mean_feats);

// Pairwise cosine matrix of encoded embeddings, recorded on tape.
NodeId intra_sim_post(Tape& tape, NodeId emb);

// (1/N) * sum_i (1 - cosine(row i of s_pre, row i of s_post)).
NodeId intra_loss_modality(Tape& tape, const Tensor& s_pre, NodeId s_post);

// Full combined loss for one batch:
//   total = 1/2 * (gamma1 * inter + gamma2 * (beta1*intra_v + beta2*intra_m))
// video_batch/music_batch are (N,T,E) nodes of sampled sequences; their
// temporal means feed the constant pre-encoder similarity matrices.
LossBreakdown ii_loss(Tape& tape, const EncoderConfig& video_cfg, const EncoderNodes& video_nodes,
                      const EncoderConfig& music_cfg, const EncoderNodes& music_nodes,
                      NodeId video_batch, NodeId music_batch, NodeId n_t, const LossWeights& w);

}  // namespace iilab
