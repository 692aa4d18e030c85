#include "iilab/losses.hpp"

#include <algorithm>
#include <cmath>

#include "iilab/kernels.hpp"

namespace iilab {

void LossWeights::validate() const {
    for (double w : {alpha1, alpha2, beta1, beta2, gamma1, gamma2, delta1, delta2})
        if (!(w >= 0.0)) throw InvalidInput("loss weights must be >= 0");
}

double temp_max() { return std::log(100.0); }

double clamp_temperature(double n_t) { return std::clamp(n_t, kTempMin, temp_max()); }

NodeId inter_loss(Tape& tape, NodeId v_emb, NodeId m_emb, NodeId n_t, const LossWeights& w) {
    const Shape& vs = tape.value(v_emb).shape;
    const Shape& ms = tape.value(m_emb).shape;
    if (vs.rank() != 2 || ms.rank() != 2 || vs != ms)
        throw InvalidInput("inter_loss: embeddings must be rank 2 with equal shapes, got " +
                           vs.str() + " and " + ms.str());
    const size_t n = vs.dims[0];
    std::vector<size_t> diagonal(n);
    for (size_t i = 0; i < n; ++i) diagonal[i] = i;

    NodeId sim = tape.cosine_sim_matrix(v_emb, m_emb);
    NodeId logits = tape.scale_by(sim, tape.exp(n_t));
    NodeId row_ce = tape.cross_entropy_rows(logits, diagonal);
    NodeId col_ce = tape.cross_entropy_rows(tape.transpose(logits), diagonal);
    return tape.add(tape.scale(row_ce, w.alpha1), tape.scale(col_ce, w.alpha2));
}

Tensor intra_sim_pre(const Tensor& mean_feats) {
    Tensor normed = kernels::row_l2_normalize(mean_feats);
    return kernels::matmul_nt(normed, normed);
}

NodeId intra_sim_post(Tape& tape, NodeId emb) {
    NodeId normed = tape.row_l2_normalize(emb);
    return tape.matmul_nt(normed, normed);
}

NodeId intra_loss_modality(Tape& tape, const Tensor& s_pre, NodeId s_post) {
    const Shape& post_shape = tape.value(s_post).shape;
    if (s_pre.rank() != 2 || s_pre.rows() != s_pre.cols())
        throw InvalidInput("intra_loss_modality: s_pre must be square, got " + s_pre.shape.str());
    if (post_shape != s_pre.shape)
        throw InvalidInput("intra_loss_modality: shape mismatch " + s_pre.shape.str() + " vs " +
                           post_shape.str());
    const size_t n = s_pre.rows();

    NodeId pre_normed = tape.leaf(kernels::row_l2_normalize(s_pre), false);
    NodeId post_normed = tape.row_l2_normalize(s_post);
    // sum of elementwise product = sum_i cosine(row_i pre, row_i post)
    NodeId row_cosines = tape.reduce_sum(tape.mul(post_normed, pre_normed));
    NodeId mean_cosine = tape.scale(row_cosines, 1.0 / static_cast<double>(n));
    NodeId one = tape.leaf(Tensor::scalar(1.0), false);
    return tape.sub(one, mean_cosine);
}

LossBreakdown ii_loss(Tape& tape, const EncoderConfig& video_cfg, const EncoderNodes& video_nodes,
                      const EncoderConfig& music_cfg, const EncoderNodes& music_nodes,
                      NodeId video_batch, NodeId music_batch, NodeId n_t, const LossWeights& w) {
    w.validate();
    const Shape& vb = tape.value(video_batch).shape;
    const Shape& mb = tape.value(music_batch).shape;
    if (vb.rank() != 3 || mb.rank() != 3 || vb.dims[0] != mb.dims[0])
        throw InvalidInput("ii_loss: batches must be rank 3 with matching pair count");

    NodeId v_emb = encode(tape, video_cfg, video_nodes, video_batch);
    NodeId m_emb = encode(tape, music_cfg, music_nodes, music_batch);

    LossBreakdown out;
    out.inter = inter_loss(tape, v_emb, m_emb, n_t, w);

    Tensor pre_v = intra_sim_pre(kernels::seq_mean(tape.value(video_batch)));
    Tensor pre_m = intra_sim_pre(kernels::seq_mean(tape.value(music_batch)));
    out.intra_v = intra_loss_modality(tape, pre_v, intra_sim_post(tape, v_emb));
    out.intra_m = intra_loss_modality(tape, pre_m, intra_sim_post(tape, m_emb));

    NodeId intra = tape.add(tape.scale(out.intra_v, w.beta1), tape.scale(out.intra_m, w.beta2));
    out.total = tape.scale(tape.add(tape.scale(out.inter, w.gamma1), tape.scale(intra, w.gamma2)),
                           0.5);

    out.inter_value = tape.value(out.inter).item();
    out.intra_v_value = tape.value(out.intra_v).item();
    out.intra_m_value = tape.value(out.intra_m).item();
    out.total_value = tape.value(out.total).item();
    return out;
}

}  // namespace iilab
