#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "iilab/tape.hpp"
#include "iilab/tensor.hpp"

namespace iilab {

enum class EncoderKind { meanpool_linear, mlp, attnpool };

const char* encoder_kind_name(EncoderKind k);
EncoderKind encoder_kind_from_name(const std::string& name);

struct EncoderConfig {
    EncoderKind kind = EncoderKind::mlp;
    size_t input_dim = 0;  // E, resolved from the dataset
    size_t hidden_dim = 256;
    size_t output_dim = 128;
    uint64_t seed = 0;

    void validate() const;
};

// Named parameter tensors in a fixed order, so optimizer state and
// checkpoints line up deterministically.
struct EncoderParams {
    std::vector<std::pair<std::string, Tensor>> named;

    Tensor& at(const std::string& name);
    const Tensor& at(const std::string& name) const;
};

// Parameter node ids after placing EncoderParams on a tape, same order.
struct EncoderNodes {
    std::vector<std::pair<std::string, NodeId>> named;

    NodeId at(const std::string& name) const;
};

// Xavier-uniform weights with bound sqrt(6/(fan_in+fan_out)), zero biases.
// The attention query uses fan_out 1.
EncoderParams init_params(const EncoderConfig& cfg);

EncoderNodes params_to_tape(Tape& tape, const EncoderParams& params, bool requires_grad);

// batch is an (N, T, E) node; result is the (N, output_dim) embedding node.
NodeId encode(Tape& tape, const EncoderConfig& cfg, const EncoderNodes& nodes, NodeId batch);

// Same arithmetic off-tape; bit-identical to the tape forward pass.
Tensor encode_plain(const EncoderConfig& cfg, const EncoderParams& params, const Tensor& batch);

}  // namespace iilab
