#pragma once

#include "iilab/tensor.hpp"

namespace iilab::kernels {

// Forward kernels shared by the autodiff tape and the no-grad encode path,
// so both paths produce bit-identical values.

// L2 norms below this are a hard error, not a clamp.
inline constexpr double kNormEps = 1e-12;

Tensor matmul(const Tensor& a, const Tensor& b);     // (m,k)x(k,n) -> (m,n)
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // (m,k)x(n,k)^T -> (m,n)
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor add_rowvec(const Tensor& x, const Tensor& b);  // (n,d) + (d)
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor transpose(const Tensor& x);

// Row-wise L2 normalize; rows with norm < kNormEps raise RuntimeFailure.
// When norms_out is non-null it receives the per-row norms (n).
Tensor row_l2_normalize(const Tensor& x, Tensor* norms_out = nullptr);

// Numerically stable row softmax (max subtraction).
Tensor row_softmax(const Tensor& x);

Tensor seq_mean(const Tensor& x);                           // (n,t,e) -> (n,e)
Tensor seq_matvec(const Tensor& x, const Tensor& q);        // (n,t,e)x(e) -> (n,t)
Tensor seq_weighted_sum(const Tensor& x, const Tensor& w);  // (n,t,e),(n,t) -> (n,e)

double reduce_sum(const Tensor& x);
double reduce_mean(const Tensor& x);

}  // namespace iilab::kernels
