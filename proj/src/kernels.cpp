#include "iilab/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace iilab::kernels {

namespace {

void require(bool ok, const std::string& msg) {
    if (!ok) throw InvalidInput(msg);
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    require(a.shape == b.shape,
            std::string(op) + ": shape mismatch " + a.shape.str() + " vs " + b.shape.str());
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    require(a.rank() == 2 && b.rank() == 2, "matmul: operands must be rank 2");
    require(a.cols() == b.rows(),
            "matmul: inner dims differ, " + a.shape.str() + " vs " + b.shape.str());
    const size_t m = a.rows(), k = a.cols(), n = b.cols();
    Tensor c(Shape{m, n});
    for (size_t i = 0; i < m; ++i)
        for (size_t p = 0; p < k; ++p) {
            const double av = a.at(i, p);
            for (size_t j = 0; j < n; ++j) c.at(i, j) += av * b.at(p, j);
        }
    return c;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    require(a.rank() == 2 && b.rank() == 2, "matmul_nt: operands must be rank 2");
    require(a.cols() == b.cols(),
            "matmul_nt: inner dims differ, " + a.shape.str() + " vs " + b.shape.str());
    const size_t m = a.rows(), k = a.cols(), n = b.rows();
    Tensor c(Shape{m, n});
    for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (size_t p = 0; p < k; ++p) s += a.at(i, p) * b.at(j, p);
            c.at(i, j) = s;
        }
    return c;
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    Tensor c(a.shape);
    for (size_t i = 0; i < c.count(); ++i) c.data[i] = a.data[i] + b.data[i];
    return c;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    Tensor c(a.shape);
    for (size_t i = 0; i < c.count(); ++i) c.data[i] = a.data[i] - b.data[i];
    return c;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    Tensor c(a.shape);
    for (size_t i = 0; i < c.count(); ++i) c.data[i] = a.data[i] * b.data[i];
    return c;
}

Tensor scale(const Tensor& a, double c) {
    Tensor out(a.shape);
    for (size_t i = 0; i < out.count(); ++i) out.data[i] = a.data[i] * c;
    return out;
}

Tensor add_rowvec(const Tensor& x, const Tensor& b) {
    require(x.rank() == 2 && b.rank() == 1, "add_rowvec: expects (n,d) and (d)");
    require(x.cols() == b.dim(0), "add_rowvec: width mismatch");
    Tensor c(x.shape);
    for (size_t i = 0; i < x.rows(); ++i)
        for (size_t j = 0; j < x.cols(); ++j) c.at(i, j) = x.at(i, j) + b.data[j];
    return c;
}

Tensor exp(const Tensor& x) {
    Tensor c(x.shape);
    for (size_t i = 0; i < c.count(); ++i) c.data[i] = std::exp(x.data[i]);
    return c;
}

Tensor log(const Tensor& x) {
    Tensor c(x.shape);
    for (size_t i = 0; i < c.count(); ++i) {
        if (!(x.data[i] > 0.0)) throw InvalidInput("log: operand must be strictly positive");
        c.data[i] = std::log(x.data[i]);
    }
    return c;
}

Tensor tanh(const Tensor& x) {
    Tensor c(x.shape);
    for (size_t i = 0; i < c.count(); ++i) c.data[i] = std::tanh(x.data[i]);
    return c;
}

Tensor transpose(const Tensor& x) {
    require(x.rank() == 2, "transpose: expects rank 2");
    Tensor c(Shape{x.cols(), x.rows()});
    for (size_t i = 0; i < x.rows(); ++i)
        for (size_t j = 0; j < x.cols(); ++j) c.at(j, i) = x.at(i, j);
    return c;
}

Tensor row_l2_normalize(const Tensor& x, Tensor* norms_out) {
    require(x.rank() == 2, "row_l2_normalize: expects rank 2");
    Tensor c(x.shape);
    Tensor norms(Shape{x.rows()});
    for (size_t i = 0; i < x.rows(); ++i) {
        double s = 0.0;
        for (size_t j = 0; j < x.cols(); ++j) s += x.at(i, j) * x.at(i, j);
        const double r = std::sqrt(s);
        if (!(r >= kNormEps))
            throw RuntimeFailure("row_l2_normalize: row " + std::to_string(i) +
                                 " has norm " + std::to_string(r) + " below 1e-12");
        norms.data[i] = r;
        for (size_t j = 0; j < x.cols(); ++j) c.at(i, j) = x.at(i, j) / r;
    }
    if (norms_out) *norms_out = std::move(norms);
    return c;
}

Tensor row_softmax(const Tensor& x) {
    require(x.rank() == 2, "row_softmax: expects rank 2");
    Tensor c(x.shape);
    for (size_t i = 0; i < x.rows(); ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (size_t j = 0; j < x.cols(); ++j) mx = std::max(mx, x.at(i, j));
        double z = 0.0;
        for (size_t j = 0; j < x.cols(); ++j) {
            const double e = std::exp(x.at(i, j) - mx);
            c.at(i, j) = e;
            z += e;
        }
        for (size_t j = 0; j < x.cols(); ++j) c.at(i, j) /= z;
    }
    return c;
}

Tensor seq_mean(const Tensor& x) {
    require(x.rank() == 3, "seq_mean: expects rank 3");
    const size_t n = x.dim(0), t = x.dim(1), e = x.dim(2);
    Tensor c(Shape{n, e});
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < t; ++j)
            for (size_t k = 0; k < e; ++k) c.at(i, k) += x.at3(i, j, k);
    for (double& v : c.data) v /= static_cast<double>(t);
    return c;
}

Tensor seq_matvec(const Tensor& x, const Tensor& q) {
    require(x.rank() == 3 && q.rank() == 1, "seq_matvec: expects (n,t,e) and (e)");
    require(x.dim(2) == q.dim(0), "seq_matvec: width mismatch");
    const size_t n = x.dim(0), t = x.dim(1), e = x.dim(2);
    Tensor c(Shape{n, t});
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < t; ++j) {
            double s = 0.0;
            for (size_t k = 0; k < e; ++k) s += x.at3(i, j, k) * q.data[k];
            c.at(i, j) = s;
        }
    return c;
}

Tensor seq_weighted_sum(const Tensor& x, const Tensor& w) {
    require(x.rank() == 3 && w.rank() == 2, "seq_weighted_sum: expects (n,t,e) and (n,t)");
    require(x.dim(0) == w.dim(0) && x.dim(1) == w.dim(1), "seq_weighted_sum: shape mismatch");
    const size_t n = x.dim(0), t = x.dim(1), e = x.dim(2);
    Tensor c(Shape{n, e});
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < t; ++j) {
            const double wv = w.at(i, j);
            for (size_t k = 0; k < e; ++k) c.at(i, k) += wv * x.at3(i, j, k);
        }
    return c;
}

double reduce_sum(const Tensor& x) {
    double s = 0.0;
    for (double v : x.data) s += v;
    return s;
}

double reduce_mean(const Tensor& x) { return reduce_sum(x) / static_cast<double>(x.count()); }

}  // namespace iilab::kernels
