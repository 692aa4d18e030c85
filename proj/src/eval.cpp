#include "iilab/eval.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "iilab/common.hpp"
#include "iilab/kernels.hpp"

namespace iilab {

TruthMode truth_mode_from_name(const std::string& name) {
    if (name == "pair") return TruthMode::pair;
    if (name == "category") return TruthMode::category;
    throw InvalidInput("unknown retrieval mode '" + name + "' (expected pair or category)");
}

const char* truth_mode_name(TruthMode m) {
    return m == TruthMode::pair ? "pair" : "category";
}

std::vector<std::vector<size_t>> rank_by_cosine(const Tensor& queries, const Tensor& corpus) {
    if (queries.rank() != 2 || corpus.rank() != 2 || queries.cols() != corpus.cols())
        throw InvalidInput("rank_by_cosine: embedding matrices must be rank 2 with equal dims");
    const Tensor sims = kernels::matmul_nt(kernels::row_l2_normalize(queries),
                                           kernels::row_l2_normalize(corpus));
    const size_t m = corpus.rows();
    std::vector<std::vector<size_t>> ranked(queries.rows());
    for (size_t q = 0; q < queries.rows(); ++q) {
        std::vector<size_t>& order = ranked[q];
        order.resize(m);
        std::iota(order.begin(), order.end(), size_t{0});
        std::sort(order.begin(), order.end(), [&sims, q](size_t a, size_t b) {
            const double sa = sims.at(q, a), sb = sims.at(q, b);
            if (sa != sb) return sa > sb;
            return a < b;
        });
    }
    return ranked;
}

double recall_at_k(const std::vector<std::vector<size_t>>& ranked,
                   const std::vector<int64_t>& query_labels,
                   const std::vector<int64_t>& corpus_labels, size_t k) {
    if (ranked.empty()) throw InvalidInput("recall_at_k: no queries");
    if (query_labels.size() != ranked.size())
        throw InvalidInput("recall_at_k: one label per query required");
    const size_t pool = ranked.front().size();
    if (k < 1 || k > pool)
        throw InvalidInput("recall_at_k: k=" + std::to_string(k) +
                           " out of range for pool size " + std::to_string(pool));

    size_t hits = 0;
    for (size_t q = 0; q < ranked.size(); ++q) {
        if (ranked[q].size() != pool) throw InvalidInput("recall_at_k: ragged ranking lists");
        for (size_t r = 0; r < k; ++r) {
            const size_t cand = ranked[q][r];
            if (cand >= corpus_labels.size())
                throw InvalidInput("recall_at_k: candidate index out of range");
            if (corpus_labels[cand] == query_labels[q]) {
                ++hits;
                break;
            }
        }
    }
    return static_cast<double>(hits) / static_cast<double>(ranked.size());
}

RetrievalResult evaluate_retrieval(const Tensor& queries, const Tensor& corpus,
                                   const std::vector<int64_t>& query_labels,
                                   const std::vector<int64_t>& corpus_labels,
                                   const std::vector<size_t>& ks) {
    RetrievalResult out;
    out.ranked = rank_by_cosine(queries, corpus);
    out.recalls.reserve(ks.size());
    for (size_t k : ks)
        out.recalls.emplace_back(k, recall_at_k(out.ranked, query_labels, corpus_labels, k));
    return out;
}

}  // namespace iilab
