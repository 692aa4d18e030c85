#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "iilab/tensor.hpp"

namespace iilab {

// Truth labels decide what counts as a hit: pair ids (exact partner) or
// category ids (any same-cluster candidate).
enum class TruthMode { pair, category };

TruthMode truth_mode_from_name(const std::string& name);
const char* truth_mode_name(TruthMode m);

struct RetrievalResult {
    std::vector<std::vector<size_t>> ranked;         // per query, candidate indices best-first
    std::vector<std::pair<size_t, double>> recalls;  // (k, R@k)
};

// Ranks every corpus row for each query row by descending cosine
// similarity; ties broken by ascending candidate index.
std::vector<std::vector<size_t>> rank_by_cosine(const Tensor& queries, const Tensor& corpus);

// Fraction of queries whose top-k candidates include a matching label.
double recall_at_k(const std::vector<std::vector<size_t>>& ranked,
                   const std::vector<int64_t>& query_labels,
                   const std::vector<int64_t>& corpus_labels, size_t k);

RetrievalResult evaluate_retrieval(const Tensor& queries, const Tensor& corpus,
                                   const std::vector<int64_t>& query_labels,
                                   const std::vector<int64_t>& corpus_labels,
                                   const std::vector<size_t>& ks);

}  // namespace iilab
