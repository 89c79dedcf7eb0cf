#pragma once

#include <vector>

#include "pfrp/gmb.hpp"
#include "pfrp/nn.hpp"

namespace pfrp {

enum class RetrievalCriterion;
struct Retrieval;

// Classic dynamic-programming DTW with absolute-difference local cost and no
// band constraint. Symmetric; dtw(a,a) = 0.
double dtw_distance(const std::vector<double>& a, const std::vector<double>& b);

// Pearson correlation coefficient in [-1,1]; errors on zero-variance input.
double pcc(const std::vector<double>& a, const std::vector<double>& b);

// Top-k under an alternative criterion over the bank. MSE/DTW rank ascending
// (most similar first), PCC and feature cosine descending; ties go to the
// lower bank index. Non-feature criteria need the bank's raw windows.
Retrieval retrieve_topk_by(RetrievalCriterion criterion, const MemoryBank& bank,
                           const MlpModel& encoder, const std::vector<double>& x, int k, int H);

}  // namespace pfrp
