#pragma once

#include <cstdint>
#include <vector>

#include "pclv/matrix.hpp"

namespace pclv {

struct ResampleConfig {
    double adasyn_beta = 1.0;        // fraction of the class gap to synthesize
    int adasyn_k = 5;                // neighbor count for density and synthesis
    int nearmiss_k = 3;              // minority neighbors per majority point
    double nearmiss_target_ratio = 1.0;  // majority/minority ratio after undersampling
    std::uint64_t seed = 0;

    void validate() const;
};

struct ResampledData {
    Matrix features;
    std::vector<int> labels;
};

/// ADASYN oversampling of the smaller class. Appends synthetic rows after
/// the originals; never deletes or rewrites a row. Neighbor searches run on
/// z-scored copies (standardization fitted on this input); synthesis
/// interpolates in the original feature space.
ResampledData adasyn(const Matrix& features, const std::vector<int>& labels, const ResampleConfig& config);

/// NearMiss-1 undersampling: keeps the majority points with the smallest
/// mean distance to their nearmiss_k nearest minority points, ties broken by
/// original row index. Never adds or rewrites a row.
ResampledData nearmiss(const Matrix& features, const std::vector<int>& labels, const ResampleConfig& config);

/// ADASYN followed by NearMiss, the order the preprocessing lists them.
ResampledData balance(const Matrix& features, const std::vector<int>& labels, const ResampleConfig& config);

}  // namespace pclv
