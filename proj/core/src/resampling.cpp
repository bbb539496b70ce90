#include "pclv/resampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "pclv/error.hpp"
#include "pclv/rng.hpp"

namespace pclv {

void ResampleConfig::validate() const {
    if (!(adasyn_beta > 0.0 && adasyn_beta <= 1.0)) throw ConfigError("adasyn_beta must be in (0, 1]");
    if (adasyn_k < 1) throw ConfigError("adasyn_k must be >= 1");
    if (nearmiss_k < 1) throw ConfigError("nearmiss_k must be >= 1");
    if (nearmiss_target_ratio < 1.0) throw ConfigError("nearmiss_target_ratio must be >= 1.0");
}

namespace {

/// Column-wise z-scoring fitted on the given matrix; constant columns get
/// scale 1 so they contribute zero distance.
Matrix zscore(const Matrix& m) {
    Matrix out = m;
    for (std::size_t c = 0; c < m.cols; ++c) {
        double mean = 0.0;
        for (std::size_t r = 0; r < m.rows; ++r) mean += m.at(r, c);
        mean /= static_cast<double>(m.rows);
        double var = 0.0;
        for (std::size_t r = 0; r < m.rows; ++r) {
            const double d = m.at(r, c) - mean;
            var += d * d;
        }
        var /= static_cast<double>(m.rows);
        const double sd = var > 0.0 ? std::sqrt(var) : 1.0;
        for (std::size_t r = 0; r < m.rows; ++r) out.at(r, c) = (m.at(r, c) - mean) / sd;
    }
    return out;
}

double sq_distance(std::span<const double> a, std::span<const double> b) {
    const double* pa = a.data();
    const double* pb = b.data();
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = pa[i] - pb[i];
        s += d * d;
    }
    return s;
}

/// Indices of the k nearest rows of `pool` to `query` (self excluded via
/// `skip`), ordered by (distance, pool index). Streaming top-k: the pool is
/// visited in ascending index order, so strict comparisons resolve distance
/// ties toward the lower index.
std::vector<std::size_t> k_nearest(const Matrix& z, std::span<const double> query,
                                   const std::vector<std::size_t>& pool, std::size_t skip, int k) {
    std::vector<std::pair<double, std::size_t>> top;
    top.reserve(static_cast<std::size_t>(k) + 1);
    for (const auto idx : pool) {
        if (idx == skip) continue;
        const double dist = sq_distance(query, z.row(idx));
        if (top.size() == static_cast<std::size_t>(k) && dist >= top.back().first) continue;
        auto at = top.begin();
        while (at != top.end() && at->first <= dist) ++at;
        top.insert(at, {dist, idx});
        if (top.size() > static_cast<std::size_t>(k)) top.pop_back();
    }
    std::vector<std::size_t> out(top.size());
    for (std::size_t i = 0; i < top.size(); ++i) out[i] = top[i].second;
    return out;
}

void split_classes(const std::vector<int>& labels, std::vector<std::size_t>& minority,
                   std::vector<std::size_t>& majority) {
    std::vector<std::size_t> ones, zeros;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        (labels[i] == 1 ? ones : zeros).push_back(i);
    }
    if (ones.empty() || zeros.empty()) {
        throw Error("resampling requires both classes to be present");
    }
    if (ones.size() <= zeros.size()) {
        minority = std::move(ones);
        majority = std::move(zeros);
    } else {
        minority = std::move(zeros);
        majority = std::move(ones);
    }
}

}  // namespace

ResampledData adasyn(const Matrix& features, const std::vector<int>& labels, const ResampleConfig& config) {
    config.validate();
    if (features.rows != labels.size()) throw Error("adasyn: features/labels length mismatch");

    std::vector<std::size_t> minority, majority;
    split_classes(labels, minority, majority);
    const int minority_label = labels[minority.front()];

    if (static_cast<std::size_t>(config.adasyn_k) >= features.rows) {
        throw Error("adasyn_k must be smaller than the number of samples");
    }

    ResampledData out{features, labels};
    const double gap = static_cast<double>(majority.size() - minority.size());
    const double total_to_generate = gap * config.adasyn_beta;
    if (total_to_generate <= 0.0) return out;

    const Matrix z = zscore(features);
    std::vector<std::size_t> all(features.rows);
    std::iota(all.begin(), all.end(), std::size_t{0});

    // Density ratios: share of majority among each minority point's k nearest.
    std::vector<double> ratio(minority.size(), 0.0);
    std::vector<std::vector<std::size_t>> minority_nn(minority.size());

#pragma omp parallel for schedule(dynamic, 16)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(minority.size()); ++i) {
        const auto idx = minority[static_cast<std::size_t>(i)];
        const auto query = z.row(idx);
        const auto neighbors = k_nearest(z, query, all, idx, config.adasyn_k);
        int majority_count = 0;
        for (const auto nb : neighbors) {
            if (labels[nb] != minority_label) ++majority_count;
        }
        ratio[static_cast<std::size_t>(i)] =
            static_cast<double>(majority_count) / static_cast<double>(config.adasyn_k);
        minority_nn[static_cast<std::size_t>(i)] = k_nearest(z, query, minority, idx, config.adasyn_k);
    }

    const double ratio_sum = std::accumulate(ratio.begin(), ratio.end(), 0.0);
    std::vector<double> normalized(minority.size());
    if (ratio_sum > 0.0) {
        for (std::size_t i = 0; i < ratio.size(); ++i) normalized[i] = ratio[i] / ratio_sum;
    } else {
        // Every minority point is surrounded by its own class; fall back to
        // uniform weights so the requested volume is still generated.
        std::fill(normalized.begin(), normalized.end(), 1.0 / static_cast<double>(minority.size()));
    }

    Rng rng(config.seed);
    for (std::size_t i = 0; i < minority.size(); ++i) {
        const auto count = static_cast<std::int64_t>(std::llround(normalized[i] * total_to_generate));
        const auto seed_row = features.row(minority[i]);
        const auto& neighbors = minority_nn[i];
        std::vector<double> synthetic(features.cols);
        for (std::int64_t s = 0; s < count; ++s) {
            // Lone minority point: no neighbor to interpolate toward, so the
            // segment degenerates to the point itself.
            const auto partner = neighbors.empty()
                                     ? minority[i]
                                     : neighbors[static_cast<std::size_t>(rng.uniform_int(
                                           0, static_cast<std::int64_t>(neighbors.size()) - 1))];
            const double lambda = rng.uniform();
            const auto partner_row = features.row(partner);
            for (std::size_t c = 0; c < features.cols; ++c) {
                synthetic[c] = seed_row[c] + lambda * (partner_row[c] - seed_row[c]);
            }
            out.features.append_row(synthetic);
            out.labels.push_back(minority_label);
        }
    }
    return out;
}

ResampledData nearmiss(const Matrix& features, const std::vector<int>& labels, const ResampleConfig& config) {
    config.validate();
    if (features.rows != labels.size()) throw Error("nearmiss: features/labels length mismatch");

    std::vector<std::size_t> minority, majority;
    split_classes(labels, minority, majority);

    const auto target = static_cast<std::size_t>(
        std::ceil(config.nearmiss_target_ratio * static_cast<double>(minority.size())));
    if (majority.size() <= target) {
        return {features, labels};
    }

    const Matrix z = zscore(features);

    // The majority-to-minority scan is the hot path at pipeline scale
    // (tens of thousands against tens of thousands). Single-precision dense
    // blocks with a branch-free inner loop and four queries per pass keep it
    // memory- and SIMD-friendly; only the distance ranking runs in float,
    // the retained rows themselves are untouched.
    const std::size_t cols = z.cols;
    const std::size_t m_count = minority.size();
    std::vector<float> minority_block(m_count * cols);
    for (std::size_t m = 0; m < m_count; ++m) {
        const auto src = z.row(minority[m]);
        for (std::size_t c = 0; c < cols; ++c) {
            minority_block[m * cols + c] = static_cast<float>(src[c]);
        }
    }

    const auto k = std::min<std::size_t>(static_cast<std::size_t>(config.nearmiss_k), m_count);
    std::vector<double> mean_distance(majority.size(), 0.0);
    constexpr std::size_t kTile = 4;

#pragma omp parallel for schedule(dynamic, 16)
    for (std::ptrdiff_t tile = 0; tile < static_cast<std::ptrdiff_t>((majority.size() + kTile - 1) / kTile);
         ++tile) {
        const std::size_t begin = static_cast<std::size_t>(tile) * kTile;
        const std::size_t count = std::min(kTile, majority.size() - begin);

        // Tile transposed: the four queries' values for one dimension sit
        // contiguously, so the inner loop is a clean 4-lane SIMD pattern.
        std::vector<float> queries(kTile * cols, 0.0f);
        for (std::size_t t = 0; t < count; ++t) {
            const auto src = z.row(majority[begin + t]);
            for (std::size_t c = 0; c < cols; ++c) queries[c * kTile + t] = static_cast<float>(src[c]);
        }

        std::vector<std::vector<float>> top(count,
                                            std::vector<float>(k, std::numeric_limits<float>::infinity()));
        for (std::size_t m = 0; m < m_count; ++m) {
            const float* row = minority_block.data() + m * cols;
            float sq[kTile] = {};
            for (std::size_t c = 0; c < cols; ++c) {
                const float rv = row[c];
                const float* qc = queries.data() + c * kTile;
                for (std::size_t t = 0; t < kTile; ++t) {
                    const float d = qc[t] - rv;
                    sq[t] += d * d;
                }
            }
            for (std::size_t t = 0; t < count; ++t) {
                auto& tt = top[t];
                if (sq[t] >= tt.back()) continue;
                auto at = tt.begin();
                while (at != tt.end() && *at <= sq[t]) ++at;
                tt.insert(at, sq[t]);
                tt.pop_back();
            }
        }
        for (std::size_t t = 0; t < count; ++t) {
            double sum = 0.0;
            for (const float sqv : top[t]) sum += std::sqrt(static_cast<double>(sqv));
            mean_distance[begin + t] = sum / static_cast<double>(k);
        }
    }

    // Keep the `target` majority rows closest to the minority; ties resolve
    // toward the lower original row index.
    std::vector<std::size_t> order(majority.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (mean_distance[a] != mean_distance[b]) return mean_distance[a] < mean_distance[b];
        return majority[a] < majority[b];
    });

    std::vector<char> keep(features.rows, 0);
    for (const auto idx : minority) keep[idx] = 1;
    for (std::size_t i = 0; i < target; ++i) keep[majority[order[i]]] = 1;

    ResampledData out;
    out.features = Matrix(0, features.cols);
    for (std::size_t r = 0; r < features.rows; ++r) {
        if (!keep[r]) continue;
        out.features.append_row(features.row(r));
        out.labels.push_back(labels[r]);
    }
    return out;
}

ResampledData balance(const Matrix& features, const std::vector<int>& labels, const ResampleConfig& config) {
    const auto oversampled = adasyn(features, labels, config);
    return nearmiss(oversampled.features, oversampled.labels, config);
}

}  // namespace pclv
