#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace pclv::hpo {

struct Dimension {
    std::string name;
    double lower = 0.0;
    double upper = 1.0;
    bool log_scale = false;  // requires lower > 0
    bool integer = false;    // rounded after denormalization, then clamped
};

struct SearchSpace {
    std::vector<Dimension> dims;

    void validate() const;
    /// Maps a point to the unit cube and back.
    std::vector<double> normalize(const std::vector<double>& point) const;
    std::vector<double> denormalize(const std::vector<double>& unit) const;

    /// GBT tuning ranges. The published study does not disclose its search
    /// ranges; these are conventional ones.
    static SearchSpace gbt_default();
};

/// One surrogate training pair: a unit-cube point and its objective value
/// (lower is better).
struct Observation {
    std::vector<double> point;
    double value = 0.0;
};

/// Closed-form expected improvement for minimization. Zero when sigma is 0.
double expected_improvement(double mu, double sigma, double f_best);

/// Gaussian-process surrogate with a Matern 5/2 kernel. Amplitude and length
/// scale are fit by maximizing the marginal likelihood over a fixed 16x16
/// log grid; observation jitter starts at 1e-6 and escalates to 1e-3 before
/// failing.
class GpSurrogate {
public:
    void fit(const std::vector<Observation>& observations);

    struct Posterior {
        double mu = 0.0;
        double sigma = 0.0;
    };
    Posterior posterior(const std::vector<double>& point) const;

    double amplitude() const { return amplitude_; }
    double length_scale() const { return length_scale_; }

private:
    std::vector<Observation> observations_;
    std::vector<double> alpha_;       // K^-1 (y - mean)
    std::vector<double> chol_;        // lower Cholesky factor of K, row-major
    double mean_ = 0.0;
    double amplitude_ = 1.0;
    double length_scale_ = 1.0;
    std::size_t n_ = 0;
};

struct HpoResult {
    std::vector<double> best_params;  // denormalized
    double best_value = 0.0;

    struct Entry {
        int iteration = 0;                // 0-based; < n_init means initial design
        std::vector<double> params;       // denormalized
        double objective = 0.0;           // +inf records a NaN evaluation
    };
    std::vector<Entry> history;           // append-only, replayable
};

/// Minimizes eval_fn over the space: n_init scrambled-Halton points, then
/// n_iter rounds of EI maximization over 1024 random candidates. NaN
/// evaluations are recorded as +inf and the search continues.
HpoResult optimize(const std::function<double(const std::vector<double>&)>& eval_fn,
                   const SearchSpace& space, int n_init, int n_iter, std::uint64_t seed);

void write_history_csv(const std::filesystem::path& path, const SearchSpace& space, const HpoResult& result);

}  // namespace pclv::hpo
