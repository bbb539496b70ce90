#include "pclv/hpo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "pclv/csv.hpp"
#include "pclv/error.hpp"
#include "pclv/rng.hpp"

namespace pclv::hpo {

namespace {

constexpr double kBaseJitter = 1e-6;
constexpr double kMaxJitter = 1e-3;

double norm_pdf(double z) {
    return std::exp(-0.5 * z * z) / 2.5066282746310005024;
}

double norm_cdf(double z) {
    return 0.5 * std::erfc(-z / 1.4142135623730950488);
}

double matern52(double r, double amplitude, double length_scale) {
    const double s = 2.2360679774997896964 * r / length_scale;  // sqrt(5) r / l
    return amplitude * amplitude * (1.0 + s + s * s / 3.0) * std::exp(-s);
}

double distance(const std::vector<double>& a, const std::vector<double>& b) {
    double sq = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        sq += d * d;
    }
    return std::sqrt(sq);
}

/// Halton sequence with a seeded digit permutation per dimension.
class ScrambledHalton {
public:
    ScrambledHalton(std::size_t dims, std::uint64_t seed) {
        static const int primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};
        Rng rng(seed);
        for (std::size_t d = 0; d < dims; ++d) {
            const int base = primes[d % (sizeof primes / sizeof primes[0])];
            std::vector<int> perm(static_cast<std::size_t>(base));
            std::iota(perm.begin(), perm.end(), 0);
            // Keep 0 fixed so the sequence stays in [0, 1).
            for (std::size_t i = static_cast<std::size_t>(base) - 1; i > 1; --i) {
                const auto j = static_cast<std::size_t>(rng.uniform_int(1, static_cast<std::int64_t>(i)));
                std::swap(perm[i], perm[j]);
            }
            bases_.push_back(base);
            perms_.push_back(std::move(perm));
        }
    }

    std::vector<double> point(int index) const {
        std::vector<double> out(bases_.size());
        for (std::size_t d = 0; d < bases_.size(); ++d) {
            const int base = bases_[d];
            double f = 1.0;
            double value = 0.0;
            int i = index + 1;  // skip the all-zeros point
            while (i > 0) {
                f /= base;
                value += f * perms_[d][static_cast<std::size_t>(i % base)];
                i /= base;
            }
            out[d] = value;
        }
        return out;
    }

private:
    std::vector<int> bases_;
    std::vector<std::vector<int>> perms_;
};

}  // namespace

void SearchSpace::validate() const {
    if (dims.empty()) throw ConfigError("search space must have at least one dimension");
    for (const auto& d : dims) {
        if (!(d.lower < d.upper)) {
            throw ConfigError("search dimension \"" + d.name + "\" requires lower < upper");
        }
        if (d.log_scale && !(d.lower > 0.0)) {
            throw ConfigError("log-scaled dimension \"" + d.name + "\" requires lower > 0");
        }
    }
}

std::vector<double> SearchSpace::normalize(const std::vector<double>& point) const {
    std::vector<double> unit(dims.size());
    for (std::size_t i = 0; i < dims.size(); ++i) {
        const auto& d = dims[i];
        if (d.log_scale) {
            unit[i] = (std::log(point[i]) - std::log(d.lower)) / (std::log(d.upper) - std::log(d.lower));
        } else {
            unit[i] = (point[i] - d.lower) / (d.upper - d.lower);
        }
    }
    return unit;
}

std::vector<double> SearchSpace::denormalize(const std::vector<double>& unit) const {
    std::vector<double> point(dims.size());
    for (std::size_t i = 0; i < dims.size(); ++i) {
        const auto& d = dims[i];
        double v;
        if (d.log_scale) {
            v = std::exp(std::log(d.lower) + unit[i] * (std::log(d.upper) - std::log(d.lower)));
        } else {
            v = d.lower + unit[i] * (d.upper - d.lower);
        }
        if (d.integer) v = std::round(v);
        point[i] = std::clamp(v, d.lower, d.upper);
    }
    return point;
}

SearchSpace SearchSpace::gbt_default() {
    SearchSpace space;
    space.dims = {
        {"eta", 0.01, 0.3, true, false},
        {"max_depth", 2, 8, false, true},
        {"min_child_weight", 0.1, 10, true, false},
        {"lambda", 0.1, 10, true, false},
        {"gamma", 0, 5, false, false},
        {"subsample", 0.5, 1, false, false},
        {"colsample", 0.5, 1, false, false},
        {"n_rounds", 50, 500, true, true},
    };
    return space;
}

double expected_improvement(double mu, double sigma, double f_best) {
    if (std::isnan(mu) || std::isnan(sigma) || std::isnan(f_best)) {
        throw Error("expected_improvement: NaN input");
    }
    if (sigma < 0.0) throw Error("expected_improvement: sigma must be >= 0");
    if (sigma == 0.0) return 0.0;
    const double z = (f_best - mu) / sigma;
    const double ei = (f_best - mu) * norm_cdf(z) + sigma * norm_pdf(z);
    return std::max(ei, 0.0);
}

void GpSurrogate::fit(const std::vector<Observation>& observations) {
    if (observations.empty()) throw Error("GP fit requires at least one observation");
    for (const auto& obs : observations) {
        if (!std::isfinite(obs.value)) throw Error("GP fit requires finite observation values");
    }
    observations_ = observations;
    n_ = observations.size();

    mean_ = 0.0;
    for (const auto& obs : observations_) mean_ += obs.value;
    mean_ /= static_cast<double>(n_);

    double sd = 0.0;
    for (const auto& obs : observations_) sd += (obs.value - mean_) * (obs.value - mean_);
    sd = std::sqrt(sd / static_cast<double>(n_));
    if (sd <= 0.0) sd = 1e-3;

    Eigen::VectorXd y(n_);
    for (std::size_t i = 0; i < n_; ++i) y(static_cast<Eigen::Index>(i)) = observations_[i].value - mean_;

    Eigen::MatrixXd dist(n_, n_);
    for (std::size_t i = 0; i < n_; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            const double r = distance(observations_[i].point, observations_[j].point);
            dist(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = r;
            dist(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = r;
        }
    }

    // 16x16 log-grid marginal-likelihood fit for (amplitude, length scale).
    const int grid = 16;
    double best_ll = -std::numeric_limits<double>::infinity();
    double best_s = sd, best_l = 0.5;
    Eigen::MatrixXd k(n_, n_);
    for (int si = 0; si < grid; ++si) {
        const double s = sd * std::exp(std::log(1e-2) + (std::log(10.0) - std::log(1e-2)) * si / (grid - 1));
        for (int li = 0; li < grid; ++li) {
            const double l = std::exp(std::log(1e-2) + (std::log(10.0) - std::log(1e-2)) * li / (grid - 1));
            for (std::size_t i = 0; i < n_; ++i) {
                for (std::size_t j = 0; j < n_; ++j) {
                    k(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                        matern52(dist(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)), s, l);
                }
                k(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) += kBaseJitter;
            }
            const Eigen::LLT<Eigen::MatrixXd> llt(k);
            if (llt.info() != Eigen::Success) continue;
            const Eigen::VectorXd a = llt.solve(y);
            double log_det = 0.0;
            for (std::size_t i = 0; i < n_; ++i) {
                log_det += std::log(llt.matrixL()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)));
            }
            const double ll = -0.5 * y.dot(a) - log_det;
            if (ll > best_ll) {
                best_ll = ll;
                best_s = s;
                best_l = l;
            }
        }
    }
    amplitude_ = best_s;
    length_scale_ = best_l;

    // Final factorization with jitter escalation.
    double jitter = kBaseJitter;
    while (true) {
        for (std::size_t i = 0; i < n_; ++i) {
            for (std::size_t j = 0; j < n_; ++j) {
                k(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = matern52(
                    dist(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)), amplitude_, length_scale_);
            }
            k(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) += jitter;
        }
        if (!k.allFinite()) throw Error("GP kernel matrix is not finite");
        const Eigen::LLT<Eigen::MatrixXd> llt(k);
        if (llt.info() == Eigen::Success) {
            const Eigen::VectorXd a = llt.solve(y);
            alpha_.assign(a.data(), a.data() + a.size());
            const Eigen::MatrixXd lower = llt.matrixL();
            chol_.assign(n_ * n_, 0.0);
            for (std::size_t i = 0; i < n_; ++i) {
                for (std::size_t j = 0; j <= i; ++j) {
                    chol_[i * n_ + j] = lower(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
                }
            }
            return;
        }
        jitter *= 10.0;
        if (jitter > kMaxJitter) {
            throw Error("GP kernel matrix is not positive definite even at jitter 1e-3");
        }
    }
}

GpSurrogate::Posterior GpSurrogate::posterior(const std::vector<double>& point) const {
    if (n_ == 0) throw Error("GP posterior requires a fitted surrogate");

    std::vector<double> kstar(n_);
    for (std::size_t i = 0; i < n_; ++i) {
        kstar[i] = matern52(distance(point, observations_[i].point), amplitude_, length_scale_);
    }

    double mu = mean_;
    for (std::size_t i = 0; i < n_; ++i) mu += kstar[i] * alpha_[i];

    // v = L^-1 k*; sigma^2 = k(x,x) - v'v.
    std::vector<double> v(n_);
    for (std::size_t i = 0; i < n_; ++i) {
        double s = kstar[i];
        for (std::size_t j = 0; j < i; ++j) s -= chol_[i * n_ + j] * v[j];
        v[i] = s / chol_[i * n_ + i];
    }
    double var = amplitude_ * amplitude_;
    for (std::size_t i = 0; i < n_; ++i) var -= v[i] * v[i];
    return {mu, std::sqrt(std::max(var, 0.0))};
}

HpoResult optimize(const std::function<double(const std::vector<double>&)>& eval_fn,
                   const SearchSpace& space, int n_init, int n_iter, std::uint64_t seed) {
    space.validate();
    if (n_init < 2) throw ConfigError("optimize requires n_init >= 2");
    if (n_iter < 0) throw ConfigError("optimize requires n_iter >= 0");

    const std::size_t dims = space.dims.size();
    HpoResult result;
    result.best_value = std::numeric_limits<double>::infinity();
    std::vector<Observation> observations;

    const auto record = [&](int iteration, const std::vector<double>& unit) {
        const auto params = space.denormalize(unit);
        // Integer/clamped dimensions shift the point; condition the surrogate
        // on what was actually evaluated.
        const auto evaluated_unit = space.normalize(params);
        double value = eval_fn(params);
        if (std::isnan(value)) value = std::numeric_limits<double>::infinity();
        result.history.push_back({iteration, params, value});
        if (std::isfinite(value)) {
            observations.push_back({evaluated_unit, value});
            if (value < result.best_value) {
                result.best_value = value;
                result.best_params = params;
            }
        }
    };

    const ScrambledHalton halton(dims, seed);
    for (int i = 0; i < n_init; ++i) {
        record(i, halton.point(i));
    }

    Rng rng(seed + 0x9e3779b97f4a7c15ull);
    for (int it = 0; it < n_iter; ++it) {
        std::vector<double> proposal(dims);
        if (observations.empty()) {
            // Every evaluation so far failed; keep probing at random.
            for (auto& u : proposal) u = rng.uniform();
        } else {
            GpSurrogate gp;
            gp.fit(observations);
            double f_best = std::numeric_limits<double>::infinity();
            for (const auto& obs : observations) f_best = std::min(f_best, obs.value);

            double best_ei = -1.0;
            std::vector<double> candidate(dims);
            for (int c = 0; c < 1024; ++c) {
                for (auto& u : candidate) u = rng.uniform();
                const auto post = gp.posterior(candidate);
                const double ei = expected_improvement(post.mu, post.sigma, f_best);
                if (ei > best_ei) {
                    best_ei = ei;
                    proposal = candidate;
                }
            }
        }
        record(n_init + it, proposal);
    }

    if (!std::isfinite(result.best_value)) {
        throw Error("optimization never obtained a finite objective value");
    }
    return result;
}

void write_history_csv(const std::filesystem::path& path, const SearchSpace& space, const HpoResult& result) {
    CsvWriter w(path);
    std::vector<std::string> header = {"iteration"};
    for (const auto& d : space.dims) header.push_back(d.name);
    header.push_back("objective");
    w.write_row(header);

    std::vector<std::string> row;
    char buf[32];
    for (const auto& entry : result.history) {
        row.clear();
        row.push_back(std::to_string(entry.iteration));
        for (const double v : entry.params) {
            std::snprintf(buf, sizeof buf, "%.17g", v);
            row.emplace_back(buf);
        }
        std::snprintf(buf, sizeof buf, "%.17g", entry.objective);
        row.emplace_back(buf);
        w.write_row(row);
    }
    w.close();
}

}  // namespace pclv::hpo
