#include "pclv/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "pclv/csv.hpp"
#include "pclv/error.hpp"
#include "pclv/rng.hpp"

namespace pclv {

namespace {

// Churners go fully inactive for this many trailing months; consistent with
// any churn-label horizon up to the same length.
constexpr int kPlantedChurnMonths = 6;

// Logistic churn model on the realized activity trend. Steep by design: the
// trend statistics are reconstructible from the RFM feature windows, so the
// planted signal stays learnable at the configured class imbalance.
constexpr double kChurnSlope = 3.0;
constexpr double kRecencyWeight = 1.5;
constexpr double kFreqDropWeight = 5.0;

double logistic(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

struct CustomerDraft {
    double margin = 0.0;                       // final-month margin, currency units
    std::array<double, kPscCount> weights{};   // product mix, sums to 1 over active PSCs
    std::array<double, kPscCount> focal{};     // solved final-month focal exposure
    std::array<double, kPscCount> system{};    // final-month system exposure
    int first_month = 0;
    double base_activity = 0.0;
    bool fading = false;
    double decline = 0.0;
    int fade_start = 0;
    std::vector<std::uint8_t> active;          // months [0, horizon)
    double trend_score = 0.0;
};

double activity_probability(const CustomerDraft& d, int month, int last_free_month) {
    if (month < d.first_month) return 0.0;
    double p = d.base_activity;
    if (d.fading && month >= d.fade_start) {
        const double span = static_cast<double>(last_free_month - d.fade_start + 1);
        const double ramp = std::min(1.0, static_cast<double>(month - d.fade_start + 1) / span);
        p *= std::max(0.0, 1.0 - d.decline * ramp);
    }
    return p;
}

/// Monotone solve of A*x + beta*ln(1 + B*x) = target for x >= 0.
double solve_exposure_scale(double target, double a, double b, double beta) {
    if (target <= 0.0) return 0.0;
    double lo = 0.0;
    double hi = target / a;  // signal(hi) >= target since the log term is >= 0
    for (int it = 0; it < 80; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double value = a * mid + beta * std::log1p(b * mid);
        (value < target ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

/// Splits `total_cents` across the active PSCs proportional to `weights`;
/// the last active PSC absorbs the rounding remainder so the parts sum
/// exactly.
std::array<MoneyCents, kPscCount> split_cents(MoneyCents total_cents,
                                              const std::array<double, kPscCount>& weights) {
    std::array<MoneyCents, kPscCount> parts{};
    int last_active = -1;
    for (int c = 0; c < kPscCount; ++c) {
        if (weights[static_cast<std::size_t>(c)] > 0.0) last_active = c;
    }
    MoneyCents assigned = 0;
    for (int c = 0; c < kPscCount; ++c) {
        if (weights[static_cast<std::size_t>(c)] <= 0.0) continue;
        if (c == last_active) {
            parts[static_cast<std::size_t>(c)] = total_cents - assigned;
        } else {
            parts[static_cast<std::size_t>(c)] = static_cast<MoneyCents>(
                std::llround(static_cast<double>(total_cents) * weights[static_cast<std::size_t>(c)]));
            assigned += parts[static_cast<std::size_t>(c)];
        }
    }
    return parts;
}

// Every customer carries a credit card at a fixed share of total exposure,
// with 1-2 further products splitting the rest. The anchor slot keeps total
// wallet size readable from one feature regardless of the product mix, so
// the planted margin function stays recoverable even in the sparse tail.
constexpr double kAnchorWeight = 0.3;

void draw_product_mix(Rng& rng, std::array<double, kPscCount>& weights) {
    weights.fill(0.0);
    weights[static_cast<std::size_t>(PscCode::CreditCard)] = kAnchorWeight;

    const auto n_extra = static_cast<int>(rng.uniform_int(1, 2));
    std::array<int, kPscCount - 1> others{};
    std::iota(others.begin(), others.end(), 1);
    for (int i = 0; i < n_extra; ++i) {
        const auto j = static_cast<std::size_t>(rng.uniform_int(i, kPscCount - 2));
        std::swap(others[static_cast<std::size_t>(i)], others[j]);
    }
    double total = 0.0;
    std::array<double, 2> raw{};
    for (int i = 0; i < n_extra; ++i) {
        raw[static_cast<std::size_t>(i)] = rng.uniform(0.2, 1.0);
        total += raw[static_cast<std::size_t>(i)];
    }
    for (int i = 0; i < n_extra; ++i) {
        weights[static_cast<std::size_t>(others[static_cast<std::size_t>(i)])] =
            (1.0 - kAnchorWeight) * raw[static_cast<std::size_t>(i)] / total;
    }
}

}  // namespace

void MarketConfig::validate() const {
    if (n_customers < 1) throw ConfigError("n_customers must be >= 1");
    if (horizon_months < 13) throw ConfigError("horizon_months must be >= 13");
    if (!(churn_rate >= 0.0 && churn_rate <= 1.0)) throw ConfigError("churn_rate must be in [0, 1]");
    if (!(ob_adoption >= 0.0 && ob_adoption <= 1.0)) throw ConfigError("ob_adoption must be in [0, 1]");
    if (n_competitors < 1) throw ConfigError("n_competitors must be >= 1");
    if (!std::isfinite(margin_log_mu)) throw ConfigError("margin_log_mu must be finite");
    if (!(margin_log_sigma > 0.0)) throw ConfigError("margin_log_sigma must be > 0");
    if (!(noise_sd >= 0.0)) throw ConfigError("noise_sd must be >= 0");
}

MarketConfig MarketConfig::from_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open market config " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("market config " + path.string() + " is not valid JSON: " + e.what());
    }
    MarketConfig config;
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "n_customers") config.n_customers = value.get<std::int64_t>();
            else if (key == "horizon_months") config.horizon_months = value.get<int>();
            else if (key == "churn_rate") config.churn_rate = value.get<double>();
            else if (key == "ob_adoption") config.ob_adoption = value.get<double>();
            else if (key == "n_competitors") config.n_competitors = value.get<int>();
            else if (key == "margin_log_mu") config.margin_log_mu = value.get<double>();
            else if (key == "margin_log_sigma") config.margin_log_sigma = value.get<double>();
            else if (key == "noise_sd") config.noise_sd = value.get<double>();
            else if (key == "seed") config.seed = value.get<std::uint64_t>();
            else throw ConfigError("market config: unknown key \"" + key + "\"");
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("market config " + path.string() + ": " + e.what());
    }
    config.validate();
    return config;
}

double TrueMarginFn::signal(const std::array<double, kPscCount>& focal,
                            const std::array<double, kPscCount>& system) const {
    double linear = 0.0;
    double system_total = 0.0;
    for (int c = 0; c < kPscCount; ++c) {
        linear += alpha[static_cast<std::size_t>(c)] * focal[static_cast<std::size_t>(c)];
        system_total += system[static_cast<std::size_t>(c)];
    }
    return linear + beta * std::log1p(system_total);
}

std::pair<double, double> lognormal_from_median_mean(double median, double mean) {
    if (!(median > 0.0) || !(mean > median)) {
        throw Error("lognormal solve requires 0 < median < mean");
    }
    const double mu = std::log(median);
    const double sigma = std::sqrt(2.0 * (std::log(mean) - mu));
    return {mu, sigma};
}

GeneratedMarket generate_market(const MarketConfig& config) {
    config.validate();
    const auto n = static_cast<std::size_t>(config.n_customers);
    const int horizon = config.horizon_months;
    const int last_month = horizon - 1;
    const int plant_start = horizon - kPlantedChurnMonths;  // first always-silent churner month
    const int last_free_month = plant_start - 1;            // last month before the planted window

    GeneratedMarket market;
    market.config = config;

    Rng rng(config.seed);

    // One shared slot coefficient: the margin rate per unit of credit does
    // not depend on the product category, so mixes with different active
    // slots still map exposure to margin the same way.
    TrueMarginFn& fn = market.true_margin_fn;
    const double alpha = rng.uniform(0.008, 0.016);
    fn.alpha.fill(alpha);
    fn.beta = 5.0;
    fn.noise_sd = config.noise_sd;

    // Slightly fewer faders than the churn target: the calibrated logistic
    // then saturates on faders and picks up the remainder from the worst
    // healthy trajectories, keeping churn close to deterministic given the
    // realized trend.
    const double fade_share = 0.92 * config.churn_rate;

    std::vector<CustomerDraft> drafts(n);
    for (std::size_t i = 0; i < n; ++i) {
        CustomerDraft& d = drafts[i];
        d.margin = rng.lognormal(config.margin_log_mu, config.margin_log_sigma);
        draw_product_mix(rng, d.weights);

        std::array<double, kPscCount> multipliers{};
        for (int c = 0; c < kPscCount; ++c) {
            if (d.weights[static_cast<std::size_t>(c)] > 0.0) {
                multipliers[static_cast<std::size_t>(c)] = rng.uniform(1.0, 3.0);
            }
        }

        // Noise bounded above by the margin so the backward solve stays in
        // the non-negative exposure range.
        double eps = rng.normal(0.0, config.noise_sd);
        for (int attempt = 0; attempt < 32 && d.margin - eps < 0.0; ++attempt) {
            eps = rng.normal(0.0, config.noise_sd);
        }
        if (d.margin - eps < 0.0) eps = d.margin;

        double a_coef = 0.0, b_coef = 0.0;
        for (int c = 0; c < kPscCount; ++c) {
            const auto cc = static_cast<std::size_t>(c);
            a_coef += fn.alpha[cc] * d.weights[cc];
            b_coef += d.weights[cc] * multipliers[cc];
        }
        const double scale = solve_exposure_scale(d.margin - eps, a_coef, b_coef, fn.beta);
        for (int c = 0; c < kPscCount; ++c) {
            const auto cc = static_cast<std::size_t>(c);
            d.focal[cc] = scale * d.weights[cc];
            d.system[cc] = d.focal[cc] * multipliers[cc];
        }

        d.first_month = static_cast<int>(rng.uniform_int(0, 3));
        d.base_activity = rng.uniform(0.70, 0.97);
        d.fading = rng.bernoulli(fade_share);
        if (d.fading) {
            d.decline = rng.uniform(0.75, 1.0);
            const int lo = std::max(d.first_month + 1, horizon - 16);
            const int hi = std::max(lo, horizon - 9);
            d.fade_start = static_cast<int>(rng.uniform_int(lo, hi));
        }

        d.active.assign(static_cast<std::size_t>(horizon), 0);
        for (int t = 0; t <= last_free_month; ++t) {
            d.active[static_cast<std::size_t>(t)] =
                rng.bernoulli(activity_probability(d, t, last_free_month)) ? 1 : 0;
        }
        d.active[static_cast<std::size_t>(d.first_month)] = 1;

        // Trend statistics mirror what the RFM windows can see at the month
        // just before the planted window.
        const int obs = last_free_month;
        int last_active = -1;
        for (int t = obs; t >= 0; --t) {
            if (d.active[static_cast<std::size_t>(t)]) {
                last_active = t;
                break;
            }
        }
        const double recency = last_active < 0 ? static_cast<double>(obs + 1)
                                               : static_cast<double>(obs - last_active);
        const auto window_rate = [&](int lo, int hi) {
            lo = std::max(lo, 0);
            if (hi < lo) return 0.0;
            int active_count = 0;
            for (int t = lo; t <= hi; ++t) active_count += d.active[static_cast<std::size_t>(t)];
            return static_cast<double>(active_count) / static_cast<double>(hi - lo + 1);
        };
        const double recent_rate = window_rate(obs - 2, obs);
        const double old_rate = window_rate(obs - 11, obs - 3);
        d.trend_score = kRecencyWeight * std::min(recency, 8.0) +
                        kFreqDropWeight * std::max(old_rate - recent_rate, 0.0);
    }

    // Calibrate the logistic intercept so the expected churn fraction equals
    // the configured rate.
    double intercept = 0.0;
    {
        double lo = -60.0, hi = 60.0;
        for (int it = 0; it < 200; ++it) {
            intercept = 0.5 * (lo + hi);
            double mean = 0.0;
            for (const auto& d : drafts) {
                mean += logistic(intercept + kChurnSlope * d.trend_score);
            }
            mean /= static_cast<double>(n);
            (mean < config.churn_rate ? lo : hi) = intercept;
        }
    }

    market.true_churn.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const double q = logistic(intercept + kChurnSlope * drafts[i].trend_score);
        market.true_churn[i] = rng.bernoulli(q) ? 1 : 0;
    }

    // Complete the trajectories: churners stay silent across the planted
    // window; everyone else keeps drawing activity and is active at the
    // final month, which carries the drawn margin and solved exposures.
    for (std::size_t i = 0; i < n; ++i) {
        CustomerDraft& d = drafts[i];
        if (market.true_churn[i]) {
            for (int t = plant_start; t < horizon; ++t) d.active[static_cast<std::size_t>(t)] = 0;
            continue;
        }
        for (int t = plant_start; t < last_month; ++t) {
            d.active[static_cast<std::size_t>(t)] =
                rng.bernoulli(activity_probability(d, t, last_free_month)) ? 1 : 0;
        }
        d.active[static_cast<std::size_t>(last_month)] = 1;
    }

    for (std::size_t i = 0; i < n; ++i) {
        CustomerDraft& d = drafts[i];
        const auto customer = static_cast<CustomerId>(i);
        for (int t = 0; t < horizon; ++t) {
            if (!d.active[static_cast<std::size_t>(t)]) continue;

            double level;
            if (t == last_month) {
                level = 1.0;
            } else {
                double decline_floor = 1.0;
                if (d.fading && t >= d.fade_start) {
                    decline_floor = std::max(0.25, 1.0 - d.decline * 0.5);
                }
                level = rng.uniform(0.7, 1.3) * decline_floor;
            }

            const MoneyCents margin_cents =
                std::max<MoneyCents>(1, units_to_cents(d.margin * level));
            const auto margin_parts = split_cents(margin_cents, d.weights);
            for (int c = 0; c < kPscCount; ++c) {
                const auto cc = static_cast<std::size_t>(c);
                if (d.weights[cc] <= 0.0) continue;
                TransactionRecord rec;
                rec.customer = customer;
                rec.month = t;
                rec.psc = static_cast<PscCode>(c);
                rec.credit_amount_cents = units_to_cents(d.focal[cc] * level);
                rec.contribution_margin_cents = margin_parts[cc];
                market.transactions.push_back(rec);
            }
        }

        if (d.active[static_cast<std::size_t>(last_month)]) {
            for (int c = 0; c < kPscCount; ++c) {
                const auto cc = static_cast<std::size_t>(c);
                if (d.weights[cc] <= 0.0) continue;
                SystemExposure rec;
                rec.customer = customer;
                rec.psc = static_cast<PscCode>(c);
                rec.credit_amount_cents = units_to_cents(d.system[cc]);
                market.system_exposure.push_back(rec);
            }
        }
    }

    // Open Banking adopters: a uniform sample of customers; competitor
    // exposures reuse the focal exposure family (no adoption covariates and
    // no competitor-specific distribution are available to calibrate
    // against).
    const auto adopter_count = static_cast<std::size_t>(
        std::llround(config.ob_adoption * static_cast<double>(n)));
    std::vector<CustomerId> ids(n);
    std::iota(ids.begin(), ids.end(), CustomerId{0});
    rng.shuffle(ids);
    std::vector<CustomerId> adopters(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(adopter_count));
    std::sort(adopters.begin(), adopters.end());

    for (const auto customer : adopters) {
        const auto n_comp = static_cast<int>(rng.uniform_int(1, config.n_competitors));
        std::vector<CompetitorId> comp_ids(static_cast<std::size_t>(config.n_competitors));
        std::iota(comp_ids.begin(), comp_ids.end(), CompetitorId{0});
        for (int c = 0; c < n_comp; ++c) {
            const auto j = static_cast<std::size_t>(
                rng.uniform_int(c, static_cast<std::int64_t>(config.n_competitors) - 1));
            std::swap(comp_ids[static_cast<std::size_t>(c)], comp_ids[j]);
        }
        comp_ids.resize(static_cast<std::size_t>(n_comp));
        std::sort(comp_ids.begin(), comp_ids.end());

        for (const auto competitor : comp_ids) {
            const double phantom_margin = rng.lognormal(config.margin_log_mu, config.margin_log_sigma);
            std::array<double, kPscCount> weights{};
            draw_product_mix(rng, weights);
            double a_coef = 0.0, b_coef = 0.0;
            std::array<double, kPscCount> multipliers{};
            for (int c = 0; c < kPscCount; ++c) {
                const auto cc = static_cast<std::size_t>(c);
                if (weights[cc] <= 0.0) continue;
                multipliers[cc] = rng.uniform(1.0, 3.0);
                a_coef += fn.alpha[cc] * weights[cc];
                b_coef += weights[cc] * multipliers[cc];
            }
            const double scale = solve_exposure_scale(phantom_margin, a_coef, b_coef, fn.beta);
            for (int c = 0; c < kPscCount; ++c) {
                const auto cc = static_cast<std::size_t>(c);
                if (weights[cc] <= 0.0) continue;
                ObSnapshot rec;
                rec.customer = customer;
                rec.competitor = competitor;
                rec.psc = static_cast<PscCode>(c);
                rec.credit_amount_cents = units_to_cents(scale * weights[cc]);
                market.ob_snapshots.push_back(rec);
            }
        }
    }

    return market;
}

FileManifest write_market(const GeneratedMarket& market, const std::filesystem::path& directory) {
    std::error_code ec;
    std::filesystem::create_directories(directory, ec);
    if (ec) throw Error("cannot create directory " + directory.string() + ": " + ec.message());

    FileManifest manifest;
    const auto add = [&](const std::string& name, const std::filesystem::path& path, std::size_t rows) {
        manifest.entries.push_back({name, path, rows, file_checksum(path)});
    };

    const auto tx_path = directory / dataset_filename(DatasetKind::Transactions);
    save_transactions(market.transactions, tx_path);
    add("transactions", tx_path, market.transactions.size());

    const auto sys_path = directory / dataset_filename(DatasetKind::SystemExposure);
    save_system_exposure(market.system_exposure, sys_path);
    add("system_exposure", sys_path, market.system_exposure.size());

    const auto ob_path = directory / dataset_filename(DatasetKind::ObSnapshot);
    save_ob_snapshots(market.ob_snapshots, ob_path);
    add("ob_snapshot", ob_path, market.ob_snapshots.size());

    const auto labels_path = directory / "labels.csv";
    {
        CsvWriter w(labels_path);
        w.write_row({"customer_id", "churned"});
        for (std::size_t i = 0; i < market.true_churn.size(); ++i) {
            w.write_row({std::to_string(i), market.true_churn[i] ? "1" : "0"});
        }
        w.close();
    }
    add("labels", labels_path, market.true_churn.size());

    const auto truth_path = directory / "truth.json";
    {
        nlohmann::json j;
        nlohmann::json alpha;
        for (int c = 0; c < kPscCount; ++c) {
            alpha[psc_name(static_cast<PscCode>(c))] = market.true_margin_fn.alpha[static_cast<std::size_t>(c)];
        }
        j["margin_fn"] = {{"alpha", std::move(alpha)},
                          {"beta", market.true_margin_fn.beta},
                          {"noise_sd", market.true_margin_fn.noise_sd}};
        j["config"] = {{"n_customers", market.config.n_customers},
                       {"horizon_months", market.config.horizon_months},
                       {"churn_rate", market.config.churn_rate},
                       {"ob_adoption", market.config.ob_adoption},
                       {"n_competitors", market.config.n_competitors},
                       {"margin_log_mu", market.config.margin_log_mu},
                       {"margin_log_sigma", market.config.margin_log_sigma},
                       {"noise_sd", market.config.noise_sd},
                       {"seed", market.config.seed}};
        std::ofstream out(truth_path, std::ios::binary);
        if (!out) throw Error("cannot write " + truth_path.string());
        out << j.dump(2) << '\n';
        if (!out) throw Error("write failure on " + truth_path.string());
    }
    add("truth", truth_path, 0);

    return manifest;
}

std::vector<std::pair<CustomerId, bool>> load_labels(const std::filesystem::path& path) {
    CsvReader reader(path);
    reader.require_header({"customer_id", "churned"});
    std::vector<std::pair<CustomerId, bool>> out;
    std::vector<std::string> fields;
    while (reader.next(fields)) {
        if (fields.size() != 2) {
            throw Error(path.string() + ":" + std::to_string(reader.line_number()) + ": expected 2 fields");
        }
        const auto id = parse_int64(fields[0], path.string());
        const auto churned = parse_int64(fields[1], path.string());
        out.emplace_back(id, churned != 0);
    }
    return out;
}

}  // namespace pclv
