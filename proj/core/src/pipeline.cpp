#include "pclv/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <json.hpp>

#include "pclv/error.hpp"
#include "pclv/hpo.hpp"

namespace pclv {

namespace {

void require_files(const std::vector<std::filesystem::path>& paths, const std::string& hint) {
    std::vector<std::string> missing;
    for (const auto& p : paths) {
        if (!std::filesystem::exists(p)) missing.push_back(p.string());
    }
    if (missing.empty()) return;
    std::string msg = "missing input files:";
    for (const auto& m : missing) msg += " " + m;
    msg += " (" + hint + ")";
    throw Error(msg);
}

template <typename Fn>
void parse_block(const nlohmann::json& j, const std::string& block, Fn&& field) {
    for (const auto& [key, value] : j.items()) {
        if (!field(key, value)) {
            throw ConfigError("config block \"" + block + "\": unknown key \"" + key + "\"");
        }
    }
}

gbt::GbtParams parse_gbt_params(const nlohmann::json& j, const std::string& block, gbt::GbtParams base) {
    parse_block(j, block, [&](const std::string& key, const nlohmann::json& value) {
        if (key == "eta") base.eta = value.get<double>();
        else if (key == "max_depth") base.max_depth = value.get<int>();
        else if (key == "min_child_weight") base.min_child_weight = value.get<double>();
        else if (key == "lambda") base.lambda = value.get<double>();
        else if (key == "gamma") base.gamma = value.get<double>();
        else if (key == "subsample") base.subsample = value.get<double>();
        else if (key == "colsample") base.colsample = value.get<double>();
        else if (key == "n_rounds") base.n_rounds = value.get<int>();
        else if (key == "base_score") base.base_score = value.get<double>();
        else return false;
        return true;
    });
    return base;
}

}  // namespace

void PipelineConfig::validate() const {
    market.validate();
    features.validate();
    resample.validate();
    churn_params.validate();
    pcm_params.validate();
    discount.validate();
    if (folds < 2) throw ConfigError("folds must be >= 2");
    if (threads < 0) throw ConfigError("threads must be >= 0");
    if (hpo.n_init < 2) throw ConfigError("hpo.n_init must be >= 2");
    if (hpo.n_iter < 0) throw ConfigError("hpo.n_iter must be >= 0");
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
    }

    PipelineConfig config;
    try {
        parse_block(j, "root", [&](const std::string& key, const nlohmann::json& value) {
            if (key == "paths") {
                parse_block(value, "paths", [&](const std::string& k, const nlohmann::json& v) {
                    if (k == "data_dir") config.data_dir = v.get<std::string>();
                    else if (k == "model_dir") config.model_dir = v.get<std::string>();
                    else if (k == "report_dir") config.report_dir = v.get<std::string>();
                    else return false;
                    return true;
                });
            } else if (key == "market") {
                parse_block(value, "market", [&](const std::string& k, const nlohmann::json& v) {
                    if (k == "n_customers") config.market.n_customers = v.get<std::int64_t>();
                    else if (k == "horizon_months") config.market.horizon_months = v.get<int>();
                    else if (k == "churn_rate") config.market.churn_rate = v.get<double>();
                    else if (k == "ob_adoption") config.market.ob_adoption = v.get<double>();
                    else if (k == "n_competitors") config.market.n_competitors = v.get<int>();
                    else if (k == "margin_log_mu") config.market.margin_log_mu = v.get<double>();
                    else if (k == "margin_log_sigma") config.market.margin_log_sigma = v.get<double>();
                    else if (k == "noise_sd") config.market.noise_sd = v.get<double>();
                    else if (k == "seed") {
                        config.market.seed = v.get<std::uint64_t>();
                        config.market_seed_explicit = true;
                    } else {
                        return false;
                    }
                    return true;
                });
            } else if (key == "features") {
                parse_block(value, "features", [&](const std::string& k, const nlohmann::json& v) {
                    if (k == "windows") config.features.windows = v.get<std::vector<int>>();
                    else if (k == "churn_horizon") config.features.churn_horizon = v.get<int>();
                    else return false;
                    return true;
                });
            } else if (key == "resample") {
                parse_block(value, "resample", [&](const std::string& k, const nlohmann::json& v) {
                    if (k == "adasyn_beta") config.resample.adasyn_beta = v.get<double>();
                    else if (k == "adasyn_k") config.resample.adasyn_k = v.get<int>();
                    else if (k == "nearmiss_k") config.resample.nearmiss_k = v.get<int>();
                    else if (k == "nearmiss_target_ratio") config.resample.nearmiss_target_ratio = v.get<double>();
                    else return false;
                    return true;
                });
            } else if (key == "churn_params") {
                config.churn_params = parse_gbt_params(value, "churn_params", config.churn_params);
            } else if (key == "pcm_params") {
                config.pcm_params = parse_gbt_params(value, "pcm_params", config.pcm_params);
            } else if (key == "hpo") {
                parse_block(value, "hpo", [&](const std::string& k, const nlohmann::json& v) {
                    if (k == "enabled") config.hpo.enabled = v.get<bool>();
                    else if (k == "n_init") config.hpo.n_init = v.get<int>();
                    else if (k == "n_iter") config.hpo.n_iter = v.get<int>();
                    else return false;
                    return true;
                });
            } else if (key == "discount_rate") {
                config.discount.d = value.get<double>();
            } else if (key == "folds") {
                config.folds = value.get<int>();
            } else if (key == "seed") {
                config.seed = value.get<std::uint64_t>();
            } else if (key == "threads") {
                config.threads = value.get<int>();
            } else {
                return false;
            }
            return true;
        });
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config file " + path.string() + ": " + e.what());
    }
    config.validate();
    return config;
}

std::uint64_t PipelineConfig::market_seed() const {
    return market_seed_explicit ? market.seed : seed + kSeedOffsetMarket;
}

void set_worker_threads(int threads) {
#ifdef _OPENMP
    if (threads > 0) omp_set_num_threads(threads);
#else
    (void)threads;
#endif
}

bool logging_enabled() {
    const char* env = std::getenv("PCLV_LOG");
    return env == nullptr || std::string(env) != "quiet";
}

void log_line(const std::string& message) {
    if (logging_enabled()) std::cerr << "[pclv] " << message << "\n";
}

GenResult run_gen(const PipelineConfig& config) {
    set_worker_threads(config.threads);
    MarketConfig market = config.market;
    market.seed = config.market_seed();
    log_line("generating market: " + std::to_string(market.n_customers) + " customers, " +
             std::to_string(market.horizon_months) + " months");
    const auto generated = generate_market(market);
    const auto manifest = write_market(generated, config.data_dir);
    return {manifest};
}

namespace {

struct PcmDataset {
    CvDataset cv;
    std::vector<std::array<double, kPscCount>> system;  // aligned with cv.customers
};

PcmDataset build_pcm_dataset(const PipelineConfig& config) {
    const auto tx_path = config.data_dir / dataset_filename(DatasetKind::Transactions);
    const auto sys_path = config.data_dir / dataset_filename(DatasetKind::SystemExposure);
    require_files({tx_path, sys_path}, "run `pclv gen` or point data_dir at an existing market");

    const auto transactions = load_transactions(tx_path);
    const auto system = load_system_exposure(sys_path);
    const int horizon = dataset_horizon(transactions.records);
    if (horizon < 1) throw Error("transactions dataset is empty");
    const auto snap = snapshot_at(transactions.records, horizon - 1);

    PcmDataset out;
    out.cv.customers = snap.customers;
    out.cv.classification = false;
    out.cv.features = Matrix(snap.size(), kPcmFeatureArity);
    out.cv.targets.resize(snap.size());
    out.system.assign(snap.size(), {});

    for (const auto& rec : system.records) {
        const auto idx = snap.index_of(rec.customer);
        if (idx < 0) continue;  // system row for an unknown customer: ignore
        out.system[static_cast<std::size_t>(idx)][static_cast<std::size_t>(rec.psc)] +=
            cents_to_units(rec.credit_amount_cents);
    }
    for (std::size_t i = 0; i < snap.size(); ++i) {
        auto row = out.cv.features.row(i);
        for (int c = 0; c < kPscCount; ++c) {
            row[static_cast<std::size_t>(c)] = cents_to_units(snap.exposure[i][static_cast<std::size_t>(c)]);
            row[static_cast<std::size_t>(kPscCount + c)] = out.system[i][static_cast<std::size_t>(c)];
        }
        out.cv.targets[i] = cents_to_units(snap.margin[i]);
    }
    return out;
}

CvDataset build_churn_cv_dataset(const PipelineConfig& config) {
    const auto tx_path = config.data_dir / dataset_filename(DatasetKind::Transactions);
    require_files({tx_path}, "run `pclv gen` or point data_dir at an existing market");

    const auto transactions = load_transactions(tx_path);
    const int horizon = dataset_horizon(transactions.records);
    const int obs = horizon - 1 - config.features.churn_horizon;
    if (obs < config.features.max_window() - 1) {
        throw Error("dataset horizon " + std::to_string(horizon) +
                    " is too short for churn training: needs max feature window + churn_horizon + 1 months");
    }
    const auto churn = build_churn_dataset(transactions.records, obs, config.features, true);

    CvDataset out;
    out.customers = churn.customers;
    out.features = churn.features;
    out.classification = true;
    out.targets.resize(churn.labels.size());
    for (std::size_t i = 0; i < churn.labels.size(); ++i) out.targets[i] = churn.labels[i];
    return out;
}

CvRecipe churn_recipe(const PipelineConfig& config, const gbt::GbtParams& params) {
    CvRecipe recipe;
    recipe.fit = [config, params](const Matrix& x, const std::vector<double>& y, int fold) {
        ResampleConfig rc = config.resample;
        rc.seed = config.resample_seed() + static_cast<std::uint64_t>(fold);
        std::vector<int> labels(y.size());
        for (std::size_t i = 0; i < y.size(); ++i) labels[i] = y[i] != 0.0 ? 1 : 0;
        const auto balanced = balance(x, labels, rc);

        std::vector<double> targets(balanced.labels.size());
        for (std::size_t i = 0; i < balanced.labels.size(); ++i) targets[i] = balanced.labels[i];
        gbt::GbtParams p = params;
        p.seed = config.churn_gbt_seed();
        auto model = std::make_shared<gbt::GbtModel>(
            gbt::train(balanced.features, targets, p, gbt::Objective::Logistic));
        return [model](const Matrix& val) { return model->predict_proba(val); };
    };
    return recipe;
}

CvRecipe pcm_recipe(const PipelineConfig& config, const gbt::GbtParams& params) {
    CvRecipe recipe;
    recipe.fit = [config, params](const Matrix& x, const std::vector<double>& y, int) {
        gbt::GbtParams p = params;
        p.seed = config.pcm_gbt_seed();
        auto model =
            std::make_shared<gbt::GbtModel>(gbt::train(x, y, p, gbt::Objective::SquaredError));
        return [model](const Matrix& val) { return model->predict_margin(val); };
    };
    return recipe;
}

gbt::GbtParams apply_tuned(const gbt::GbtParams& base, const hpo::SearchSpace& space,
                           const std::vector<double>& point) {
    gbt::GbtParams p = base;
    for (std::size_t i = 0; i < space.dims.size(); ++i) {
        const auto& name = space.dims[i].name;
        const double v = point[i];
        if (name == "eta") p.eta = v;
        else if (name == "max_depth") p.max_depth = static_cast<int>(v);
        else if (name == "min_child_weight") p.min_child_weight = v;
        else if (name == "lambda") p.lambda = v;
        else if (name == "gamma") p.gamma = v;
        else if (name == "subsample") p.subsample = v;
        else if (name == "colsample") p.colsample = v;
        else if (name == "n_rounds") p.n_rounds = static_cast<int>(v);
        else throw Error("unknown tuned dimension \"" + name + "\"");
    }
    return p;
}

}  // namespace

TrainResult run_train(const PipelineConfig& config, TrainTask task, bool skip_hpo) {
    set_worker_threads(config.threads);
    std::error_code ec;
    std::filesystem::create_directories(config.model_dir, ec);
    if (ec) throw Error("cannot create " + config.model_dir.string() + ": " + ec.message());

    const bool is_churn = task == TrainTask::Churn;
    const std::string task_name = is_churn ? "churn" : "pcm";

    CvDataset dataset;
    if (is_churn) {
        dataset = build_churn_cv_dataset(config);
    } else {
        dataset = build_pcm_dataset(config).cv;
    }
    log_line("train " + task_name + ": " + std::to_string(dataset.customers.size()) + " customers, " +
             std::to_string(dataset.features.cols) + " features");

    const auto plan = kfold(dataset.customers, config.folds, config.fold_seed());
    const std::vector<Metric> metric_set =
        is_churn ? std::vector<Metric>{Metric::PrAuc, Metric::Accuracy, Metric::Sensitivity,
                                       Metric::Specificity}
                 : std::vector<Metric>{Metric::Rmse, Metric::Mae, Metric::RSquared};

    gbt::GbtParams params = is_churn ? config.churn_params : config.pcm_params;
    TrainResult result;

    const bool tune = config.hpo.enabled && !skip_hpo;
    if (tune) {
        const auto space = hpo::SearchSpace::gbt_default();
        int evaluations = 0;
        const auto objective = [&](const std::vector<double>& point) {
            const auto candidate = apply_tuned(params, space, point);
            const auto recipe = is_churn ? churn_recipe(config, candidate) : pcm_recipe(config, candidate);
            const auto report =
                cross_validate(dataset, recipe, plan, is_churn ? std::vector<Metric>{Metric::PrAuc}
                                                               : std::vector<Metric>{Metric::Rmse});
            ++evaluations;
            const auto& summary = report.metrics.at(is_churn ? Metric::PrAuc : Metric::Rmse);
            if (!summary.mean) return std::nan("");
            const double value = is_churn ? 1.0 - *summary.mean : *summary.mean;
            log_line("hpo " + task_name + " eval " + std::to_string(evaluations) + ": objective " +
                     std::to_string(value));
            return value;
        };
        const auto tuned =
            hpo::optimize(objective, space, config.hpo.n_init, config.hpo.n_iter, config.hpo_seed());
        params = apply_tuned(params, space, tuned.best_params);
        const auto history_path = config.model_dir / (task_name + "_hpo_history.csv");
        hpo::write_history_csv(history_path, space, tuned);
        result.hpo_history_path = history_path;
    }

    const auto recipe = is_churn ? churn_recipe(config, params) : pcm_recipe(config, params);
    result.metrics = cross_validate(dataset, recipe, plan, metric_set);
    result.used_params = params;

    // Refit on every row with the chosen parameters; that model ships.
    gbt::GbtModel final_model;
    if (is_churn) {
        ResampleConfig rc = config.resample;
        rc.seed = config.resample_seed() + static_cast<std::uint64_t>(config.folds);
        std::vector<int> labels(dataset.targets.size());
        for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = dataset.targets[i] != 0.0 ? 1 : 0;
        const auto balanced = balance(dataset.features, labels, rc);
        std::vector<double> targets(balanced.labels.size());
        for (std::size_t i = 0; i < targets.size(); ++i) targets[i] = balanced.labels[i];
        gbt::GbtParams p = params;
        p.seed = config.churn_gbt_seed();
        final_model = gbt::train(balanced.features, targets, p, gbt::Objective::Logistic);
    } else {
        gbt::GbtParams p = params;
        p.seed = config.pcm_gbt_seed();
        final_model = gbt::train(dataset.features, dataset.targets, p, gbt::Objective::SquaredError);
    }

    result.model_path = config.model_dir / (task_name + "_model.json");
    save_model(final_model, result.model_path);
    result.metrics_path = config.model_dir / (task_name + "_metrics.json");
    result.metrics.save_json(result.metrics_path);
    return result;
}

ScoreResult run_score(const PipelineConfig& config) {
    set_worker_threads(config.threads);
    const auto churn_model_path = config.model_dir / "churn_model.json";
    const auto pcm_model_path = config.model_dir / "pcm_model.json";
    const auto ob_path = config.data_dir / dataset_filename(DatasetKind::ObSnapshot);
    require_files({churn_model_path, pcm_model_path}, "run `pclv train churn` and `pclv train pcm` first");
    require_files({ob_path}, "run `pclv gen` or point data_dir at an existing market");

    const auto churn_model = gbt::load_model(churn_model_path);
    const auto pcm_model = gbt::load_model(pcm_model_path);
    const auto pcm_data = build_pcm_dataset(config);
    const auto ob = load_ob_snapshots(ob_path);

    // Retention is scored from features at the final observable month.
    const auto tx_path = config.data_dir / dataset_filename(DatasetKind::Transactions);
    const auto transactions = load_transactions(tx_path);
    const int horizon = dataset_horizon(transactions.records);
    const auto churn_features =
        build_churn_dataset(transactions.records, horizon - 1, config.features, false);
    if (churn_features.customers != pcm_data.cv.customers) {
        throw Error("internal: churn and margin snapshots cover different customers");
    }
    const auto churn_prob = churn_model.predict_proba(churn_features.features);

    ValuationInputs inputs;
    inputs.customers = pcm_data.cv.customers;
    inputs.monthly_margin = pcm_data.cv.targets;
    inputs.churn_probability = churn_prob;
    inputs.system = pcm_data.system;

    const auto records = valuate(inputs, ob.records, pcm_model, config.discount);

    std::error_code ec;
    std::filesystem::create_directories(config.report_dir, ec);
    if (ec) throw Error("cannot create " + config.report_dir.string() + ": " + ec.message());
    const auto valuation_path = config.report_dir / "valuation.csv";
    save_valuation(records, competitor_ids(ob.records), valuation_path);
    log_line("scored " + std::to_string(records.size()) + " customers");
    return {valuation_path, records.size()};
}

ReportResult run_report(const PipelineConfig& config) {
    set_worker_threads(config.threads);
    const auto valuation_path = config.report_dir / "valuation.csv";
    require_files({valuation_path}, "run `pclv score` first");

    const auto records = load_valuation(valuation_path);
    ReportResult result;
    result.report = build_migration_report(records);
    result.report_csv = config.report_dir / "report.csv";
    result.report_json = config.report_dir / "report.json";
    result.targets_csv = config.report_dir / "targets.csv";
    save_report_csv(result.report, result.report_csv);
    save_report_json(result.report, result.report_json);
    save_targets_csv(rank_by_pclv(records), records, result.targets_csv);
    return result;
}

}  // namespace pclv
