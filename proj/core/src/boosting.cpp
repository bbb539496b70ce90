#include "pclv/boosting.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "pclv/error.hpp"
#include "pclv/rng.hpp"

namespace pclv::gbt {

namespace {

constexpr int kModelVersion = 1;

const char* objective_tag(Objective obj) {
    return obj == Objective::SquaredError ? "squared_error" : "logistic";
}

Objective parse_objective(const std::string& tag) {
    if (tag == "squared_error") return Objective::SquaredError;
    if (tag == "logistic") return Objective::Logistic;
    throw Error("unknown model objective \"" + tag + "\"");
}

struct BuildNode {
    double sum_g = 0.0;
    double sum_h = 0.0;
    bool is_leaf = true;
    double weight = 0.0;
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    bool active = false;  // eligible for splitting at the current level
    int slot = -1;        // index into the frontier scratch arrays
};

struct SplitCandidate {
    double gain = 0.0;
    int feature = -1;
    double threshold = 0.0;
    bool valid = false;
};

struct FeatureScan {
    double left_g = 0.0;
    double left_h = 0.0;
    double last_value = 0.0;
    bool any = false;
    SplitCandidate best;
};

double leaf_weight(double sum_g, double sum_h, double lambda) {
    const double denom = sum_h + lambda;
    if (denom <= 0.0) return 0.0;
    return -sum_g / denom;
}

double split_gain(double gl, double hl, double gr, double hr, double lambda, double gamma) {
    const double parent = (gl + gr) * (gl + gr) / (hl + hr + lambda);
    return 0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - parent) - gamma;
}

}  // namespace

void GbtParams::validate() const {
    if (!(eta > 0.0 && eta <= 1.0)) throw ConfigError("eta must be in (0, 1]");
    if (max_depth < 1) throw ConfigError("max_depth must be >= 1");
    if (min_child_weight < 0.0) throw ConfigError("min_child_weight must be >= 0");
    if (lambda < 0.0) throw ConfigError("lambda must be >= 0");
    if (gamma < 0.0) throw ConfigError("gamma must be >= 0");
    if (!(subsample > 0.0 && subsample <= 1.0)) throw ConfigError("subsample must be in (0, 1]");
    if (!(colsample > 0.0 && colsample <= 1.0)) throw ConfigError("colsample must be in (0, 1]");
    if (n_rounds < 0) throw ConfigError("n_rounds must be >= 0");
    if (base_score && !std::isfinite(*base_score)) throw ConfigError("base_score must be finite");
}

double sigmoid(double x) {
    double p;
    if (x >= 0.0) {
        p = 1.0 / (1.0 + std::exp(-x));
    } else {
        const double e = std::exp(x);
        p = e / (1.0 + e);
    }
    return std::clamp(p, std::numeric_limits<double>::min(), 1.0 - 1e-16);
}

double Tree::score(std::span<const double> features) const {
    int idx = 0;
    while (!nodes[static_cast<std::size_t>(idx)].is_leaf) {
        const TreeNode& node = nodes[static_cast<std::size_t>(idx)];
        const double v = features[static_cast<std::size_t>(node.feature)];
        if (std::isnan(v)) {
            idx = node.missing_left ? node.left : node.right;
        } else {
            idx = v < node.threshold ? node.left : node.right;
        }
    }
    return nodes[static_cast<std::size_t>(idx)].weight;
}

int Tree::depth() const {
    // Longest split chain from the root.
    std::vector<int> depth(nodes.size(), 0);
    int deepest = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const auto& n = nodes[i];
        if (n.is_leaf) continue;
        depth[static_cast<std::size_t>(n.left)] = depth[i] + 1;
        depth[static_cast<std::size_t>(n.right)] = depth[i] + 1;
        deepest = std::max(deepest, depth[i] + 1);
    }
    return deepest;
}

std::vector<double> GbtModel::predict_margin(const Matrix& features) const {
    return predict_margin_partial(features, trees.size());
}

std::vector<double> GbtModel::predict_margin_partial(const Matrix& features, std::size_t n_trees) const {
    if (features.cols != n_features) {
        throw Error("feature arity mismatch: model expects " + std::to_string(n_features) +
                    ", input has " + std::to_string(features.cols));
    }
    n_trees = std::min(n_trees, trees.size());
    std::vector<double> margins(features.rows, base_score);
    for (std::size_t t = 0; t < n_trees; ++t) {
        const Tree& tree = trees[t];
        for (std::size_t r = 0; r < features.rows; ++r) {
            margins[r] += eta * tree.score(features.row(r));
        }
    }
    return margins;
}

std::vector<double> GbtModel::predict_proba(const Matrix& features) const {
    if (objective != Objective::Logistic) {
        throw Error("predict_proba requires a logistic model");
    }
    auto margins = predict_margin(features);
    for (double& m : margins) m = sigmoid(m);
    return margins;
}

GbtModel train(const Matrix& features, const std::vector<double>& targets, const GbtParams& params,
               Objective objective, TrainInfo* info) {
    params.validate();
    const std::size_t n = features.rows;
    const std::size_t d = features.cols;
    if (n < 2) throw Error("training requires at least 2 rows");
    if (d < 1) throw Error("training requires at least 1 feature");
    if (targets.size() != n) throw Error("targets length does not match feature rows");
    for (double v : features.data) {
        if (!std::isfinite(v)) throw Error("non-finite value in training features");
    }
    for (double y : targets) {
        if (!std::isfinite(y)) throw Error("non-finite value in training targets");
        if (objective == Objective::Logistic && y != 0.0 && y != 1.0) {
            throw Error("logistic targets must be 0 or 1");
        }
    }

    // Column-major copy plus one static sort per feature; node membership is
    // tracked through a per-level slot map, so sorted order never needs
    // refreshing. Values and gradients are kept in sorted order per feature
    // to make the hot split scan almost entirely sequential.
    std::vector<std::vector<double>> col(d, std::vector<double>(n));
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t f = 0; f < d; ++f) col[f][r] = features.at(r, f);
    }
    std::vector<std::vector<std::uint32_t>> sorted_idx(d, std::vector<std::uint32_t>(n));
    std::vector<std::vector<double>> sorted_values(d, std::vector<double>(n));
    for (std::size_t f = 0; f < d; ++f) {
        auto& idx = sorted_idx[f];
        std::iota(idx.begin(), idx.end(), 0u);
        std::stable_sort(idx.begin(), idx.end(),
                         [&](std::uint32_t a, std::uint32_t b) { return col[f][a] < col[f][b]; });
        for (std::size_t i = 0; i < n; ++i) sorted_values[f][i] = col[f][idx[i]];
    }

    GbtModel model;
    model.objective = objective;
    model.eta = params.eta;
    model.n_features = d;
    if (params.base_score) {
        model.base_score = *params.base_score;
    } else {
        const double mean = std::accumulate(targets.begin(), targets.end(), 0.0) / static_cast<double>(n);
        if (objective == Objective::SquaredError) {
            model.base_score = mean;
        } else {
            const double p = std::clamp(mean, 1e-6, 1.0 - 1e-6);
            model.base_score = std::log(p / (1.0 - p));
        }
    }

    std::vector<double> margins(n, model.base_score);
    // Gradient/hessian pairs interleaved so a row's pair is one cache line.
    std::vector<double> gh(2 * n);
    std::vector<int> position(n);
    std::vector<int> slot_of_row(n);  // frontier slot per row, -1 when out of play
    std::vector<char> sampled(n, 1);
    std::vector<std::uint32_t> row_pool(n);
    std::iota(row_pool.begin(), row_pool.end(), 0u);
    std::vector<std::uint32_t> feat_pool(d);
    std::iota(feat_pool.begin(), feat_pool.end(), 0u);
    // Gradients gathered into per-feature sorted order once per round.
    std::vector<std::vector<double>> sorted_gh(d, std::vector<double>(2 * n));

    Rng rng(params.seed);
    if (info) info->round_rmse.clear();

    for (int round = 0; round < params.n_rounds; ++round) {
        for (std::size_t r = 0; r < n; ++r) {
            if (objective == Objective::SquaredError) {
                gh[2 * r] = margins[r] - targets[r];
                gh[2 * r + 1] = 1.0;
            } else {
                const double p = sigmoid(margins[r]);
                gh[2 * r] = p - targets[r];
                gh[2 * r + 1] = p * (1.0 - p);
            }
        }

        if (params.subsample < 1.0) {
            const auto m = std::max<std::size_t>(1, static_cast<std::size_t>(
                                                        std::floor(params.subsample * static_cast<double>(n))));
            rng.shuffle(row_pool);
            std::fill(sampled.begin(), sampled.end(), 0);
            for (std::size_t i = 0; i < m; ++i) sampled[row_pool[i]] = 1;
        }

        std::vector<std::uint32_t> used_features;
        if (params.colsample < 1.0) {
            const auto k = std::max<std::size_t>(1, static_cast<std::size_t>(
                                                        std::ceil(params.colsample * static_cast<double>(d))));
            rng.shuffle(feat_pool);
            used_features.assign(feat_pool.begin(), feat_pool.begin() + static_cast<std::ptrdiff_t>(k));
            std::sort(used_features.begin(), used_features.end());
        } else {
            used_features = feat_pool;
            std::sort(used_features.begin(), used_features.end());
        }

        // Gather gradients into sorted order for the features used this tree.
#pragma omp parallel for schedule(dynamic, 1)
        for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(used_features.size()); ++j) {
            const std::size_t f = used_features[static_cast<std::size_t>(j)];
            const auto& idx = sorted_idx[f];
            auto& sgh = sorted_gh[f];
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t row = idx[i];
                sgh[2 * i] = gh[2 * row];
                sgh[2 * i + 1] = gh[2 * row + 1];
            }
        }

        std::vector<BuildNode> nodes(1);
        std::fill(position.begin(), position.end(), 0);
        for (std::size_t r = 0; r < n; ++r) {
            if (!sampled[r]) continue;
            nodes[0].sum_g += gh[2 * r];
            nodes[0].sum_h += gh[2 * r + 1];
        }
        nodes[0].active = params.max_depth >= 1;
        nodes[0].slot = 0;

        std::vector<int> frontier = {0};
        for (int depth = 0; depth < params.max_depth && !frontier.empty(); ++depth) {
            const std::size_t n_slots = frontier.size();
            const std::size_t n_feats = used_features.size();
            // best[slot * n_feats + j]: best candidate of frontier node `slot`
            // on feature used_features[j].
            std::vector<SplitCandidate> best(n_slots * n_feats);

            for (std::size_t r = 0; r < n; ++r) {
                const BuildNode& node = nodes[static_cast<std::size_t>(position[r])];
                slot_of_row[r] = (node.active && sampled[r]) ? node.slot : -1;
            }
            std::vector<double> node_g(n_slots), node_h(n_slots);
            for (std::size_t slot = 0; slot < n_slots; ++slot) {
                node_g[slot] = nodes[static_cast<std::size_t>(frontier[slot])].sum_g;
                node_h[slot] = nodes[static_cast<std::size_t>(frontier[slot])].sum_h;
            }

#pragma omp parallel for schedule(dynamic, 1)
            for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(n_feats); ++j) {
                const std::size_t f = used_features[static_cast<std::size_t>(j)];
                std::vector<FeatureScan> scan(n_slots);
                const std::uint32_t* idx = sorted_idx[f].data();
                const double* values = sorted_values[f].data();
                const double* sgh = sorted_gh[f].data();
                for (std::size_t i = 0; i < n; ++i) {
                    const int slot = slot_of_row[idx[i]];
                    if (slot < 0) continue;
                    FeatureScan& s = scan[static_cast<std::size_t>(slot)];
                    const double v = values[i];
                    if (s.any && v != s.last_value) {
                        const double gr = node_g[static_cast<std::size_t>(slot)] - s.left_g;
                        const double hr = node_h[static_cast<std::size_t>(slot)] - s.left_h;
                        if (s.left_h >= params.min_child_weight && hr >= params.min_child_weight) {
                            const double gain =
                                split_gain(s.left_g, s.left_h, gr, hr, params.lambda, params.gamma);
                            if (gain > 0.0 && (!s.best.valid || gain > s.best.gain)) {
                                s.best.valid = true;
                                s.best.gain = gain;
                                s.best.feature = static_cast<int>(f);
                                s.best.threshold = s.last_value + 0.5 * (v - s.last_value);
                            }
                        }
                    }
                    s.left_g += sgh[2 * i];
                    s.left_h += sgh[2 * i + 1];
                    s.last_value = v;
                    s.any = true;
                }
                for (std::size_t slot = 0; slot < n_slots; ++slot) {
                    best[slot * n_feats + static_cast<std::size_t>(j)] = scan[slot].best;
                }
            }

            // Sequential feature-order reduction keeps tie-breaking (and thus
            // the whole model) independent of thread count.
            std::vector<int> next_frontier;
            for (std::size_t slot = 0; slot < n_slots; ++slot) {
                const int nid = frontier[slot];
                SplitCandidate chosen;
                for (std::size_t j = 0; j < n_feats; ++j) {
                    const SplitCandidate& c = best[slot * n_feats + j];
                    if (!c.valid) continue;
                    if (!chosen.valid || c.gain > chosen.gain) chosen = c;
                }
                BuildNode& node = nodes[static_cast<std::size_t>(nid)];
                node.active = false;
                if (!chosen.valid) continue;

                node.is_leaf = false;
                node.feature = chosen.feature;
                node.threshold = chosen.threshold;
                node.left = static_cast<int>(nodes.size());
                node.right = static_cast<int>(nodes.size() + 1);
                nodes.emplace_back();
                nodes.emplace_back();
                if (depth + 1 < params.max_depth) {
                    for (int child : {node.left, node.right}) {
                        nodes[static_cast<std::size_t>(child)].active = true;
                        next_frontier.push_back(child);
                    }
                }
            }

            // Route rows through the freshly split nodes and accumulate child stats.
            for (std::size_t r = 0; r < n; ++r) {
                const BuildNode& node = nodes[static_cast<std::size_t>(position[r])];
                if (node.is_leaf) continue;
                const double v = col[static_cast<std::size_t>(node.feature)][r];
                position[r] = v < node.threshold ? node.left : node.right;
                if (sampled[r]) {
                    BuildNode& child = nodes[static_cast<std::size_t>(position[r])];
                    child.sum_g += gh[2 * r];
                    child.sum_h += gh[2 * r + 1];
                }
            }
            for (std::size_t slot = 0; slot < next_frontier.size(); ++slot) {
                nodes[static_cast<std::size_t>(next_frontier[slot])].slot = static_cast<int>(slot);
            }
            frontier = std::move(next_frontier);
        }

        for (auto& node : nodes) {
            if (node.is_leaf) node.weight = leaf_weight(node.sum_g, node.sum_h, params.lambda);
        }
        for (std::size_t r = 0; r < n; ++r) {
            margins[r] += params.eta * nodes[static_cast<std::size_t>(position[r])].weight;
        }

        Tree tree;
        tree.nodes.reserve(nodes.size());
        for (const auto& b : nodes) {
            TreeNode t;
            t.is_leaf = b.is_leaf;
            t.weight = b.weight;
            t.feature = b.feature;
            t.threshold = b.threshold;
            t.left = b.left;
            t.right = b.right;
            tree.nodes.push_back(t);
        }
        model.trees.push_back(std::move(tree));

        if (info && objective == Objective::SquaredError) {
            double sq = 0.0;
            for (std::size_t r = 0; r < n; ++r) {
                const double e = margins[r] - targets[r];
                sq += e * e;
            }
            info->round_rmse.push_back(std::sqrt(sq / static_cast<double>(n)));
        }
    }
    return model;
}

void save_model(const GbtModel& model, const std::filesystem::path& path) {
    nlohmann::json j;
    j["version"] = kModelVersion;
    j["objective"] = objective_tag(model.objective);
    j["base_score"] = model.base_score;
    j["eta"] = model.eta;
    j["n_features"] = model.n_features;
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& tree : model.trees) {
        nlohmann::json nodes = nlohmann::json::array();
        for (const auto& node : tree.nodes) {
            if (node.is_leaf) {
                nodes.push_back({{"weight", node.weight}});
            } else {
                nodes.push_back({{"feature", node.feature},
                                 {"threshold", node.threshold},
                                 {"missing_left", node.missing_left},
                                 {"left", node.left},
                                 {"right", node.right}});
            }
        }
        trees.push_back({{"nodes", std::move(nodes)}});
    }
    j["trees"] = std::move(trees);

    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw Error("write failure on " + path.string());
}

GbtModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error("model file " + path.string() + " is not valid JSON: " + e.what());
    }

    try {
        const int version = j.at("version").get<int>();
        if (version != kModelVersion) {
            throw Error("model file " + path.string() + " has schema version " +
                        std::to_string(version) + "; this reader supports version " +
                        std::to_string(kModelVersion));
        }
        GbtModel model;
        model.objective = parse_objective(j.at("objective").get<std::string>());
        model.base_score = j.at("base_score").get<double>();
        model.eta = j.at("eta").get<double>();
        model.n_features = j.at("n_features").get<std::size_t>();
        for (const auto& jt : j.at("trees")) {
            Tree tree;
            const auto& jnodes = jt.at("nodes");
            for (const auto& jn : jnodes) {
                TreeNode node;
                if (jn.contains("weight")) {
                    node.is_leaf = true;
                    node.weight = jn.at("weight").get<double>();
                } else {
                    node.is_leaf = false;
                    node.feature = jn.at("feature").get<int>();
                    node.threshold = jn.at("threshold").get<double>();
                    node.missing_left = jn.at("missing_left").get<bool>();
                    node.left = jn.at("left").get<int>();
                    node.right = jn.at("right").get<int>();
                    if (!std::isfinite(node.threshold)) {
                        throw Error("model file " + path.string() + ": non-finite threshold");
                    }
                    const auto limit = static_cast<int>(jnodes.size());
                    if (node.left < 0 || node.left >= limit || node.right < 0 || node.right >= limit) {
                        throw Error("model file " + path.string() + ": node index out of range");
                    }
                }
                tree.nodes.push_back(node);
            }
            if (tree.nodes.empty()) throw Error("model file " + path.string() + ": empty tree");
            model.trees.push_back(std::move(tree));
        }
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw Error("model file " + path.string() + " is malformed: " + e.what());
    }
}

}  // namespace pclv::gbt
