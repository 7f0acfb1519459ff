#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rootopt/rootopt.hpp"

namespace rootopt::cli {

namespace fs = std::filesystem;

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::Io, "cannot write " + path);
    out << text;
    if (!out) fail(ErrorCode::Io, "write failed for " + path);
}

inline std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::Io, "cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline Json read_json(const std::string& path) {
    try {
        return Json::parse(read_text(path));
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::Parse, path + ": " + e.what());
    }
}

inline void write_json(const std::string& path, const Json& j) {
    write_text(path, j.dump(2) + "\n");
}

class Stopwatch {
public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

// Every report embeds the resolved config, seeds, library version, and the
// wall clock (the single nondeterministic field).
inline Json make_report(const std::string& command, Json config, double wall_sec) {
    Json j;
    j["version"] = version();
    j["command"] = command;
    j["config"] = std::move(config);
    j["wall_time_sec"] = wall_sec;
    return j;
}

// ---------------------------------------------------------------------------
// nuisance JSON

inline Json logistic_to_json(const LogisticModel& m) {
    return Json{{"intercept", m.intercept}, {"slopes", m.slopes}};
}

inline LogisticModel logistic_from_json(const Json& j) {
    LogisticModel m;
    m.intercept = j.at("intercept").get<double>();
    m.slopes = j.at("slopes").get<std::vector<double>>();
    return m;
}

inline Json nuisance_to_json(const NuisanceModels& m) {
    Json j;
    j["selection"] = logistic_to_json(m.selection);
    j["pi_hat"] = m.pi_hat;
    j["clip"] = Json{{"lo", m.clip.lo}, {"hi", m.clip.hi}};
    switch (m.propensity.mode) {
        case PropensityMode::Known:
            j["propensity"] = Json{{"mode", "known"}, {"value", m.propensity.known}};
            break;
        case PropensityMode::Empirical:
            j["propensity"] = Json{{"mode", "empirical"}, {"value", m.propensity.known}};
            break;
        case PropensityMode::Fitted:
            j["propensity"] = Json{{"mode", "fitted"}, {"model", logistic_to_json(m.propensity.model)}};
            break;
    }
    return j;
}

inline NuisanceModels nuisance_from_json(const Json& j) {
    NuisanceModels m;
    m.selection = logistic_from_json(j.at("selection"));
    m.pi_hat = j.at("pi_hat").get<double>();
    m.clip.lo = j.at("clip").at("lo").get<double>();
    m.clip.hi = j.at("clip").at("hi").get<double>();
    const auto& pj = j.at("propensity");
    std::string mode = pj.at("mode").get<std::string>();
    if (mode == "known") {
        m.propensity.mode = PropensityMode::Known;
        m.propensity.known = pj.at("value").get<double>();
    } else if (mode == "empirical") {
        m.propensity.mode = PropensityMode::Empirical;
        m.propensity.known = pj.at("value").get<double>();
    } else {
        m.propensity.mode = PropensityMode::Fitted;
        m.propensity.model = logistic_from_json(pj.at("model"));
    }
    return m;
}

// ---------------------------------------------------------------------------
// shared option bundles

struct FitParams {
    std::size_t trees = 5000;
    std::size_t rashomon = 10;
    double eps = 0.2;
    std::size_t max_depth = 6;
    double leaf_prob = 0.4;
    double ridge = 1e-4;
    double clip_lo = 0.01;
    double clip_hi = 0.99;
    std::string propensity = "empirical";  // empirical | fitted | known:<c>
    std::string midpoint = "median";
    std::size_t char_depth = 3;
    std::uint64_t seed = 0;

    Json to_json() const {
        return Json{{"trees", trees},       {"rashomon", rashomon}, {"eps_explore", eps},
                    {"max_depth", max_depth}, {"leaf_prob", leaf_prob}, {"ridge", ridge},
                    {"clip_lo", clip_lo},   {"clip_hi", clip_hi},   {"propensity", propensity},
                    {"midpoint", midpoint}, {"char_depth", char_depth}, {"seed", seed}};
    }

    SamplerConfig sampler() const {
        SamplerConfig s;
        s.eps_explore = eps;
        s.max_depth = max_depth;
        s.leaf_prob = leaf_prob;
        s.midpoint = midpoint == "midrange" ? MidpointRule::Midrange : MidpointRule::Median;
        return s;
    }
};

inline Propensity resolve_propensity(const Dataset& d, const std::string& mode, const FitOptions& opt) {
    if (mode == "empirical") return fit_trial_propensity(d, PropensityMode::Empirical);
    if (mode == "fitted") return fit_trial_propensity(d, PropensityMode::Fitted, opt);
    if (mode.rfind("known:", 0) == 0) return make_known_propensity(std::stod(mode.substr(6)));
    fail(ErrorCode::Config, "propensity must be empirical, fitted, or known:<c>");
}

inline NuisanceModels fit_nuisances(const Dataset& d, const FitParams& fp) {
    FitOptions opt;
    opt.ridge = fp.ridge;
    NuisanceModels nm = fit_selection_model(d, opt, ClipBounds{fp.clip_lo, fp.clip_hi});
    nm.propensity = resolve_propensity(d, fp.propensity, opt);
    return nm;
}

// ---------------------------------------------------------------------------
// generate

struct GenerateArgs {
    std::string dgp;
    std::size_t n = 5000;
    std::uint64_t seed = 0;
    std::string out = "data.csv";
    std::string sidecar;
    double scale = -1.0;
    bool spread_sd = false;
    std::optional<double> uniform_selection;
    std::size_t oracle_mc = 200000;
};

inline int cmd_generate(const GenerateArgs& a) {
    Stopwatch sw;
    DgpSpec spec = make_spec(dgp_kind_from_name(a.dgp), a.n, a.seed, a.scale);
    spec.community.spread_is_sd = a.spread_sd;
    if (a.uniform_selection) spec.community.uniform_selection = a.uniform_selection;

    Dataset d = generate(spec);
    write_csv(d, a.out);

    OracleComponents oc = oracle(spec);
    McResult tau0 = oracle_tate(oc, a.oracle_mc, derive_seed(a.seed, 1));
    McResult th1 = oracle_theta1(oc, a.oracle_mc, derive_seed(a.seed, 2));
    McResult vip = oracle_variance(oc, a.oracle_mc, derive_seed(a.seed, 3), tau0.value);

    Json config{{"dgp", a.dgp}, {"n", a.n},       {"seed", a.seed},
                {"out", a.out}, {"scale", a.scale}, {"oracle_mc", a.oracle_mc}};
    Json report = make_report("generate", config, sw.seconds());
    report["spec"] = spec_to_json(spec);
    report["oracle"] = Json{{"tau0_mc", tau0.value},     {"tau0_mc_se", tau0.se},
                            {"theta1_mc", th1.value},    {"theta1_mc_se", th1.se},
                            {"v_ipw_mc", vip.value},     {"v_ipw_mc_se", vip.se},
                            {"n_mc", a.oracle_mc}};
    std::string sidecar = a.sidecar.empty() ? a.out.substr(0, a.out.find_last_of('.')) + ".json"
                                            : a.sidecar;
    write_json(sidecar, report);
    std::cout << "wrote " << a.out << " (" << d.n() << " rows) and " << sidecar << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// fit

struct FitArgs {
    std::string data;
    std::string out_dir = ".";
    FitParams fp;
};

inline int cmd_fit(const FitArgs& a) {
    Stopwatch sw;
    Dataset d = load_csv(a.data);
    NuisanceModels nm = fit_nuisances(d, a.fp);
    NuisanceEval ev = NuisanceEval::from(nm);
    ObjectiveContext ctx(d, ev);

    FeatureProbs f = init_feature_probs(d, ctx, a.fp.leaf_prob);
    RashomonConfig rc;
    rc.M = a.fp.trees;
    rc.m_keep = a.fp.rashomon;
    rc.seed = a.fp.seed;
    rc.sampler = a.fp.sampler();
    RashomonSet rs = build_rashomon(d, ctx, f, rc);
    CharacteristicTree ch = characteristic_tree(rs, d, a.fp.char_depth);

    double unpruned = ctx(std::vector<std::uint8_t>(d.n(), 1));

    fs::create_directories(a.out_dir);
    write_json((fs::path(a.out_dir) / "nuisance.json").string(), nuisance_to_json(nm));
    write_json((fs::path(a.out_dir) / "rashomon.json").string(), rashomon_to_json(rs));
    Json chj = tree_to_json(ch.tree);
    chj["agreement"] = ch.agreement;
    write_json((fs::path(a.out_dir) / "characteristic.json").string(), chj);

    Json config{{"data", a.data}, {"out_dir", a.out_dir}};
    for (auto& [k, v] : a.fp.to_json().items()) config[k] = v;
    Json report = make_report("fit", config, sw.seconds());
    report["n"] = d.n();
    report["n_trial"] = d.n_trial();
    report["best_objective"] = rs.trees.front().objective;
    report["unpruned_objective"] = unpruned;
    report["rashomon_kept"] = rs.m;
    report["agreement"] = ch.agreement;
    write_json((fs::path(a.out_dir) / "report.json").string(), report);
    std::cout << "fit: best objective " << rs.trees.front().objective << " vs unpruned " << unpruned
              << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// estimate

struct EstimateArgs {
    std::string data;
    std::string nuisance;
    std::string weights;  // rashomon / rule / tree JSON; empty = unweighted only
    std::string out = "estimate.json";
    std::string csv;
};

inline Json estimate_row(const std::string& label, const Estimate& e) {
    return Json{{"label", label},
                {"point", e.point},
                {"std_err", e.std_err},
                {"variance", e.variance},
                {"e_w", e.effective_w},
                {"pi_w", e.pi_w},
                {"n_trial_kept", e.n_trial_kept},
                {"n_target_kept", e.n_target_kept}};
}

inline std::vector<std::uint8_t> weights_from_file(const std::string& path, const Dataset& d,
                                                   const NuisanceEval& ev, std::string& label) {
    Json j = read_json(path);
    if (j.contains("trees")) {
        RashomonSet rs = rashomon_from_json(j);
        label = "wtate_root";
        return ensemble_labels(rs, d);
    }
    if (j.contains("kind")) {
        WeightRule r = rule_from_json(j);
        label = std::string("wtate_") + rule_kind_name(r.kind);
        return r.labels(d, &ev);
    }
    if (j.contains("root")) {
        WeightTree t = tree_from_json(j);
        label = "wtate_tree";
        return tree_labels(t, d);
    }
    fail(ErrorCode::Parse, path + " is not a rashomon set, rule, or tree file");
}

inline int cmd_estimate(const EstimateArgs& a) {
    Stopwatch sw;
    Dataset d = load_csv(a.data);
    NuisanceModels nm = nuisance_from_json(read_json(a.nuisance));
    NuisanceEval ev = NuisanceEval::from(nm);

    std::vector<Json> rows;
    rows.push_back(estimate_row("tate", tate_ipw(d, ev)));
    if (!a.weights.empty()) {
        std::string label;
        auto w = weights_from_file(a.weights, d, ev, label);
        rows.push_back(estimate_row(label, wtate_ipw(d, ev, w)));
    }

    Json config{{"data", a.data}, {"nuisance", a.nuisance}, {"weights", a.weights}};
    Json report = make_report("estimate", config, sw.seconds());
    report["rows"] = rows;
    write_json(a.out, report);

    if (!a.csv.empty()) {
        std::string text = "label,point,std_err,variance,e_w,pi_w,n_trial_kept,n_target_kept\n";
        for (const auto& r : rows) {
            text += r.at("label").get<std::string>();
            for (const char* k : {"point", "std_err", "variance", "e_w", "pi_w"})
                text += "," + detail::format_double(r.at(k).get<double>());
            text += "," + std::to_string(r.at("n_trial_kept").get<std::size_t>());
            text += "," + std::to_string(r.at("n_target_kept").get<std::size_t>());
            text += "\n";
        }
        write_text(a.csv, text);
    }
    for (const auto& r : rows)
        std::cout << r.at("label").get<std::string>() << ": point " << r.at("point").get<double>()
                  << ", se " << r.at("std_err").get<double>() << ", E[w] "
                  << r.at("e_w").get<double>() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// benchmark

struct BenchmarkArgs {
    std::string dgp;
    std::size_t n = 2000;
    std::size_t reps = 20;
    std::uint64_t seed = 0;
    std::string out_dir = ".";
    FitParams fp;
    double lsp_predefined = 0.87;
    double scale = -1.0;
    std::vector<std::string> methods{"Original", "ROOT",      "1-Tree",
                                     "Linear",   "Indicator", "ThresholdPredef",
                                     "ThresholdOpt"};
};

struct MethodResult {
    bool ok = false;
    std::string error;
    double point = 0.0, std_err = 0.0, e_w = 0.0;
    std::size_t n_trial_kept = 0, n_target_kept = 0;
    double objective = 0.0;
    double runtime = 0.0;
};

struct RepResult {
    std::map<std::string, MethodResult> methods;
};

inline RepResult benchmark_rep(const BenchmarkArgs& a, std::uint64_t rep_seed) {
    RepResult out;
    DgpSpec spec = make_spec(dgp_kind_from_name(a.dgp), a.n, derive_seed(rep_seed, 0), a.scale);
    Dataset d = generate(spec);
    NuisanceModels nm = fit_nuisances(d, a.fp);
    NuisanceEval ev = NuisanceEval::from(nm);
    ObjectiveContext ctx(d, ev);
    FeatureProbs f = init_feature_probs(d, ctx, a.fp.leaf_prob);

    auto run_method = [&](const std::string& name, auto&& labels_fn) {
        if (std::find(a.methods.begin(), a.methods.end(), name) == a.methods.end()) return;
        Stopwatch sw;
        MethodResult mr;
        try {
            std::pair<std::vector<std::uint8_t>, double> lw = labels_fn();
            Estimate e = wtate_ipw(d, ev, lw.first);
            mr.ok = true;
            mr.point = e.point;
            mr.std_err = e.std_err;
            mr.e_w = e.effective_w;
            mr.n_trial_kept = e.n_trial_kept;
            mr.n_target_kept = e.n_target_kept;
            mr.objective = lw.second;
        } catch (const Error& e) {
            mr.error = e.what();
        }
        mr.runtime = sw.seconds();
        out.methods[name] = mr;
    };

    std::vector<std::uint8_t> ones(d.n(), 1);
    run_method("Original", [&] { return std::make_pair(ones, ctx(ones)); });
    run_method("ROOT", [&] {
        RashomonConfig rc;
        rc.M = a.fp.trees;
        rc.m_keep = a.fp.rashomon;
        rc.seed = derive_seed(rep_seed, 1);
        rc.sampler = a.fp.sampler();
        RashomonSet rs = build_rashomon(d, ctx, f, rc);
        auto labels = ensemble_labels(rs, d);
        return std::make_pair(labels, ctx(labels));
    });
    run_method("1-Tree", [&] {
        RashomonConfig rc;
        rc.M = a.fp.trees;
        rc.m_keep = 1;
        rc.seed = derive_seed(rep_seed, 2);
        rc.sampler = a.fp.sampler();
        WeightRule r = one_tree(d, ctx, f, rc);
        return std::make_pair(r.labels(d, &ev), r.objective);
    });
    run_method("Linear", [&] {
        WeightRule r = linear_weights(d, ctx, 10, 200, derive_seed(rep_seed, 3));
        return std::make_pair(r.labels(d, &ev), r.objective);
    });
    run_method("Indicator", [&] {
        WeightRule r = indicator_weights(d, ctx);
        return std::make_pair(r.labels(d, &ev), r.objective);
    });
    run_method("ThresholdPredef", [&] {
        WeightRule r = threshold_weights(ev, a.lsp_predefined);
        auto labels = r.labels(d, &ev);
        return std::make_pair(labels, ctx(labels));
    });
    run_method("ThresholdOpt", [&] {
        WeightRule r = optimize_threshold(d, ev, ctx, default_threshold_grid(d, ev));
        return std::make_pair(r.labels(d, &ev), r.objective);
    });
    return out;
}

inline int cmd_benchmark(const BenchmarkArgs& a) {
    Stopwatch sw;
    std::vector<RepResult> reps(a.reps);
    parallel_for(a.reps, [&](std::size_t r) { reps[r] = benchmark_rep(a, derive_seed(a.seed, r)); });

    fs::create_directories(a.out_dir);

    std::string rep_csv = "method,rep,ok,point,std_err,e_w,n_trial_kept,n_target_kept,objective\n";
    for (const auto& name : a.methods) {
        for (std::size_t r = 0; r < a.reps; ++r) {
            auto it = reps[r].methods.find(name);
            if (it == reps[r].methods.end()) continue;
            const MethodResult& mr = it->second;
            rep_csv += name + "," + std::to_string(r) + "," + (mr.ok ? "1" : "0");
            if (mr.ok) {
                rep_csv += "," + detail::format_double(mr.point) + "," +
                           detail::format_double(mr.std_err) + "," + detail::format_double(mr.e_w) +
                           "," + std::to_string(mr.n_trial_kept) + "," +
                           std::to_string(mr.n_target_kept) + "," +
                           detail::format_double(mr.objective);
            } else {
                rep_csv += ",,,,,,";
            }
            rep_csv += "\n";
        }
    }
    write_text((fs::path(a.out_dir) / "reps.csv").string(), rep_csv);

    Json summary = Json::array();
    std::string sum_csv = "method,mean_std_err,mean_e_w,reps_ok,reps_failed,runtime_sec\n";
    for (const auto& name : a.methods) {
        double se_sum = 0.0, ew_sum = 0.0, rt_sum = 0.0;
        std::size_t ok = 0, failed = 0;
        for (std::size_t r = 0; r < a.reps; ++r) {
            auto it = reps[r].methods.find(name);
            if (it == reps[r].methods.end()) continue;
            rt_sum += it->second.runtime;
            if (!it->second.ok) {
                ++failed;
                continue;
            }
            ++ok;
            se_sum += it->second.std_err;
            ew_sum += it->second.e_w;
        }
        double mean_se = ok ? se_sum / static_cast<double>(ok) : 0.0;
        double mean_ew = ok ? ew_sum / static_cast<double>(ok) : 0.0;
        summary.push_back(Json{{"method", name},
                               {"mean_std_err", mean_se},
                               {"mean_e_w", mean_ew},
                               {"reps_ok", ok},
                               {"reps_failed", failed}});
        sum_csv += name + "," + detail::format_double(mean_se) + "," +
                   detail::format_double(mean_ew) + "," + std::to_string(ok) + "," +
                   std::to_string(failed) + "," + detail::format_double(rt_sum) + "\n";
    }
    write_text((fs::path(a.out_dir) / "summary.csv").string(), sum_csv);

    Json config{{"dgp", a.dgp}, {"n", a.n},   {"reps", a.reps},
                {"seed", a.seed}, {"scale", a.scale}, {"lsp_predefined", a.lsp_predefined},
                {"methods", a.methods}};
    for (auto& [k, v] : a.fp.to_json().items()) config[k] = v;
    Json report = make_report("benchmark", config, sw.seconds());
    report["summary"] = summary;
    write_json((fs::path(a.out_dir) / "report.json").string(), report);

    std::cout << sum_csv;
    return 0;
}

// ---------------------------------------------------------------------------
// explain

struct ExplainArgs {
    std::string input;  // rashomon.json | characteristic.json | tree json
    std::string data;   // needed when input is a rashomon set
    std::string out = "characteristic.json";
    std::string text = "characteristic.txt";
    std::size_t max_depth = 3;
};

inline int cmd_explain(const ExplainArgs& a) {
    Stopwatch sw;
    Json j = read_json(a.input);
    WeightTree tree;
    double agreement = -1.0;
    std::vector<std::string> names;
    if (j.contains("trees")) {
        if (a.data.empty()) fail(ErrorCode::Config, "--data is required to explain a rashomon set");
        Dataset d = load_csv(a.data);
        names = d.feature_names();
        RashomonSet rs = rashomon_from_json(j);
        CharacteristicTree ch = characteristic_tree(rs, d, a.max_depth);
        tree = std::move(ch.tree);
        agreement = ch.agreement;
    } else if (j.contains("root")) {
        tree = tree_from_json(j);
        if (j.contains("agreement")) agreement = j.at("agreement").get<double>();
        if (!a.data.empty()) names = load_csv(a.data).feature_names();
    } else {
        fail(ErrorCode::Parse, a.input + " is not a rashomon set or tree file");
    }

    Json out = tree_to_json(tree);
    if (agreement >= 0.0) out["agreement"] = agreement;
    write_json(a.out, out);
    std::string rendering = render_tree(tree, names);
    write_text(a.text, rendering);
    std::cout << rendering;
    (void)sw;
    return 0;
}

// ---------------------------------------------------------------------------
// prtq-check

struct PrtqArgs {
    std::size_t p = 2;
    std::size_t q = 2;
    std::size_t k = 32;
    std::size_t reps = 200;
    std::uint64_t seed = 0;
    std::size_t n_rows = 60;
    std::string out;
};

// One fixed seeded binary problem; each repetition draws K iid PRTQ trees and
// checks whether the exhaustive q-leaf optimum (as a function on the rows)
// was hit.
inline Json prtq_check(const PrtqArgs& a) {
    DgpSpec spec = make_spec(DgpKind::Community, std::max<std::size_t>(a.n_rows, 30),
                             derive_seed(a.seed, 900));
    Dataset d = generate(spec);
    NuisanceModels nm = fit_nuisances(d, FitParams{});
    NuisanceEval ev = NuisanceEval::from(nm);
    auto ctx = std::make_shared<ObjectiveContext>(d, ev);

    std::vector<double> xreal(d.n() * std::min(a.p, d.p()));
    std::size_t p_use = std::min(a.p, d.p());
    for (std::size_t i = 0; i < d.n(); ++i)
        for (std::size_t j = 0; j < p_use; ++j) xreal[i * p_use + j] = d.x(i, j);

    BinaryTreeProblem prob;
    prob.n = d.n();
    prob.p = p_use;
    prob.q = a.q;
    prob.xb = binarize_by_median(xreal, d.n(), p_use);
    prob.loss = [ctx](const std::vector<std::uint8_t>& labels) { return (*ctx)(labels); };

    BruteForceResult best = brute_force_optimal(prob, a.q);

    std::size_t misses = 0;
    for (std::size_t rep = 0; rep < a.reps; ++rep) {
        bool hit = false;
        for (std::size_t k = 0; k < a.k; ++k) {
            WeightTree t = prtq_sample(prob, derive_seed(derive_seed(a.seed, rep), k));
            if (binary_tree_labels(prob, t) == best.labels) {
                hit = true;
                break;
            }
        }
        if (!hit) ++misses;
    }

    double miss_rate = static_cast<double>(misses) / static_cast<double>(a.reps);
    double bound = prtq_bound(a.p, a.q, a.k);
    double se = std::sqrt(std::max(miss_rate * (1.0 - miss_rate), bound * (1.0 - bound)) /
                          static_cast<double>(a.reps));
    Json j{{"p", a.p},
           {"q", a.q},
           {"k", a.k},
           {"reps", a.reps},
           {"bound", bound},
           {"empirical_miss", miss_rate},
           {"ci", Json{{"lo", std::max(0.0, miss_rate - 3.0 * se)},
                       {"hi", std::min(1.0, miss_rate + 3.0 * se)}}}};
    return j;
}

inline int cmd_prtq_check(const PrtqArgs& a) {
    Stopwatch sw;
    Json j = prtq_check(a);
    Json config{{"p", a.p}, {"q", a.q}, {"k", a.k}, {"reps", a.reps}, {"seed", a.seed}};
    Json report = make_report("prtq-check", config, sw.seconds());
    for (auto& [k, v] : j.items())
        if (k != "p" && k != "q" && k != "k" && k != "reps") report[k] = v;
    if (!a.out.empty()) write_json(a.out, report);
    std::cout << j.dump(2) << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// driver

inline int run(std::vector<std::string> args) {
    CLI::App app{"Generalizing trial effects by variance-minimizing target refinement"};
    app.require_subcommand(1);

    GenerateArgs gen;
    auto* g = app.add_subcommand("generate", "draw a synthetic dataset with its oracle sidecar");
    g->add_option("--dgp", gen.dgp, "community | box | highdim")->required();
    g->add_option("--n", gen.n, "rows");
    g->add_option("--seed", gen.seed, "rng seed")->required();
    g->add_option("--out", gen.out, "output CSV path");
    g->add_option("--sidecar", gen.sidecar, "sidecar JSON path (default: <out>.json)");
    g->add_option("--scale", gen.scale, "highdim selection logit scale (default 1/sqrt(p))");
    g->add_flag("--spread-sd", gen.spread_sd, "read Normal(X0,3) as sd instead of variance");
    double unif_sel = -1.0;
    g->add_option("--uniform-selection", unif_sel, "override community selection with a constant");
    g->add_option("--oracle-mc", gen.oracle_mc, "MC draws for the sidecar oracle summary");

    FitArgs fit;
    auto* f = app.add_subcommand("fit", "fit nuisances and the Rashomon set");
    f->add_option("--data", fit.data, "input CSV")->required();
    f->add_option("--out-dir", fit.out_dir, "output directory");
    auto add_fit_params = [](CLI::App* cmd, FitParams& fp, bool seed_required) {
        cmd->add_option("--trees", fp.trees, "trees to sample (M)");
        cmd->add_option("--rashomon", fp.rashomon, "trees to keep (m)");
        cmd->add_option("--eps", fp.eps, "explore probability");
        cmd->add_option("--max-depth", fp.max_depth, "tree depth cap");
        cmd->add_option("--leaf-prob", fp.leaf_prob, "leaf entry of the split distribution");
        cmd->add_option("--ridge", fp.ridge, "logistic ridge penalty");
        cmd->add_option("--clip-lo", fp.clip_lo, "probability clip floor");
        cmd->add_option("--clip-hi", fp.clip_hi, "probability clip ceiling");
        cmd->add_option("--propensity", fp.propensity, "empirical | fitted | known:<c>");
        cmd->add_option("--midpoint", fp.midpoint, "median | midrange");
        cmd->add_option("--char-depth", fp.char_depth, "characteristic tree depth");
        auto* s = cmd->add_option("--seed", fp.seed, "rng seed");
        if (seed_required) s->required();
    };
    add_fit_params(f, fit.fp, true);

    EstimateArgs est;
    auto* e = app.add_subcommand("estimate", "estimate the (W)TATE from data + weights");
    e->add_option("--data", est.data, "input CSV")->required();
    e->add_option("--nuisance", est.nuisance, "nuisance JSON from fit")->required();
    e->add_option("--weights", est.weights, "rashomon / rule / tree JSON");
    e->add_option("--out", est.out, "report JSON path");
    e->add_option("--csv", est.csv, "also write a CSV table");

    BenchmarkArgs bench;
    auto* b = app.add_subcommand("benchmark", "replicated method comparison on a DGP");
    b->add_option("--dgp", bench.dgp, "community | box | highdim")->required();
    b->add_option("--n", bench.n, "rows per replication");
    b->add_option("--reps", bench.reps, "replications");
    b->add_option("--out-dir", bench.out_dir, "output directory");
    b->add_option("--scale", bench.scale, "highdim selection logit scale");
    b->add_option("--lsp", bench.lsp_predefined, "predefined selection-odds threshold");
    b->add_option("--methods", bench.methods, "subset of methods to run");
    add_fit_params(b, bench.fp, true);

    ExplainArgs ex;
    auto* x = app.add_subcommand("explain", "render a characteristic tree");
    x->add_option("--input", ex.input, "rashomon / characteristic / tree JSON")->required();
    x->add_option("--data", ex.data, "dataset CSV (required for rashomon input)");
    x->add_option("--out", ex.out, "characteristic JSON path");
    x->add_option("--text", ex.text, "plain-text rendering path");
    x->add_option("--max-depth", ex.max_depth, "depth cap");

    PrtqArgs pr;
    auto* q = app.add_subcommand("prtq-check", "empirical check of the random-tree containment bound");
    q->add_option("--p", pr.p, "binary features");
    q->add_option("--q", pr.q, "leaves per sampled tree");
    q->add_option("--k", pr.k, "trees per repetition");
    q->add_option("--reps", pr.reps, "repetitions");
    q->add_option("--seed", pr.seed, "rng seed");
    q->add_option("--out", pr.out, "report JSON path");

    std::vector<const char*> argv;
    argv.push_back("rootopt");
    for (const auto& s : args) argv.push_back(s.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& err) {
        int code = app.exit(err);
        return code == 0 ? 0 : 64;
    }

    try {
        if (*g) {
            if (unif_sel >= 0.0) gen.uniform_selection = unif_sel;
            return cmd_generate(gen);
        }
        if (*f) return cmd_fit(fit);
        if (*e) return cmd_estimate(est);
        if (*b) return cmd_benchmark(bench);
        if (*x) return cmd_explain(ex);
        if (*q) return cmd_prtq_check(pr);
    } catch (const Error& err) {
        std::cerr << err.what() << "\n";
        return err.exit_code();
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 1;
    }
    return 0;
}

inline int run(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(std::move(args));
}

}  // namespace rootopt::cli
