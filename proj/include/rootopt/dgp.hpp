#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "rootopt/dataset.hpp"
#include "rootopt/error.hpp"
#include "rootopt/math.hpp"
#include "rootopt/nuisance.hpp"
#include "rootopt/rng.hpp"

namespace rootopt {

enum class DgpKind { Community, Box, HighDim };

inline const char* dgp_kind_name(DgpKind k) {
    switch (k) {
        case DgpKind::Community: return "community";
        case DgpKind::Box: return "box";
        case DgpKind::HighDim: return "highdim";
    }
    return "?";
}

inline DgpKind dgp_kind_from_name(const std::string& s) {
    if (s == "community") return DgpKind::Community;
    if (s == "box") return DgpKind::Box;
    if (s == "highdim") return DgpKind::HighDim;
    fail(ErrorCode::UnknownDgp, "unknown DGP '" + s + "'" +
                                    (s == "clone" ? " (requires case-study data that is not bundled)" : ""));
}

struct CommunityParams {
    double prob_a = 0.75;
    double x1_spread = 3.0;      // Normal(X0, 3): variance by default
    bool spread_is_sd = false;   // alternate reading: sd = 3
    double sel_inner = 0.5;
    double sel_ring = 0.25;
    double r_inner = 3.0;
    double r_outer = 5.0;
    std::optional<double> uniform_selection;  // overrides the radial rule
};

struct BoxParams {
    std::size_t p = 100;
};

struct HighDimParams {
    std::size_t p = 100;
    double scale = 0.1;  // 1/sqrt(p); scale=1 reproduces the literal text
    std::vector<double> alpha0, beta0, beta1;
};

// A fully materialized generator spec: regenerating with the same spec
// reproduces the identical dataset.
struct DgpSpec {
    DgpKind kind = DgpKind::Community;
    std::size_t n = 5000;
    std::uint64_t seed = 0;
    CommunityParams community;
    BoxParams box;
    HighDimParams highdim;
};

inline DgpSpec make_spec(DgpKind kind, std::size_t n, std::uint64_t seed, double highdim_scale = -1.0) {
    DgpSpec spec;
    spec.kind = kind;
    spec.n = n;
    spec.seed = seed;
    if (kind == DgpKind::HighDim) {
        if (highdim_scale > 0.0) spec.highdim.scale = highdim_scale;
        Rng rng(derive_seed(seed, 0xC0EFULL));
        spec.highdim.alpha0.resize(spec.highdim.p);
        spec.highdim.beta0.resize(spec.highdim.p);
        spec.highdim.beta1.resize(spec.highdim.p);
        for (auto& v : spec.highdim.alpha0) v = rng.normal();
        for (auto& v : spec.highdim.beta0) v = rng.normal();
        for (auto& v : spec.highdim.beta1) v = rng.normal();
    }
    return spec;
}

// Ground-truth pieces of the generator: conditional means and variances,
// selection and propensity, the conditional effect, and a marginal-X sampler.
struct OracleComponents {
    std::size_t p = 0;
    std::function<double(std::span<const double>, int)> mu;
    std::function<double(std::span<const double>, int)> sigma2;
    std::function<double(std::span<const double>)> pi_x;
    std::function<double(std::span<const double>)> e_x;
    std::function<double(std::span<const double>)> tau_x;
    std::function<void(Rng&, std::vector<double>&)> draw_x;
};

namespace detail {

inline double community_pi(const CommunityParams& c, double x0, double x1) {
    if (c.uniform_selection) return *c.uniform_selection;
    double r = std::sqrt(x0 * x0 + x1 * x1);
    if (r < c.r_inner) return c.sel_inner;
    if (r < c.r_outer) return c.sel_ring;
    return 0.0;
}

inline double friedman_mean(std::span<const double> x) {
    return 10.0 * std::sin(3.14159265358979323846 * x[0] * x[1]) + 20.0 * (x[2] - 0.5) * (x[2] - 0.5) +
           10.0 * x[3] + 5.0 * x[4];
}

}  // namespace detail

inline OracleComponents oracle(const DgpSpec& spec) {
    OracleComponents oc;
    switch (spec.kind) {
        case DgpKind::Community: {
            auto c = spec.community;
            double sd1 = c.spread_is_sd ? c.x1_spread : std::sqrt(c.x1_spread);
            oc.p = 2;
            oc.mu = [](std::span<const double> x, int t) {
                return t == 1 ? x[0] * x[0] + x[1] * x[1] : 0.0;
            };
            oc.sigma2 = [](std::span<const double>, int t) { return t == 1 ? 1.0 : 0.0; };
            oc.pi_x = [c](std::span<const double> x) { return detail::community_pi(c, x[0], x[1]); };
            oc.e_x = [](std::span<const double>) { return 0.5; };
            oc.tau_x = [](std::span<const double> x) { return x[0] * x[0] + x[1] * x[1]; };
            oc.draw_x = [c, sd1](Rng& rng, std::vector<double>& x) {
                x.resize(2);
                bool b = rng.bernoulli(1.0 - c.prob_a);
                x[0] = rng.normal() + (b ? 4.0 : 0.0);
                x[1] = x[0] + sd1 * rng.normal();
            };
            break;
        }
        case DgpKind::Box: {
            std::size_t p = spec.box.p;
            oc.p = p;
            oc.mu = [](std::span<const double> x, int t) {
                double m = detail::friedman_mean(x);
                return t == 1 ? m + std::log(m + 1.0) : m;
            };
            oc.sigma2 = [](std::span<const double>, int) { return 1.0; };
            oc.pi_x = [](std::span<const double> x) {
                bool in_box = x[0] > 0.5 && x[0] < 1.0 && x[1] > 0.5 && x[1] < 1.0;
                return expit(0.25 - 2.0 * (in_box ? 1.0 : 0.0));
            };
            oc.e_x = [](std::span<const double>) { return 0.5; };
            oc.tau_x = [](std::span<const double> x) {
                return std::log(detail::friedman_mean(x) + 1.0);
            };
            oc.draw_x = [p](Rng& rng, std::vector<double>& x) {
                x.resize(p);
                for (auto& v : x) v = rng.uniform();
            };
            break;
        }
        case DgpKind::HighDim: {
            auto h = spec.highdim;
            if (h.alpha0.size() != h.p || h.beta0.size() != h.p || h.beta1.size() != h.p)
                fail(ErrorCode::Config, "highdim spec lacks materialized coefficient draws");
            oc.p = h.p;
            auto dot = [](const std::vector<double>& a, std::span<const double> x) {
                double s = 0.0;
                for (std::size_t j = 0; j < a.size(); ++j) s += a[j] * x[j];
                return s;
            };
            oc.mu = [h, dot](std::span<const double> x, int t) {
                double m0 = dot(h.beta0, x);
                return t == 1 ? m0 + dot(h.beta1, x) : m0;
            };
            oc.sigma2 = [](std::span<const double>, int t) { return t == 1 ? 2.0 : 1.0; };
            oc.pi_x = [h, dot](std::span<const double> x) { return expit(h.scale * dot(h.alpha0, x)); };
            oc.e_x = [](std::span<const double>) { return 0.5; };
            oc.tau_x = [h, dot](std::span<const double> x) { return dot(h.beta1, x); };
            oc.draw_x = [p = h.p](Rng& rng, std::vector<double>& x) {
                x.resize(p);
                for (auto& v : x) v = rng.normal();
            };
            break;
        }
    }
    return oc;
}

// Draw the dataset. Per row: covariates, then the trial indicator, then
// (trial rows only) the treatment and outcome noises, in that order.
inline Dataset generate(const DgpSpec& spec) {
    if (spec.n < 10) fail(ErrorCode::Config, "need n >= 10");
    OracleComponents oc = oracle(spec);
    Rng rng(spec.seed);
    std::size_t p = oc.p;

    std::vector<double> xs;
    xs.reserve(spec.n * p);
    std::vector<std::uint8_t> s(spec.n);
    std::vector<std::int8_t> t(spec.n, -1);
    std::vector<double> y(spec.n, std::numeric_limits<double>::quiet_NaN());
    std::vector<double> x;
    for (std::size_t i = 0; i < spec.n; ++i) {
        oc.draw_x(rng, x);
        double pi = oc.pi_x(x);
        bool trial = rng.bernoulli(pi);
        s[i] = trial ? 1 : 0;
        if (trial) {
            bool treated = rng.bernoulli(oc.e_x(x));
            t[i] = treated ? 1 : 0;
            switch (spec.kind) {
                case DgpKind::Community: {
                    double eps = rng.normal();
                    y[i] = treated ? (x[0] * x[0] + x[1] * x[1] + eps) : 0.0;
                    break;
                }
                case DgpKind::Box: {
                    double eps = rng.normal();
                    double y0 = detail::friedman_mean(x) + eps;
                    y[i] = treated ? y0 + std::log(detail::friedman_mean(x) + 1.0) : y0;
                    break;
                }
                case DgpKind::HighDim: {
                    double eps0 = rng.normal();
                    double eps1 = rng.normal();
                    double y0 = oc.mu(x, 0) + eps0;
                    y[i] = treated ? y0 + oc.tau_x(x) + eps1 : y0;
                    break;
                }
            }
        }
        xs.insert(xs.end(), x.begin(), x.end());
    }

    std::vector<std::string> names(p);
    for (std::size_t j = 0; j < p; ++j) names[j] = "x" + std::to_string(j);
    return Dataset(std::move(xs), p, std::move(s), std::move(t), std::move(y), std::move(names));
}

// Evaluation-side view of the true nuisances, clipped like the fitted ones.
inline NuisanceEval oracle_nuisance(const OracleComponents& oc, double pi_marginal,
                                    ClipBounds clip = {}) {
    NuisanceEval m;
    m.selection_score = [oc, clip](std::span<const double> x) {
        return clamp01(oc.pi_x(x), clip.lo, clip.hi);
    };
    m.trial_propensity = [oc, clip](std::span<const double> x) {
        return clamp01(oc.e_x(x), clip.lo, clip.hi);
    };
    m.pi_hat = pi_marginal;
    return m;
}

// ---------------------------------------------------------------------------
// Monte-Carlo oracles. Identification-style integrals run under the
// positivity-clipped selection law (structural zeros make the raw change of
// measure undefined); the variance oracle samples trial covariates under the
// true law and clips only inside the integrand.

struct McResult {
    double value = 0.0;
    double se = 0.0;
    std::size_t n_draws = 0;
    std::size_t n_accepted = 0;
};

// theta0 = E[tau(X) | S=0] via rejection into S=0 with probability 1 - clip(pi(x)).
inline McResult oracle_tate(const OracleComponents& oc, std::size_t n_mc, std::uint64_t seed,
                            ClipBounds clip = {}) {
    Rng rng(seed);
    std::vector<double> x;
    double s = 0.0, ss = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < n_mc; ++i) {
        oc.draw_x(rng, x);
        double pt = clamp01(oc.pi_x(x), clip.lo, clip.hi);
        if (rng.uniform() < pt) continue;  // landed in S=1
        double v = oc.tau_x(x);
        s += v;
        ss += v * v;
        ++count;
    }
    McResult r;
    r.n_draws = n_mc;
    r.n_accepted = count;
    if (count == 0) fail(ErrorCode::EmptyData, "no target draws accepted");
    r.value = s / static_cast<double>(count);
    double var = ss / static_cast<double>(count) - r.value * r.value;
    r.se = std::sqrt(std::max(0.0, var) / static_cast<double>(count));
    return r;
}

// theta1 = pi/(1-pi) * E_{X|S=1}[ tau(X) / ell(X) ] under the clipped law.
inline McResult oracle_theta1(const OracleComponents& oc, std::size_t n_mc, std::uint64_t seed,
                              ClipBounds clip = {}) {
    Rng rng(seed);
    std::vector<double> x;
    double s = 0.0, ss = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < n_mc; ++i) {
        oc.draw_x(rng, x);
        double pt = clamp01(oc.pi_x(x), clip.lo, clip.hi);
        if (rng.uniform() >= pt) continue;  // landed in S=0
        double ell = pt / (1.0 - pt);
        double v = oc.tau_x(x) / ell;
        s += v;
        ss += v * v;
        ++count;
    }
    if (count == 0) fail(ErrorCode::EmptyData, "no trial draws accepted");
    double pi_mc = static_cast<double>(count) / static_cast<double>(n_mc);
    double mean_v = s / static_cast<double>(count);
    double var_v = std::max(0.0, ss / static_cast<double>(count) - mean_v * mean_v);
    double ratio = pi_mc / (1.0 - pi_mc);

    McResult r;
    r.n_draws = n_mc;
    r.n_accepted = count;
    r.value = ratio * mean_v;
    double se_main = ratio * std::sqrt(var_v / static_cast<double>(count));
    double var_pi = pi_mc * (1.0 - pi_mc) / static_cast<double>(n_mc);
    double se_ratio = std::sqrt(var_pi) / ((1.0 - pi_mc) * (1.0 - pi_mc)) * std::abs(mean_v);
    r.se = std::sqrt(se_main * se_main + se_ratio * se_ratio);
    return r;
}

// Per-x integrand pieces of the asymptotic variance:
//   sigma_term = sigma2(x,1)/(l~(x)^2 e(x)) + sigma2(x,0)/(l~(x)^2 (1-e(x)))
//   het_term   = (1-pi)^2 (tau0(x) - tau0)^2 / pi~(x)
// with pi~ clipped and tau0(x) = (1-pi~(x))/(1-pi) * tau(x), the conditional
// mean of the IPW influence term.
struct VarianceIntegrand {
    double sigma_term = 0.0;
    double het_term = 0.0;
};

inline VarianceIntegrand oracle_variance_terms(const OracleComponents& oc, std::span<const double> x,
                                               double tau0, double pi_marginal,
                                               ClipBounds clip = {}) {
    double pt = clamp01(oc.pi_x(x), clip.lo, clip.hi);
    double ell = pt / (1.0 - pt);
    double e = clamp01(oc.e_x(x), clip.lo, clip.hi);
    VarianceIntegrand v;
    v.sigma_term = oc.sigma2(x, 1) / (ell * ell * e) + oc.sigma2(x, 0) / (ell * ell * (1.0 - e));
    double tilt = (1.0 - pt) / (1.0 - pi_marginal) * oc.tau_x(x);
    double dlt = tilt - tau0;
    v.het_term = (1.0 - pi_marginal) * (1.0 - pi_marginal) * dlt * dlt / pt;
    return v;
}

// V^ipw = pi/(1-pi)^2 * E_{X|S=1}[ sigma_term + het_term ].
inline McResult oracle_variance(const OracleComponents& oc, std::size_t n_mc, std::uint64_t seed,
                                double tau0, ClipBounds clip = {}) {
    Rng rng(seed);
    std::vector<double> x;
    // integrand pieces are stored so the marginal pi can be finalized first
    std::vector<double> kept_tau, kept_pi, kept_s1, kept_s0, kept_e;
    double pi_sum = 0.0;
    for (std::size_t i = 0; i < n_mc; ++i) {
        oc.draw_x(rng, x);
        double pt_true = oc.pi_x(x);
        pi_sum += pt_true;
        if (rng.uniform() >= pt_true) continue;  // true-law rejection into S=1
        kept_tau.push_back(oc.tau_x(x));
        kept_pi.push_back(clamp01(pt_true, clip.lo, clip.hi));
        kept_s1.push_back(oc.sigma2(x, 1));
        kept_s0.push_back(oc.sigma2(x, 0));
        kept_e.push_back(clamp01(oc.e_x(x), clip.lo, clip.hi));
    }
    std::size_t count = kept_tau.size();
    if (count == 0) fail(ErrorCode::EmptyData, "no trial draws accepted");
    double pi = pi_sum / static_cast<double>(n_mc);

    double s = 0.0, ss = 0.0;
    for (std::size_t k = 0; k < count; ++k) {
        double ell = kept_pi[k] / (1.0 - kept_pi[k]);
        double sigma_term = kept_s1[k] / (ell * ell * kept_e[k]) +
                            kept_s0[k] / (ell * ell * (1.0 - kept_e[k]));
        double tilt = (1.0 - kept_pi[k]) / (1.0 - pi) * kept_tau[k];
        double het = (1.0 - pi) * (1.0 - pi) * (tilt - tau0) * (tilt - tau0) / kept_pi[k];
        double v = sigma_term + het;
        s += v;
        ss += v * v;
    }
    double pref = pi / ((1.0 - pi) * (1.0 - pi));
    double mean_v = s / static_cast<double>(count);
    double var_v = std::max(0.0, ss / static_cast<double>(count) - mean_v * mean_v);

    McResult r;
    r.n_draws = n_mc;
    r.n_accepted = count;
    r.value = pref * mean_v;
    r.se = pref * std::sqrt(var_v / static_cast<double>(count));
    return r;
}

// ---------------------------------------------------------------------------
// JSON

inline Json spec_to_json(const DgpSpec& spec) {
    Json j;
    j["kind"] = dgp_kind_name(spec.kind);
    j["n"] = spec.n;
    j["seed"] = spec.seed;
    switch (spec.kind) {
        case DgpKind::Community: {
            Json c;
            c["prob_a"] = spec.community.prob_a;
            c["x1_spread"] = spec.community.x1_spread;
            c["spread_is_sd"] = spec.community.spread_is_sd;
            c["sel_inner"] = spec.community.sel_inner;
            c["sel_ring"] = spec.community.sel_ring;
            c["r_inner"] = spec.community.r_inner;
            c["r_outer"] = spec.community.r_outer;
            if (spec.community.uniform_selection) c["uniform_selection"] = *spec.community.uniform_selection;
            j["community"] = c;
            break;
        }
        case DgpKind::Box:
            j["box"] = Json{{"p", spec.box.p}};
            break;
        case DgpKind::HighDim: {
            Json h;
            h["p"] = spec.highdim.p;
            h["scale"] = spec.highdim.scale;
            h["alpha0"] = spec.highdim.alpha0;
            h["beta0"] = spec.highdim.beta0;
            h["beta1"] = spec.highdim.beta1;
            j["highdim"] = h;
            break;
        }
    }
    return j;
}

inline DgpSpec spec_from_json(const Json& j) {
    DgpSpec spec;
    spec.kind = dgp_kind_from_name(j.at("kind").get<std::string>());
    spec.n = j.at("n").get<std::size_t>();
    spec.seed = j.at("seed").get<std::uint64_t>();
    if (spec.kind == DgpKind::Community && j.contains("community")) {
        const auto& c = j.at("community");
        spec.community.prob_a = c.value("prob_a", 0.75);
        spec.community.x1_spread = c.value("x1_spread", 3.0);
        spec.community.spread_is_sd = c.value("spread_is_sd", false);
        spec.community.sel_inner = c.value("sel_inner", 0.5);
        spec.community.sel_ring = c.value("sel_ring", 0.25);
        spec.community.r_inner = c.value("r_inner", 3.0);
        spec.community.r_outer = c.value("r_outer", 5.0);
        if (c.contains("uniform_selection"))
            spec.community.uniform_selection = c.at("uniform_selection").get<double>();
    } else if (spec.kind == DgpKind::Box && j.contains("box")) {
        spec.box.p = j.at("box").value("p", std::size_t{100});
    } else if (spec.kind == DgpKind::HighDim && j.contains("highdim")) {
        const auto& h = j.at("highdim");
        spec.highdim.p = h.value("p", std::size_t{100});
        spec.highdim.scale = h.value("scale", 0.1);
        spec.highdim.alpha0 = h.at("alpha0").get<std::vector<double>>();
        spec.highdim.beta0 = h.at("beta0").get<std::vector<double>>();
        spec.highdim.beta1 = h.at("beta1").get<std::vector<double>>();
    }
    return spec;
}

}  // namespace rootopt
