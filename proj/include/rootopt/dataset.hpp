#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "rootopt/error.hpp"

namespace rootopt {

// Rows of (covariates X, sample indicator S, treatment T, outcome Y).
// T and Y exist only on trial rows (S=1). Immutable after construction;
// safe for concurrent reads.
class Dataset {
public:
    Dataset() = default;

    Dataset(std::vector<double> x, std::size_t p, std::vector<std::uint8_t> s,
            std::vector<std::int8_t> t, std::vector<double> y,
            std::vector<std::string> feature_names, bool strict = true)
        : x_(std::move(x)),
          s_(std::move(s)),
          t_(std::move(t)),
          y_(std::move(y)),
          feature_names_(std::move(feature_names)),
          p_(p) {
        n_ = s_.size();
        check_structure();
        if (strict) check_strict();
    }

    std::size_t n() const { return n_; }
    std::size_t p() const { return p_; }
    std::size_t n_trial() const { return n1_; }
    std::size_t n_target() const { return n_ - n1_; }
    std::size_t n_treated() const { return n_treated_; }
    std::size_t n_control() const { return n1_ - n_treated_; }

    bool is_trial(std::size_t i) const { return s_[i] != 0; }
    int treatment(std::size_t i) const { return t_[i]; }
    double outcome(std::size_t i) const { return y_[i]; }
    std::span<const double> row(std::size_t i) const { return {x_.data() + i * p_, p_}; }
    double x(std::size_t i, std::size_t j) const { return x_[i * p_ + j]; }
    const std::vector<std::string>& feature_names() const { return feature_names_; }

    std::vector<std::size_t> trial_rows() const {
        std::vector<std::size_t> out;
        out.reserve(n1_);
        for (std::size_t i = 0; i < n_; ++i)
            if (s_[i]) out.push_back(i);
        return out;
    }

    std::vector<std::size_t> target_rows() const {
        std::vector<std::size_t> out;
        out.reserve(n_ - n1_);
        for (std::size_t i = 0; i < n_; ++i)
            if (!s_[i]) out.push_back(i);
        return out;
    }

private:
    void check_structure() {
        if (n_ == 0) fail(ErrorCode::EmptyData, "dataset has no rows");
        if (p_ == 0) fail(ErrorCode::Schema, "dataset has no covariates");
        if (x_.size() != n_ * p_ || t_.size() != n_ || y_.size() != n_ || feature_names_.size() != p_)
            fail(ErrorCode::Schema, "inconsistent field lengths");
        n1_ = 0;
        n_treated_ = 0;
        for (std::size_t i = 0; i < n_; ++i) {
            if (s_[i] != 0 && s_[i] != 1) fail(ErrorCode::Schema, "S must be 0/1");
            if (s_[i]) {
                ++n1_;
                if (t_[i] != 0 && t_[i] != 1)
                    fail(ErrorCode::Schema, "trial row " + std::to_string(i) + " lacks a 0/1 treatment");
                if (!std::isfinite(y_[i]))
                    fail(ErrorCode::Schema, "trial row " + std::to_string(i) + " lacks a finite outcome");
                if (t_[i] == 1) ++n_treated_;
            } else {
                if (t_[i] != -1)
                    fail(ErrorCode::Schema, "target row " + std::to_string(i) + " carries a treatment value");
                if (!std::isnan(y_[i]))
                    fail(ErrorCode::Schema, "target row " + std::to_string(i) + " carries an outcome value");
            }
        }
        for (std::size_t k = 0; k < x_.size(); ++k)
            if (!std::isfinite(x_[k])) fail(ErrorCode::NonFinite, "non-finite covariate entry");
    }

    void check_strict() {
        if (n1_ < 2) fail(ErrorCode::EmptyData, "need at least two trial rows");
        if (n_ == n1_) fail(ErrorCode::EmptyData, "need at least one target row");
        if (n_treated_ == 0) fail(ErrorCode::EmptyArm, "trial has no treated units");
        if (n_treated_ == n1_) fail(ErrorCode::EmptyArm, "trial has no control units");
    }

    std::vector<double> x_;          // row-major n*p
    std::vector<std::uint8_t> s_;    // 1 = trial
    std::vector<std::int8_t> t_;     // 0/1 on trial rows, -1 elsewhere
    std::vector<double> y_;          // NaN on target rows
    std::vector<std::string> feature_names_;
    std::size_t n_ = 0, p_ = 0, n1_ = 0, n_treated_ = 0;
};

namespace detail {

inline std::string format_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view sv, std::size_t line) {
    double v{};
    auto res = std::from_chars(sv.data(), sv.data() + sv.size(), v);
    if (res.ec != std::errc{} || res.ptr != sv.data() + sv.size())
        fail(ErrorCode::Parse, "malformed numeric cell '" + std::string(sv) + "' on line " + std::to_string(line));
    return v;
}

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == ',') {
            out.push_back(line.substr(start, i - start));
            start = i + 1;
        }
    }
    return out;
}

}  // namespace detail

// CSV schema: header `S,T,Y,<feat1>,...,<featp>`; empty cell = absent.
inline Dataset load_csv_string(const std::string& text, bool strict = true) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) fail(ErrorCode::EmptyData, "empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto header = detail::split_csv_line(line);
    if (header.size() < 4 || header[0] != "S" || header[1] != "T" || header[2] != "Y")
        fail(ErrorCode::Schema, "header must be S,T,Y,<features...>");
    std::size_t p = header.size() - 3;
    std::vector<std::string> names(header.begin() + 3, header.end());

    std::vector<double> x;
    std::vector<std::uint8_t> s;
    std::vector<std::int8_t> t;
    std::vector<double> y;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto cells = detail::split_csv_line(line);
        if (cells.size() != p + 3)
            fail(ErrorCode::Parse, "expected " + std::to_string(p + 3) + " cells on line " + std::to_string(lineno));
        double sv = detail::parse_double(cells[0], lineno);
        if (sv != 0.0 && sv != 1.0) fail(ErrorCode::Schema, "S must be 0/1 on line " + std::to_string(lineno));
        bool trial = sv == 1.0;
        s.push_back(trial ? 1 : 0);
        if (trial) {
            if (cells[1].empty() || cells[2].empty())
                fail(ErrorCode::Schema, "trial row missing T or Y on line " + std::to_string(lineno));
            double tv = detail::parse_double(cells[1], lineno);
            if (tv != 0.0 && tv != 1.0) fail(ErrorCode::Schema, "T must be 0/1 on line " + std::to_string(lineno));
            t.push_back(static_cast<std::int8_t>(tv));
            y.push_back(detail::parse_double(cells[2], lineno));
        } else {
            if (!cells[1].empty() || !cells[2].empty())
                fail(ErrorCode::Schema, "target row has T or Y on line " + std::to_string(lineno));
            t.push_back(-1);
            y.push_back(std::numeric_limits<double>::quiet_NaN());
        }
        for (std::size_t j = 0; j < p; ++j) x.push_back(detail::parse_double(cells[3 + j], lineno));
    }
    return Dataset(std::move(x), p, std::move(s), std::move(t), std::move(y), std::move(names), strict);
}

inline Dataset load_csv(const std::string& path, bool strict = true) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::Io, "cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return load_csv_string(buf.str(), strict);
}

inline std::string write_csv_string(const Dataset& d) {
    std::string out = "S,T,Y";
    for (const auto& name : d.feature_names()) {
        out += ',';
        out += name;
    }
    out += '\n';
    for (std::size_t i = 0; i < d.n(); ++i) {
        if (d.is_trial(i)) {
            out += '1';
            out += ',';
            out += d.treatment(i) ? '1' : '0';
            out += ',';
            out += detail::format_double(d.outcome(i));
        } else {
            out += "0,,";
        }
        for (double v : d.row(i)) {
            out += ',';
            out += detail::format_double(v);
        }
        out += '\n';
    }
    return out;
}

inline void write_csv(const Dataset& d, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::Io, "cannot write " + path);
    out << write_csv_string(d);
}

// ---------------------------------------------------------------------------
// diagnostics

struct FeatureSummary {
    std::string name;
    double trial_min, trial_max, trial_mean;
    double target_min, target_max, target_mean;
};

struct DiagnosticsReport {
    std::size_t n = 0, n_trial = 0, n_target = 0, n_treated = 0, n_control = 0;
    double trial_fraction = 0.0;
    std::vector<FeatureSummary> features;
    std::vector<std::string> warnings;
};

// Reporting only; never mutates or rejects.
inline DiagnosticsReport validate(const Dataset& d) {
    DiagnosticsReport r;
    r.n = d.n();
    r.n_trial = d.n_trial();
    r.n_target = d.n_target();
    r.n_treated = d.n_treated();
    r.n_control = d.n_control();
    r.trial_fraction = static_cast<double>(r.n_trial) / static_cast<double>(r.n);
    if (r.n_treated == 0) r.warnings.push_back("treated arm empty");
    if (r.n_trial > 0 && r.n_control == 0) r.warnings.push_back("control arm empty");
    if (r.n_trial < 2) r.warnings.push_back("fewer than two trial rows");
    if (r.n_target == 0) r.warnings.push_back("no target rows");

    constexpr double inf = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < d.p(); ++j) {
        FeatureSummary f{d.feature_names()[j], inf, -inf, 0.0, inf, -inf, 0.0};
        double ts = 0.0, gs = 0.0;
        for (std::size_t i = 0; i < d.n(); ++i) {
            double v = d.x(i, j);
            if (d.is_trial(i)) {
                f.trial_min = std::min(f.trial_min, v);
                f.trial_max = std::max(f.trial_max, v);
                ts += v;
            } else {
                f.target_min = std::min(f.target_min, v);
                f.target_max = std::max(f.target_max, v);
                gs += v;
            }
        }
        f.trial_mean = r.n_trial ? ts / static_cast<double>(r.n_trial) : 0.0;
        f.target_mean = r.n_target ? gs / static_cast<double>(r.n_target) : 0.0;
        r.features.push_back(std::move(f));
    }
    return r;
}

}  // namespace rootopt
